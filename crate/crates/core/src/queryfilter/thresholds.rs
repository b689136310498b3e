use serde::Deserialize;

use super::{Bound, BoundValue, FilterError, Level, Metric, NumericRange, ResolvedFilters, Side, StructuredFilters};
use crate::catalog::Subcategory;

pub const DEFAULT_THRESHOLDS: &str = include_str!("../../data/thresholds.toml");

/// `[min, max]` (or `[min, max)`), with `max = None` meaning unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub min: f64,
    #[serde(default)]
    pub max: Option<f64>,
    #[serde(default = "yes")]
    pub max_inclusive: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelIntervals {
    pub low: Interval,
    pub medium: Interval,
    pub high: Interval,
}

impl LevelIntervals {
    pub fn get(&self, level: Level) -> &Interval {
        match level {
            Level::Low => &self.low,
            Level::Medium => &self.medium,
            Level::High => &self.high,
        }
    }

    fn validate(&self, name: &str) -> Result<(), FilterError> {
        let bad = |m: String| Err(FilterError::BadThresholds(format!("{name}: {m}")));
        for level in Level::ALL {
            let i = self.get(level);
            if !i.min.is_finite() || i.min < 0.0 || i.max.is_some_and(|m| !m.is_finite() || m < i.min) {
                return bad(format!("{} interval is malformed", level.as_str()));
            }
        }
        let upper = |i: &Interval| i.max.unwrap_or(f64::INFINITY);
        for pair in Level::ALL.windows(2) {
            let (a, b) = (self.get(pair[0]), self.get(pair[1]));
            if a.min > b.min || upper(a) > upper(b) {
                return bad(format!(
                    "{} and {} endpoints decrease",
                    pair[0].as_str(),
                    pair[1].as_str()
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceThresholds {
    pub cell_phones: LevelIntervals,
    pub cell_phone_accessories: LevelIntervals,
}

/// Numeric meaning of low/medium/high per metric (and per subcategory for
/// price). Deployment-specific; loaded from TOML.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdTable {
    pub rating: LevelIntervals,
    pub review_count: LevelIntervals,
    pub price: PriceThresholds,
}

impl ThresholdTable {
    pub fn from_toml(text: &str) -> Result<Self, FilterError> {
        let t: ThresholdTable =
            toml::from_str(text).map_err(|e| FilterError::BadThresholds(e.to_string()))?;
        t.rating.validate("rating")?;
        t.review_count.validate("review_count")?;
        t.price.cell_phones.validate("price.cell_phones")?;
        t.price.cell_phone_accessories.validate("price.cell_phone_accessories")?;
        Ok(t)
    }

    pub fn levels(&self, metric: Metric, sub: Subcategory) -> &LevelIntervals {
        match (metric, sub) {
            (Metric::Rating, _) => &self.rating,
            (Metric::ReviewCount, _) => &self.review_count,
            (Metric::Price, Subcategory::CellPhones) => &self.price.cell_phones,
            (Metric::Price, Subcategory::CellPhoneAccessories) => &self.price.cell_phone_accessories,
        }
    }

    /// Numeric bound for a qualitative level on one side of a range.
    ///
    /// A minimum takes the level's lower endpoint. A maximum takes its upper
    /// endpoint; when that is unbounded it falls back to the next level's
    /// lower endpoint as an exclusive bound, and to no bound at all for the
    /// top level.
    pub fn level_bound(&self, metric: Metric, sub: Subcategory, side: Side, level: Level) -> Option<Bound> {
        let levels = self.levels(metric, sub);
        let interval = levels.get(level);
        match side {
            Side::Min => Some(Bound::inclusive(interval.min)),
            Side::Max => match interval.max {
                Some(max) => Some(Bound {
                    value: max,
                    inclusive: interval.max_inclusive,
                }),
                None => level
                    .next_higher()
                    .map(|next| levels.get(next).min)
                    .filter(|&next_min| next_min > interval.min)
                    .map(Bound::exclusive),
            },
        }
    }
}

impl Default for ThresholdTable {
    fn default() -> Self {
        Self::from_toml(DEFAULT_THRESHOLDS).expect("bundled threshold table is valid")
    }
}

/// Replaces every qualitative level with its numeric bound.
///
/// `sub` picks the price table. Fails with `InconsistentBounds` when a
/// resolved minimum exceeds the resolved maximum.
pub fn resolve_thresholds(
    f: &StructuredFilters,
    table: &ThresholdTable,
    sub: Subcategory,
) -> Result<ResolvedFilters, FilterError> {
    let mut out = ResolvedFilters {
        subcategory: f.subcategory,
        ..ResolvedFilters::default()
    };
    for metric in [Metric::Price, Metric::ReviewCount, Metric::Rating] {
        let resolve = |side| match f.get(metric, side) {
            None => None,
            Some(BoundValue::Number(v)) => Some(Bound::inclusive(v)),
            Some(BoundValue::Level(l)) => table.level_bound(metric, sub, side, l),
        };
        let range = NumericRange {
            min: resolve(Side::Min),
            max: resolve(Side::Max),
        };
        if let (Some(lo), Some(hi)) = (range.min, range.max) {
            if lo.value > hi.value {
                return Err(FilterError::InconsistentBounds {
                    metric,
                    min: lo.value,
                    max: hi.value,
                });
            }
        }
        *out.range_mut(metric) = range;
    }
    Ok(out)
}
