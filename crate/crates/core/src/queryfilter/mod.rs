//! Structured filters: extraction from queries, threshold resolution and
//! ID preselection over catalog metadata.
//!
//! A query like "cheap iphone se case under $20 with 4+ stars" yields a
//! [`StructuredFilters`] with numeric bounds and qualitative levels. The
//! levels are then resolved against a [`ThresholdTable`] into a purely
//! numeric [`ResolvedFilters`], which [`preselect_ids`] evaluates over the
//! catalog to produce the allowed-ID set for vector search.

mod extract;
mod json;
mod thresholds;

use std::fmt;
use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_filters, QualitativeLexicon, RuleExtractor, DEFAULT_QUALITATIVE_LEXICON};
pub use json::{filters_to_text, parse_filters_text};
pub use thresholds::{resolve_thresholds, Interval, LevelIntervals, ThresholdTable, DEFAULT_THRESHOLDS};

use crate::catalog::{CatalogTable, ProductRecord, Subcategory};
use crate::index::IdSet;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("filters text parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid filters: {0}")]
    Invalid(String),
    #[error("{metric} bounds resolve to min {min} > max {max}")]
    InconsistentBounds { metric: Metric, min: f64, max: f64 },
    #[error("threshold table: {0}")]
    BadThresholds(String),
    #[error("qualitative lexicon line {line}: {reason}")]
    BadLexicon { line: usize, reason: String },
    #[error("external extractor failed: {0}")]
    Extractor(String),
}

/// Qualitative level of a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    Medium,
    High,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Low, Level::Medium, Level::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::Medium => "medium",
            Level::High => "high",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "low" => Some(Level::Low),
            "medium" => Some(Level::Medium),
            "high" => Some(Level::High),
            _ => None,
        }
    }

    fn next_higher(self) -> Option<Self> {
        match self {
            Level::Low => Some(Level::Medium),
            Level::Medium => Some(Level::High),
            Level::High => None,
        }
    }
}

/// A bound as extracted from a query: a number or a level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundValue {
    Number(f64),
    Level(Level),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Price,
    ReviewCount,
    Rating,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Price => "price",
            Metric::ReviewCount => "review_count",
            Metric::Rating => "average_rating",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Min,
    Max,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuredFilters {
    #[serde(default)]
    pub price_min: Option<BoundValue>,
    #[serde(default)]
    pub price_max: Option<BoundValue>,
    #[serde(default)]
    pub review_count_min: Option<BoundValue>,
    #[serde(default)]
    pub review_count_max: Option<BoundValue>,
    #[serde(default)]
    pub average_rating_min: Option<BoundValue>,
    #[serde(default)]
    pub average_rating_max: Option<BoundValue>,
    #[serde(default)]
    pub subcategory: Option<Subcategory>,
}

impl StructuredFilters {
    pub fn get(&self, metric: Metric, side: Side) -> Option<BoundValue> {
        *self.slot(metric, side)
    }

    pub fn get_mut(&mut self, metric: Metric, side: Side) -> &mut Option<BoundValue> {
        match (metric, side) {
            (Metric::Price, Side::Min) => &mut self.price_min,
            (Metric::Price, Side::Max) => &mut self.price_max,
            (Metric::ReviewCount, Side::Min) => &mut self.review_count_min,
            (Metric::ReviewCount, Side::Max) => &mut self.review_count_max,
            (Metric::Rating, Side::Min) => &mut self.average_rating_min,
            (Metric::Rating, Side::Max) => &mut self.average_rating_max,
        }
    }

    fn slot(&self, metric: Metric, side: Side) -> &Option<BoundValue> {
        match (metric, side) {
            (Metric::Price, Side::Min) => &self.price_min,
            (Metric::Price, Side::Max) => &self.price_max,
            (Metric::ReviewCount, Side::Min) => &self.review_count_min,
            (Metric::ReviewCount, Side::Max) => &self.review_count_max,
            (Metric::Rating, Side::Min) => &self.average_rating_min,
            (Metric::Rating, Side::Max) => &self.average_rating_max,
        }
    }

    pub fn has_bounds(&self) -> bool {
        [Metric::Price, Metric::ReviewCount, Metric::Rating]
            .iter()
            .any(|&m| self.get(m, Side::Min).is_some() || self.get(m, Side::Max).is_some())
    }

    /// Numbers are finite and non-negative, ratings lie in `[0, 5]`, and
    /// numeric `min <= max`.
    pub fn validate(&self) -> Result<(), FilterError> {
        for metric in [Metric::Price, Metric::ReviewCount, Metric::Rating] {
            let mut nums = [None, None];
            for (i, side) in [Side::Min, Side::Max].into_iter().enumerate() {
                if let Some(BoundValue::Number(v)) = self.get(metric, side) {
                    if !v.is_finite() || v < 0.0 {
                        return Err(FilterError::Invalid(format!("{metric} bound {v} is negative or non-finite")));
                    }
                    if metric == Metric::Rating && v > 5.0 {
                        return Err(FilterError::Invalid(format!("rating bound {v} outside [0, 5]")));
                    }
                    nums[i] = Some(v);
                }
            }
            if let [Some(lo), Some(hi)] = nums {
                if lo > hi {
                    return Err(FilterError::Invalid(format!("{metric} min {lo} > max {hi}")));
                }
            }
        }
        Ok(())
    }
}

/// One numeric endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub value: f64,
    pub inclusive: bool,
}

impl Bound {
    pub fn inclusive(value: f64) -> Self {
        Self { value, inclusive: true }
    }

    pub fn exclusive(value: f64) -> Self {
        Self { value, inclusive: false }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NumericRange {
    pub min: Option<Bound>,
    pub max: Option<Bound>,
}

impl NumericRange {
    pub fn is_unbounded(&self) -> bool {
        self.min.is_none() && self.max.is_none()
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = self.min.is_none_or(|b| if b.inclusive { x >= b.value } else { x > b.value });
        let below = self.max.is_none_or(|b| if b.inclusive { x <= b.value } else { x < b.value });
        above && below
    }
}

/// Numeric-only filters, ready to evaluate against metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResolvedFilters {
    pub price: NumericRange,
    pub review_count: NumericRange,
    pub average_rating: NumericRange,
    pub subcategory: Option<Subcategory>,
}

impl ResolvedFilters {
    pub fn range(&self, metric: Metric) -> &NumericRange {
        match metric {
            Metric::Price => &self.price,
            Metric::ReviewCount => &self.review_count,
            Metric::Rating => &self.average_rating,
        }
    }

    pub fn range_mut(&mut self, metric: Metric) -> &mut NumericRange {
        match metric {
            Metric::Price => &mut self.price,
            Metric::ReviewCount => &mut self.review_count,
            Metric::Rating => &mut self.average_rating,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.price.is_unbounded()
            && self.review_count.is_unbounded()
            && self.average_rating.is_unbounded()
            && self.subcategory.is_none()
    }

    /// Whether a product satisfies every present constraint. A product
    /// without a price fails any price constraint.
    pub fn accepts(&self, r: &ProductRecord) -> bool {
        let price_ok = if self.price.is_unbounded() {
            true
        } else {
            r.price.is_some_and(|p| self.price.contains(p))
        };
        price_ok
            && self.review_count.contains(r.review_count as f64)
            && self.average_rating.contains(r.average_rating)
            && self.subcategory.is_none_or(|s| s == r.subcategory)
    }
}

/// IDs of every catalog row that satisfies `filters`.
pub fn preselect_ids(filters: &ResolvedFilters, catalog: &CatalogTable) -> IdSet {
    catalog
        .iter()
        .filter(|(_, r)| filters.accepts(r))
        .map(|(id, _)| id)
        .collect()
}

/// Anything that can turn a query into structured filters.
pub trait FilterExtractor: Send + Sync {
    fn extract(&self, query: &str) -> Result<StructuredFilters, FilterError>;
}

impl FilterExtractor for RuleExtractor {
    fn extract(&self, query: &str) -> Result<StructuredFilters, FilterError> {
        Ok(self.extract_filters(query))
    }
}

/// Delegates extraction to an external program.
///
/// The command is run through `sh -c`, receives the query as one line on
/// stdin and must print a filters object (see [`parse_filters_text`]) on
/// stdout.
#[derive(Debug, Clone)]
pub struct CommandExtractor {
    command: String,
}

impl CommandExtractor {
    pub fn new(command: impl Into<String>) -> Self {
        Self { command: command.into() }
    }
}

impl FilterExtractor for CommandExtractor {
    fn extract(&self, query: &str) -> Result<StructuredFilters, FilterError> {
        let fail = |e: &dyn fmt::Display| FilterError::Extractor(format!("{}: {e}", self.command));
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| fail(&e))?;
        {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            writeln!(stdin, "{}", query.replace('\n', " ")).map_err(|e| fail(&e))?;
        }
        let out = child.wait_with_output().map_err(|e| fail(&e))?;
        if !out.status.success() {
            return Err(fail(&format!("exited with {}", out.status)));
        }
        let text = String::from_utf8(out.stdout).map_err(|e| fail(&e))?;
        parse_filters_text(text.trim())
    }
}
