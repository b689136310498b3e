//! Filters object text format.
//!
//! One JSON object with the seven keys in fixed order. Absent values are
//! `null`, levels are the strings `"low"`, `"medium"`, `"high"`, numbers are
//! JSON numbers and the subcategory is `"Cell Phones"` or
//! `"Cell Phone Accessories"`:
//!
//! ```text
//! {"price_min": null, "price_max": 300.0, "review_count_min": "high", "review_count_max": null, "average_rating_min": null, "average_rating_max": null, "subcategory": "Cell Phones"}
//! ```

use super::{BoundValue, FilterError, StructuredFilters};

fn bound_text(b: Option<BoundValue>) -> String {
    match b {
        None => "null".into(),
        Some(BoundValue::Level(l)) => format!("\"{}\"", l.as_str()),
        Some(BoundValue::Number(v)) => serde_json::to_string(&v).unwrap_or_else(|_| "null".into()),
    }
}

pub fn filters_to_text(f: &StructuredFilters) -> String {
    let sub = match f.subcategory {
        None => "null".to_string(),
        Some(s) => format!("\"{}\"", s.as_str()),
    };
    format!(
        "{{\"price_min\": {}, \"price_max\": {}, \"review_count_min\": {}, \"review_count_max\": {}, \
         \"average_rating_min\": {}, \"average_rating_max\": {}, \"subcategory\": {}}}",
        bound_text(f.price_min),
        bound_text(f.price_max),
        bound_text(f.review_count_min),
        bound_text(f.review_count_max),
        bound_text(f.average_rating_min),
        bound_text(f.average_rating_max),
        sub,
    )
}

/// Parses a filters object. Missing keys read as `null`; unknown keys and
/// values violating the filter invariants are rejected.
pub fn parse_filters_text(text: &str) -> Result<StructuredFilters, FilterError> {
    let f: StructuredFilters = serde_json::from_str(text).map_err(|e| FilterError::ParseError {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    f.validate()?;
    Ok(f)
}
