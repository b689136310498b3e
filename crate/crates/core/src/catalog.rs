//! Product catalog: loading, text cleaning and subcategory assignment.
//!
//! The position of a record in a [`CatalogTable`] is its integer ID. That ID
//! is what the vector index stores, so metadata rows and vectors stay aligned
//! without any extra mapping table.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Accessory terms shipped with the crate, one term per line.
pub const DEFAULT_ACCESSORY_TERMS: &str = include_str!("../data/accessory_terms.txt");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("duplicate asin {0:?}")]
    DuplicateAsin(String),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("average_rating {value} out of range [0, 5] at line {line}")]
    OutOfRangeRating { line: usize, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subcategory {
    #[serde(rename = "Cell Phones")]
    CellPhones,
    #[serde(rename = "Cell Phone Accessories")]
    CellPhoneAccessories,
}

impl Subcategory {
    pub fn as_str(self) -> &'static str {
        match self {
            Subcategory::CellPhones => "Cell Phones",
            Subcategory::CellPhoneAccessories => "Cell Phone Accessories",
        }
    }
}

impl fmt::Display for Subcategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductRecord {
    pub asin: String,
    pub title: String,
    pub description: String,
    pub features: String,
    pub tech_specs: String,
    pub price: Option<f64>,
    pub average_rating: f64,
    pub review_count: u64,
    pub subcategory: Subcategory,
}

/// Immutable, ID-addressed product table.
#[derive(Debug, Clone, Default)]
pub struct CatalogTable {
    records: Vec<ProductRecord>,
    by_asin: HashMap<String, u64>,
}

impl CatalogTable {
    /// Builds a table from records in ID order, rejecting duplicate asins.
    pub fn from_records(records: Vec<ProductRecord>) -> Result<Self, CatalogError> {
        let mut by_asin = HashMap::with_capacity(records.len());
        for (id, rec) in records.iter().enumerate() {
            if by_asin.insert(rec.asin.clone(), id as u64).is_some() {
                return Err(CatalogError::DuplicateAsin(rec.asin.clone()));
            }
        }
        Ok(Self { records, by_asin })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&ProductRecord> {
        self.records.get(usize::try_from(id).ok()?)
    }

    pub fn id_of(&self, asin: &str) -> Option<u64> {
        self.by_asin.get(asin).copied()
    }

    pub fn records(&self) -> &[ProductRecord] {
        &self.records
    }

    /// `(id, record)` pairs in ID order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &ProductRecord)> {
        self.records.iter().enumerate().map(|(i, r)| (i as u64, r))
    }

    /// Writes the table as newline-delimited JSON, one record per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for rec in &self.records {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Whole-word accessory vocabulary used to tell accessories from phones.
#[derive(Debug, Clone)]
pub struct AccessoryLexicon {
    terms: Vec<Vec<String>>,
}

impl AccessoryLexicon {
    /// Parses one term per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        let terms = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| words(&l.to_ascii_lowercase()).map(str::to_string).collect::<Vec<_>>())
            .filter(|t: &Vec<String>| !t.is_empty())
            .collect();
        Self { terms }
    }

    pub fn terms(&self) -> impl Iterator<Item = String> + '_ {
        self.terms.iter().map(|t| t.join(" "))
    }

    /// True when any term occurs as a whole word (or word sequence) in `text`.
    pub fn matches(&self, text: &str) -> bool {
        let lowered = text.to_ascii_lowercase();
        let toks: Vec<&str> = words(&lowered).collect();
        self.terms.iter().any(|term| {
            toks.windows(term.len())
                .any(|w| w.iter().zip(term).all(|(a, b)| *a == b.as_str()))
        })
    }
}

impl Default for AccessoryLexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_ACCESSORY_TERMS)
    }
}

fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
}

/// Normalizes product or query text.
///
/// Markup tags are removed (inner text kept), anything outside printable
/// ASCII is dropped, the text is lowercased, URL tokens are removed and
/// whitespace is collapsed. The result is a fixed point: cleaning it again
/// returns it unchanged.
pub fn clean_text(raw: &str) -> String {
    let mut stripped = String::with_capacity(raw.len());
    let mut rest = raw;
    while let Some(pos) = rest.find(['<', '>']) {
        stripped.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        let opens_tag = tail.starts_with('<')
            && tail[1..].starts_with(|c: char| c.is_ascii_alphabetic() || c == '/' || c == '!');
        if opens_tag {
            // A tag runs to the next '>' unless another '<' opens first.
            match tail[1..].find(['<', '>']) {
                Some(end) if tail.as_bytes()[end + 1] == b'>' => {
                    stripped.push(' ');
                    rest = &tail[end + 2..];
                }
                _ => rest = &tail[1..],
            }
        } else {
            rest = &tail[1..];
        }
    }
    stripped.push_str(rest);

    let ascii: String = stripped
        .chars()
        .filter_map(|c| {
            if c.is_whitespace() {
                Some(' ')
            } else if c.is_ascii_graphic() {
                Some(c.to_ascii_lowercase())
            } else {
                None
            }
        })
        .collect();

    ascii
        .split(' ')
        .filter(|t| !t.is_empty() && !is_url_token(t))
        .collect::<Vec<_>>()
        .join(" ")
}

fn is_url_token(token: &str) -> bool {
    token.starts_with("www.") || token.contains("http://") || token.contains("https://")
}

/// Title, description, features and tech specs, each cleaned, joined by spaces.
pub fn merge_product_text(record: &ProductRecord) -> String {
    [
        &record.title,
        &record.description,
        &record.features,
        &record.tech_specs,
    ]
    .into_iter()
    .map(|f| clean_text(f))
    .filter(|f| !f.is_empty())
    .collect::<Vec<_>>()
    .join(" ")
}

pub fn classify_subcategory(text: &str, lexicon: &AccessoryLexicon) -> Subcategory {
    if lexicon.matches(text) {
        Subcategory::CellPhoneAccessories
    } else {
        Subcategory::CellPhones
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    asin: String,
    #[serde(default)]
    title: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    features: String,
    #[serde(default)]
    tech_specs: String,
    #[serde(default)]
    price: Option<f64>,
    average_rating: f64,
    review_count: u64,
    #[serde(default)]
    subcategory: Option<Subcategory>,
}

/// Reads newline-delimited JSON records; row order becomes ID order.
///
/// Text fields are cleaned on load. A record without a subcategory is
/// classified from its cleaned title.
pub fn load_catalog<R: BufRead>(
    source: R,
    lexicon: &AccessoryLexicon,
) -> Result<CatalogTable, CatalogError> {
    let mut records = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| CatalogError::MalformedRecord {
                line: lineno,
                reason: e.to_string(),
            })?;
        if raw.asin.trim().is_empty() {
            return Err(CatalogError::MalformedRecord {
                line: lineno,
                reason: "empty asin".into(),
            });
        }
        if !(0.0..=5.0).contains(&raw.average_rating) {
            return Err(CatalogError::OutOfRangeRating {
                line: lineno,
                value: raw.average_rating,
            });
        }
        if let Some(p) = raw.price {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(CatalogError::MalformedRecord {
                    line: lineno,
                    reason: format!("negative or non-finite price {p}"),
                });
            }
        }
        let title = clean_text(&raw.title);
        let subcategory = raw
            .subcategory
            .unwrap_or_else(|| classify_subcategory(&title, lexicon));
        records.push(ProductRecord {
            asin: raw.asin,
            title,
            description: clean_text(&raw.description),
            features: clean_text(&raw.features),
            tech_specs: clean_text(&raw.tech_specs),
            price: raw.price,
            average_rating: raw.average_rating,
            review_count: raw.review_count,
            subcategory,
        });
    }
    CatalogTable::from_records(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(asin: &str) -> ProductRecord {
        ProductRecord {
            asin: asin.into(),
            title: String::new(),
            description: String::new(),
            features: String::new(),
            tech_specs: String::new(),
            price: None,
            average_rating: 4.0,
            review_count: 0,
            subcategory: Subcategory::CellPhones,
        }
    }

    #[test]
    fn clean_text_examples() {
        assert_eq!(
            clean_text("Great CASE! Visit http://x.co now"),
            "great case! visit now"
        );
        assert_eq!(clean_text(""), "");
        assert_eq!(clean_text("<b>Fast</b>   charger\u{2122}"), "fast charger");
        assert_eq!(clean_text("see www.example.com or HTTPS://a.b/c"), "see or");
        assert_eq!(clean_text("size < 5 inch > 4"), "size 5 inch 4");
        assert_eq!(clean_text("  tab\tand\nnewline  "), "tab and newline");
    }

    #[test]
    fn merge_orders_fields() {
        let mut r = rec("a");
        r.title = "iphone case".into();
        assert_eq!(merge_product_text(&r), "iphone case");
        r.title = "A".into();
        r.description = "B".into();
        r.features = "C".into();
        r.tech_specs = "D".into();
        assert_eq!(merge_product_text(&r), "a b c d");
        let mut r = rec("b");
        r.title = "<i>Anker</i>".into();
        r.description = "4-Port USB".into();
        assert_eq!(merge_product_text(&r), "anker 4-port usb");
    }

    #[test]
    fn classify_examples() {
        let lex = AccessoryLexicon::default();
        assert_eq!(
            classify_subcategory("usb wall charger", &lex),
            Subcategory::CellPhoneAccessories
        );
        assert_eq!(
            classify_subcategory("tempered glass screen protector", &lex),
            Subcategory::CellPhoneAccessories
        );
        assert_eq!(
            classify_subcategory("samsung galaxy a01 verizon", &lex),
            Subcategory::CellPhones
        );
        // whole words only
        assert_eq!(
            classify_subcategory("showcase phone", &lex),
            Subcategory::CellPhones
        );
        assert_eq!(
            classify_subcategory("screen size 6 inch", &lex),
            Subcategory::CellPhones
        );
    }

    #[test]
    fn load_assigns_ids_in_order() {
        let src = r#"{"asin":"A1","title":"Phone","price":10.0,"average_rating":4.1,"review_count":3}
{"asin":"A2","title":"USB Cable","average_rating":3.0,"review_count":0}

{"asin":"A3","title":"x","price":null,"average_rating":5,"review_count":9,"subcategory":"Cell Phone Accessories"}
"#;
        let cat = load_catalog(src.as_bytes(), &AccessoryLexicon::default()).unwrap();
        assert_eq!(cat.len(), 3);
        for (id, r) in cat.iter() {
            assert_eq!(cat.id_of(&r.asin), Some(id));
        }
        assert_eq!(cat.get(0).unwrap().asin, "A1");
        assert_eq!(cat.get(0).unwrap().title, "phone");
        assert_eq!(cat.get(1).unwrap().price, None);
        assert_eq!(
            cat.get(1).unwrap().subcategory,
            Subcategory::CellPhoneAccessories
        );
        assert_eq!(
            cat.get(2).unwrap().subcategory,
            Subcategory::CellPhoneAccessories
        );
        assert!(cat.get(3).is_none());
    }

    #[test]
    fn load_rejects_bad_rows() {
        let lex = AccessoryLexicon::default();
        let dup = "{\"asin\":\"B0X\",\"average_rating\":1,\"review_count\":1}\n\
                   {\"asin\":\"B0X\",\"average_rating\":1,\"review_count\":1}\n";
        assert!(matches!(
            load_catalog(dup.as_bytes(), &lex),
            Err(CatalogError::DuplicateAsin(a)) if a == "B0X"
        ));
        let rating = "{\"asin\":\"C\",\"average_rating\":7.2,\"review_count\":1}\n";
        assert!(matches!(
            load_catalog(rating.as_bytes(), &lex),
            Err(CatalogError::OutOfRangeRating { line: 1, .. })
        ));
        let bad = "{\"asin\":\"C\",\"average_rating\":1,\"review_count\":1}\n{oops\n";
        assert!(matches!(
            load_catalog(bad.as_bytes(), &lex),
            Err(CatalogError::MalformedRecord { line: 2, .. })
        ));
        let neg = "{\"asin\":\"C\",\"price\":-1,\"average_rating\":1,\"review_count\":1}\n";
        assert!(matches!(
            load_catalog(neg.as_bytes(), &lex),
            Err(CatalogError::MalformedRecord { line: 1, .. })
        ));
        let unknown = "{\"asin\":\"C\",\"color\":\"red\",\"average_rating\":1,\"review_count\":1}\n";
        assert!(load_catalog(unknown.as_bytes(), &lex).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let src = "{\"asin\":\"A1\",\"title\":\"Phone\",\"price\":10.5,\"average_rating\":4.1,\"review_count\":3}\n";
        let lex = AccessoryLexicon::default();
        let cat = load_catalog(src.as_bytes(), &lex).unwrap();
        let mut buf = Vec::new();
        cat.write_jsonl(&mut buf).unwrap();
        let again = load_catalog(buf.as_slice(), &lex).unwrap();
        assert_eq!(again.records(), cat.records());
    }

    proptest! {
        #[test]
        fn clean_text_is_idempotent(s in "\\PC{0,80}") {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once.clone());
            prop_assert!(once.chars().all(|c| (c as u32) < 128));
            for bad in ["http://", "https://", "<", ">"] {
                prop_assert!(!once.contains(bad));
            }
            prop_assert_eq!(once.trim(), once.as_str());
        }

        #[test]
        fn clean_text_idempotent_on_markup(
            parts in proptest::collection::vec(
                prop_oneof![
                    Just("<b>".to_string()), Just("</i>".to_string()), Just("<".to_string()),
                    Just(">".to_string()), Just("http://x.y".to_string()), Just("www.a.b".to_string()),
                    Just(" ".to_string()), Just("\u{e9}".to_string()), "[a-zA-Z0-9!.]{1,6}",
                ],
                0..20,
            )
        ) {
            let s = parts.concat();
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once);
        }
    }
}
