//! Rule-based filter extraction.
//!
//! Two passes over the cleaned query. The numeric pass finds number spans
//! and attaches them to a metric and a side using nearby cue words
//! ("under $300", "between $10 and $14", "4+ stars", "250+ reviews",
//! "rated 4.2+"). The qualitative pass maps lexicon phrases ("cheap",
//! "plenty of reviews", "highly rated") to low/medium/high levels. A field
//! keeps the first value assigned to it, so an explicit number always beats
//! a qualitative cue for the same field.

use super::{BoundValue, FilterError, Level, Metric, Side, StructuredFilters};
use crate::catalog::{classify_subcategory, clean_text, AccessoryLexicon};

pub const DEFAULT_QUALITATIVE_LEXICON: &str = include_str!("../../data/qualitative_lexicon.tsv");

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num { value: f64, currency: bool, plus: bool },
    Punct(char),
}

fn lex(text: &str) -> Vec<Tok> {
    let b = text.as_bytes();
    let n = b.len();
    let mut out = Vec::new();
    let mut i = 0;
    let word_char = |c: u8| c.is_ascii_alphanumeric();
    // Internal joiners keep "at&t", "i'm" and "4-port" as single words.
    let joiner = |j: usize| j + 1 < n && matches!(b[j], b'-' | b'&' | b'\'') && word_char(b[j + 1]);

    while i < n {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == b'$' && i + 1 < n && b[i + 1].is_ascii_digit()) {
            let currency = c == b'$';
            let start = if currency { i + 1 } else { i };
            let mut j = start;
            let mut digits = String::new();
            while j < n {
                if b[j].is_ascii_digit() {
                    digits.push(b[j] as char);
                    j += 1;
                } else if b[j] == b','
                    && j + 4 <= n
                    && b[j + 1..j + 4].iter().all(u8::is_ascii_digit)
                    && (j + 4 == n || !b[j + 4].is_ascii_digit())
                {
                    j += 1;
                } else {
                    break;
                }
            }
            if j + 1 < n && b[j] == b'.' && b[j + 1].is_ascii_digit() {
                digits.push('.');
                j += 1;
                while j < n && b[j].is_ascii_digit() {
                    digits.push(b[j] as char);
                    j += 1;
                }
            }
            if j < n && (word_char(b[j]) || joiner(j)) {
                // "4g", "256gb", "6-inch": part of a word, not a quantity.
                while j < n && (word_char(b[j]) || joiner(j)) {
                    j += 1;
                }
                let word = &text[i..j];
                // "4-star" and "4.5-stars" do carry a rating.
                if let Some((num, suffix)) = word.split_once('-') {
                    if matches!(suffix, "star" | "stars") && !currency {
                        if let Ok(value) = num.parse::<f64>() {
                            out.push(Tok::Num { value, currency: false, plus: false });
                            out.push(Tok::Word("stars".into()));
                            i = j;
                            continue;
                        }
                    }
                }
                out.push(Tok::Word(word.to_string()));
                i = j;
                continue;
            }
            let plus = j < n && b[j] == b'+';
            if plus {
                j += 1;
            }
            match digits.parse::<f64>() {
                Ok(value) => out.push(Tok::Num { value, currency, plus }),
                Err(_) => out.push(Tok::Word(text[i..j].to_string())),
            }
            i = j;
        } else if word_char(c) {
            let mut j = i;
            while j < n && (word_char(b[j]) || joiner(j)) {
                j += 1;
            }
            out.push(Tok::Word(text[i..j].to_string()));
            i = j;
        } else {
            out.push(Tok::Punct(c as char));
            i += 1;
        }
    }
    out
}

const MAX_CUES: &[&[&str]] = &[
    &["no", "more", "than"],
    &["not", "more", "than"],
    &["less", "than"],
    &["lower", "than"],
    &["cheaper", "than"],
    &["fewer", "than"],
    &["at", "most"],
    &["up", "to"],
    &["budget", "of"],
    &["under"],
    &["below"],
    &["max"],
    &["maximum"],
    &["budget"],
];

const MIN_CUES: &[&[&str]] = &[
    &["no", "less", "than"],
    &["more", "than"],
    &["greater", "than"],
    &["higher", "than"],
    &["at", "least"],
    &["over"],
    &["above"],
    &["min"],
    &["minimum"],
];

const POSTFIX_MAX: &[&str] = &["less", "lower", "under", "below", "cheaper", "fewer"];
const POSTFIX_MIN: &[&str] = &["more", "up", "higher", "above", "better", "over", "greater"];

/// Words allowed between a comparator and its number ("maximum price: $300").
const FILLERS: &[&str] = &["price", "priced", "cost", "costing", "rating", "of", "a", "an", "the", "just", "only"];

fn unit_word(w: &str) -> Option<Metric> {
    match w {
        "star" | "stars" => Some(Metric::Rating),
        "review" | "reviews" | "ratings" => Some(Metric::ReviewCount),
        "dollar" | "dollars" | "usd" | "bucks" => Some(Metric::Price),
        _ => None,
    }
}

fn filler_unit(w: &str) -> Option<Metric> {
    match w {
        "rating" => Some(Metric::Rating),
        "price" | "priced" | "cost" | "costing" => Some(Metric::Price),
        _ => None,
    }
}

fn context_unit(w: &str) -> Option<Metric> {
    match w {
        "rated" | "rating" | "stars" => Some(Metric::Rating),
        "reviews" | "reviewed" => Some(Metric::ReviewCount),
        "price" | "priced" | "cost" | "costs" | "costing" => Some(Metric::Price),
        _ => None,
    }
}

struct Parser<'a> {
    toks: &'a [Tok],
    filters: StructuredFilters,
}

impl<'a> Parser<'a> {
    fn word(&self, i: usize) -> Option<&'a str> {
        match self.toks.get(i) {
            Some(Tok::Word(w)) => Some(w.as_str()),
            _ => None,
        }
    }

    fn num(&self, i: usize) -> Option<(f64, bool, bool)> {
        match self.toks.get(i) {
            Some(Tok::Num { value, currency, plus }) => Some((*value, *currency, *plus)),
            _ => None,
        }
    }

    fn phrase_at(&self, i: usize, phrase: &[&str]) -> bool {
        phrase.iter().enumerate().all(|(k, w)| self.word(i + k) == Some(*w))
    }

    /// Unit named right after a number at `j`; returns the metric and the
    /// index just past the unit.
    fn unit_after(&self, j: usize) -> (Option<Metric>, usize) {
        let mut k = j + 1;
        if matches!(self.word(k), Some("customer" | "user" | "verified")) {
            k += 1;
        }
        match self.word(k).and_then(unit_word) {
            Some(m) => (Some(m), k + 1),
            None => (None, j + 1),
        }
    }

    fn unit_before(&self, i: usize) -> Option<Metric> {
        (i.saturating_sub(2)..i).rev().find_map(|k| self.word(k).and_then(context_unit))
    }

    fn set(&mut self, metric: Metric, side: Side, value: f64) {
        if metric == Metric::Rating && !(0.0..=5.0).contains(&value) {
            return;
        }
        let slot = self.filters.get_mut(metric, side);
        if slot.is_none() {
            *slot = Some(BoundValue::Number(value));
        }
    }

    fn set_range(&mut self, metric: Metric, a: f64, b: f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if metric == Metric::Rating && hi > 5.0 {
            return;
        }
        self.set(metric, Side::Min, lo);
        self.set(metric, Side::Max, hi);
    }

    /// `between X and Y`, `from X to Y`, `$X - $Y`. Returns tokens consumed.
    fn try_range(&mut self, i: usize) -> Option<usize> {
        let (lead, first) = if self.phrase_at(i, &["between"]) || self.phrase_at(i, &["from"]) {
            (1, i + 1)
        } else {
            (0, i)
        };
        let (a, cur_a, _) = self.num(first)?;
        let sep_ok = match self.toks.get(first + 1) {
            Some(Tok::Word(w)) => w == "to" || (w == "and" && self.word(i) == Some("between")),
            Some(Tok::Punct('-')) => true,
            _ => false,
        };
        if !sep_ok {
            return None;
        }
        let (b, cur_b, _) = self.num(first + 2)?;
        if lead == 0 && !cur_a {
            return None;
        }
        let (unit, end) = self.unit_after(first + 2);
        let metric = if cur_a || cur_b {
            Metric::Price
        } else {
            unit.or_else(|| self.unit_before(i)).unwrap_or(Metric::Price)
        };
        self.set_range(metric, a, b);
        Some(end - i)
    }

    /// Comparator cue, optional fillers, then a number.
    fn try_comparator(&mut self, i: usize) -> Option<usize> {
        let (side, cue_len) = MAX_CUES
            .iter()
            .find(|c| self.phrase_at(i, c))
            .map(|c| (Side::Max, c.len()))
            .or_else(|| MIN_CUES.iter().find(|c| self.phrase_at(i, c)).map(|c| (Side::Min, c.len())))?;
        let mut j = i + cue_len;
        let mut filler_metric = None;
        for _ in 0..3 {
            match self.toks.get(j) {
                Some(Tok::Word(w)) if FILLERS.contains(&w.as_str()) => {
                    filler_metric = filler_metric.or(filler_unit(w));
                    j += 1;
                }
                Some(Tok::Punct(':')) => j += 1,
                _ => break,
            }
        }
        let (value, currency, _) = self.num(j)?;
        let (unit, end) = self.unit_after(j);
        let metric = if currency {
            Metric::Price
        } else {
            unit.or(filler_metric)
                .or_else(|| self.unit_before(i))
                .unwrap_or(Metric::Price)
        };
        self.set(metric, side, value);
        Some(end - i)
    }

    /// `rated N`, `rated N+`.
    fn try_rated(&mut self, i: usize) -> Option<usize> {
        if self.word(i) != Some("rated") {
            return None;
        }
        let (value, currency, _) = self.num(i + 1)?;
        if currency {
            return None;
        }
        let (unit, end) = self.unit_after(i + 1);
        if unit.is_some_and(|u| u != Metric::Rating) {
            return None;
        }
        self.set(Metric::Rating, Side::Min, value);
        Some(end - i)
    }

    /// A bare number with a `+`, a unit, or a trailing "or less"/"and up".
    fn try_number(&mut self, i: usize) -> Option<usize> {
        let (value, currency, plus) = self.num(i)?;
        let (unit, mut end) = self.unit_after(i);
        let mut side = None;
        if matches!(self.word(end), Some("or" | "and")) || matches!(self.toks.get(end), Some(Tok::Punct('&'))) {
            if let Some(w) = self.word(end + 1) {
                if POSTFIX_MAX.contains(&w) {
                    side = Some(Side::Max);
                } else if POSTFIX_MIN.contains(&w) {
                    side = Some(Side::Min);
                }
            }
        }
        let mut late_unit = None;
        if side.is_some() {
            end += 2;
            if let Some(m) = self.word(end).and_then(unit_word) {
                late_unit = Some(m);
                end += 1;
            }
        }
        let metric = if currency { Some(Metric::Price) } else { unit.or(late_unit) };
        let metric = metric?;
        let side = match (side, plus) {
            (Some(s), _) => s,
            (None, true) => Side::Min,
            // "4 stars", "500 reviews": read as a floor. A bare price is
            // too ambiguous to bind.
            (None, false) if metric != Metric::Price => Side::Min,
            _ => return None,
        };
        self.set(metric, side, value);
        Some(end - i)
    }

    fn run(mut self) -> StructuredFilters {
        let mut i = 0;
        while i < self.toks.len() {
            let step = self
                .try_range(i)
                .or_else(|| self.try_comparator(i))
                .or_else(|| self.try_rated(i))
                .or_else(|| self.try_number(i));
            i += step.unwrap_or(1).max(1);
        }
        self.filters
    }
}

type Cues = Vec<(Vec<String>, Vec<(Metric, Side, Level)>)>;

/// Phrase → (field, level) cues for qualitative constraints.
#[derive(Debug, Clone)]
pub struct QualitativeLexicon {
    /// Sorted by descending phrase length so the longest match wins.
    entries: Cues,
}

fn field_from_name(name: &str) -> Option<(Metric, Side)> {
    Some(match name {
        "price_min" => (Metric::Price, Side::Min),
        "price_max" => (Metric::Price, Side::Max),
        "review_count_min" => (Metric::ReviewCount, Side::Min),
        "review_count_max" => (Metric::ReviewCount, Side::Max),
        "average_rating_min" => (Metric::Rating, Side::Min),
        "average_rating_max" => (Metric::Rating, Side::Max),
        _ => return None,
    })
}

fn plain_words(text: &str) -> Vec<&str> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect()
}

impl QualitativeLexicon {
    /// Parses `phrase<TAB>field<TAB>level` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, FilterError> {
        let mut entries: Cues = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let bad = |reason: &str| FilterError::BadLexicon { line: idx + 1, reason: reason.into() };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad("expected phrase<TAB>field<TAB>level"));
            }
            let phrase: Vec<String> = plain_words(&cols[0].to_ascii_lowercase())
                .into_iter()
                .map(str::to_string)
                .collect();
            if phrase.is_empty() {
                return Err(bad("empty phrase"));
            }
            let (metric, side) = field_from_name(cols[1].trim()).ok_or_else(|| bad("unknown field"))?;
            let level = Level::parse(cols[2].trim()).ok_or_else(|| bad("unknown level"))?;
            match entries.iter_mut().find(|(p, _)| *p == phrase) {
                Some((_, cues)) => cues.push((metric, side, level)),
                None => entries.push((phrase, vec![(metric, side, level)])),
            }
        }
        entries.sort_by_key(|e| std::cmp::Reverse(e.0.len()));
        Ok(Self { entries })
    }

    fn apply(&self, text: &str, filters: &mut StructuredFilters) {
        let words = plain_words(text);
        let mut i = 0;
        while i < words.len() {
            let hit = self.entries.iter().find(|(phrase, _)| {
                phrase.len() <= words.len() - i && phrase.iter().zip(&words[i..]).all(|(a, b)| a == b)
            });
            match hit {
                Some((phrase, cues)) => {
                    for &(metric, side, level) in cues {
                        let slot = filters.get_mut(metric, side);
                        if slot.is_none() {
                            *slot = Some(BoundValue::Level(level));
                        }
                    }
                    i += phrase.len();
                }
                None => i += 1,
            }
        }
    }
}

impl Default for QualitativeLexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_QUALITATIVE_LEXICON).expect("bundled qualitative lexicon is valid")
    }
}

/// Rule-based extractor with its lexicons.
#[derive(Debug, Clone, Default)]
pub struct RuleExtractor {
    pub qualitative: QualitativeLexicon,
    pub accessories: AccessoryLexicon,
}

impl RuleExtractor {
    pub fn new(qualitative: QualitativeLexicon, accessories: AccessoryLexicon) -> Self {
        Self { qualitative, accessories }
    }

    /// Extracts filters from a raw or cleaned query. Never fails: spans that
    /// cannot be interpreted are skipped.
    pub fn extract_filters(&self, query: &str) -> StructuredFilters {
        let text = clean_text(query);
        let toks = lex(&text);
        let mut f = Parser {
            toks: &toks,
            filters: StructuredFilters::default(),
        }
        .run();
        self.qualitative.apply(&text, &mut f);
        for metric in [Metric::Price, Metric::ReviewCount, Metric::Rating] {
            if let (Some(BoundValue::Number(lo)), Some(BoundValue::Number(hi))) =
                (f.get(metric, Side::Min), f.get(metric, Side::Max))
            {
                // Contradictory numbers ("over $300 under $100"): keep neither.
                if lo > hi {
                    *f.get_mut(metric, Side::Min) = None;
                    *f.get_mut(metric, Side::Max) = None;
                }
            }
        }
        f.subcategory = Some(classify_subcategory(&text, &self.accessories));
        f
    }
}

/// [`RuleExtractor::extract_filters`] with the bundled lexicons.
pub fn extract_filters(query: &str) -> StructuredFilters {
    thread_local! {
        static DEFAULT: RuleExtractor = RuleExtractor::default();
    }
    DEFAULT.with(|r| r.extract_filters(query))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexer_shapes() {
        let t = lex("at&t phones under $1,200.50 with 4+ stars, 6-inch 256gb 4-star $25.");
        assert_eq!(
            t,
            vec![
                Tok::Word("at&t".into()),
                Tok::Word("phones".into()),
                Tok::Word("under".into()),
                Tok::Num { value: 1200.5, currency: true, plus: false },
                Tok::Word("with".into()),
                Tok::Num { value: 4.0, currency: false, plus: true },
                Tok::Word("stars".into()),
                Tok::Punct(','),
                Tok::Word("6-inch".into()),
                Tok::Word("256gb".into()),
                Tok::Num { value: 4.0, currency: false, plus: false },
                Tok::Word("stars".into()),
                Tok::Num { value: 25.0, currency: true, plus: false },
                Tok::Punct('.'),
            ]
        );
        assert_eq!(lex("i'm here")[0], Tok::Word("i'm".into()));
    }

    #[test]
    fn lexicon_rejects_bad_lines() {
        assert!(QualitativeLexicon::parse("cheap\tprice_max\n").is_err());
        assert!(QualitativeLexicon::parse("cheap\tcolor\tlow\n").is_err());
        assert!(QualitativeLexicon::parse("cheap\tprice_max\thuge\n").is_err());
        assert!(QualitativeLexicon::parse("# only comments\n\n").is_ok());
    }
}
