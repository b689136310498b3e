//! Regenerates the bundled synthetic data under `data/`:
//!
//! * `sample_catalog.jsonl`: 500 raw products (phones and accessories) with
//!   the usual mess: markup, URLs, non-ASCII symbols, missing prices and
//!   missing subcategories.
//! * `bench_catalog.jsonl` and `bench_judgments.tsv`: 200 products and 40
//!   constrained queries. Every judged product has two textual twins with
//!   lower ids that break the query's constraints.
//!
//! ```text
//! cargo run --example make_fixtures -- crates/core/data
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const PHONE_MODELS: &[(&str, &[&str])] = &[
    ("samsung galaxy", &["a14", "a54", "s21", "s22 ultra", "note 20", "a03s", "s10"]),
    ("apple iphone", &["se", "11 pro max", "12", "13 mini", "x", "8 plus", "7 plus"]),
    ("motorola moto", &["g power", "g fast", "e", "edge", "g play", "g pure"]),
    ("google pixel", &["6a", "7", "7 pro", "8", "4a"]),
    ("nokia", &["g20", "c32", "2780 flip", "105", "6300 4g"]),
    ("huawei", &["p30 pro", "mate 20", "p40 lite", "y9"]),
    ("oneplus", &["9", "10 pro", "nord n20", "8t"]),
    ("blu", &["view 3", "tank ii", "j9l"]),
    ("tcl", &["20 se", "flip pro", "30 xe"]),
    ("jitterbug", &["flip2", "smart3"]),
    ("kyocera", &["duraxv extreme", "cadence"]),
    ("alcatel", &["go flip 3", "1x"]),
];

const PHONE_KINDS: &[&str] = &[
    "smartphone",
    "unlocked phone",
    "flip phone",
    "basic phone",
    "prepaid phone",
    "senior phone",
    "rugged phone",
    "5g smartphone",
    "dual sim phone",
    "android phone",
];

const CARRIERS: &[&str] = &["at&t", "verizon", "t-mobile", "cricket", "straight talk", "gsm unlocked", "tracfone"];

const PHONE_FEATURES: &[&str] = &[
    "6.5 inch display",
    "48mp camera",
    "5000mah battery",
    "128gb storage",
    "fingerprint sensor",
    "big buttons",
    "physical keyboard",
    "4g lte",
    "water resistant",
    "fast charging",
    "hearing aid compatible",
    "face unlock",
    "expandable memory",
    "amoled screen",
    "long battery life",
    "loud speaker",
];

const ACC_KINDS: &[&str] = &[
    "phone case",
    "screen protector",
    "wall charger",
    "usb c cable",
    "lightning cable",
    "car mount",
    "phone holder",
    "power bank",
    "wireless earbuds",
    "stylus pen",
    "watch band",
    "wireless charger",
    "wallet case",
    "battery case",
];

const ACC_BRANDS: &[&str] = &[
    "anker", "otterbox", "spigen", "belkin", "zagg", "esr", "ugreen", "mophie", "popsockets", "casetify", "amazonbasics",
];

const DEVICES: &[&str] = &[
    "iphone se",
    "iphone 12",
    "iphone 7 plus",
    "iphone 13 mini",
    "galaxy s10",
    "galaxy a14",
    "pixel 7",
    "apple watch series 4",
    "moto g power",
    "galaxy s22 ultra",
];

const ACC_STYLES: &[&str] = &[
    "slim",
    "rugged",
    "clear",
    "leather",
    "magnetic",
    "waterproof",
    "shockproof",
    "braided",
    "4-port",
    "athletic",
    "glitter",
    "alice in wonderland",
    "tempered glass",
    "silicone",
    "kickstand",
];

const ACC_FEATURES: &[&str] = &[
    "raised edges protect the camera",
    "supports fast charging",
    "6 ft length",
    "easy bubble free install",
    "strong suction cup",
    "10000mah capacity",
    "noise cancelling",
    "fine point tip",
    "quick release pins",
    "qi certified",
    "card slots",
    "drop tested",
    "lifetime warranty",
];

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().expect("non-empty list")
}

fn asin(rng: &mut ChaCha8Rng, taken: &mut HashSet<String>) -> String {
    const ALPHABET: &[u8] = b"ABCDEFGHJKLMNPQRSTUVWXYZ0123456789";
    loop {
        let tail: String = (0..8).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())] as char).collect();
        let a = format!("B0{tail}");
        if taken.insert(a.clone()) {
            return a;
        }
    }
}

struct Text {
    title: String,
    description: String,
    features: String,
    tech_specs: String,
}

fn phone_text(rng: &mut ChaCha8Rng) -> (Text, String) {
    let (brand, models) = *PHONE_MODELS.choose(rng).unwrap();
    let model = pick(rng, models);
    let kind = pick(rng, PHONE_KINDS);
    let carrier = pick(rng, CARRIERS);
    let mut feats: Vec<&str> = PHONE_FEATURES.choose_multiple(rng, 3).copied().collect();
    feats.sort_unstable();
    let title = format!("{brand} {model} {kind} {carrier} {}", feats[0]);
    let text = Text {
        description: format!(
            "the {brand} {model} is a {kind} for {carrier} with {} and {}.",
            feats[1], feats[2]
        ),
        features: feats.join(". "),
        tech_specs: format!(
            "network: {carrier}; storage: {}gb; screen: {:.1} inch",
            [16, 32, 64, 128, 256][rng.gen_range(0..5)],
            rng.gen_range(2.4..6.9)
        ),
        title,
    };
    (text, format!("{brand} {model} {kind}"))
}

fn accessory_text(rng: &mut ChaCha8Rng) -> (Text, String) {
    let brand = pick(rng, ACC_BRANDS);
    let kind = pick(rng, ACC_KINDS);
    let device = pick(rng, DEVICES);
    let style = pick(rng, ACC_STYLES);
    let mut feats: Vec<&str> = ACC_FEATURES.choose_multiple(rng, 3).copied().collect();
    feats.sort_unstable();
    let title = format!("{brand} {style} {kind} for {device}");
    let text = Text {
        description: format!("a {style} {kind} made for the {device}. {}.", feats[0]),
        features: feats.join(". "),
        tech_specs: format!(
            "brand: {brand}; compatible: {device}; weight: {} g",
            rng.gen_range(10..300)
        ),
        title,
    };
    (text, format!("{brand} {style} {kind} for {device}"))
}

fn record(asin: &str, t: &Text, price: Option<f64>, rating: f64, reviews: u64, sub: Option<&str>) -> Value {
    let mut v = json!({
        "asin": asin,
        "title": t.title,
        "description": t.description,
        "features": t.features,
        "tech_specs": t.tech_specs,
        "price": price,
        "average_rating": rating,
        "review_count": reviews,
    });
    if let Some(s) = sub {
        v["subcategory"] = json!(s);
    }
    v
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn rough_reviews(rng: &mut ChaCha8Rng) -> u64 {
    (10f64.powf(rng.gen_range(0.0..4.3))) as u64
}

fn add_noise(rng: &mut ChaCha8Rng, t: &mut Text) {
    match rng.gen_range(0..10) {
        0 => t.title = format!("<b>{}</b>", t.title.to_uppercase()),
        1 => t.description.push_str(" visit https://shop.example.com/deals for more"),
        2 => t.features = format!("<ul><li>{}</li></ul>", t.features.replace(". ", "</li><li>")),
        3 => t.title.push_str(" \u{2122}"),
        4 => t.description = format!("{} \u{2013} caf\u{e9} edition, www.example.com", t.description),
        _ => {}
    }
}

fn sample_catalog(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = HashSet::new();
    let mut titles = HashSet::new();
    let mut out = String::new();
    let mut made = 0;
    while made < 500 {
        let phone = rng.gen_bool(0.4);
        let (mut text, _) = if phone { phone_text(&mut rng) } else { accessory_text(&mut rng) };
        if !titles.insert(text.title.clone()) {
            continue;
        }
        add_noise(&mut rng, &mut text);
        let price = if rng.gen_bool(0.05) {
            None
        } else if phone {
            Some(round2(rng.gen_range(25.0..1100.0)))
        } else {
            Some(round2(rng.gen_range(3.0..80.0)))
        };
        let sub = match (rng.gen_bool(0.1), phone) {
            (true, _) => None,
            (false, true) => Some("Cell Phones"),
            (false, false) => Some("Cell Phone Accessories"),
        };
        let rating = round1(rng.gen_range(2.5..5.0));
        let v = record(&asin(&mut rng, &mut taken), &text, price, rating, rough_reviews(&mut rng), sub);
        out.push_str(&v.to_string());
        out.push('\n');
        made += 1;
    }
    out
}

/// A constraint clause and how a product satisfies or breaks it.
struct Constraint {
    clause: String,
    ok: (Option<f64>, f64, u64),
    broken: [(Option<f64>, f64, u64); 2],
}

fn constraint(rng: &mut ChaCha8Rng, phone: bool) -> Constraint {
    let scale = if phone { 10.0 } else { 1.0 };
    let base_rating = 4.4;
    let base_reviews = 400;
    match rng.gen_range(0..8) {
        0 => {
            let cap = (rng.gen_range(8..30) as f64 * scale).round();
            Constraint {
                clause: format!("under ${cap}"),
                ok: (Some(round2(cap * 0.8)), base_rating, base_reviews),
                broken: [
                    (Some(round2(cap * 1.3)), base_rating, base_reviews),
                    (Some(round2(cap * 2.0)), base_rating, base_reviews),
                ],
            }
        }
        1 => {
            let floor = (rng.gen_range(8..30) as f64 * scale).round();
            Constraint {
                clause: format!("over ${floor}"),
                ok: (Some(round2(floor * 1.4)), base_rating, base_reviews),
                broken: [
                    (Some(round2(floor * 0.7)), base_rating, base_reviews),
                    (None, base_rating, base_reviews),
                ],
            }
        }
        2 => {
            let lo = (rng.gen_range(5..15) as f64 * scale).round();
            let hi = lo * 2.0;
            Constraint {
                clause: format!("between ${lo} and ${hi}"),
                ok: (Some(round2(lo * 1.5)), base_rating, base_reviews),
                broken: [
                    (Some(round2(lo * 0.5)), base_rating, base_reviews),
                    (Some(round2(hi * 1.5)), base_rating, base_reviews),
                ],
            }
        }
        3 => Constraint {
            clause: "with 4+ stars".into(),
            ok: (Some(30.0 * scale), 4.3, base_reviews),
            broken: [(Some(30.0 * scale), 3.6, base_reviews), (Some(28.0 * scale), 2.9, base_reviews)],
        },
        4 => {
            let n = [50, 100, 250, 500][rng.gen_range(0..4)];
            Constraint {
                clause: format!("with more than {n} reviews"),
                ok: (Some(30.0 * scale), base_rating, n * 3),
                broken: [(Some(30.0 * scale), base_rating, n / 2), (Some(30.0 * scale), base_rating, 3)],
            }
        }
        5 => Constraint {
            clause: "that is highly rated".into(),
            ok: (Some(30.0 * scale), 4.7, base_reviews),
            broken: [(Some(30.0 * scale), 4.2, base_reviews), (Some(30.0 * scale), 3.1, base_reviews)],
        },
        6 => Constraint {
            clause: "with plenty of reviews".into(),
            ok: (Some(30.0 * scale), base_rating, 2500),
            broken: [(Some(30.0 * scale), base_rating, 600), (Some(30.0 * scale), base_rating, 40)],
        },
        _ => {
            // cheap: <= 100 for phones, <= 15 for accessories.
            let cap = if phone { 100.0 } else { 15.0 };
            Constraint {
                clause: "that is cheap".into(),
                ok: (Some(round2(cap * 0.6)), base_rating, base_reviews),
                broken: [
                    (Some(round2(cap * 1.5)), base_rating, base_reviews),
                    (Some(round2(cap * 3.0)), base_rating, base_reviews),
                ],
            }
        }
    }
}

fn benchmark(seed: u64) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = HashSet::new();
    let mut phrases = HashSet::new();
    let mut catalog = String::new();
    let mut judgments = String::from("# query<TAB>relevant asin(s)\n");
    let mut groups = 0;
    while groups < 40 {
        let phone = groups % 2 == 0;
        let (text, phrase) = if phone { phone_text(&mut rng) } else { accessory_text(&mut rng) };
        if !phrases.insert(phrase.clone()) {
            continue;
        }
        let c = constraint(&mut rng, phone);
        let sub = if phone { "Cell Phones" } else { "Cell Phone Accessories" };
        for (price, rating, reviews) in c.broken {
            let v = record(&asin(&mut rng, &mut taken), &text, price, rating, reviews, Some(sub));
            let _ = writeln!(catalog, "{v}");
        }
        let (price, rating, reviews) = c.ok;
        let target = asin(&mut rng, &mut taken);
        let v = record(&target, &text, price, rating, reviews, Some(sub));
        let _ = writeln!(catalog, "{v}");
        let _ = writeln!(judgments, "{phrase} {}\t{target}", c.clause);
        groups += 1;
    }
    let mut fillers = 0;
    while fillers < 80 {
        let phone = rng.gen_bool(0.5);
        let (text, phrase) = if phone { phone_text(&mut rng) } else { accessory_text(&mut rng) };
        if !phrases.insert(phrase) {
            continue;
        }
        let price = if phone { rng.gen_range(40.0..900.0) } else { rng.gen_range(4.0..70.0) };
        let sub = if phone { "Cell Phones" } else { "Cell Phone Accessories" };
        let v = record(
            &asin(&mut rng, &mut taken),
            &text,
            Some(round2(price)),
            round1(rng.gen_range(2.5..5.0)),
            rough_reviews(&mut rng),
            Some(sub),
        );
        let _ = writeln!(catalog, "{v}");
        fillers += 1;
    }
    (catalog, judgments)
}

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("sample_catalog.jsonl"), sample_catalog(20_240_601))?;
    let (catalog, judgments) = benchmark(20_240_602);
    fs::write(dir.join("bench_catalog.jsonl"), catalog)?;
    fs::write(dir.join("bench_judgments.tsv"), judgments)?;
    eprintln!("wrote fixtures to {}", dir.display());
    Ok(())
}
