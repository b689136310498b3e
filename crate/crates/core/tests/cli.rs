use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_facetsearch");
const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data");

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env_remove("FACETSEARCH_CONFIG")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn search_without_index_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["search", "--query", "cheap phone"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn extract_filters_prints_levels() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&run(&["extract-filters", "--query", "cheap iphone se case"], dir.path()));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["price_max"], "low");
    assert_eq!(v["subcategory"], "Cell Phone Accessories");
    assert!(v["price_min"].is_null());
}

#[test]
fn missing_input_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["ingest", "--in", "nope.jsonl", "--out", "x.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn pipeline_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let raw = format!("{DATA}/bench_catalog.jsonl");
    ok(&run(&["ingest", "--in", &raw, "--out", "cat.jsonl"], d));
    ok(&run(&["embed", "--catalog", "cat.jsonl", "--out", "cat.vecs"], d));
    ok(&run(&["build-index", "--vecs", "cat.vecs", "--out", "cat.idx", "--seed", "3"], d));

    std::fs::write(
        d.join("run.conf"),
        format!("# smoke run\ncatalog = cat.jsonl\nindex = cat.idx\njudgments = {DATA}/bench_judgments.tsv\nk = 3\n"),
    )
    .unwrap();
    let with_config = |args: &[&str]| {
        Command::new(BIN)
            .args(args)
            .current_dir(d)
            .env("FACETSEARCH_CONFIG", d.join("run.conf"))
            .output()
            .unwrap()
    };
    let hits = ok(&with_config(&["search", "--query", "samsung phone under $200"]));
    let rows: Vec<&str> = hits.lines().collect();
    assert!(rows.len() <= 4 && rows.len() >= 2, "{hits}");
    let report = ok(&with_config(&["eval", "--json"]));
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert!(v.is_object(), "{report}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let raw = format!("{DATA}/sample_catalog.jsonl");
    let mut outputs = Vec::new();
    for n in 0..2 {
        let (cat, vecs, idx, adapter) = (format!("c{n}.jsonl"), format!("v{n}.vecs"), format!("i{n}.idx"), format!("a{n}.adp"));
        ok(&run(&["ingest", "--in", &raw, "--out", &cat], d));
        ok(&run(&["train-adapter", "--catalog", &cat, "--synth", "2", "--epochs", "2", "--out", &adapter, "--seed", "5"], d));
        ok(&run(&["embed", "--catalog", &cat, "--adapter", &adapter, "--out", &vecs], d));
        ok(&run(&["build-index", "--vecs", &vecs, "--out", &idx, "--seed", "5"], d));
        let hits = ok(&run(
            &["search", "--query", "cheap iphone case", "--idx", &idx, "--catalog", &cat, "--adapter", &adapter],
            d,
        ));
        let files: Vec<Vec<u8>> = [cat, vecs, idx, adapter].iter().map(|f| std::fs::read(d.join(f)).unwrap()).collect();
        outputs.push((files, hits));
    }
    assert!(!outputs[0].1.is_empty());
    assert_eq!(outputs[0], outputs[1]);
}
