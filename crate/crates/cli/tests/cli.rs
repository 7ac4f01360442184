use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};

fn majinlink(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_majinlink"))
        .arg("--dir")
        .arg(dir)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "majinlink {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_pipeline_on_synthetic_corpus() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    let out = tmp.path().join("out");

    majinlink(&out, &["synth", "--out", s(&corpus), "--seed", "11"]);
    let ingest = majinlink(
        &out,
        &["ingest", "--items", s(&corpus.join("shadow_items.jsonl")), "--payloads", s(&corpus.join("payloads"))],
    );
    assert!(ingest.contains("Retained: 500"), "{ingest}");
    majinlink(&out, &["filter-works", "--works", s(&corpus.join("works.jsonl"))]);
    let dedup = majinlink(&out, &["dedup", "--threshold", "0.8", "--num-perm", "128", "--seed", "1"]);
    assert!(dedup.contains("bands=9 rows=13"), "{dedup}");
    assert!(out.join("signatures.bin").exists());
    majinlink(
        &out,
        &["link", "--threshold", "80", "--language", "en", "--editions", s(&corpus.join("editions.jsonl"))],
    );

    let candidates = jsonl(&out.join("candidates.jsonl"));
    assert!(!candidates.is_empty());
    for c in &candidates {
        let score = c["title_score"].as_f64().unwrap();
        assert!((0.0..=100.0).contains(&score));
        assert_eq!((score * 1e4).round() / 1e4, score);
        assert_eq!(c["language"], "en");
    }

    majinlink(&out, &["eval", "sample", "--seed", "5"]);
    let plan = jsonl(&out.join("plan.jsonl"));
    assert!(!plan.is_empty() && plan.len() <= 200);

    // Label every sampled candidate from the generator's truth.
    let truth: BTreeMap<String, String> = fs::read_to_string(corpus.join("truth.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .filter_map(|l| l.split_once(','))
        .map(|(i, w)| (i.to_string(), w.to_string()))
        .collect();
    let mut labels = String::new();
    for task in &plan {
        let work = task["candidate"]["work_id"].as_str().unwrap();
        let items = task["item_ids"].as_array().unwrap();
        let hits = items.iter().filter(|i| truth[i.as_str().unwrap()] == work).count();
        let label = if 2 * hits > items.len() { "yes" } else { "no" };
        let record = json!({
            "candidate": task["candidate"],
            "label": label,
            "evaluator_id": "oracle",
            "timestamp": "2024-01-01T00:00:00Z",
        });
        labels.push_str(&format!("{record}\n"));
    }
    fs::write(out.join("labels.jsonl"), labels).unwrap();

    majinlink(&out, &["eval", "curve", "--resamples", "200"]);
    let curve = fs::read_to_string(out.join("pr_curve.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(
        lines.next().unwrap(),
        "threshold,precision,ci_low,ci_high,recall,r_ci_low,r_ci_high,retention"
    );
    assert_eq!(lines.count(), 101);
    let report = majinlink(&out, &["eval", "report", "--threshold", "80"]);
    assert!(report.contains("precision"), "{report}");

    let emit = majinlink(&out, &["emit", "--lang", "en", "--threshold", "80"]);
    assert!(emit.contains("entries="), "{emit}");
    let catalogue = jsonl(&out.join("catalogue_en.jsonl"));
    assert!(!catalogue.is_empty());
    assert!(catalogue.iter().all(|e| e["experimental"] == false));

    let table1 = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/table1_shares.csv");
    majinlink(&out, &["stats", "--table1", s(&table1), "--works", s(&corpus.join("works.jsonl"))]);
    let herf = fs::read_to_string(out.join("stats/herfindahl.csv")).unwrap();
    assert!(herf.lines().any(|l| l.starts_with("pdf,")), "{herf}");
    assert!(out.join("stats/languages.csv").exists());
    assert!(out.join("stats/decades_works.csv").exists());
    assert!(out.join("stats/decades_catalogue_en.csv").exists());
}

#[test]
fn crawl_sim_on_shipped_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/fixture_graph");
    let stdout = majinlink(tmp.path(), &["crawl-sim", "--fixture", s(&fixture), "--max-depth", "5"]);
    assert!(stdout.contains("[1, 3, 2, 1, 0]"), "{stdout}");
    let series = fs::read_to_string(tmp.path().join("crawl_series.csv")).unwrap();
    assert_eq!(series.lines().count(), 6);
}

#[test]
fn missing_inputs_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_majinlink"))
        .args(["--dir", s(tmp.path()), "dedup"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).contains("panicked"));
}
