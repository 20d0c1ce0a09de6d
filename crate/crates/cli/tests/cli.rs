use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lcc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = lcc(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path) {
    let text = include_str!("../configs/confusable.toml").replace("per_class = 200", "per_class = 40");
    std::fs::write(dir.join("exp.toml"), text).unwrap();
}

#[test]
fn staged_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_config(d);
    for (name, seed) in [("train", "1"), ("val", "2"), ("test", "3")] {
        ok(d, &["gen-data", "--config", "exp.toml", "--seed", seed, "--out", &format!("{name}.csv")]);
    }
    ok(d, &["train", "--config", "exp.toml", "--data", "train.csv", "--out", "model.json"]);
    assert_eq!(json(&d.join("model.json"))["label_names"], serde_json::json!(["c0", "c1", "c2", "c3"]));

    ok(d, &["matrices", "--model", "model.json", "--data", "val.csv", "--out-dir", "m"]);
    for f in ["matrices.json", "similarity_w.csv", "similarity_q.csv", "confusion_z.csv", "confusion_r.csv"] {
        assert!(d.join("m").join(f).exists(), "{f}");
    }
    let q_csv = std::fs::read_to_string(d.join("m/similarity_q.csv")).unwrap();
    assert!(q_csv.starts_with("label,c0,c1,c2,c3\nc0,1,"));

    ok(d, &["select-pairs", "--matrices", "m/matrices.json", "--source", "confusion", "--threshold", "0", "--out", "pairs.json"]);
    let pairs = json(&d.join("pairs.json"));
    assert_eq!(pairs["source"], "confusion");
    assert!(pairs["pairs"].as_array().unwrap().contains(&serde_json::json!([0, 1])));

    ok(d, &["build-bank", "--config", "exp.toml", "--model", "model.json", "--data", "train.csv", "--pairs", "pairs.json", "--out", "bank.json"]);
    ok(d, &["sign", "--model", "model.json", "--bank", "bank.json", "--data", "test.csv", "--out", "sig.ndjson"]);
    let sig = std::fs::read_to_string(d.join("sig.ndjson")).unwrap();
    assert_eq!(sig.lines().count(), 1 + 160);

    let matched = ok(d, &["match", "--signatures", "sig.ndjson", "--explain"]);
    let records: Vec<Value> = matched.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 160);
    assert!(records.iter().all(|r| r["trace"]["steps"].is_array()));

    ok(d, &["evaluate", "--model", "model.json", "--bank", "bank.json", "--data", "test.csv", "--out", "eval.json"]);
    let eval = json(&d.join("eval.json"));
    let lcc_acc = eval["lcc_accuracy"].as_f64().unwrap();
    let hits = records
        .iter()
        .enumerate()
        .filter(|(i, r)| r["label"].as_u64().unwrap() as usize == i / 40)
        .count();
    assert_eq!(lcc_acc, hits as f64 / 160.0);
}

#[test]
fn sweep_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_config(d);
    ok(d, &["sweep", "--config", "exp.toml", "--set", "selection.confusion_thresholds=[0.0, 1.0]", "--out-dir", "out"]);
    let report = json(&d.join("out/report.json"));
    let sweep = report["sweep"].as_array().unwrap();
    assert_eq!(sweep.len(), 4 + 2);
    let resolved = std::fs::read_to_string(d.join("out/config.toml")).unwrap();
    assert!(resolved.contains("confusion_thresholds = [\n    0.0,\n    1.0,\n]") || resolved.contains("[0.0, 1.0]"));
}

#[test]
fn stats_command() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let mut csv = String::from("global,sm,cm\n");
    let rows: [([f64; 3], usize); 5] = [
        ([3.0, 2.0, 1.0], 10),
        ([3.0, 1.0, 2.0], 5),
        ([2.0, 3.0, 1.0], 8),
        ([2.0, 1.0, 3.0], 5),
        ([1.0, 2.0, 3.0], 2),
    ];
    for (r, n) in rows {
        for _ in 0..n {
            csv.push_str(&format!("{},{},{}\n", 0.9 - 0.01 * r[0], 0.9 - 0.01 * r[1], 0.9 - 0.01 * r[2]));
        }
    }
    std::fs::write(d.join("acc.csv"), csv).unwrap();
    let out: Value = serde_json::from_str(&ok(d, &["stats", "--input", "acc.csv", "--q-alpha", "1.96"])).unwrap();
    let cd = out["critical_difference"].as_f64().unwrap();
    assert!((cd - 0.506).abs() < 0.001);
    assert_eq!(out["significance"][2][0], "better");

    // bundled k=3 value widens the difference but keeps the same verdicts
    let table: Value = serde_json::from_str(&ok(d, &["stats", "--input", "acc.csv"])).unwrap();
    assert_eq!(table["q_alpha"], 2.241);
    assert_eq!(table["significance"], out["significance"]);

    std::fs::write(d.join("bad.csv"), "a,b\n0.5,x\n").unwrap();
    assert_eq!(lcc(d, &["stats", "--input", "bad.csv"]).status.code(), Some(2));
}

#[test]
fn gallery_identification() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("gallery.csv"), "alice,1,0,0\nbob,0,1,0\ncarol,0,0,1\nbob,0,0.9,0.1\n").unwrap();
    std::fs::write(d.join("probes.csv"), "bob,0.1,1,0\ncarol,0,0.2,1\n").unwrap();
    std::fs::write(d.join("train.csv"), "alice,1,0,0\nalice,0.9,0.1,0\nbob,0,1,0\nbob,0.1,0.9,0\ncarol,0,0,1\ncarol,0,0.1,0.9\n").unwrap();
    ok(d, &["train", "--data", "train.csv", "--out", "model.json"]);
    std::fs::write(d.join("pairs.json"), r#"{"source":"similarity","threshold":0.5,"pairs":[[1,2]]}"#).unwrap();
    ok(d, &["build-bank", "--model", "model.json", "--data", "train.csv", "--pairs", "pairs.json", "--out", "bank.json"]);
    let out = ok(d, &["match", "--gallery", "gallery.csv", "--probes", "probes.csv", "--bank", "bank.json"]);
    let labels: Vec<String> = out
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["label_name"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(labels, ["bob", "carol"]);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(lcc(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(lcc(d, &["train"]).status.code(), Some(1));
    assert_eq!(lcc(d, &["--help"]).status.code(), Some(0));
    assert_eq!(lcc(d, &["train", "--data", "missing.csv"]).status.code(), Some(2));
    std::fs::write(d.join("ragged.csv"), "0,1,2\n1,2\n").unwrap();
    let out = lcc(d, &["train", "--data", "ragged.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    // a vanishing temperature makes every class mean the uniform vector
    std::fs::write(d.join("four.csv"), "0,1\n0,2\n1,5\n1,6\n").unwrap();
    ok(d, &["train", "--data", "four.csv", "--set", "model.kind=nearest_centroid", "--set", "model.temperature=1e-300", "--out", "flat.json"]);
    let out = lcc(d, &["matrices", "--model", "flat.json", "--data", "four.csv", "--out-dir", "flat"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    assert_eq!(
        lcc(d, &["sweep", "--set", "selection.confusion_thresholds=[2.0]"]).status.code(),
        Some(2)
    );
}
