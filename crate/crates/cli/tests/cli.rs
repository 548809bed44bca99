use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qglab_core::data::synthetic::{synthetic_corpus, SyntheticSpec};
use qglab_core::data::write_jsonl;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn qglab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qglab"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("QGLAB_DATA_DIR")
        .args(["--threads", "1"])
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = qglab(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn read_json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Writes a tiny corpus, vocabulary and config, and pretrains briefly.
fn trained_workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = synthetic_corpus(&SyntheticSpec {
        qa_pairs: 24,
        train: 12,
        test: 3,
        fillers: 1,
        seed: 2,
    });
    write_jsonl(d.join("pairs.jsonl"), &corpus.qa).unwrap();
    write_jsonl(d.join("train.jsonl"), &corpus.train).unwrap();
    write_jsonl(d.join("test.jsonl"), &corpus.test).unwrap();
    let config = serde_json::json!({
        "model": {"preset": "tiny", "num_layers": 1, "hidden_size": 16, "filter_size": 32, "num_heads": 2},
        "training": {"batch_size": 4, "max_steps": 4, "warmup_steps": 2, "max_src_len": 64, "max_tgt_len": 32},
        "decode": {"decoder": "greedy", "max_len": 8},
    });
    std::fs::write(d.join("run.json"), config.to_string()).unwrap();
    ok(d, &["build-vocab", "--in", "pairs.jsonl", "train.jsonl", "--out", "vocab.json", "--size", "150"]);
    ok(d, &["--config", "run.json", "pretrain", "--pairs", "pairs.jsonl", "--vocab", "vocab.json", "--out", "pre.ckpt"]);
    dir
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qglab(dir.path(), &["mine", "--bogus"]).status.code(), Some(2));
}

#[test]
fn missing_input_exits_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = qglab(dir.path(), &["mine", "--in", "absent.jsonl", "--out", "x.jsonl"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.jsonl"));
}

#[test]
fn malformed_record_exits_with_data_code_and_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let good = r#"{"item_id":"1","system_best":"a","system_worst":"b","annotator_id":"x"}"#;
    std::fs::write(dir.path().join("j.jsonl"), format!("{good}\n{{not json\n")).unwrap();
    let out = qglab(dir.path(), &["bws", "--in", "j.jsonl", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("j.jsonl:2:"));
}

#[test]
fn mine_writes_kept_pairs_stats_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::copy(fixture("raw_qa.jsonl"), d.join("raw.jsonl")).unwrap();
    ok(d, &["mine", "--in", "raw.jsonl", "--out", "mined.jsonl"]);
    let kept = std::fs::read_to_string(d.join("mined.jsonl")).unwrap();
    assert_eq!(kept.lines().count(), 4);
    let stats = read_json(d.join("mined.jsonl.stats.json"));
    assert_eq!(stats["count"], 4);
    assert_eq!(stats["drops"]["malformed"], 2);
    let manifest = read_json(d.join("mined.jsonl.manifest.json"));
    assert_eq!(manifest["subcommand"], "mine");
}

#[test]
fn generate_is_repeatable_and_sweep_writes_every_row() {
    let dir = trained_workspace();
    let d = dir.path();
    for out in ["a.jsonl", "b.jsonl"] {
        ok(d, &["--config", "run.json", "generate", "--ckpt", "pre.ckpt", "--in", "test.jsonl", "--out", out]);
    }
    let a = std::fs::read(d.join("a.jsonl")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.jsonl")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 3);

    ok(
        d,
        &[
            "--config", "run.json", "sweep", "--pretrained", "pre.ckpt", "--train-data", "train.jsonl", "--heldout",
            "test.jsonl", "--fractions", "50,100", "--steps", "2", "--out", "sweep.csv",
        ],
    );
    let mut reader = csv::Reader::from_path(d.join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert!(reader.headers().unwrap().iter().any(|h| h == "rouge_l_f1"));
}

#[test]
fn bws_and_significance_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut lines = Vec::new();
    for (best, worst, n) in [("s", "t", 9), ("t", "s", 3), ("t", "u", 18)] {
        for i in 0..n {
            lines.push(
                serde_json::json!({
                    "item_id": format!("{best}{worst}{i}"), "system_best": best, "system_worst": worst,
                    "annotator_id": "a", "systems": ["s", "t", "u"],
                })
                .to_string(),
            );
        }
    }
    std::fs::write(d.join("j.jsonl"), lines.join("\n") + "\n").unwrap();
    ok(d, &["bws", "--in", "j.jsonl", "--out", "bws.json"]);
    let scores = read_json(d.join("bws.json"));
    assert!((scores["scores"]["s"].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert_eq!(scores["judgments"], 30);

    let per_example = serde_json::json!({"a": [0.9, 0.4, 0.7], "b": [0.5, 0.6, 0.1], "c": [0.2, 0.2, 0.2]});
    std::fs::write(d.join("scores.json"), per_example.to_string()).unwrap();
    ok(d, &["significance", "--in", "scores.json", "--out", "p.csv"]);
    let mut reader = csv::Reader::from_path(d.join("p.csv")).unwrap();
    let rows: Vec<(String, String, f64)> = reader.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    let ab = rows.iter().find(|r| r.0 == "a" && r.1 == "b").unwrap();
    assert!((ab.2 - 0.5).abs() < 1e-12);
}
