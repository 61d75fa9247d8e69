mod common;

use std::path::Path;

use common::{docex, docex_ok, fixtures};

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn validate_fixture() {
    let out = docex_ok(&["validate", s(&fixtures().join("receipts"))]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("ok: 1 split(s), 2 document(s), 3 entities"));
}

#[test]
fn convert_to_qa_yields_two_samples() {
    let out = tempfile::tempdir().unwrap();
    docex_ok(&["convert", s(&fixtures().join("receipts")), "--to", "qa", "--output-dir", s(out.path())]);
    assert_eq!(read(out.path().join("qa_stats.csv")), "split,samples\ntrain,2\n");
    let squad: serde_json::Value = serde_json::from_str(&read(out.path().join("train.json"))).unwrap();
    let qas: Vec<&serde_json::Value> = squad["data"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|a| a["paragraphs"].as_array().unwrap())
        .flat_map(|p| p["qas"].as_array().unwrap())
        .collect();
    assert_eq!(qas.len(), 2);
    docex_ok(&["convert", s(&fixtures().join("receipts")), "--to", "qa", "--include-unanswerable", "--output-dir", s(out.path())]);
    assert_eq!(read(out.path().join("qa_stats.csv")), "split,samples\ntrain,8\n");
}

#[test]
fn subsample_ratio_one_is_identity() {
    let out = tempfile::tempdir().unwrap();
    let src = fixtures().join("receipts");
    docex_ok(&["subsample", s(&src), "--kind", "tags", "--ratio", "1.0", "--seed", "7", "--splits", "train", "--output-dir", s(out.path())]);
    // Documents without entities are dropped by tag sub-sampling, so compare
    // against the annotated subset.
    let input: Vec<serde_json::Value> = serde_json::from_str(&read(src.join("train.json"))).unwrap();
    let output: Vec<serde_json::Value> = serde_json::from_str(&read(out.path().join("train.json"))).unwrap();
    let annotated: Vec<_> = input.into_iter().filter(|d| !d["entities"].as_array().unwrap().is_empty()).collect();
    assert_eq!(output, annotated);

    let docs = tempfile::tempdir().unwrap();
    docex_ok(&["subsample", s(&src), "--kind", "documents", "--ratio", "1.0", "--seed", "7", "--splits", "train", "--output-dir", s(docs.path())]);
    assert_eq!(read(docs.path().join("train.json")), read(src.join("train.json")));
    assert_eq!(read(docs.path().join("dataset.json")), read(src.join("dataset.json")));
}

#[test]
fn staged_pipeline_matches_gold() {
    let ds = common::dataset(31, 12, 40);
    let data = tempfile::tempdir().unwrap();
    docex::dataset::save(&ds, data.path()).unwrap();
    let work = tempfile::tempdir().unwrap();
    let w = |f: &str| work.path().join(f).to_str().unwrap().to_string();
    for (mode, match_mode) in [("qa", "text"), ("tc", "span")] {
        docex_ok(&["chunk", s(data.path()), "--window", "12", "--overlap", "6", "--output-dir", s(work.path())]);
        assert!(read(w("chunks.jsonl")).lines().count() > ds.splits[0].documents.len());
        docex_ok(&[
            "score", s(data.path()), "--mode", mode, "--scorer", "builtin:gold", "--window", "12", "--overlap", "6", "--output-dir",
            s(work.path()),
        ]);
        docex_ok(&["decode", s(data.path()), "--scores", &w("scores.jsonl"), "--k", "12", "--output-dir", s(work.path())]);
        let out = docex_ok(&["eval", s(data.path()), "--predictions", &w("predictions.json"), "--match-mode", match_mode, "--output-dir", s(work.path())]);
        assert!(String::from_utf8_lossy(&out.stdout).contains("| **weighted avg** | 1.0000 | 1.0000 | 1.0000 |"));
        assert!(read(w("metrics.csv")).lines().last().unwrap().starts_with("weighted_avg,"));
    }
}

#[test]
fn score_reads_endpoint_from_environment() {
    let data = tempfile::tempdir().unwrap();
    docex::dataset::save(&common::dataset(32, 2, 10), data.path()).unwrap();
    let out = tempfile::tempdir().unwrap();
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_docex"))
        .args(["score", s(data.path()), "--mode", "tc", "--output-dir", s(out.path())])
        .env("DOCEX_SCORER", "builtin:constant:0.5")
        .output()
        .unwrap();
    assert!(status.status.success());
    let first = read(out.path().join("scores.jsonl")).lines().next().unwrap().to_string();
    assert!(first.contains("\"tag_logits\":[[0.5,0.5"));
    let missing = std::process::Command::new(env!("CARGO_BIN_EXE_docex"))
        .args(["score", s(data.path()), "--output-dir", s(out.path())])
        .env_remove("DOCEX_SCORER")
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn score_with_training_writes_schedule() {
    let data = tempfile::tempdir().unwrap();
    docex::dataset::save(&common::dataset(33, 2, 10), data.path()).unwrap();
    let out = tempfile::tempdir().unwrap();
    let child = format!("stdio:'{}' score --serve stdio --scorer builtin:gold --training-f1 0.5 '{}'", env!("CARGO_BIN_EXE_docex"), s(data.path()));
    docex_ok(&["score", s(data.path()), "--scorer", &child, "--train", "--output-dir", s(out.path())]);
    let csv = read(out.path().join("schedule.csv"));
    assert_eq!(csv.lines().count(), 1 + 81);
    assert!(csv.lines().last().unwrap().ends_with(",8,true"));
    assert!(out.path().join("scores.jsonl").exists());
}

#[test]
fn vanilla_oracle_experiment() {
    let out = tempfile::tempdir().unwrap();
    let run = docex(&["experiment", "--config", s(&fixtures().join("vanilla-oracle.toml")), "--output-dir", s(out.path())]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(out.path().join("report.json"))).unwrap();
    assert_eq!(report["ratios"][0]["mean_f1"], 1.0);
    assert_eq!(read(out.path().join("plot.csv")), "ratio,mean_f1,std\n1.0000,1.0000,0.0000\n");
    for f in ["cells.csv", "cell_labels.csv", "summary.md"] {
        assert!(out.path().join(f).exists(), "{f}");
    }
}

fn noisy_config(dir: &Path, jobs: usize) -> std::path::PathBuf {
    let data = dir.join("data");
    let mut ds = common::dataset(34, 60, 40);
    let test = ds.splits[0].clone();
    ds.splits = vec![docex::core::model::Split::new("train", test.documents.clone()), docex::core::model::Split { name: "test".into(), ..test }];
    docex::dataset::save(&ds, &data).unwrap();
    let cfg = dir.join("grid.toml");
    std::fs::write(
        &cfg,
        format!(
            "name = \"grid\"\ndataset = \"data\"\nmode = \"tc\"\nsetting = \"noisy_tags\"\nratios = [0.3, 0.7]\nseeds = [0, 1, 2]\nscorer = \"builtin:noisy\"\njobs = {jobs}\n\n[chunk]\nwindow = 12\noverlap = 6\n"
        ),
    )
    .unwrap();
    cfg
}

#[test]
fn experiment_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (i, jobs) in [1, 1, 4].into_iter().enumerate() {
        let cfg = noisy_config(dir.path(), jobs);
        let out = dir.path().join(format!("out{i}"));
        docex_ok(&["experiment", "--config", s(&cfg), "--output-dir", s(&out)]);
        outputs.push(out);
    }
    for f in ["cells.csv", "cell_labels.csv", "plot.csv"] {
        assert_eq!(read(outputs[0].join(f)), read(outputs[1].join(f)), "{f}");
        assert_eq!(read(outputs[0].join(f)), read(outputs[2].join(f)), "{f}");
    }
    let re = dir.path().join("rendered");
    docex_ok(&["report", s(&outputs[0]), "--output-dir", s(&re)]);
    for f in ["report.json", "cells.csv", "cell_labels.csv", "plot.csv", "summary.md"] {
        assert_eq!(read(outputs[0].join(f)), read(re.join(f)), "{f}");
    }
}

#[test]
fn failed_cells_are_reported_and_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = noisy_config(dir.path(), 2);
    let out = dir.path().join("out");
    let run = docex(&["experiment", "--config", s(&cfg), "--scorer", "stdio:exit 3", "--output-dir", s(&out)]);
    assert_eq!(run.status.code(), Some(1));
    let cells = read(out.join("cells.csv"));
    assert_eq!(cells.lines().filter(|l| l.contains(",failed,")).count(), 6);
    assert!(read(out.join("summary.md")).contains("## Failed cells"));
}

#[test]
fn bad_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        "dataset = \"x\"\nmode = \"qa\"\nsetting = \"vanilla\"\nscorer = \"builtin:gold\"\nunknown_key = 1\n",
        "dataset = \"x\"\nmode = \"tc\"\nsetting = \"zero_shot\"\nscorer = \"builtin:gold\"\nzero_shot_labels = [\"a\"]\n",
        "dataset = \"x\"\nmode = \"qa\"\nsetting = \"noisy_tags\"\nratios = [0.0]\nscorer = \"builtin:gold\"\n",
        "dataset = \"x\"\nmode = \"qa\"\nsetting = \"vanilla\"\nscorer = \"ftp://nope\"\n",
    ];
    for (i, c) in cases.iter().enumerate() {
        let p = dir.path().join(format!("c{i}.toml"));
        std::fs::write(&p, c).unwrap();
        let run = docex(&["experiment", "--config", s(&p), "--output-dir", s(dir.path())]);
        assert_eq!(run.status.code(), Some(1), "case {i}");
        assert!(String::from_utf8_lossy(&run.stderr).contains("config"), "case {i}: {}", String::from_utf8_lossy(&run.stderr));
    }
}

#[test]
fn rank_labels_writes_csv() {
    let out = tempfile::tempdir().unwrap();
    docex_ok(&["rank-labels", s(&fixtures().join("receipts")), "--top", "5", "--output-dir", s(out.path())]);
    assert_eq!(read(out.path().join("label_lengths.csv")), "label,count,mean_chars,median_chars\ndate,1,10.0000,10.0000\ncompany,2,8.5000,8.5000\n");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(docex(&[]).status.code(), Some(2));
    assert_eq!(docex(&["subsample", "x", "--kind", "words", "--ratio", "1", "--seed", "1", "--output-dir", "o"]).status.code(), Some(2));
    assert_eq!(docex(&["--version"]).status.code(), Some(0));
}

/// Every long flag the parser accepts must show up in the subcommand help.
#[test]
fn help_lists_every_flag() {
    use clap::CommandFactory;
    let cli = docex::cli::Cli::command();
    for sub in cli.get_subcommands() {
        let name = sub.get_name();
        let help = String::from_utf8(docex(&[name, "--help"]).stdout).unwrap();
        for arg in sub.get_arguments() {
            if let Some(long) = arg.get_long() {
                assert!(help.contains(&format!("--{long}")), "{name} --help lacks --{long}");
            }
        }
    }
}
