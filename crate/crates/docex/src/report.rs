//! Report files: metrics CSV/Markdown and experiment grid outputs.
//!
//! `emit` writes into an output directory:
//!
//! | file              | content                                               |
//! |-------------------|-------------------------------------------------------|
//! | `report.json`     | the full [`GridReport`]                               |
//! | `cells.csv`       | one row per (ratio, seed) cell                        |
//! | `cell_labels.csv` | per-label metrics of every successful cell            |
//! | `plot.csv`        | `ratio,mean_f1,std` for error-bar plots               |
//! | `summary.md`      | run settings and per-ratio / per-label tables         |
//!
//! Numbers are printed with fixed precision, so re-emitting a report yields
//! byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use docex_core::metrics::Report;

use crate::error::{read_to_string, write_string, Error, Result};
use crate::experiment::{CellStatus, GridReport};

/// The serde (snake_case) name of a unit enum value.
fn name<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

fn num(v: f64) -> String {
    format!("{v:.4}")
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub const METRICS_HEADER: [&str; 8] = ["label", "tp", "fp", "fn", "precision", "recall", "f1", "support"];

/// Per-label rows plus a final `weighted_avg` row.
pub fn metrics_csv(report: &Report) -> String {
    let mut rows: Vec<Vec<String>> = report
        .labels
        .iter()
        .map(|l| {
            vec![
                l.label.clone(),
                l.true_positives.to_string(),
                l.false_positives.to_string(),
                l.false_negatives.to_string(),
                num(l.precision),
                num(l.recall),
                num(l.f1),
                l.support.to_string(),
            ]
        })
        .collect();
    let (tp, fp, fn_) = report.labels.iter().fold((0, 0, 0), |a, l| {
        (a.0 + l.true_positives, a.1 + l.false_positives, a.2 + l.false_negatives)
    });
    let w = &report.weighted_avg;
    rows.push(vec![
        "weighted_avg".into(),
        tp.to_string(),
        fp.to_string(),
        fn_.to_string(),
        num(w.precision),
        num(w.recall),
        num(w.f1),
        report.total_support().to_string(),
    ]);
    csv_string(&METRICS_HEADER, rows)
}

pub fn metrics_markdown(report: &Report) -> String {
    let mut s = format!("Match mode: {}\n\n", report.match_mode);
    s.push_str("| label | precision | recall | f1 | support |\n|---|---:|---:|---:|---:|\n");
    for l in &report.labels {
        let _ = writeln!(s, "| {} | {} | {} | {} | {} |", l.label, num(l.precision), num(l.recall), num(l.f1), l.support);
    }
    let w = &report.weighted_avg;
    let _ = writeln!(
        s,
        "| **weighted avg** | {} | {} | {} | {} |",
        num(w.precision),
        num(w.recall),
        num(w.f1),
        report.total_support()
    );
    s
}

pub fn cells_csv(report: &GridReport) -> String {
    let rows = report
        .cells
        .iter()
        .map(|c| {
            let w = c.report.as_ref().map(|r| &r.weighted_avg);
            let opt = |f: fn(&docex_core::metrics::Averages) -> f64| w.map(|w| num(f(w))).unwrap_or_default();
            vec![
                num(c.ratio),
                c.seed.to_string(),
                match c.status {
                    CellStatus::Ok => "ok".into(),
                    CellStatus::Failed => "failed".into(),
                },
                opt(|w| w.precision),
                opt(|w| w.recall),
                opt(|w| w.f1),
                c.report.as_ref().map(|r| r.total_support().to_string()).unwrap_or_default(),
                c.train_documents.to_string(),
                c.train_entities.to_string(),
                c.validation_entities.to_string(),
                c.digest.clone().unwrap_or_default(),
                c.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    csv_string(
        &[
            "ratio",
            "seed",
            "status",
            "precision",
            "recall",
            "f1",
            "support",
            "train_documents",
            "train_entities",
            "validation_entities",
            "digest",
            "error",
        ],
        rows,
    )
}

pub fn cell_labels_csv(report: &GridReport) -> String {
    let mut rows = Vec::new();
    for c in &report.cells {
        let Some(r) = &c.report else { continue };
        for l in &r.labels {
            rows.push(vec![
                num(c.ratio),
                c.seed.to_string(),
                l.label.clone(),
                l.true_positives.to_string(),
                l.false_positives.to_string(),
                l.false_negatives.to_string(),
                num(l.precision),
                num(l.recall),
                num(l.f1),
                l.support.to_string(),
            ]);
        }
    }
    csv_string(&["ratio", "seed", "label", "tp", "fp", "fn", "precision", "recall", "f1", "support"], rows)
}

pub fn plot_csv(report: &GridReport) -> String {
    let rows = report.ratios.iter().map(|r| vec![num(r.ratio), num(r.mean_f1), num(r.std_f1)]).collect();
    csv_string(&["ratio", "mean_f1", "std"], rows)
}

pub fn summary_markdown(report: &GridReport) -> String {
    let run = &report.run;
    let mut s = format!("# {}\n\n", run.name);
    let _ = writeln!(s, "| setting | value |\n|---|---|");
    let overlap = format!("window {}, overlap {}", run.chunk.window, run.chunk.overlap);
    let extract = format!(
        "k {}, max answer length {}, {}{}",
        run.extract.k,
        run.extract.max_answer_len,
        name(&run.extract.answerability),
        if run.extract.allow_overlap { ", overlapping answers allowed" } else { "" }
    );
    for (k, v) in [
        ("dataset", run.dataset.as_str()),
        ("mode", &run.mode.to_string()),
        ("setting", &run.setting.to_string()),
        ("scorer", &run.scorer),
        ("match mode", &run.match_mode.to_string()),
        ("repair policy", &run.policy),
        ("tag sampling", &name(&run.tag_sampling)),
        ("question template", &run.template),
        ("chunking", &overlap),
        ("extraction", &extract),
        ("test split", &format!("{} ({} documents)", run.test_split, run.test_documents)),
    ] {
        let _ = writeln!(s, "| {k} | {} |", v.replace('|', "\\|"));
    }

    s.push_str("\n## Weighted F1 by ratio\n\n| ratio | cells | failed | precision | recall | f1 (mean ± std) |\n|---:|---:|---:|---:|---:|---|\n");
    for r in &report.ratios {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} ± {} |",
            num(r.ratio),
            r.cells,
            r.failed,
            num(r.mean_precision),
            num(r.mean_recall),
            num(r.mean_f1),
            num(r.std_f1)
        );
    }

    s.push_str("\n## Mean F1 by label\n\n| label |");
    for r in &report.ratios {
        let _ = write!(s, " {} |", num(r.ratio));
    }
    s.push_str("\n|---|");
    s.push_str(&"---:|".repeat(report.ratios.len()));
    s.push('\n');
    let mut labels: Vec<&str> = Vec::new();
    for c in &report.cells {
        for l in c.report.iter().flat_map(|r| &r.labels) {
            if !labels.contains(&l.label.as_str()) {
                labels.push(&l.label);
            }
        }
    }
    for label in labels {
        let _ = write!(s, "| {label} |");
        for r in &report.ratios {
            let f1s: Vec<f64> = report
                .cells
                .iter()
                .filter(|c| c.ratio == r.ratio)
                .filter_map(|c| c.report.as_ref()?.label(label).map(|l| l.f1))
                .collect();
            let cell = if f1s.is_empty() { "-".to_string() } else { num(f1s.iter().sum::<f64>() / f1s.len() as f64) };
            let _ = write!(s, " {cell} |");
        }
        s.push('\n');
    }

    let failed: Vec<_> = report.cells.iter().filter(|c| c.status == CellStatus::Failed).collect();
    if !failed.is_empty() {
        s.push_str("\n## Failed cells\n\n");
        for c in failed {
            let _ = writeln!(s, "- ratio {}, seed {}: {}", num(c.ratio), c.seed, c.error.as_deref().unwrap_or("unknown error"));
        }
    }
    s
}

pub fn report_json(report: &GridReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Writes all grid report files into `dir`; returns the paths written.
pub fn emit(report: &GridReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let files = [
        ("report.json", report_json(report)),
        ("cells.csv", cells_csv(report)),
        ("cell_labels.csv", cell_labels_csv(report)),
        ("plot.csv", plot_csv(report)),
        ("summary.md", summary_markdown(report)),
    ];
    let mut written = Vec::new();
    for (name, content) in files {
        let path = dir.join(name);
        write_string(&path, &content)?;
        written.push(path);
    }
    Ok(written)
}

pub fn read_report(path: &Path) -> Result<GridReport> {
    let path = if path.is_dir() { path.join("report.json") } else { path.to_path_buf() };
    let content = read_to_string(&path)?;
    serde_json::from_str(&content).map_err(|e| Error::json(&path, &content, e))
}
