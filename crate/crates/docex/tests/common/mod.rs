#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use docex::core::chunk::ChunkSpec;
use docex::core::decode::ExtractConfig;
use docex::core::iob::RepairPolicy;
use docex::core::model::{BBox, Dataset, Document, Split, Word};
use docex::core::qa::DEFAULT_TEMPLATE;
use docex::pipeline::PipelineConfig;
use docex::protocol::Mode;
use rand::Rng;

pub use docex::core::rng::seeded as rng;

pub const LABELS: [&str; 4] = ["company", "address", "total", "date"];

const VOCAB: [&str; 12] = ["ACME", "Corp", "Zoë", "12.50", "Main", "St", "naïve", "Ltd", "€5", "01/02/2020", "TOTAL", "x"];

/// `n` tokens with random non-overlapping entities of length at most 3.
pub fn document(r: &mut impl Rng, id: &str, n: usize) -> Document {
    let words = (0..n)
        .map(|i| {
            let x = (i % 20) as u32 * 50;
            Word::new(VOCAB[r.gen_range(0..VOCAB.len())], (i / 60) as u32, BBox::new(x, 0, x + 40, 10))
        })
        .collect();
    let mut doc = Document::from_words(id, words);
    let mut t = 0;
    while t < n {
        if r.gen_bool(0.3) {
            let len = r.gen_range(1..=3.min(n - t));
            doc.entities.push(doc.entity(LABELS[r.gen_range(0..LABELS.len())], t, len));
            t += len + 1;
        } else {
            t += 1;
        }
    }
    doc
}

pub fn dataset(seed: u64, docs: usize, max_tokens: usize) -> Dataset {
    let mut r = rng(seed);
    let documents = (0..docs)
        .map(|i| {
            let n = r.gen_range(1..=max_tokens);
            document(&mut r, &format!("doc-{i:03}"), n)
        })
        .collect();
    Dataset {
        name: "synthetic".into(),
        label_set: LABELS.iter().map(|s| s.to_string()).collect(),
        splits: vec![Split::new("test", documents)],
    }
}

pub fn labels() -> Vec<String> {
    LABELS.iter().map(|s| s.to_string()).collect()
}

/// Small windows so most documents span several chunks; the overlap is at
/// least the longest generated entity.
pub fn pipeline(mode: Mode) -> PipelineConfig {
    PipelineConfig {
        mode,
        chunk: ChunkSpec::new(12, 6).unwrap(),
        extract: ExtractConfig { k: 12, ..Default::default() },
        policy: RepairPolicy::BeginOnOrphan,
        template: DEFAULT_TEMPLATE.into(),
    }
}

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn docex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_docex")).args(args).output().expect("run docex")
}

pub fn docex_ok(args: &[&str]) -> Output {
    let out = docex(args);
    assert!(
        out.status.success(),
        "docex {args:?} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}
