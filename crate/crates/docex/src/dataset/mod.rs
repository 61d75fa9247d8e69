//! Dataset files: the canonical on-disk format plus read-only adapters for
//! public dataset layouts.
//!
//! A canonical dataset is a directory holding `dataset.json` (name, label set
//! and split names) and one `<split>.json` per split, each a JSON array of
//! documents with exactly the fields of [`docex_core::Document`].

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use docex_core::model::{validate, Dataset, Document, Split};
use docex_core::rng::{scaled_count, stable_hash};
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, write_string, Error, Result};

mod cuad;
mod funsd;
mod kleister;
mod sroie;

pub const MANIFEST: &str = "dataset.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Canonical,
    Funsd,
    Sroie,
    Kleister,
    Cuad,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim_end_matches("-style") {
            "canonical" => Ok(Format::Canonical),
            "funsd" => Ok(Format::Funsd),
            "sroie" => Ok(Format::Sroie),
            "kleister" => Ok(Format::Kleister),
            "cuad" => Ok(Format::Cuad),
            _ => Err(format!("unknown dataset format {s:?}")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Canonical => "canonical",
            Format::Funsd => "funsd",
            Format::Sroie => "sroie",
            Format::Kleister => "kleister",
            Format::Cuad => "cuad",
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    name: String,
    label_set: Vec<String>,
    splits: Vec<String>,
}

/// A loaded dataset plus adapter notes (annotations that could not be placed).
#[derive(Debug)]
pub struct Loaded {
    pub dataset: Dataset,
    pub notes: Vec<String>,
}

pub fn load(path: &Path, format: Format) -> Result<Dataset> {
    Ok(load_with_notes(path, format)?.dataset)
}

pub fn load_with_notes(path: &Path, format: Format) -> Result<Loaded> {
    let loaded = match format {
        Format::Canonical => Loaded { dataset: load_canonical(path)?, notes: Vec::new() },
        Format::Funsd => funsd::load(path)?,
        Format::Sroie => sroie::load(path)?,
        Format::Kleister => kleister::load(path)?,
        Format::Cuad => cuad::load(path)?,
    };
    let violations = validate(&loaded.dataset);
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }
    Ok(loaded)
}

fn dataset_dir(path: &Path) -> PathBuf {
    if path.is_file() {
        path.parent().map(Path::to_path_buf).unwrap_or_default()
    } else {
        path.to_path_buf()
    }
}

pub fn split_path(dir: &Path, split: &str) -> PathBuf {
    dir.join(format!("{split}.json"))
}

fn load_canonical(path: &Path) -> Result<Dataset> {
    let dir = dataset_dir(path);
    let manifest_path = dir.join(MANIFEST);
    let content = read_to_string(&manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&content).map_err(|e| Error::json(&manifest_path, &content, e))?;
    let mut splits = Vec::with_capacity(manifest.splits.len());
    for name in manifest.splits {
        let documents = read_documents(&split_path(&dir, &name))?;
        splits.push(Split { name, documents });
    }
    Ok(Dataset { name: manifest.name, label_set: manifest.label_set, splits })
}

/// Reads one split file.
pub fn read_documents(path: &Path) -> Result<Vec<Document>> {
    let content = read_to_string(path)?;
    serde_json::from_str(&content).map_err(|e| Error::json(path, &content, e))
}

pub fn documents_to_string(documents: &[Document]) -> String {
    let mut s = serde_json::to_string_pretty(documents).expect("documents serialize");
    s.push('\n');
    s
}

/// Writes the dataset in canonical form. The dataset must be valid.
pub fn save(dataset: &Dataset, dir: &Path) -> Result<()> {
    let violations = validate(dataset);
    if !violations.is_empty() {
        return Err(Error::Invalid(violations));
    }
    let manifest = Manifest {
        name: dataset.name.clone(),
        label_set: dataset.label_set.clone(),
        splits: dataset.splits.iter().map(|s| s.name.clone()).collect(),
    };
    let mut m = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    m.push('\n');
    write_string(&dir.join(MANIFEST), &m)?;
    for split in &dataset.splits {
        write_string(&split_path(dir, &split.name), &documents_to_string(&split.documents))?;
    }
    Ok(())
}

/// Deterministic train/test split of one split by hashed document id.
/// Documents keep their relative order inside each output split.
pub fn split_by_id(dataset: &Dataset, source: &str, train_fraction: f64) -> Result<Dataset> {
    let split = dataset
        .split(source)
        .ok_or_else(|| Error::Format(format!("dataset has no split {source:?}")))?;
    let mut order: Vec<usize> = (0..split.documents.len()).collect();
    order.sort_by_key(|&i| (stable_hash(split.documents[i].id.as_bytes()), split.documents[i].id.clone()));
    let n_train = scaled_count(train_fraction, order.len());
    let mut is_train = vec![false; order.len()];
    for &i in &order[..n_train] {
        is_train[i] = true;
    }
    let (train, test): (Vec<_>, Vec<_>) = split.documents.iter().cloned().zip(is_train).partition(|(_, t)| *t);
    let mut out = dataset.clone();
    out.splits.retain(|s| s.name != source && s.name != "train" && s.name != "test");
    out.splits.insert(0, Split::new("train", train.into_iter().map(|(d, _)| d).collect()));
    out.splits.insert(1, Split::new("test", test.into_iter().map(|(d, _)| d).collect()));
    Ok(out)
}

/// Finds the first occurrence of `needle` in `haystack` whose tokens are all
/// still free. Used by adapters whose annotations are strings, not offsets.
pub(crate) fn locate(haystack: &[String], needle: &[&str], taken: &[bool]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    (0..=haystack.len() - needle.len()).find(|&s| {
        needle.iter().enumerate().all(|(j, w)| haystack[s + j] == *w) && !taken[s..s + needle.len()].iter().any(|t| *t)
    })
}
