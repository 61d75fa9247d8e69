//! Kleister layout: `<root>/<dir>/in.tsv` (document text in the last column,
//! with `\n`/`\t` escapes) and `<root>/<dir>/expected.tsv` (space separated
//! `key=value` pairs, spaces in values written as `_`). `train` maps to the
//! train split, `dev-0` to validation, `test-A` to test. Documents carry no
//! layout, so every box is zero.

use std::path::Path;

use docex_core::model::{BBox, Dataset, Document, Split, Word};

use super::{locate, Loaded};
use crate::error::{read_to_string, Error, Result};

pub const LABELS: [&str; 4] = ["effective_date", "jurisdiction", "party", "term"];

pub(super) fn load(root: &Path) -> Result<Loaded> {
    let mut splits = Vec::new();
    let mut notes = Vec::new();
    for (dir, name) in [("train", "train"), ("dev-0", "validation"), ("test-A", "test")] {
        let input = root.join(dir).join("in.tsv");
        if !input.is_file() {
            continue;
        }
        let content = read_to_string(&input)?;
        let expected_path = root.join(dir).join("expected.tsv");
        let expected = if expected_path.is_file() { read_to_string(&expected_path)? } else { String::new() };
        let mut expected_lines = expected.lines();
        let mut documents = Vec::new();
        for (n, line) in content.lines().enumerate() {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 {
                return Err(Error::Format(format!("{}:{}: expected tab-separated columns", input.display(), n + 1)));
            }
            let id = cols[0].to_string();
            let text = cols[cols.len() - 1].replace("\\n", " ").replace("\\t", " ");
            let words = text.split_whitespace().map(|w| Word::new(w, 0, BBox::default())).collect();
            let mut doc = Document::from_words(&id, words);
            let pairs = expected_lines.next().unwrap_or_default();
            doc.entities = place(&doc, pairs, &mut notes);
            documents.push(doc);
        }
        splits.push(Split::new(name, documents));
    }
    if splits.is_empty() {
        return Err(Error::Format(format!("{}: no <dir>/in.tsv found", root.display())));
    }
    Ok(Loaded {
        dataset: Dataset {
            name: "kleister-nda".into(),
            label_set: LABELS.iter().map(|s| s.to_string()).collect(),
            splits,
        },
        notes,
    })
}

fn place(doc: &Document, pairs: &str, notes: &mut Vec<String>) -> Vec<docex_core::Entity> {
    let texts: Vec<String> = doc.tokens.iter().map(|t| t.text.clone()).collect();
    let mut taken = vec![false; texts.len()];
    let mut spans = Vec::new();
    for pair in pairs.split_whitespace() {
        let Some((key, value)) = pair.split_once('=') else { continue };
        if !LABELS.contains(&key) {
            continue;
        }
        let value = value.replace('_', " ");
        let needle: Vec<&str> = value.split_whitespace().collect();
        match locate(&texts, &needle, &taken) {
            Some(s) => {
                taken[s..s + needle.len()].iter_mut().for_each(|t| *t = true);
                spans.push((key.to_string(), s, needle.len()));
            }
            None => notes.push(format!("{}: {key} value {value:?} not found verbatim", doc.id)),
        }
    }
    spans.sort_by_key(|s| s.1);
    spans.into_iter().map(|(l, s, n)| doc.entity(l, s, n)).collect()
}
