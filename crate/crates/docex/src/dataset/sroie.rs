//! SROIE layout: `<root>/<split>/box/<id>.txt` holds OCR lines
//! (`x1,y1,x2,y2,x3,y3,x4,y4,text`) and `<root>/<split>/entities/<id>.txt`
//! holds the key-value JSON. Values are located in the OCR token stream.

use std::collections::BTreeMap;
use std::path::Path;

use docex_core::model::{BBox, Dataset, Document, Split, Word};

use super::funsd::extent;
use super::{locate, Loaded};
use crate::error::{read_to_string, Error, Result};

pub const LABELS: [&str; 4] = ["company", "date", "address", "total"];

pub(super) fn load(root: &Path) -> Result<Loaded> {
    let mut splits = Vec::new();
    let mut notes = Vec::new();
    for name in ["train", "validation", "test"] {
        let boxes = root.join(name).join("box");
        if !boxes.is_dir() {
            continue;
        }
        let mut files: Vec<_> = std::fs::read_dir(&boxes)
            .map_err(|e| Error::io(&boxes, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        let mut documents = Vec::with_capacity(files.len());
        for f in files {
            let id = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let entities = root.join(name).join("entities").join(format!("{id}.txt"));
            documents.push(parse(&id, &f, &entities, &mut notes)?);
        }
        splits.push(Split::new(name, documents));
    }
    if splits.is_empty() {
        return Err(Error::Format(format!("{}: no <split>/box/ directories", root.display())));
    }
    Ok(Loaded {
        dataset: Dataset { name: "sroie".into(), label_set: LABELS.iter().map(|s| s.to_string()).collect(), splits },
        notes,
    })
}

fn parse(id: &str, box_path: &Path, entity_path: &Path, notes: &mut Vec<String>) -> Result<Document> {
    let content = read_to_string(box_path)?;
    let mut lines = Vec::new();
    for (n, line) in content.lines().enumerate() {
        let line = line.trim_start_matches('\u{feff}');
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.splitn(9, ',').collect();
        if parts.len() < 9 {
            return Err(Error::Format(format!("{}:{}: expected 8 coordinates and text", box_path.display(), n + 1)));
        }
        let mut coords = [0f64; 8];
        for (c, p) in coords.iter_mut().zip(&parts[..8]) {
            *c = p.trim().parse().map_err(|_| {
                Error::Format(format!("{}:{}: bad coordinate {p:?}", box_path.display(), n + 1))
            })?;
        }
        let xs = [coords[0], coords[2], coords[4], coords[6]];
        let ys = [coords[1], coords[3], coords[5], coords[7]];
        let min = |v: [f64; 4]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |v: [f64; 4]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lines.push(([min(xs), min(ys), max(xs), max(ys)], parts[8].to_string()));
    }
    let (w, h) = extent(lines.iter().map(|(b, _)| *b));
    let words: Vec<Word> = lines
        .iter()
        .flat_map(|(b, text)| text.split_whitespace().map(move |t| Word::new(t, 0, BBox::normalize(*b, w, h))))
        .collect();
    let mut doc = Document::from_words(id, words);

    if entity_path.is_file() {
        let raw = read_to_string(entity_path)?;
        let values: BTreeMap<String, String> =
            serde_json::from_str(raw.trim_start_matches('\u{feff}')).map_err(|e| Error::json(entity_path, &raw, e))?;
        let texts: Vec<String> = doc.tokens.iter().map(|t| t.text.clone()).collect();
        let mut taken = vec![false; texts.len()];
        let mut spans = Vec::new();
        for label in LABELS {
            let Some(value) = values.get(label) else { continue };
            let needle: Vec<&str> = value.split_whitespace().collect();
            match locate(&texts, &needle, &taken) {
                Some(s) => {
                    taken[s..s + needle.len()].iter_mut().for_each(|t| *t = true);
                    spans.push((label, s, needle.len()));
                }
                None => notes.push(format!("{id}: {label} value {value:?} not found in OCR tokens")),
            }
        }
        spans.sort_by_key(|&(_, s, _)| s);
        doc.entities = spans.into_iter().map(|(l, s, n)| doc.entity(l, s, n)).collect();
    }
    Ok(doc)
}
