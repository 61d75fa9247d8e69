//! FUNSD layout: `<root>/{training_data,testing_data}/annotations/<id>.json`
//! with optional page images in the sibling `images/` directory.

use std::path::Path;

use docex_core::model::{BBox, Dataset, Document, Split, Word};
use serde::Deserialize;

use super::Loaded;
use crate::error::{read_to_string, Error, Result};

pub const LABELS: [&str; 3] = ["question", "answer", "header"];

#[derive(Deserialize)]
struct Form {
    form: Vec<Item>,
}

#[derive(Deserialize)]
struct Item {
    label: String,
    words: Vec<RawWord>,
}

#[derive(Deserialize)]
struct RawWord {
    text: String,
    #[serde(rename = "box")]
    bbox: [f64; 4],
}

pub(super) fn load(root: &Path) -> Result<Loaded> {
    let mut splits = Vec::new();
    let mut notes = Vec::new();
    for (dir, name) in [("training_data", "train"), ("testing_data", "test")] {
        let ann = root.join(dir).join("annotations");
        if !ann.is_dir() {
            continue;
        }
        let mut files: Vec<_> = std::fs::read_dir(&ann)
            .map_err(|e| Error::io(&ann, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let mut documents = Vec::with_capacity(files.len());
        for f in files {
            let id = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let image = root.join(dir).join("images").join(format!("{id}.png"));
            documents.push(parse_form(&id, &f, &image, &mut notes)?);
        }
        splits.push(Split::new(name, documents));
    }
    if splits.is_empty() {
        return Err(Error::Format(format!("{}: no training_data/ or testing_data/ annotations", root.display())));
    }
    Ok(Loaded {
        dataset: Dataset { name: "funsd".into(), label_set: LABELS.iter().map(|s| s.to_string()).collect(), splits },
        notes,
    })
}

fn parse_form(id: &str, path: &Path, image: &Path, notes: &mut Vec<String>) -> Result<Document> {
    let content = read_to_string(path)?;
    let form: Form = serde_json::from_str(&content).map_err(|e| Error::json(path, &content, e))?;
    let (width, height) = match imagesize::size(image) {
        Ok(s) => (s.width as f64, s.height as f64),
        Err(_) => extent(form.form.iter().flat_map(|i| i.words.iter().map(|w| w.bbox))),
    };

    let mut words = Vec::new();
    let mut spans = Vec::new();
    for item in &form.form {
        let start = words.len();
        for w in &item.words {
            for piece in w.text.split_whitespace() {
                words.push(Word::new(piece, 0, BBox::normalize(w.bbox, width, height)));
            }
        }
        let len = words.len() - start;
        if len > 0 && LABELS.contains(&item.label.as_str()) {
            spans.push((item.label.clone(), start, len));
        } else if len == 0 && item.label != "other" {
            notes.push(format!("{id}: {} item without words skipped", item.label));
        }
    }
    let mut doc = Document::from_words(id, words);
    doc.entities = spans.into_iter().map(|(l, s, n)| doc.entity(l, s, n)).collect();
    Ok(doc)
}

/// Page size guess from the largest coordinates when no image is available.
pub(super) fn extent(boxes: impl Iterator<Item = [f64; 4]>) -> (f64, f64) {
    boxes.fold((1.0f64, 1.0f64), |(w, h), b| (w.max(b[0]).max(b[2]), h.max(b[1]).max(b[3])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load, Format};

    #[test]
    fn reads_forms_and_drops_other() {
        let dir = tempfile::tempdir().unwrap();
        let ann = dir.path().join("training_data/annotations");
        std::fs::create_dir_all(&ann).unwrap();
        std::fs::write(
            ann.join("0001.json"),
            r#"{"form": [
                {"id": 0, "label": "question", "text": "Date:", "box": [0,0,50,10],
                 "words": [{"text": "Date:", "box": [0,0,50,10]}], "linking": []},
                {"id": 1, "label": "answer", "text": "May 3", "box": [60,0,120,10],
                 "words": [{"text": "May", "box": [60,0,90,10]}, {"text": "3", "box": [95,0,120,10]}], "linking": []},
                {"id": 2, "label": "other", "text": "x", "box": [0,20,10,30],
                 "words": [{"text": "x", "box": [0,20,10,200]}], "linking": []}
            ]}"#,
        )
        .unwrap();
        let ds = load(dir.path(), Format::Funsd).unwrap();
        let doc = &ds.split("train").unwrap().documents[0];
        assert_eq!(doc.text, "Date: May 3 x");
        assert_eq!(doc.entities.len(), 2);
        assert_eq!(doc.entities[1].text, "May 3");
        assert_eq!(doc.tokens[3].bbox, BBox::new(0, 100, 83, 1000));
    }
}
