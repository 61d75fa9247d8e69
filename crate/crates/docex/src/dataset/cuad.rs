//! CUAD layout: a SQuAD-style JSON file (`CUADv1.json`, or the path given
//! directly). Question ids end in `__<Category>`; each answer is a character
//! span of the contract text and becomes an entity over the words it touches.
//! Everything lands in one `train` split; use [`super::split_by_id`] for a
//! held-out test split.

use std::path::{Path, PathBuf};

use docex_core::model::{BBox, Dataset, Document, Split, Word};
use serde::Deserialize;

use super::Loaded;
use crate::error::{read_to_string, Error, Result};

#[derive(Deserialize)]
struct Squad {
    data: Vec<Article>,
}

#[derive(Deserialize)]
struct Article {
    title: String,
    paragraphs: Vec<Paragraph>,
}

#[derive(Deserialize)]
struct Paragraph {
    context: String,
    qas: Vec<Qa>,
}

#[derive(Deserialize)]
struct Qa {
    id: String,
    #[serde(default)]
    answers: Vec<RawAnswer>,
}

#[derive(Deserialize)]
struct RawAnswer {
    text: String,
    answer_start: usize,
}

fn source_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("CUADv1.json")
    } else {
        path.to_path_buf()
    }
}

pub(super) fn load(path: &Path) -> Result<Loaded> {
    let file = source_file(path);
    let content = read_to_string(&file)?;
    let squad: Squad = serde_json::from_str(&content).map_err(|e| Error::json(&file, &content, e))?;
    let mut labels: Vec<String> = Vec::new();
    let mut documents = Vec::new();
    let mut notes = Vec::new();
    for article in squad.data {
        for (p, para) in article.paragraphs.into_iter().enumerate() {
            let id = if p == 0 { article.title.clone() } else { format!("{}#{p}", article.title) };
            let (doc, dropped) = build(&id, &para, &mut labels);
            if dropped > 0 {
                notes.push(format!("{id}: {dropped} overlapping or empty answer(s) dropped"));
            }
            documents.push(doc);
        }
    }
    Ok(Loaded {
        dataset: Dataset { name: "cuad".into(), label_set: labels, splits: vec![Split::new("train", documents)] },
        notes,
    })
}

fn build(id: &str, para: &Paragraph, labels: &mut Vec<String>) -> (Document, usize) {
    // Word char ranges in the original context.
    let mut ranges = Vec::new();
    let mut words = Vec::new();
    let mut start: Option<usize> = None;
    let chars: Vec<char> = para.context.chars().collect();
    for (i, c) in chars.iter().enumerate().chain(std::iter::once((chars.len(), &' '))) {
        match (c.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                ranges.push((s, i));
                words.push(Word::new(chars[s..i].iter().collect::<String>(), 0, BBox::default()));
                start = None;
            }
            _ => {}
        }
    }
    let doc_words = Document::from_words(id, words);

    let mut taken = vec![false; ranges.len()];
    let mut spans = Vec::new();
    let mut dropped = 0;
    for qa in &para.qas {
        let label = qa.id.rsplit("__").next().unwrap_or(&qa.id).to_string();
        if !labels.contains(&label) {
            labels.push(label.clone());
        }
        for a in &qa.answers {
            let end = a.answer_start + a.text.chars().count();
            let covered: Vec<usize> =
                (0..ranges.len()).filter(|&w| ranges[w].0 < end && a.answer_start < ranges[w].1).collect();
            let (Some(&s), Some(&e)) = (covered.first(), covered.last()) else {
                dropped += 1;
                continue;
            };
            if taken[s..=e].iter().any(|t| *t) {
                dropped += 1;
                continue;
            }
            taken[s..=e].iter_mut().for_each(|t| *t = true);
            spans.push((label.clone(), s, e - s + 1));
        }
    }
    spans.sort_by_key(|s| s.1);
    let mut doc = doc_words;
    doc.entities = spans.into_iter().map(|(l, s, n)| doc.entity(l, s, n)).collect();
    (doc, dropped)
}
