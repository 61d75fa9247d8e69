//! SQuAD-style serialization of converted QA splits.
//!
//! One file per split: `data` holds one entry per document (`title` is the
//! document id) with a single paragraph whose `qas` are the document's
//! samples. `answer_start` is a character offset into `context`. Each qa also
//! carries its source `label`, which standard QA tooling ignores.

use std::path::Path;

use docex_core::model::Split;
use docex_core::qa::{Answer, QaSample, QaSplit};
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, write_string, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquadFile {
    pub version: String,
    pub data: Vec<SquadArticle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquadArticle {
    pub title: String,
    pub paragraphs: Vec<SquadParagraph>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquadParagraph {
    pub context: String,
    pub qas: Vec<SquadQa>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquadQa {
    pub id: String,
    pub question: String,
    pub label: String,
    pub answers: Vec<SquadAnswer>,
    pub is_impossible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquadAnswer {
    pub text: String,
    pub answer_start: usize,
}

pub const VERSION: &str = "docex-qa-1";

/// Builds the SQuAD layout; contexts come from the source split.
pub fn to_squad(qa: &QaSplit, source: &Split) -> Result<SquadFile> {
    let mut data: Vec<SquadArticle> = Vec::new();
    for s in &qa.samples {
        let qa_entry = SquadQa {
            id: format!("{}::{}", s.doc_id, s.label),
            question: s.question.clone(),
            label: s.label.clone(),
            answers: s.answers.iter().map(|a| SquadAnswer { text: a.text.clone(), answer_start: a.char_start }).collect(),
            is_impossible: s.unanswerable,
        };
        match data.last_mut() {
            Some(a) if a.title == s.doc_id => a.paragraphs[0].qas.push(qa_entry),
            _ => {
                let doc = source
                    .find(&s.doc_id)
                    .ok_or_else(|| Error::Format(format!("sample refers to unknown document {:?}", s.doc_id)))?;
                data.push(SquadArticle {
                    title: s.doc_id.clone(),
                    paragraphs: vec![SquadParagraph { context: doc.text.clone(), qas: vec![qa_entry] }],
                });
            }
        }
    }
    Ok(SquadFile { version: VERSION.to_string(), data })
}

/// Reads samples back from the SQuAD layout.
pub fn from_squad(file: &SquadFile, split_name: &str) -> QaSplit {
    let mut samples = Vec::new();
    for article in &file.data {
        for p in &article.paragraphs {
            for q in &p.qas {
                samples.push(QaSample {
                    doc_id: article.title.clone(),
                    question: q.question.clone(),
                    label: q.label.clone(),
                    answers: q
                        .answers
                        .iter()
                        .map(|a| Answer { char_start: a.answer_start, char_len: a.text.chars().count(), text: a.text.clone() })
                        .collect(),
                    unanswerable: q.is_impossible,
                });
            }
        }
    }
    QaSplit { name: split_name.to_string(), samples }
}

pub fn write(path: &Path, file: &SquadFile) -> Result<()> {
    let mut s = serde_json::to_string_pretty(file).expect("squad file serializes");
    s.push('\n');
    write_string(path, &s)
}

pub fn read(path: &Path) -> Result<SquadFile> {
    let content = read_to_string(path)?;
    serde_json::from_str(&content).map_err(|e| Error::json(path, &content, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use docex_core::model::{BBox, Dataset, Document, Word};
    use docex_core::qa::{to_qa, DEFAULT_TEMPLATE};

    #[test]
    fn squad_round_trip() {
        let mut d = Document::from_words(
            "r1",
            ["Zoë", "Café", "Ltd", "paid", "€5"].iter().map(|w| Word::new(*w, 0, BBox::default())).collect(),
        );
        d.entities = vec![d.entity("company", 1, 2), d.entity("total", 4, 1)];
        let ds = Dataset {
            name: "x".into(),
            label_set: vec!["company".into(), "total".into(), "date".into()],
            splits: vec![Split::new("train", vec![d])],
        };
        let qa = to_qa(&ds, DEFAULT_TEMPLATE, true).unwrap();
        let file = to_squad(&qa.splits[0], &ds.splits[0]).unwrap();
        assert_eq!(file.data.len(), 1);
        let q = &file.data[0].paragraphs[0].qas;
        assert_eq!(q.len(), 3);
        assert_eq!(q[0].answers[0], SquadAnswer { text: "Café Ltd".into(), answer_start: 4 });
        assert!(q[2].is_impossible);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.json");
        write(&path, &file).unwrap();
        let back = read(&path).unwrap();
        assert_eq!(back, file);
        assert_eq!(from_squad(&back, "train"), qa.splits[0]);
    }
}
