//! Conversion of token-classification datasets into extractive QA samples.
//!
//! Every `(document, label)` pair with at least one entity of that label
//! becomes one sample whose question is generated from a fixed template and
//! whose answers are all the label's entities in that document.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Dataset, Document};

pub const LABEL_PLACEHOLDER: &str = "<LABEL>";
pub const DEFAULT_TEMPLATE: &str = "What is the <LABEL>?";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QaError {
    /// The template must contain exactly one placeholder.
    BadTemplate { template: String, placeholders: usize },
    EmptyLabel,
}

impl fmt::Display for QaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QaError::BadTemplate { template, placeholders } => write!(
                f,
                "template {template:?} must contain exactly one {LABEL_PLACEHOLDER} placeholder, found {placeholders}"
            ),
            QaError::EmptyLabel => f.write_str("label is empty"),
        }
    }
}

impl core::error::Error for QaError {}

/// Human-readable form of a label: underscores become spaces, lower-cased,
/// whitespace collapsed.
pub fn humanize_label(label: &str) -> String {
    let spaced = label.replace('_', " ");
    let mut out = String::with_capacity(spaced.len());
    for (i, w) in spaced.split_whitespace().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&w.to_lowercase());
    }
    out
}

pub fn check_template(template: &str) -> Result<(), QaError> {
    let placeholders = template.matches(LABEL_PLACEHOLDER).count();
    if placeholders != 1 {
        return Err(QaError::BadTemplate { template: template.to_string(), placeholders });
    }
    Ok(())
}

pub fn label_to_question(label: &str, template: &str) -> Result<String, QaError> {
    check_template(template)?;
    let human = humanize_label(label);
    if human.is_empty() {
        return Err(QaError::EmptyLabel);
    }
    Ok(template.replacen(LABEL_PLACEHOLDER, &human, 1))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub char_start: usize,
    pub char_len: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaSample {
    pub doc_id: String,
    pub question: String,
    pub label: String,
    pub answers: Vec<Answer>,
    /// Set only on samples emitted for labels absent from the document.
    #[serde(default)]
    pub unanswerable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaSplit {
    pub name: String,
    pub samples: Vec<QaSample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaDataset {
    pub name: String,
    pub label_set: Vec<String>,
    /// Name of the token-classification dataset the samples were built from.
    pub source: String,
    pub splits: Vec<QaSplit>,
}

impl QaDataset {
    pub fn split(&self, name: &str) -> Option<&QaSplit> {
        self.splits.iter().find(|s| s.name == name)
    }
}

/// Samples for one document, in label-set order.
pub fn document_samples(
    doc: &Document,
    label_set: &[String],
    template: &str,
    include_unanswerable: bool,
) -> Result<Vec<QaSample>, QaError> {
    let mut out = Vec::new();
    for label in label_set {
        let answers: Vec<Answer> = doc
            .entities
            .iter()
            .filter(|e| e.label == *label)
            .map(|e| {
                let (char_start, char_len) = doc.char_span(e.token_start, e.token_len);
                let text = doc.text_slice(char_start, char_len).unwrap_or_default().to_string();
                Answer { char_start, char_len, text }
            })
            .collect();
        if answers.is_empty() && !include_unanswerable {
            continue;
        }
        out.push(QaSample {
            doc_id: doc.id.clone(),
            question: label_to_question(label, template)?,
            label: label.clone(),
            unanswerable: answers.is_empty(),
            answers,
        });
    }
    Ok(out)
}

pub fn to_qa(dataset: &Dataset, template: &str, include_unanswerable: bool) -> Result<QaDataset, QaError> {
    check_template(template)?;
    let mut splits = Vec::with_capacity(dataset.splits.len());
    for split in &dataset.splits {
        let mut samples = Vec::new();
        for doc in &split.documents {
            samples.extend(document_samples(doc, &dataset.label_set, template, include_unanswerable)?);
        }
        splits.push(QaSplit { name: split.name.clone(), samples });
    }
    Ok(QaDataset {
        name: alloc::format!("{}-qa", dataset.name),
        label_set: dataset.label_set.clone(),
        source: dataset.name.clone(),
        splits,
    })
}

/// `(split name, sample count)` per split.
pub fn qa_stats(qa: &QaDataset) -> Vec<(String, usize)> {
    qa.splits.iter().map(|s| (s.name.clone(), s.samples.len())).collect()
}

/// Maps generated questions back to their labels.
#[derive(Debug, Clone, Default)]
pub struct QuestionIndex {
    entries: Vec<(String, String)>,
}

impl QuestionIndex {
    pub fn new(label_set: &[String], template: &str) -> Result<Self, QaError> {
        let mut entries = Vec::with_capacity(label_set.len());
        for l in label_set {
            entries.push((label_to_question(l, template)?, l.clone()));
        }
        Ok(QuestionIndex { entries })
    }

    pub fn label_for(&self, question: &str) -> Option<&str> {
        self.entries.iter().find(|(q, _)| q == question).map(|(_, l)| l.as_str())
    }
}
