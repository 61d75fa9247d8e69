//! Canonical in-memory data model: tokens, entities, documents and datasets.
//!
//! Tokens are word-level. Every document's `text` is the context handed to a
//! question-answering scorer; token `char_start`/`char_len` are measured in
//! Unicode scalar values, the same unit SQuAD-style `answer_start` uses.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Upper bound of the normalized page coordinate system.
pub const BOX_SCALE: u32 = 1000;

/// Bounding box `[x0, y0, x1, y1]` in normalized `[0, 1000]` page coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BBox(pub [u32; 4]);

impl BBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Self {
        BBox([x0, y0, x1, y1])
    }

    /// Scales a box given in page units into normalized coordinates, clamping
    /// to the page and fixing inverted corners.
    pub fn normalize(raw: [f64; 4], page_width: f64, page_height: f64) -> Self {
        let scale = |v: f64, extent: f64| -> u32 {
            if extent <= 0.0 {
                return 0;
            }
            let s = v / extent * BOX_SCALE as f64;
            if s <= 0.0 {
                0
            } else if s >= BOX_SCALE as f64 {
                BOX_SCALE
            } else {
                s as u32
            }
        };
        let (mut x0, mut y0) = (scale(raw[0], page_width), scale(raw[1], page_height));
        let (mut x1, mut y1) = (scale(raw[2], page_width), scale(raw[3], page_height));
        if x0 > x1 {
            core::mem::swap(&mut x0, &mut x1);
        }
        if y0 > y1 {
            core::mem::swap(&mut y0, &mut y1);
        }
        BBox([x0, y0, x1, y1])
    }

    pub fn is_normalized(&self) -> bool {
        let [x0, y0, x1, y1] = self.0;
        x0 <= x1 && y0 <= y1 && x1 <= BOX_SCALE && y1 <= BOX_SCALE
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub page: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub char_start: usize,
    pub char_len: usize,
}

impl Token {
    pub fn char_end(&self) -> usize {
        self.char_start + self.char_len
    }
}

/// A labeled, contiguous run of word tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Entity {
    pub label: String,
    pub token_start: usize,
    pub token_len: usize,
    pub text: String,
}

impl Entity {
    /// Exclusive end token index.
    pub fn token_end(&self) -> usize {
        self.token_start + self.token_len
    }

    pub fn overlaps(&self, other: &Entity) -> bool {
        self.token_start < other.token_end() && other.token_start < self.token_end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<Token>,
    pub text: String,
    pub entities: Vec<Entity>,
}

/// A word as read from a source layout, before offsets are assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    pub text: String,
    pub page: u32,
    pub bbox: BBox,
}

impl Word {
    pub fn new(text: impl Into<String>, page: u32, bbox: BBox) -> Self {
        Word { text: text.into(), page, bbox }
    }
}

impl Document {
    /// Builds a document whose text is the single-space join of `words`.
    /// Words must not contain whitespace.
    pub fn from_words(id: impl Into<String>, words: Vec<Word>) -> Self {
        let mut text = String::new();
        let mut tokens = Vec::with_capacity(words.len());
        let mut offset = 0usize;
        for (i, w) in words.into_iter().enumerate() {
            if i > 0 {
                text.push(' ');
                offset += 1;
            }
            let char_len = w.text.chars().count();
            text.push_str(&w.text);
            tokens.push(Token { text: w.text, page: w.page, bbox: w.bbox, char_start: offset, char_len });
            offset += char_len;
        }
        Document { id: id.into(), tokens, text, entities: Vec::new() }
    }

    /// Single-space join of the token texts in `[start, start + len)`.
    pub fn span_text(&self, start: usize, len: usize) -> String {
        let mut out = String::new();
        for (i, t) in self.tokens[start..start + len].iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&t.text);
        }
        out
    }

    /// Creates an entity over `[start, start + len)` with its text filled in.
    /// Panics if the range is outside the token list.
    pub fn entity(&self, label: impl Into<String>, start: usize, len: usize) -> Entity {
        Entity { label: label.into(), token_start: start, token_len: len, text: self.span_text(start, len) }
    }

    /// Character span `(char_start, char_len)` of a token range in `text`.
    pub fn char_span(&self, start: usize, len: usize) -> (usize, usize) {
        let first = &self.tokens[start];
        let last = &self.tokens[start + len - 1];
        (first.char_start, last.char_end() - first.char_start)
    }

    /// Substring of `text` by character offsets; `None` when out of range.
    pub fn text_slice(&self, char_start: usize, char_len: usize) -> Option<&str> {
        char_slice(&self.text, char_start, char_len)
    }

    pub fn char_count(&self) -> usize {
        self.text.chars().count()
    }
}

/// Substring by Unicode-scalar offsets.
pub fn char_slice(s: &str, char_start: usize, char_len: usize) -> Option<&str> {
    let mut indices = s.char_indices().map(|(i, _)| i).chain(core::iter::once(s.len()));
    let begin = indices.nth(char_start)?;
    if char_len == 0 {
        return Some(&s[begin..begin]);
    }
    let end = indices.nth(char_len - 1)?;
    Some(&s[begin..end])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub name: String,
    pub documents: Vec<Document>,
}

impl Split {
    pub fn new(name: impl Into<String>, documents: Vec<Document>) -> Self {
        Split { name: name.into(), documents }
    }

    pub fn entity_count(&self) -> usize {
        self.documents.iter().map(|d| d.entities.len()).sum()
    }

    pub fn find(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == doc_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub label_set: Vec<String>,
    pub splits: Vec<Split>,
}

impl Dataset {
    pub fn split(&self, name: &str) -> Option<&Split> {
        self.splits.iter().find(|s| s.name == name)
    }

    pub fn split_mut(&mut self, name: &str) -> Option<&mut Split> {
        self.splits.iter_mut().find(|s| s.name == name)
    }

    pub fn find_document(&self, doc_id: &str) -> Option<&Document> {
        self.splits.iter().find_map(|s| s.find(doc_id))
    }
}

/// The invariant a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    BoxOutOfRange,
    TokenOrder,
    TokenOutsideText,
    EmptySpan,
    SpanOutOfRange,
    TextMismatch,
    Overlap,
    UnknownLabel,
    DuplicateDocumentId,
    DuplicateSplit,
}

impl Rule {
    pub fn describe(&self) -> &'static str {
        match self {
            Rule::BoxOutOfRange => "box out of range",
            Rule::TokenOrder => "token order",
            Rule::TokenOutsideText => "token outside text",
            Rule::EmptySpan => "empty span",
            Rule::SpanOutOfRange => "span out of range",
            Rule::TextMismatch => "text mismatch",
            Rule::Overlap => "overlap",
            Rule::UnknownLabel => "unknown label",
            Rule::DuplicateDocumentId => "duplicate document id",
            Rule::DuplicateSplit => "duplicate split",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Split the offending document lives in (or the duplicated split name).
    pub split: String,
    pub doc_id: Option<String>,
    pub field: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.doc_id {
            Some(id) => write!(f, "{}/{}: {}: {}", self.split, id, self.field, self.rule.describe()),
            None => write!(f, "{}: {}: {}", self.split, self.field, self.rule.describe()),
        }
    }
}

/// Checks every dataset invariant. An empty result means the dataset is valid.
pub fn validate(dataset: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut split_names = BTreeSet::new();
    for split in &dataset.splits {
        if !split_names.insert(split.name.as_str()) {
            out.push(Violation {
                split: split.name.clone(),
                doc_id: None,
                field: String::from("name"),
                rule: Rule::DuplicateSplit,
            });
        }
        let mut ids = BTreeSet::new();
        for doc in &split.documents {
            if !ids.insert(doc.id.as_str()) {
                out.push(violation(split, doc, String::from("id"), Rule::DuplicateDocumentId));
            }
            validate_document_into(&dataset.label_set, split, doc, &mut out);
        }
    }
    out
}

/// Checks one document against the label set.
pub fn validate_document(label_set: &[String], doc: &Document) -> Vec<Violation> {
    let split = Split::new("", Vec::new());
    let mut out = Vec::new();
    validate_document_into(label_set, &split, doc, &mut out);
    out
}

fn violation(split: &Split, doc: &Document, field: String, rule: Rule) -> Violation {
    Violation { split: split.name.clone(), doc_id: Some(doc.id.clone()), field, rule }
}

fn validate_document_into(label_set: &[String], split: &Split, doc: &Document, out: &mut Vec<Violation>) {
    let text_len = doc.char_count();
    let mut prev_end = 0usize;
    for (i, tok) in doc.tokens.iter().enumerate() {
        if !tok.bbox.is_normalized() {
            out.push(violation(split, doc, format!("tokens[{i}].box"), Rule::BoxOutOfRange));
        }
        if i > 0 && tok.char_start < prev_end {
            out.push(violation(split, doc, format!("tokens[{i}].char_start"), Rule::TokenOrder));
        }
        if tok.char_end() > text_len {
            out.push(violation(split, doc, format!("tokens[{i}].char_len"), Rule::TokenOutsideText));
        }
        prev_end = tok.char_end();
    }

    let n = doc.tokens.len();
    let mut in_range = Vec::with_capacity(doc.entities.len());
    for (i, e) in doc.entities.iter().enumerate() {
        if !label_set.contains(&e.label) {
            out.push(violation(split, doc, format!("entities[{i}].label"), Rule::UnknownLabel));
        }
        if e.token_len == 0 {
            out.push(violation(split, doc, format!("entities[{i}].token_len"), Rule::EmptySpan));
            continue;
        }
        if e.token_end() > n {
            out.push(violation(split, doc, format!("entities[{i}].token_start"), Rule::SpanOutOfRange));
            continue;
        }
        if doc.span_text(e.token_start, e.token_len) != e.text {
            out.push(violation(split, doc, format!("entities[{i}].text"), Rule::TextMismatch));
        }
        in_range.push(i);
    }
    for (a, &i) in in_range.iter().enumerate() {
        for &j in &in_range[a + 1..] {
            if doc.entities[i].overlaps(&doc.entities[j]) {
                out.push(violation(split, doc, format!("entities[{i}..{j}]"), Rule::Overlap));
            }
        }
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn well_formed_fixture_has_no_violations() {
        assert_eq!(validate(&two_doc_dataset()), Vec::new());
    }

    #[test]
    fn span_past_end_is_reported() {
        let mut ds = two_doc_dataset();
        let doc = &mut ds.splits[0].documents[1];
        doc.entities[0].token_start = 3;
        doc.entities[0].token_len = 2;
        let v = validate(&ds);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::SpanOutOfRange);
        assert_eq!(v[0].doc_id.as_deref(), Some("b"));
        assert!(v[0].to_string().contains("span out of range"));
    }

    #[test]
    fn shared_token_is_one_overlap() {
        let mut ds = two_doc_dataset();
        let doc = &mut ds.splits[0].documents[0];
        let extra = doc.entity("address", 1, 3);
        doc.entities.push(extra);
        let v = validate(&ds);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].rule, Rule::Overlap);
    }

    #[test]
    fn overlap_count_matches_pairwise_token_intersections() {
        // Independent count: pairs of entities sharing at least one token index.
        let mut doc = Document::from_words("x", words(&["a", "b", "c", "d", "e", "f", "g"]));
        doc.entities = vec![doc.entity("total", 0, 5), doc.entity("total", 1, 1), doc.entity("date", 3, 3)];
        let mut expected = 0;
        for i in 0..doc.entities.len() {
            for j in i + 1..doc.entities.len() {
                let a = &doc.entities[i];
                let b = &doc.entities[j];
                let shared = (0..doc.tokens.len())
                    .filter(|t| (a.token_start..a.token_end()).contains(t) && (b.token_start..b.token_end()).contains(t))
                    .count();
                if shared > 0 {
                    expected += 1;
                }
            }
        }
        let labels: Vec<String> = ["total", "date"].iter().map(|s| s.to_string()).collect();
        let v = validate_document(&labels, &doc);
        assert_eq!(v.iter().filter(|v| v.rule == Rule::Overlap).count(), expected);
        assert_eq!(expected, 2);
    }

    #[test]
    fn other_rules() {
        let mut ds = two_doc_dataset();
        ds.splits.push(Split::new("train", Vec::new()));
        let doc = &mut ds.splits[0].documents[0];
        doc.tokens[0].bbox = BBox::new(5, 0, 1001, 10);
        doc.entities[0].label = "vendor".to_string();
        doc.entities[1].text = "12.5".to_string();
        doc.tokens[5].char_len = 40;
        let rules: Vec<Rule> = validate(&ds).into_iter().map(|v| v.rule).collect();
        for r in [Rule::BoxOutOfRange, Rule::UnknownLabel, Rule::TextMismatch, Rule::TokenOutsideText, Rule::DuplicateSplit] {
            assert!(rules.contains(&r), "{r:?} missing from {rules:?}");
        }
    }

    #[test]
    fn validate_is_pure() {
        let mut ds = two_doc_dataset();
        ds.splits[0].documents[1].id = "a".to_string();
        assert_eq!(validate(&ds), validate(&ds));
        assert_eq!(validate(&ds)[0].rule, Rule::DuplicateDocumentId);
    }

    #[test]
    fn char_offsets_count_scalars() {
        let d = Document::from_words("u", words(&["café", "naïve", "日本"]));
        assert_eq!(d.tokens[1].char_start, 5);
        assert_eq!(d.tokens[2].char_start, 11);
        assert_eq!(d.text_slice(5, 5), Some("naïve"));
        assert_eq!(d.text_slice(11, 2), Some("日本"));
        assert_eq!(d.text_slice(11, 3), None);
        let (s, l) = d.char_span(1, 2);
        assert_eq!(d.text_slice(s, l), Some("naïve 日本"));
    }

    #[test]
    fn normalize_clamps_and_orders() {
        assert_eq!(BBox::normalize([50.0, 20.0, 10.0, 40.0], 100.0, 200.0), BBox::new(100, 100, 500, 200));
        assert_eq!(BBox::normalize([-3.0, 0.0, 150.0, 10.0], 100.0, 100.0), BBox::new(0, 0, 1000, 100));
    }
}
