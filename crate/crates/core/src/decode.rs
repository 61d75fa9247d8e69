//! From scorer logits to predicted spans.
//!
//! QA answers are contiguous `(start, end)` word spans scored by
//! `start_logit[start] + end_logit[end]`; the answerability filter decides
//! which spans are viable, and up to `k` of them are returned. Token
//! classification takes a per-word argmax over IOB tags and decodes it with a
//! repair policy. Per-chunk predictions of one document are then folded into
//! document coordinates by [`aggregate`].

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::iob::{self, IobError, LabeledSpan, RepairPolicy, Tag, TagSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaLogits {
    /// `(start, end)` logits of the null answer slot.
    pub null_slot: (f64, f64),
    pub start_logits: Vec<f64>,
    pub end_logits: Vec<f64>,
}

impl QaLogits {
    pub fn len(&self) -> usize {
        self.start_logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.start_logits.is_empty()
    }

    pub fn null_score(&self) -> f64 {
        self.null_slot.0 + self.null_slot.1
    }
}

/// Which candidate spans count as answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answerability {
    /// Keep spans whose logit sum is strictly positive.
    #[default]
    RawPositive,
    /// Keep spans that beat the null slot's logit sum.
    NullDiff,
}

impl core::str::FromStr for Answerability {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "raw_positive" => Ok(Answerability::RawPositive),
            "null_diff" => Ok(Answerability::NullDiff),
            _ => Err(alloc::format!("unknown answerability mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    /// Maximum answers returned per request.
    pub k: usize,
    /// Maximum span length in words.
    pub max_answer_len: usize,
    pub answerability: Answerability,
    /// When false, spans overlapping a better-scored selected span are skipped.
    pub allow_overlap: bool,
}

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_MAX_ANSWER_LEN: usize = 100;

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            k: DEFAULT_K,
            max_answer_len: DEFAULT_MAX_ANSWER_LEN,
            answerability: Answerability::RawPositive,
            allow_overlap: false,
        }
    }
}

/// Candidate answer; `token_end` is inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSpan {
    pub token_start: usize,
    pub token_end: usize,
    pub score: f64,
}

impl ScoredSpan {
    pub fn word_count(&self) -> usize {
        self.token_end - self.token_start + 1
    }

    pub fn overlaps(&self, other: &ScoredSpan) -> bool {
        self.token_start <= other.token_end && other.token_start <= self.token_end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecodeError {
    LogitLength { position: usize, expected: usize, found: usize },
    Iob(IobError),
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::LogitLength { position, expected, found } => {
                write!(f, "token {position}: expected {expected} tag logits, found {found}")
            }
            DecodeError::Iob(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for DecodeError {}

impl From<IobError> for DecodeError {
    fn from(e: IobError) -> Self {
        DecodeError::Iob(e)
    }
}

/// Best viable spans, highest score first (ties by position), at most `k`.
/// An empty result means the scorer abstains.
pub fn extract_spans(logits: &QaLogits, cfg: &ExtractConfig) -> Vec<ScoredSpan> {
    let n = logits.start_logits.len().min(logits.end_logits.len());
    let threshold = match cfg.answerability {
        Answerability::RawPositive => 0.0,
        Answerability::NullDiff => logits.null_score(),
    };
    let mut candidates = Vec::new();
    for s in 0..n {
        let last = (s + cfg.max_answer_len).min(n);
        for e in s..last {
            let score = logits.start_logits[s] + logits.end_logits[e];
            if score > threshold {
                candidates.push(ScoredSpan { token_start: s, token_end: e, score });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.token_start.cmp(&b.token_start))
            .then(a.token_end.cmp(&b.token_end))
    });
    let mut picked: Vec<ScoredSpan> = Vec::with_capacity(cfg.k);
    for c in candidates {
        if picked.len() == cfg.k {
            break;
        }
        if !cfg.allow_overlap && picked.iter().any(|p| p.overlaps(&c)) {
            continue;
        }
        picked.push(c);
    }
    picked
}

/// Index of the largest logit; ties and NaN resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] || values[best].is_nan() && !v.is_nan() {
            best = i;
        }
    }
    best
}

/// Per-word argmax over `2 * labels + 1` IOB tags, then IOB decoding.
pub fn decode_tc(
    token_logits: &[Vec<f64>],
    label_set: &[String],
    policy: RepairPolicy,
) -> Result<Vec<LabeledSpan>, DecodeError> {
    let width = iob::tag_count(label_set.len());
    let mut tags = Vec::with_capacity(token_logits.len());
    for (position, row) in token_logits.iter().enumerate() {
        if row.len() != width {
            return Err(DecodeError::LogitLength { position, expected: width, found: row.len() });
        }
        tags.push(Tag::from_index(argmax(row)));
    }
    let seq = TagSequence { tags, label_set: label_set.to_vec() };
    Ok(iob::decode(&seq, policy)?)
}

/// A span prediction with its confidence; coordinates are chunk-local inside
/// [`ChunkPredictions`] and document-level in [`aggregate`]'s output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub start: usize,
    pub len: usize,
    #[serde(default)]
    pub score: f64,
}

impl Prediction {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    fn overlaps(&self, other: &Prediction) -> bool {
        self.start < other.end() && other.start < self.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkPredictions {
    /// Document index of the chunk's first token.
    pub chunk_start: usize,
    pub predictions: Vec<Prediction>,
}

/// Which of several overlapping same-label predictions survives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    HighestScore,
    Longest,
}

/// Folds chunk-local predictions into non-overlapping (per label)
/// document-level predictions, ordered by position.
pub fn aggregate(chunks: &[ChunkPredictions], preference: Preference) -> Vec<Prediction> {
    let mut unique: BTreeMap<(String, usize, usize), f64> = BTreeMap::new();
    for c in chunks {
        for p in &c.predictions {
            let key = (p.label.clone(), c.chunk_start + p.start, p.len);
            let slot = unique.entry(key).or_insert(f64::NEG_INFINITY);
            if p.score > *slot || slot.is_nan() {
                *slot = p.score;
            }
        }
    }

    let mut by_label: BTreeMap<String, Vec<Prediction>> = BTreeMap::new();
    for ((label, start, len), score) in unique {
        by_label.entry(label.clone()).or_default().push(Prediction { label, start, len, score });
    }

    let mut out = Vec::new();
    for (_, mut preds) in by_label {
        preds.sort_by(|a, b| rank(a, b, preference));
        let mut kept: Vec<Prediction> = Vec::new();
        for p in preds {
            if !kept.iter().any(|k| k.overlaps(&p)) {
                kept.push(p);
            }
        }
        out.extend(kept);
    }
    out.sort_by(|a, b| a.start.cmp(&b.start).then(a.len.cmp(&b.len)).then(a.label.cmp(&b.label)));
    out
}

fn rank(a: &Prediction, b: &Prediction, preference: Preference) -> Ordering {
    let by_score = b.score.total_cmp(&a.score);
    let by_len = b.len.cmp(&a.len);
    let primary = match preference {
        Preference::HighestScore => by_score.then(by_len),
        Preference::Longest => by_len.then(by_score),
    };
    primary.then(a.start.cmp(&b.start))
}
