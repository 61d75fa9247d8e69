//! IOB tag sequences: encoding entity lists and decoding (possibly malformed)
//! model outputs back into entities.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Document, Entity};

/// One IOB tag; labels are indices into the owning sequence's label set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Outside,
    Begin(usize),
    Inside(usize),
}

impl Tag {
    /// Position in the per-token logit vector: `O`, then `B-l`, `I-l` for each
    /// label in label-set order.
    pub fn index(self) -> usize {
        match self {
            Tag::Outside => 0,
            Tag::Begin(l) => 1 + 2 * l,
            Tag::Inside(l) => 2 + 2 * l,
        }
    }

    pub fn from_index(i: usize) -> Tag {
        match i {
            0 => Tag::Outside,
            i if i % 2 == 1 => Tag::Begin((i - 1) / 2),
            i => Tag::Inside((i - 2) / 2),
        }
    }

    pub fn label(self) -> Option<usize> {
        match self {
            Tag::Outside => None,
            Tag::Begin(l) | Tag::Inside(l) => Some(l),
        }
    }
}

/// Number of IOB tags for a label set: `2 * labels + 1`.
pub fn tag_count(labels: usize) -> usize {
    2 * labels + 1
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSequence {
    pub tags: Vec<Tag>,
    pub label_set: Vec<String>,
}

/// How to treat an `I-x` tag that does not continue an open `x` entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairPolicy {
    /// Orphan `I` tags are errors.
    Strict,
    /// An orphan `I-x` opens a new entity as if it were `B-x`.
    #[default]
    BeginOnOrphan,
    /// An orphan `I-x` preceded by at most `max_gap` `O` tags after an `x`
    /// entity extends that entity across the gap.
    Bridge { max_gap: usize },
}

impl fmt::Display for RepairPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RepairPolicy::Strict => f.write_str("strict"),
            RepairPolicy::BeginOnOrphan => f.write_str("begin_on_orphan"),
            RepairPolicy::Bridge { max_gap } => write!(f, "bridge({max_gap})"),
        }
    }
}

impl core::str::FromStr for RepairPolicy {
    type Err = IobError;

    /// Accepts `strict`, `begin_on_orphan` (or `begin-on-orphan`) and `bridge(N)` / `bridge:N`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().replace('-', "_");
        match norm.as_str() {
            "strict" => return Ok(RepairPolicy::Strict),
            "begin_on_orphan" => return Ok(RepairPolicy::BeginOnOrphan),
            _ => {}
        }
        let gap = norm
            .strip_prefix("bridge(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| norm.strip_prefix("bridge:"));
        match gap.and_then(|g| g.trim().parse().ok()) {
            Some(max_gap) => Ok(RepairPolicy::Bridge { max_gap }),
            None => Err(IobError::UnknownPolicy(s.to_string())),
        }
    }
}

/// A decoded `[start, start + len)` run with its label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledSpan {
    pub label: String,
    pub start: usize,
    pub len: usize,
}

impl LabeledSpan {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IobError {
    Overlap { first: usize, second: usize },
    SpanOutOfRange { entity: usize },
    UnknownLabel(String),
    BadTag { position: usize, tag: String },
    OrphanInside { position: usize },
    UnknownPolicy(String),
}

impl fmt::Display for IobError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IobError::Overlap { first, second } => write!(f, "entities {first} and {second} overlap"),
            IobError::SpanOutOfRange { entity } => write!(f, "entity {entity} extends past the last token"),
            IobError::UnknownLabel(l) => write!(f, "label {l:?} is not in the label set"),
            IobError::BadTag { position, tag } => write!(f, "malformed tag {tag:?} at position {position}"),
            IobError::OrphanInside { position } => write!(f, "I tag without an open entity at position {position}"),
            IobError::UnknownPolicy(p) => write!(f, "unknown repair policy {p:?}"),
        }
    }
}

impl core::error::Error for IobError {}

impl TagSequence {
    pub fn outside(len: usize, label_set: Vec<String>) -> Self {
        TagSequence { tags: vec![Tag::Outside; len], label_set }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Parses `O` / `B-label` / `I-label` strings.
    pub fn parse<S: AsRef<str>>(tags: &[S], label_set: Vec<String>) -> Result<Self, IobError> {
        let mut out = Vec::with_capacity(tags.len());
        for (position, raw) in tags.iter().enumerate() {
            let raw = raw.as_ref();
            let bad = || IobError::BadTag { position, tag: raw.to_string() };
            let tag = if raw == "O" {
                Tag::Outside
            } else {
                let (prefix, label) = raw.split_once('-').ok_or_else(bad)?;
                let idx = label_set.iter().position(|l| l == label).ok_or_else(bad)?;
                match prefix {
                    "B" => Tag::Begin(idx),
                    "I" => Tag::Inside(idx),
                    _ => return Err(bad()),
                }
            };
            out.push(tag);
        }
        Ok(TagSequence { tags: out, label_set })
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.tags
            .iter()
            .map(|t| match *t {
                Tag::Outside => "O".to_string(),
                Tag::Begin(l) => alloc::format!("B-{}", self.label_set[l]),
                Tag::Inside(l) => alloc::format!("I-{}", self.label_set[l]),
            })
            .collect()
    }
}

/// Tags the first token of every entity `B-label`, the rest `I-label`.
pub fn encode(doc: &Document, label_set: &[String]) -> Result<TagSequence, IobError> {
    encode_entities(doc.tokens.len(), &doc.entities, label_set)
}

pub fn encode_entities(token_count: usize, entities: &[Entity], label_set: &[String]) -> Result<TagSequence, IobError> {
    let mut tags = vec![Tag::Outside; token_count];
    let mut owner: Vec<Option<usize>> = vec![None; token_count];
    for (i, e) in entities.iter().enumerate() {
        let label = label_set
            .iter()
            .position(|l| *l == e.label)
            .ok_or_else(|| IobError::UnknownLabel(e.label.clone()))?;
        if e.token_len == 0 || e.token_end() > token_count {
            return Err(IobError::SpanOutOfRange { entity: i });
        }
        for t in e.token_start..e.token_end() {
            if let Some(first) = owner[t] {
                return Err(IobError::Overlap { first, second: i });
            }
            owner[t] = Some(i);
            tags[t] = if t == e.token_start { Tag::Begin(label) } else { Tag::Inside(label) };
        }
    }
    Ok(TagSequence { tags, label_set: label_set.to_vec() })
}

/// Decodes tags into spans ordered by start position. Spans never overlap.
pub fn decode(seq: &TagSequence, policy: RepairPolicy) -> Result<Vec<LabeledSpan>, IobError> {
    let max_gap = match policy {
        RepairPolicy::Bridge { max_gap } => Some(max_gap),
        _ => None,
    };
    // (label index, start, exclusive end)
    let mut closed: Vec<(usize, usize, usize)> = Vec::new();
    let mut open: Option<(usize, usize)> = None;

    for (pos, tag) in seq.tags.iter().enumerate() {
        match *tag {
            Tag::Outside => {
                if let Some((l, s)) = open.take() {
                    closed.push((l, s, pos));
                }
            }
            Tag::Begin(l) => {
                if let Some((ol, s)) = open.take() {
                    closed.push((ol, s, pos));
                }
                open = Some((l, pos));
            }
            Tag::Inside(l) => match open {
                Some((ol, _)) if ol == l => {}
                _ => {
                    if policy == RepairPolicy::Strict {
                        return Err(IobError::OrphanInside { position: pos });
                    }
                    if let Some((ol, s)) = open.take() {
                        // Label switch: close the old entity, open a new one.
                        closed.push((ol, s, pos));
                        open = Some((l, pos));
                        continue;
                    }
                    // Only `O` tags lie between the last closed entity and `pos`.
                    let reopen = match (max_gap, closed.last()) {
                        (Some(g), Some(&(cl, _, ce))) => cl == l && pos > ce && pos - ce <= g,
                        _ => false,
                    };
                    if reopen {
                        let (cl, cs, _) = closed.pop().expect("checked above");
                        open = Some((cl, cs));
                    } else {
                        open = Some((l, pos));
                    }
                }
            },
        }
    }
    if let Some((l, s)) = open {
        closed.push((l, s, seq.tags.len()));
    }
    Ok(closed
        .into_iter()
        .map(|(l, s, e)| LabeledSpan { label: seq.label_set[l].clone(), start: s, len: e - s })
        .collect())
}

/// Decodes and materializes entities with their text taken from `doc`.
pub fn decode_entities(seq: &TagSequence, policy: RepairPolicy, doc: &Document) -> Result<Vec<Entity>, IobError> {
    Ok(decode(seq, policy)?
        .into_iter()
        .map(|s| doc.entity(s.label, s.start, s.len))
        .collect())
}
