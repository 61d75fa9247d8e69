//! Fixed-capacity overlapping token windows over long documents.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::Entity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkSpec {
    /// Context tokens per window, after the caller has reserved room for the
    /// question and special slots.
    pub window: usize,
    /// Tokens shared by consecutive windows; `0 <= overlap < window`.
    pub overlap: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChunkError {
    ZeroWindow,
    OverlapTooLarge { window: usize, overlap: usize },
}

impl fmt::Display for ChunkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChunkError::ZeroWindow => f.write_str("chunk window must be at least 1"),
            ChunkError::OverlapTooLarge { window, overlap } => {
                write!(f, "overlap {overlap} must be smaller than window {window}")
            }
        }
    }
}

impl core::error::Error for ChunkError {}

/// 128 tokens for windows of 256 or more, otherwise half the window.
pub fn default_overlap(window: usize) -> usize {
    if window >= 256 {
        128
    } else {
        window / 2
    }
}

impl ChunkSpec {
    pub fn new(window: usize, overlap: usize) -> Result<Self, ChunkError> {
        let spec = ChunkSpec { window, overlap };
        spec.check()?;
        Ok(spec)
    }

    pub fn with_default_overlap(window: usize) -> Result<Self, ChunkError> {
        Self::new(window, default_overlap(window))
    }

    pub fn check(&self) -> Result<(), ChunkError> {
        if self.window == 0 {
            return Err(ChunkError::ZeroWindow);
        }
        if self.overlap >= self.window {
            return Err(ChunkError::OverlapTooLarge { window: self.window, overlap: self.overlap });
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.window - self.overlap
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub doc_id: String,
    pub index: usize,
    /// First document token in the window.
    pub start: usize,
    /// One past the last document token in the window.
    pub end: usize,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, start: usize, len: usize) -> bool {
        self.start <= start && start + len <= self.end
    }
}

/// Windows starting at `0, stride, 2*stride, ...`; the last one is clipped to
/// the document end. An empty document has no chunks.
pub fn chunk(doc_id: &str, token_count: usize, spec: ChunkSpec) -> Vec<Chunk> {
    debug_assert!(spec.check().is_ok());
    let mut out = Vec::new();
    if token_count == 0 {
        return out;
    }
    let mut start = 0;
    loop {
        let end = (start + spec.window).min(token_count);
        out.push(Chunk { doc_id: String::from(doc_id), index: out.len(), start, end });
        if end == token_count {
            return out;
        }
        start += spec.stride();
    }
}

/// What to do with an entity only partly inside a chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    #[default]
    Drop,
    /// Keep the intersection, flagged as clipped.
    Clip,
    /// Keep the intersection and record how many tokens fell outside.
    MarkPartial,
}

impl core::str::FromStr for BoundaryPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "drop" => Ok(BoundaryPolicy::Drop),
            "clip" => Ok(BoundaryPolicy::Clip),
            "mark_partial" => Ok(BoundaryPolicy::MarkPartial),
            _ => Err(alloc::format!("unknown boundary policy {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Edge {
    #[default]
    Whole,
    Clipped,
    Partial { cut_before: usize, cut_after: usize },
}

/// An entity in window-local token coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalSpan {
    pub label: String,
    pub start: usize,
    pub len: usize,
    #[serde(default)]
    pub edge: Edge,
}

impl LocalSpan {
    /// Back to document coordinates: `(start, len)`.
    pub fn to_document(&self, chunk: &Chunk) -> (usize, usize) {
        (self.start + chunk.start, self.len)
    }
}

pub fn remap(chunk: &Chunk, entities: &[Entity], policy: BoundaryPolicy) -> Vec<LocalSpan> {
    let mut out = Vec::new();
    for e in entities {
        let lo = e.token_start.max(chunk.start);
        let hi = e.token_end().min(chunk.end);
        if lo >= hi {
            continue;
        }
        let whole = lo == e.token_start && hi == e.token_end();
        let edge = match (whole, policy) {
            (true, _) => Edge::Whole,
            (false, BoundaryPolicy::Drop) => continue,
            (false, BoundaryPolicy::Clip) => Edge::Clipped,
            (false, BoundaryPolicy::MarkPartial) => {
                Edge::Partial { cut_before: lo - e.token_start, cut_after: e.token_end() - hi }
            }
        };
        out.push(LocalSpan { label: e.label.clone(), start: lo - chunk.start, len: hi - lo, edge });
    }
    out
}
