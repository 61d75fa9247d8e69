//! Core algorithms for document information extraction experiments.
//!
//! Two task framings share one data model: token classification (IOB tags
//! over word tokens) and extractive question answering (one generated
//! question per label, answered by word spans). This crate holds the pure
//! parts of both pipelines and needs only an allocator:
//!
//! - [`model`]: documents, tokens, entities, datasets and their validation
//! - [`iob`]: IOB encoding and repair-aware decoding
//! - [`qa`]: conversion of labeled documents into QA samples
//! - [`chunk`]: overlapping token windows and window-local remapping
//! - [`subsample`]: seeded tag and document sub-sampling
//! - [`decode`]: answer-span extraction, TC argmax decoding, chunk aggregation
//! - [`metrics`]: entity-level precision/recall/F1
//! - [`schedule`]: plateau learning-rate schedule
//! - [`stats`]: per-label entity length statistics
//!
//! File formats, the scorer wire protocol and the experiment runner live in
//! the `docex` crate.

#![no_std]
extern crate alloc;

pub mod chunk;
pub mod decode;
pub mod iob;
pub mod metrics;
pub mod model;
pub mod qa;
pub mod rng;
pub mod schedule;
pub mod stats;
pub mod subsample;

pub use model::{BBox, Dataset, Document, Entity, Split, Token, Violation};
