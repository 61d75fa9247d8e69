//! Chunk → request → decode → aggregate → entities → metrics, for one split.

use docex_core::chunk::{chunk, ChunkSpec};
use docex_core::decode::{aggregate, argmax, decode_tc, extract_spans, ChunkPredictions, ExtractConfig, Prediction, Preference};
use docex_core::iob::RepairPolicy;
use docex_core::metrics::{score, MatchMode, Report};
use docex_core::model::{Document, Entity, Split};
use docex_core::qa::label_to_question;
use serde::{Deserialize, Serialize};

use crate::protocol::{BridgeError, ChunkRef, Mode, ScoreRequest, ScoreResponse, WireToken};
use crate::scorer::{self, Scorer};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub chunk: ChunkSpec,
    pub extract: ExtractConfig,
    pub policy: RepairPolicy,
    pub template: String,
}

impl PipelineConfig {
    pub fn preference(&self) -> Preference {
        match self.mode {
            Mode::Qa => Preference::HighestScore,
            Mode::Tc => Preference::Longest,
        }
    }
}

pub fn default_match_mode(mode: Mode) -> MatchMode {
    match mode {
        Mode::Qa => MatchMode::Text,
        Mode::Tc => MatchMode::Span,
    }
}

/// One scored chunk: the response plus what the harness needs to decode it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredChunk {
    pub doc_id: String,
    pub chunk: ChunkRef,
    /// Label the question was generated from (qa only; never sent on the wire).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub response: ScoreResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocPredictions {
    pub doc_id: String,
    pub entities: Vec<Entity>,
}

/// All requests for a document: one per chunk in tc mode, one per chunk and
/// label in qa mode. Paired with the label each qa request asks about.
pub fn build_requests(
    doc: &Document,
    labels: &[String],
    cfg: &PipelineConfig,
) -> Result<Vec<(Option<String>, ScoreRequest)>, BridgeError> {
    let chunks = chunk(&doc.id, doc.tokens.len(), cfg.chunk);
    let mut out = Vec::new();
    let questions: Vec<(String, String)> = match cfg.mode {
        Mode::Qa => labels
            .iter()
            .map(|l| label_to_question(l, &cfg.template).map(|q| (l.clone(), q)))
            .collect::<Result<_, _>>()
            .map_err(|e| BridgeError::Schema(e.to_string()))?,
        Mode::Tc => Vec::new(),
    };
    for c in &chunks {
        let tokens: Vec<WireToken> = doc.tokens[c.start..c.end]
            .iter()
            .map(|t| WireToken { text: t.text.clone(), page: t.page, bbox: t.bbox })
            .collect();
        let base = |request_id: String| ScoreRequest {
            request_id,
            mode: cfg.mode,
            doc_id: doc.id.clone(),
            chunk: ChunkRef { index: c.index, start: c.start, end: c.end },
            tokens: tokens.clone(),
            question: None,
            label_set: None,
        };
        match cfg.mode {
            Mode::Qa => {
                for (label, question) in &questions {
                    let mut r = base(format!("{}#{}#{}", doc.id, c.index, label));
                    r.question = Some(question.clone());
                    out.push((Some(label.clone()), r));
                }
            }
            Mode::Tc => {
                let mut r = base(format!("{}#{}", doc.id, c.index));
                r.label_set = Some(labels.to_vec());
                out.push((None, r));
            }
        }
    }
    Ok(out)
}

pub fn score_document(
    scorer: &dyn Scorer,
    doc: &Document,
    labels: &[String],
    cfg: &PipelineConfig,
) -> Result<Vec<ScoredChunk>, BridgeError> {
    build_requests(doc, labels, cfg)?
        .into_iter()
        .map(|(label, req)| {
            let response = scorer::request(scorer, &req)?;
            Ok(ScoredChunk { doc_id: req.doc_id, chunk: req.chunk, label, response })
        })
        .collect()
}

/// Decodes a document's scored chunks into document-level entities.
pub fn decode_document(
    doc: &Document,
    scored: &[ScoredChunk],
    labels: &[String],
    cfg: &PipelineConfig,
) -> Result<DocPredictions, BridgeError> {
    let mut per_chunk = Vec::with_capacity(scored.len());
    for s in scored {
        let predictions = match s.response.mode {
            Mode::Qa => {
                let label = s.label.clone().ok_or_else(|| BridgeError::Schema("qa chunk without label".into()))?;
                let logits = s.response.qa_logits().ok_or_else(|| BridgeError::Schema("qa response without logits".into()))?;
                extract_spans(&logits, &cfg.extract)
                    .into_iter()
                    .map(|sp| Prediction { label: label.clone(), start: sp.token_start, len: sp.word_count(), score: sp.score })
                    .collect()
            }
            Mode::Tc => {
                let rows = s.response.tag_logits.as_deref().ok_or_else(|| BridgeError::Schema("tc response without tag_logits".into()))?;
                let spans = decode_tc(rows, labels, cfg.policy).map_err(|e| BridgeError::Schema(e.to_string()))?;
                spans
                    .into_iter()
                    .map(|sp| {
                        let best: f64 = rows[sp.start..sp.end()].iter().map(|r| r[argmax(r)]).sum();
                        Prediction { label: sp.label, start: sp.start, len: sp.len, score: best / sp.len as f64 }
                    })
                    .collect()
            }
        };
        per_chunk.push(ChunkPredictions { chunk_start: s.chunk.start, predictions });
    }
    let entities = aggregate(&per_chunk, cfg.preference())
        .into_iter()
        .filter(|p| p.end() <= doc.tokens.len())
        .map(|p| doc.entity(p.label, p.start, p.len))
        .collect();
    Ok(DocPredictions { doc_id: doc.id.clone(), entities })
}

pub fn predict_split(
    scorer: &dyn Scorer,
    split: &Split,
    labels: &[String],
    cfg: &PipelineConfig,
) -> Result<Vec<DocPredictions>, BridgeError> {
    split
        .documents
        .iter()
        .map(|doc| {
            let scored = score_document(scorer, doc, labels, cfg)?;
            decode_document(doc, &scored, labels, cfg)
        })
        .collect()
}

/// Scores predictions against the split's gold entities restricted to `labels`.
/// Documents without a prediction record count as predicting nothing.
pub fn evaluate(split: &Split, predictions: &[DocPredictions], labels: &[String], mode: MatchMode) -> Report {
    let empty = Vec::new();
    let pairs: Vec<(Vec<Entity>, &[Entity])> = split
        .documents
        .iter()
        .map(|doc| {
            let gold = doc.entities.iter().filter(|e| labels.contains(&e.label)).cloned().collect();
            let pred = predictions.iter().find(|p| p.doc_id == doc.id).map_or(&empty, |p| &p.entities);
            (gold, pred.as_slice())
        })
        .collect();
    score(pairs.iter().map(|(g, p)| (*p, g.as_slice())), labels, mode)
}
