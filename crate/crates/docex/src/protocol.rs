//! Scorer wire protocol, version 1.
//!
//! Every message is one line of UTF-8 JSON carrying `"protocol": 1` and a
//! `"kind"` discriminator. Over stdio, messages are newline-delimited; over
//! HTTP, each request body is one message and the response body is the reply.
//!
//! ```text
//! {"protocol":1,"kind":"score_request","request_id":"r1","mode":"qa","doc_id":"d",
//!  "chunk":{"index":0,"start":0,"end":2},
//!  "tokens":[{"text":"ACME","page":0,"box":[0,0,10,10]},{"text":"Corp","page":0,"box":[12,0,30,10]}],
//!  "question":"What is the company?"}
//! {"protocol":1,"kind":"score_response","request_id":"r1","mode":"qa",
//!  "null_logits":[-10.0,-10.0],"start_logits":[5.0,-5.0],"end_logits":[-5.0,5.0]}
//! ```
//!
//! Logits are word-level: one start/end logit per request token for QA, one
//! vector of `2 * labels + 1` IOB tag logits (`O`, then `B-l`, `I-l` per label)
//! per token for TC. Servers pool sub-word outputs to words themselves.

use docex_core::decode::QaLogits;
use docex_core::model::BBox;
use docex_core::schedule::ScheduleState;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Qa,
    Tc,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qa" => Ok(Mode::Qa),
            "tc" => Ok(Mode::Tc),
            _ => Err(format!("unknown mode {s:?} (expected qa or tc)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Qa => "qa",
            Mode::Tc => "tc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRef {
    pub index: usize,
    /// Document index of the first token sent.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireToken {
    pub text: String,
    pub page: u32,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub request_id: String,
    pub mode: Mode,
    pub doc_id: String,
    pub chunk: ChunkRef,
    pub tokens: Vec<WireToken>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_set: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub request_id: String,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_logits: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_logits: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_logits: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag_logits: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
    pub message: String,
}

/// Learning-rate decision sent to a training server after each epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDecision {
    pub epoch: u32,
    pub lr: f64,
    pub halvings: u32,
    pub stopped: bool,
}

impl From<&ScheduleState> for ScheduleDecision {
    fn from(s: &ScheduleState) -> Self {
        ScheduleDecision { epoch: s.epoch, lr: s.lr, halvings: s.halvings, stopped: s.stopped }
    }
}

/// Validation F1 a training server reports for a finished epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationF1 {
    pub epoch: u32,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Message {
    ScoreRequest(ScoreRequest),
    ScoreResponse(ScoreResponse),
    Error(ErrorReply),
    Schedule(ScheduleDecision),
    ValidationF1(ValidationF1),
    Ack,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    protocol: u32,
    #[serde(flatten)]
    message: Message,
}

#[derive(Serialize)]
struct EnvelopeRef<'a> {
    protocol: u32,
    #[serde(flatten)]
    message: &'a Message,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BridgeError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("length mismatch in {field}: expected {expected}, found {found}")]
    LengthMismatch { field: String, expected: usize, found: usize },
    #[error("response id {found:?} does not match request id {expected:?}")]
    IdMismatch { expected: String, found: String },
    #[error("scorer error: {0}")]
    Remote(String),
    #[error("unknown document {0:?}")]
    UnknownDocument(String),
}

/// Serializes to one line (no trailing newline).
pub fn to_line(message: &Message) -> String {
    serde_json::to_string(&EnvelopeRef { protocol: PROTOCOL_VERSION, message }).expect("messages serialize")
}

pub fn parse_line(line: &str) -> Result<Message, BridgeError> {
    let env: Envelope = serde_json::from_str(line.trim_end()).map_err(|e| BridgeError::Schema(e.to_string()))?;
    if env.protocol != PROTOCOL_VERSION {
        return Err(BridgeError::Schema(format!("unsupported protocol version {}", env.protocol)));
    }
    Ok(env.message)
}

impl ScoreRequest {
    /// Mode-specific fields present exactly when required, token count
    /// consistent with the chunk range.
    pub fn check(&self) -> Result<(), BridgeError> {
        match (self.mode, &self.question, &self.label_set) {
            (Mode::Qa, Some(_), None) | (Mode::Tc, None, Some(_)) => {}
            (Mode::Qa, _, _) => return Err(BridgeError::Schema("qa request needs question and no label_set".into())),
            (Mode::Tc, _, _) => return Err(BridgeError::Schema("tc request needs label_set and no question".into())),
        }
        let span = self.chunk.end.checked_sub(self.chunk.start).ok_or_else(|| {
            BridgeError::Schema(format!("chunk end {} before start {}", self.chunk.end, self.chunk.start))
        })?;
        if span != self.tokens.len() {
            return Err(BridgeError::LengthMismatch { field: "tokens".into(), expected: span, found: self.tokens.len() });
        }
        Ok(())
    }
}

impl ScoreResponse {
    pub fn qa(request_id: impl Into<String>, logits: &QaLogits) -> Self {
        ScoreResponse {
            request_id: request_id.into(),
            mode: Mode::Qa,
            null_logits: Some([logits.null_slot.0, logits.null_slot.1]),
            start_logits: Some(logits.start_logits.clone()),
            end_logits: Some(logits.end_logits.clone()),
            tag_logits: None,
        }
    }

    pub fn tc(request_id: impl Into<String>, tag_logits: Vec<Vec<f64>>) -> Self {
        ScoreResponse {
            request_id: request_id.into(),
            mode: Mode::Tc,
            null_logits: None,
            start_logits: None,
            end_logits: None,
            tag_logits: Some(tag_logits),
        }
    }

    /// Checks the response against the request it answers.
    pub fn check(&self, req: &ScoreRequest) -> Result<(), BridgeError> {
        if self.request_id != req.request_id {
            return Err(BridgeError::IdMismatch { expected: req.request_id.clone(), found: self.request_id.clone() });
        }
        if self.mode != req.mode {
            return Err(BridgeError::Schema(format!("response mode {} for a {} request", self.mode, req.mode)));
        }
        let n = req.tokens.len();
        let expect_len = |field: &str, found: usize, expected: usize| {
            if found == expected {
                Ok(())
            } else {
                Err(BridgeError::LengthMismatch { field: field.to_string(), expected, found })
            }
        };
        match self.mode {
            Mode::Qa => {
                let missing = |f: &str| BridgeError::Schema(format!("qa response without {f}"));
                self.null_logits.ok_or_else(|| missing("null_logits"))?;
                expect_len("start_logits", self.start_logits.as_ref().ok_or_else(|| missing("start_logits"))?.len(), n)?;
                expect_len("end_logits", self.end_logits.as_ref().ok_or_else(|| missing("end_logits"))?.len(), n)?;
            }
            Mode::Tc => {
                let rows = self.tag_logits.as_ref().ok_or_else(|| BridgeError::Schema("tc response without tag_logits".into()))?;
                expect_len("tag_logits", rows.len(), n)?;
                let width = docex_core::iob::tag_count(req.label_set.as_ref().map_or(0, Vec::len));
                for (i, row) in rows.iter().enumerate() {
                    expect_len(&format!("tag_logits[{i}]"), row.len(), width)?;
                }
            }
        }
        Ok(())
    }

    /// QA logits; call after [`ScoreResponse::check`].
    pub fn qa_logits(&self) -> Option<QaLogits> {
        let null = self.null_logits?;
        Some(QaLogits {
            null_slot: (null[0], null[1]),
            start_logits: self.start_logits.clone()?,
            end_logits: self.end_logits.clone()?,
        })
    }
}
