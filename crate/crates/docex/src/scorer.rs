//! Scorers: built-in oracles and protocol clients.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Condvar, Mutex};

use docex_core::iob::{tag_count, Tag};
use docex_core::model::{Dataset, Entity};
use docex_core::qa::QuestionIndex;
use docex_core::rng;
use rand::Rng;

use crate::protocol::{self, BridgeError, Message, Mode, ScoreRequest, ScoreResponse};

pub const GOLD_LOGIT: f64 = 5.0;
pub const NULL_PRESENT: f64 = -10.0;
pub const NULL_ABSENT: f64 = 10.0;

/// Environment variable that overrides the configured scorer endpoint.
pub const ENDPOINT_ENV: &str = "DOCEX_SCORER";

pub trait Scorer: Send + Sync {
    fn score(&self, request: &ScoreRequest) -> Result<ScoreResponse, BridgeError>;
}

/// Scores `request` and validates both sides of the exchange.
pub fn request(scorer: &dyn Scorer, request: &ScoreRequest) -> Result<ScoreResponse, BridgeError> {
    request.check()?;
    let response = scorer.score(request)?;
    response.check(request)?;
    Ok(response)
}

/// A scorer that also carries control messages (the `schedule` exchange).
pub trait Control {
    fn exchange(&self, message: &Message) -> Result<Message, BridgeError>;
}

/// Gold entities per document, shared by the oracle scorers.
struct Gold {
    entities: HashMap<String, Vec<Entity>>,
    questions: QuestionIndex,
}

impl Gold {
    fn new(dataset: &Dataset, template: &str) -> Result<Self, BridgeError> {
        let mut entities = HashMap::new();
        for split in &dataset.splits {
            for doc in &split.documents {
                entities.insert(doc.id.clone(), doc.entities.clone());
            }
        }
        let questions =
            QuestionIndex::new(&dataset.label_set, template).map_err(|e| BridgeError::Schema(e.to_string()))?;
        Ok(Gold { entities, questions })
    }

    fn respond(&self, req: &ScoreRequest, keep: impl Fn(usize) -> bool) -> Result<ScoreResponse, BridgeError> {
        let all = self.entities.get(&req.doc_id).ok_or_else(|| BridgeError::UnknownDocument(req.doc_id.clone()))?;
        let (start, end) = (req.chunk.start, req.chunk.end);
        let inside = all
            .iter()
            .enumerate()
            .filter(|(i, e)| keep(*i) && e.token_start >= start && e.token_end() <= end)
            .map(|(_, e)| e);
        let n = req.tokens.len();
        match req.mode {
            Mode::Qa => {
                // Questions the index does not know (e.g. zero-shot labels) have no answer.
                let label = req.question.as_deref().and_then(|q| self.questions.label_for(q));
                let mut starts = vec![-GOLD_LOGIT; n];
                let mut ends = vec![-GOLD_LOGIT; n];
                let mut present = false;
                for e in inside.filter(|e| Some(e.label.as_str()) == label) {
                    starts[e.token_start - start] = GOLD_LOGIT;
                    ends[e.token_end() - 1 - start] = GOLD_LOGIT;
                    present = true;
                }
                let null = if present { NULL_PRESENT } else { NULL_ABSENT };
                Ok(ScoreResponse {
                    request_id: req.request_id.clone(),
                    mode: Mode::Qa,
                    null_logits: Some([null, null]),
                    start_logits: Some(starts),
                    end_logits: Some(ends),
                    tag_logits: None,
                })
            }
            Mode::Tc => {
                let labels = req.label_set.as_deref().unwrap_or_default();
                let mut tags = vec![Tag::Outside; n];
                for e in inside {
                    let Some(l) = labels.iter().position(|x| *x == e.label) else { continue };
                    tags[e.token_start - start] = Tag::Begin(l);
                    for t in &mut tags[e.token_start - start + 1..e.token_end() - start] {
                        *t = Tag::Inside(l);
                    }
                }
                let width = tag_count(labels.len());
                let rows = tags
                    .into_iter()
                    .map(|t| {
                        let mut row = vec![-GOLD_LOGIT; width];
                        row[t.index()] = GOLD_LOGIT;
                        row
                    })
                    .collect();
                Ok(ScoreResponse::tc(req.request_id.clone(), rows))
            }
        }
    }
}

/// Emits logits that decode exactly to the gold entities lying wholly inside
/// the requested chunk.
pub struct GoldOracle {
    gold: Gold,
}

impl GoldOracle {
    pub fn new(dataset: &Dataset, template: &str) -> Result<Self, BridgeError> {
        Ok(GoldOracle { gold: Gold::new(dataset, template)? })
    }
}

impl Scorer for GoldOracle {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreResponse, BridgeError> {
        self.gold.respond(req, |_| true)
    }
}

/// The gold oracle with each entity suppressed independently with
/// probability `drop`. Draws come from a `(seed, doc_id)` keyed stream, one per
/// entity in document order, so a document's surviving set does not depend on
/// which chunk or question asks.
pub struct NoisyOracle {
    gold: Gold,
    kept: HashMap<String, Vec<bool>>,
}

impl NoisyOracle {
    pub fn new(dataset: &Dataset, template: &str, drop: f64, seed: u64) -> Result<Self, BridgeError> {
        if !(0.0..=1.0).contains(&drop) {
            return Err(BridgeError::Schema(format!("drop probability {drop} outside [0, 1]")));
        }
        let gold = Gold::new(dataset, template)?;
        let kept = gold
            .entities
            .iter()
            .map(|(id, ents)| {
                let mut r = rng::keyed(seed, id);
                (id.clone(), ents.iter().map(|_| !r.gen_bool(drop)).collect())
            })
            .collect();
        Ok(NoisyOracle { gold, kept })
    }
}

impl Scorer for NoisyOracle {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreResponse, BridgeError> {
        let kept = self.kept.get(&req.doc_id);
        self.gold.respond(req, |i| kept.is_some_and(|k| k[i]))
    }
}

/// Emits `value` for every logit.
pub struct Constant(pub f64);

impl Scorer for Constant {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreResponse, BridgeError> {
        let n = req.tokens.len();
        let v = self.0;
        Ok(match req.mode {
            Mode::Qa => ScoreResponse {
                request_id: req.request_id.clone(),
                mode: Mode::Qa,
                null_logits: Some([v, v]),
                start_logits: Some(vec![v; n]),
                end_logits: Some(vec![v; n]),
                tag_logits: None,
            },
            Mode::Tc => {
                let width = tag_count(req.label_set.as_ref().map_or(0, Vec::len));
                ScoreResponse::tc(req.request_id.clone(), vec![vec![v; width]; n])
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    Gold,
    /// `drop: None` means "1 - ratio of the cell"; `seed: None` means the cell seed.
    Noisy { drop: Option<f64>, seed: Option<u64> },
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Endpoint {
    Builtin(Builtin),
    /// Shell command of a child process speaking the protocol on stdio.
    Stdio(String),
    Http(String),
}

impl std::str::FromStr for Endpoint {
    type Err = String;

    /// `builtin:gold`, `builtin:noisy[:drop[:seed]]`, `builtin:constant:<v>`,
    /// `stdio:<command>`, `http://...` or `https://...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.starts_with("http://") || s.starts_with("https://") {
            return Ok(Endpoint::Http(s.to_string()));
        }
        if let Some(cmd) = s.strip_prefix("stdio:") {
            if cmd.trim().is_empty() {
                return Err("stdio endpoint needs a command".into());
            }
            return Ok(Endpoint::Stdio(cmd.trim().to_string()));
        }
        let Some(rest) = s.strip_prefix("builtin:") else {
            return Err(format!("unknown scorer endpoint {s:?}"));
        };
        let parts: Vec<&str> = rest.split(':').collect();
        let num = |p: &str| p.parse::<f64>().map_err(|_| format!("bad number {p:?} in endpoint {s:?}"));
        match parts.as_slice() {
            ["gold"] | ["gold_oracle"] => Ok(Endpoint::Builtin(Builtin::Gold)),
            ["noisy" | "noisy_oracle", args @ ..] if args.len() <= 2 => {
                let drop = args.first().map(|p| num(p)).transpose()?;
                let seed = args
                    .get(1)
                    .map(|p| p.parse::<u64>().map_err(|_| format!("bad seed {p:?} in endpoint {s:?}")))
                    .transpose()?;
                Ok(Endpoint::Builtin(Builtin::Noisy { drop, seed }))
            }
            ["constant", v] => Ok(Endpoint::Builtin(Builtin::Constant(num(v)?))),
            _ => Err(format!("unknown builtin scorer {rest:?}")),
        }
    }
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Endpoint::Builtin(Builtin::Gold) => f.write_str("builtin:gold"),
            Endpoint::Builtin(Builtin::Noisy { drop, seed }) => {
                f.write_str("builtin:noisy")?;
                if let Some(d) = drop {
                    write!(f, ":{d}")?;
                    if let Some(s) = seed {
                        write!(f, ":{s}")?;
                    }
                }
                Ok(())
            }
            Endpoint::Builtin(Builtin::Constant(v)) => write!(f, "builtin:constant:{v}"),
            Endpoint::Stdio(cmd) => write!(f, "stdio:{cmd}"),
            Endpoint::Http(url) => f.write_str(url),
        }
    }
}

impl Builtin {
    /// Instantiates the scorer for one experiment cell.
    pub fn build(&self, dataset: &Dataset, template: &str, ratio: f64, seed: u64) -> Result<Box<dyn Scorer>, BridgeError> {
        Ok(match self {
            Builtin::Gold => Box::new(GoldOracle::new(dataset, template)?),
            Builtin::Noisy { drop, seed: fixed } => Box::new(NoisyOracle::new(
                dataset,
                template,
                drop.unwrap_or((1.0 - ratio).clamp(0.0, 1.0)),
                fixed.unwrap_or(seed),
            )?),
            Builtin::Constant(v) => Box::new(Constant(*v)),
        })
    }
}

/// Client for a child process that speaks the protocol on stdin/stdout. One
/// request is in flight at a time.
pub struct StdioScorer {
    io: Mutex<(ChildStdin, BufReader<ChildStdout>)>,
    child: Mutex<Child>,
}

impl StdioScorer {
    pub fn spawn(command: &str) -> Result<Self, BridgeError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| BridgeError::Transport(format!("spawning {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(StdioScorer { io: Mutex::new((stdin, stdout)), child: Mutex::new(child) })
    }

    fn round_trip(&self, message: &Message) -> Result<Message, BridgeError> {
        let mut guard = self.io.lock().unwrap_or_else(|e| e.into_inner());
        let (stdin, stdout) = &mut *guard;
        let transport = |e: std::io::Error| BridgeError::Transport(e.to_string());
        let mut line = protocol::to_line(message);
        line.push('\n');
        stdin.write_all(line.as_bytes()).map_err(transport)?;
        stdin.flush().map_err(transport)?;
        let mut reply = String::new();
        if stdout.read_line(&mut reply).map_err(transport)? == 0 {
            return Err(BridgeError::Transport("scorer process closed its output".into()));
        }
        protocol::parse_line(&reply)
    }
}

impl Drop for StdioScorer {
    fn drop(&mut self) {
        let child = self.child.get_mut().unwrap_or_else(|e| e.into_inner());
        let _ = child.kill();
        let _ = child.wait();
    }
}

fn expect_score(reply: Message) -> Result<ScoreResponse, BridgeError> {
    match reply {
        Message::ScoreResponse(r) => Ok(r),
        Message::Error(e) => Err(BridgeError::Remote(e.message)),
        other => Err(BridgeError::Schema(format!("expected score_response, got {}", kind(&other)))),
    }
}

pub(crate) fn kind(m: &Message) -> &'static str {
    match m {
        Message::ScoreRequest(_) => "score_request",
        Message::ScoreResponse(_) => "score_response",
        Message::Error(_) => "error",
        Message::Schedule(_) => "schedule",
        Message::ValidationF1(_) => "validation_f1",
        Message::Ack => "ack",
    }
}

impl Scorer for StdioScorer {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreResponse, BridgeError> {
        expect_score(self.round_trip(&Message::ScoreRequest(req.clone()))?)
    }
}

impl Control for StdioScorer {
    fn exchange(&self, message: &Message) -> Result<Message, BridgeError> {
        self.round_trip(message)
    }
}

/// Counting semaphore bounding concurrent requests.
struct InFlight {
    count: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut n = self.count.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.count.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.0.freed.notify_one();
    }
}

/// Client POSTing one message per request; at most `max_in_flight` requests
/// are outstanding, further callers block.
pub struct HttpScorer {
    url: String,
    agent: ureq::Agent,
    in_flight: InFlight,
}

impl HttpScorer {
    pub fn new(url: impl Into<String>, max_in_flight: usize) -> Self {
        HttpScorer {
            url: url.into(),
            agent: ureq::AgentBuilder::new().build(),
            in_flight: InFlight { count: Mutex::new(0), freed: Condvar::new(), limit: max_in_flight.max(1) },
        }
    }

    fn post(&self, message: &Message) -> Result<Message, BridgeError> {
        let _slot = self.in_flight.acquire();
        let body = protocol::to_line(message);
        let response = match self.agent.post(&self.url).set("Content-Type", "application/json").send_string(&body) {
            Ok(r) => r,
            // Error replies may come with a 4xx/5xx status.
            Err(ureq::Error::Status(_, r)) => r,
            Err(e) => return Err(BridgeError::Transport(e.to_string())),
        };
        let text = response.into_string().map_err(|e| BridgeError::Transport(e.to_string()))?;
        protocol::parse_line(&text)
    }
}

impl Scorer for HttpScorer {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreResponse, BridgeError> {
        expect_score(self.post(&Message::ScoreRequest(req.clone()))?)
    }
}

impl Control for HttpScorer {
    fn exchange(&self, message: &Message) -> Result<Message, BridgeError> {
        self.post(message)
    }
}
