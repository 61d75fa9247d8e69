//! Server side of the protocol: exposes any [`Scorer`] over stdio or HTTP.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::protocol::{self, ErrorReply, Message, ValidationF1};
use crate::scorer::{self, Scorer};

/// Answers protocol lines with a scorer and, optionally, a scripted training
/// loop that replies to `schedule` messages with fixed validation F1 values
/// (the value for epoch `e` is `f1s[e - 1]`, or the last value once exhausted).
pub struct Handler {
    scorer: Arc<dyn Scorer>,
    training: Option<Vec<f64>>,
}

impl Handler {
    pub fn new(scorer: Arc<dyn Scorer>) -> Self {
        Handler { scorer, training: None }
    }

    pub fn with_training(mut self, f1s: Vec<f64>) -> Self {
        self.training = Some(f1s);
        self
    }

    /// Never fails: problems become `error` replies.
    pub fn handle(&self, line: &str) -> String {
        let error = |request_id: Option<String>, message: String| Message::Error(ErrorReply { request_id, message });
        let reply = match protocol::parse_line(line) {
            Ok(Message::ScoreRequest(req)) => match scorer::request(self.scorer.as_ref(), &req) {
                Ok(resp) => Message::ScoreResponse(resp),
                Err(e) => error(Some(req.request_id), e.to_string()),
            },
            Ok(Message::Schedule(d)) => match &self.training {
                Some(_) if d.stopped => Message::Ack,
                Some(f1s) => Message::ValidationF1(ValidationF1 {
                    epoch: d.epoch + 1,
                    f1: f1s.get(d.epoch as usize).or(f1s.last()).copied().unwrap_or(0.0),
                }),
                None => error(None, "schedule messages need a training server".into()),
            },
            Ok(other) => error(None, format!("unexpected {} message", scorer::kind(&other))),
            Err(e) => error(None, e.to_string()),
        };
        protocol::to_line(&reply)
    }
}

/// Newline-delimited loop until end of input; blank lines are skipped.
pub fn serve_stdio(handler: &Handler, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(output, "{}", handler.handle(&line))?;
        output.flush()?;
    }
    Ok(())
}

/// A running HTTP server; dropping it does not stop the workers, call
/// [`HttpServer::shutdown`].
pub struct HttpServer {
    server: Arc<tiny_http::Server>,
    workers: Vec<std::thread::JoinHandle<()>>,
}

impl HttpServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and answers POSTed
    /// messages with `workers` threads.
    pub fn start(addr: &str, handler: Arc<Handler>, workers: usize) -> std::io::Result<Self> {
        let server = Arc::new(tiny_http::Server::http(addr).map_err(std::io::Error::other)?);
        let workers = (0..workers.max(1))
            .map(|_| {
                let server = Arc::clone(&server);
                let handler = Arc::clone(&handler);
                std::thread::spawn(move || {
                    for mut request in server.incoming_requests() {
                        let mut body = String::new();
                        let reply = match request.as_reader().read_to_string(&mut body) {
                            Ok(_) => handler.handle(&body),
                            Err(e) => protocol::to_line(&Message::Error(ErrorReply {
                                request_id: None,
                                message: format!("reading body: {e}"),
                            })),
                        };
                        let header = tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header");
                        let _ = request.respond(tiny_http::Response::from_string(reply).with_header(header));
                    }
                })
            })
            .collect();
        Ok(HttpServer { server, workers })
    }

    pub fn url(&self) -> String {
        format!("http://{}/", self.server.server_addr())
    }

    pub fn shutdown(self) {
        self.server.unblock();
        for _ in 1..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers {
            let _ = w.join();
        }
    }

    /// Blocks until the workers exit.
    pub fn join(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{ChunkRef, Mode, ScoreRequest, WireToken};
    use crate::scorer::{Constant, HttpScorer};
    use docex_core::model::BBox;

    fn req(n: usize) -> ScoreRequest {
        ScoreRequest {
            request_id: "x".into(),
            mode: Mode::Tc,
            doc_id: "d".into(),
            chunk: ChunkRef { index: 0, start: 0, end: n },
            tokens: (0..n).map(|i| WireToken { text: format!("w{i}"), page: 0, bbox: BBox::default() }).collect(),
            question: None,
            label_set: Some(vec!["a".into()]),
        }
    }

    #[test]
    fn stdio_loop_answers_each_line() {
        let input = format!("{}\n\nnot json\n{}\n", protocol::to_line(&Message::ScoreRequest(req(2))), protocol::to_line(&Message::Ack));
        let mut out = Vec::new();
        serve_stdio(&Handler::new(Arc::new(Constant(0.0))), input.as_bytes(), &mut out).unwrap();
        let lines: Vec<Message> = String::from_utf8(out).unwrap().lines().map(|l| protocol::parse_line(l).unwrap()).collect();
        assert_eq!(lines.len(), 3);
        assert!(matches!(&lines[0], Message::ScoreResponse(r) if r.tag_logits.as_ref().unwrap().len() == 2));
        assert!(matches!(&lines[1], Message::Error(_)));
        assert!(matches!(&lines[2], Message::Error(_)));
    }

    #[test]
    fn http_round_trip() {
        let server = HttpServer::start("127.0.0.1:0", Arc::new(Handler::new(Arc::new(Constant(1.5)))), 2).unwrap();
        let client = HttpScorer::new(server.url(), 2);
        let r = crate::scorer::request(&client, &req(3)).unwrap();
        assert_eq!(r.tag_logits.unwrap(), vec![vec![1.5; 3]; 3]);
        server.shutdown();
    }

    #[test]
    fn scripted_training_over_http() {
        let handler = Handler::new(Arc::new(Constant(0.0))).with_training(vec![0.5]);
        let server = HttpServer::start("127.0.0.1:0", Arc::new(handler), 1).unwrap();
        let client = HttpScorer::new(server.url(), 1);
        let trace = crate::training::drive_schedule(&client, &Default::default(), None).unwrap();
        // 0.5 once, then no improvement: 10 epochs per halving from epoch 1.
        assert_eq!(trace.last().unwrap().epoch, 81);
        server.shutdown();
    }
}
