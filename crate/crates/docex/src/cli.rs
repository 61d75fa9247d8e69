//! The `docex` command line. Every stage reads and writes files so stages can
//! be composed from the shell; see the README for the `--output-dir` layouts.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use docex_core::chunk::{chunk, remap, BoundaryPolicy, ChunkSpec};
use docex_core::decode::{Answerability, ExtractConfig, DEFAULT_K, DEFAULT_MAX_ANSWER_LEN};
use docex_core::iob::RepairPolicy;
use docex_core::metrics::MatchMode;
use docex_core::model::{validate, Dataset, Split};
use docex_core::qa::{qa_stats, to_qa, DEFAULT_TEMPLATE};
use docex_core::schedule::ScheduleConfig;
use docex_core::stats::rank_labels_by_length;
use docex_core::subsample::{subsample_documents, subsample_tags, SubsampleKind, TagSampling};
use serde::{Deserialize, Serialize};

use crate::dataset::{self, Format};
use crate::error::{read_to_string, write_string};
use crate::experiment::{self, ExperimentConfig, DEFAULT_WINDOW};
use crate::pipeline::{self, DocPredictions, PipelineConfig, ScoredChunk};
use crate::protocol::Mode;
use crate::report;
use crate::scorer::{Builtin, Constant, Control, Endpoint, HttpScorer, Scorer, StdioScorer, ENDPOINT_ENV};
use crate::serve::{serve_stdio, Handler, HttpServer};
use crate::squad;
use crate::training::drive_schedule;

#[derive(Debug, Parser)]
#[command(name = "docex", version, about = "Document information extraction experiment harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset against the document and entity invariants
    Validate(ValidateArgs),
    /// Convert a dataset layout to the canonical format or to QA samples
    Convert(ConvertArgs),
    /// Split documents into overlapping windows and remap entities
    Chunk(ChunkArgs),
    /// Degrade training splits by dropping entities or documents
    Subsample(SubsampleArgs),
    /// Query a scorer for every chunk of a split, or serve a builtin scorer
    Score(ScoreArgs),
    /// Turn scored chunks into document-level predictions
    Decode(DecodeArgs),
    /// Compute per-label and weighted metrics for predictions
    Eval(EvalArgs),
    /// Rank labels by mean entity length in characters
    RankLabels(RankLabelsArgs),
    /// Run a ratio x seed experiment grid from a config file
    Experiment(ExperimentArgs),
    /// Re-render report files from a report.json
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Dataset directory (or file, for cuad)
    pub dataset: PathBuf,
    /// Input layout: canonical, funsd, sroie, kleister or cuad
    #[arg(long, default_value = "canonical")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub input: DatasetArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Canonical,
    Qa,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub input: DatasetArgs,
    /// Output: canonical dataset or SQuAD-style QA files
    #[arg(long, value_enum, default_value = "canonical")]
    pub to: Target,
    /// Question template; must contain <LABEL> once
    #[arg(long, default_value = DEFAULT_TEMPLATE)]
    pub template: String,
    /// Also emit unanswerable samples for labels absent from a document
    #[arg(long)]
    pub include_unanswerable: bool,
    /// Re-split the first split into train/test by document id with this train fraction
    #[arg(long)]
    pub split_by_id: Option<f64>,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ChunkArgs {
    #[command(flatten)]
    pub input: DatasetArgs,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Context tokens per window
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    /// Tokens shared by consecutive windows [default: 128 for windows >= 256, else window/2]
    #[arg(long)]
    pub overlap: Option<usize>,
    /// Entities crossing a window edge: drop, clip or mark_partial
    #[arg(long, default_value = "drop")]
    pub boundary: BoundaryPolicy,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SubsampleArgs {
    #[command(flatten)]
    pub input: DatasetArgs,
    /// tags or documents
    #[arg(long, value_parser = parse_kind)]
    pub kind: SubsampleKind,
    /// Fraction kept, in (0, 1]
    #[arg(long)]
    pub ratio: f64,
    #[arg(long)]
    pub seed: u64,
    /// Tag sampling: bernoulli or exact_count
    #[arg(long, value_parser = parse_tag_sampling, default_value = "bernoulli")]
    pub tag_sampling: TagSampling,
    /// Splits to degrade [default: every split except test]
    #[arg(long, value_delimiter = ',')]
    pub splits: Vec<String>,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ServeMode {
    Stdio,
    Http,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Dataset the requests are built from (and builtin oracles read)
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value = "canonical")]
    pub format: Format,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// qa or tc
    #[arg(long, default_value = "qa")]
    pub mode: Mode,
    /// Scorer endpoint: builtin:gold, builtin:noisy[:drop[:seed]], builtin:constant:<v>, stdio:<cmd>, http://...
    #[arg(long, env = ENDPOINT_ENV)]
    pub scorer: Option<String>,
    /// Seed for builtin:noisy when the endpoint does not fix one
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ratio for builtin:noisy when the endpoint does not fix a drop probability (drop = 1 - ratio)
    #[arg(long, default_value_t = 1.0)]
    pub ratio: f64,
    #[arg(long, default_value = DEFAULT_TEMPLATE)]
    pub template: String,
    /// Labels to ask about [default: the dataset's label set]
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long)]
    pub overlap: Option<usize>,
    /// Concurrent requests allowed against an HTTP scorer
    #[arg(long, default_value_t = 1)]
    pub max_in_flight: usize,
    /// Serve the builtin scorer instead of querying one
    #[arg(long, value_enum)]
    pub serve: Option<ServeMode>,
    /// Address for --serve http
    #[arg(long, default_value = "127.0.0.1:8765")]
    pub addr: String,
    /// With --serve: answer schedule messages with these validation F1 values
    #[arg(long, value_delimiter = ',')]
    pub training_f1: Vec<f64>,
    /// Drive the scorer's training schedule before scoring
    #[arg(long)]
    pub train: bool,
    /// Cap on training epochs for --train
    #[arg(long)]
    pub max_epochs: Option<u32>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[command(flatten)]
    pub input: DatasetArgs,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// scores.jsonl written by `score`
    #[arg(long)]
    pub scores: PathBuf,
    /// Answers kept per qa request
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ANSWER_LEN)]
    pub max_answer_len: usize,
    /// raw_positive or null_diff
    #[arg(long, default_value = "raw_positive")]
    pub answerability: Answerability,
    /// Keep overlapping qa answers
    #[arg(long)]
    pub allow_overlap: bool,
    /// IOB repair policy: strict, begin_on_orphan or bridge(N)
    #[arg(long, default_value = "begin_on_orphan")]
    pub policy: RepairPolicy,
    /// Tag label set for tc scores [default: the dataset's label set]
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    #[arg(long)]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: DatasetArgs,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// predictions.json written by `decode`
    #[arg(long)]
    pub predictions: PathBuf,
    /// span or text [default: span]
    #[arg(long, default_value = "span")]
    pub match_mode: MatchMode,
    /// Labels scored [default: the dataset's label set]
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankLabelsArgs {
    #[command(flatten)]
    pub input: DatasetArgs,
    /// Splits to pool [default: all]
    #[arg(long, value_delimiter = ',')]
    pub splits: Vec<String>,
    /// Number of labels to list
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// TOML experiment config
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's scorer endpoint (as does DOCEX_SCORER)
    #[arg(long)]
    pub scorer: Option<String>,
    /// Cells run in parallel
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value = "out")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// report.json or the directory holding it
    pub report: PathBuf,
    #[arg(long)]
    pub output_dir: PathBuf,
}

fn parse_kind(s: &str) -> Result<SubsampleKind, String> {
    match s {
        "tags" => Ok(SubsampleKind::Tags),
        "documents" | "docs" => Ok(SubsampleKind::Documents),
        _ => Err(format!("unknown kind {s:?} (expected tags or documents)")),
    }
}

fn parse_tag_sampling(s: &str) -> Result<TagSampling, String> {
    match s.replace('-', "_").as_str() {
        "bernoulli" => Ok(TagSampling::Bernoulli),
        "exact_count" => Ok(TagSampling::ExactCount),
        _ => Err(format!("unknown tag sampling {s:?} (expected bernoulli or exact_count)")),
    }
}

/// Parses `argv`, runs the command and returns the process exit code:
/// 0 on success, 1 on operational failure, 2 on usage errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

fn load(input: &DatasetArgs) -> anyhow::Result<Dataset> {
    dataset::load(&input.dataset, input.format).with_context(|| format!("loading {}", input.dataset.display()))
}

fn split<'a>(ds: &'a Dataset, name: &str) -> anyhow::Result<&'a Split> {
    ds.split(name).ok_or_else(|| {
        let names: Vec<&str> = ds.splits.iter().map(|s| s.name.as_str()).collect();
        anyhow!("dataset has no split {name:?} (splits: {})", names.join(", "))
    })
}

fn labels_or(ds: &Dataset, labels: &[String]) -> Vec<String> {
    if labels.is_empty() {
        ds.label_set.clone()
    } else {
        labels.to_vec()
    }
}

fn dispatch(command: Command) -> anyhow::Result<i32> {
    match command {
        Command::Validate(a) => validate_cmd(a),
        Command::Convert(a) => convert_cmd(a),
        Command::Chunk(a) => chunk_cmd(a),
        Command::Subsample(a) => subsample_cmd(a),
        Command::Score(a) => score_cmd(a),
        Command::Decode(a) => decode_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::RankLabels(a) => rank_labels_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
        Command::Report(a) => report_cmd(a),
    }
}

fn validate_cmd(a: ValidateArgs) -> anyhow::Result<i32> {
    // Load without the validation step so every violation can be listed.
    let loaded = match dataset::load_with_notes(&a.input.dataset, a.input.format) {
        Ok(l) => l,
        Err(crate::Error::Invalid(violations)) => {
            for v in &violations {
                println!("{v}");
            }
            println!("{} violation(s)", violations.len());
            return Ok(1);
        }
        Err(e) => return Err(e.into()),
    };
    for n in &loaded.notes {
        println!("note: {n}");
    }
    let ds = loaded.dataset;
    let violations = validate(&ds);
    for v in &violations {
        println!("{v}");
    }
    let docs: usize = ds.splits.iter().map(|s| s.documents.len()).sum();
    let ents: usize = ds.splits.iter().map(Split::entity_count).sum();
    if violations.is_empty() {
        println!("ok: {} split(s), {docs} document(s), {ents} entities", ds.splits.len());
        Ok(0)
    } else {
        println!("{} violation(s)", violations.len());
        Ok(1)
    }
}

fn convert_cmd(a: ConvertArgs) -> anyhow::Result<i32> {
    let loaded = dataset::load_with_notes(&a.input.dataset, a.input.format)?;
    for n in &loaded.notes {
        eprintln!("note: {n}");
    }
    let mut ds = loaded.dataset;
    if let Some(f) = a.split_by_id {
        if !(f > 0.0 && f < 1.0) {
            bail!("--split-by-id {f} outside (0, 1)");
        }
        let source = ds.splits.first().map(|s| s.name.clone()).unwrap_or_default();
        ds = dataset::split_by_id(&ds, &source, f)?;
    }
    match a.to {
        Target::Canonical => {
            dataset::save(&ds, &a.output_dir)?;
            println!("wrote {} split(s) to {}", ds.splits.len(), a.output_dir.display());
        }
        Target::Qa => {
            let qa = to_qa(&ds, &a.template, a.include_unanswerable)?;
            for (qs, src) in qa.splits.iter().zip(&ds.splits) {
                let file = squad::to_squad(qs, src)?;
                squad::write(&a.output_dir.join(format!("{}.json", qs.name)), &file)?;
            }
            let mut csv = String::from("split,samples\n");
            for (name, n) in qa_stats(&qa) {
                println!("{name}: {n} samples");
                csv.push_str(&format!("{name},{n}\n"));
            }
            write_string(&a.output_dir.join("qa_stats.csv"), &csv)?;
        }
    }
    Ok(0)
}

fn chunk_spec(window: usize, overlap: Option<usize>) -> anyhow::Result<ChunkSpec> {
    match overlap {
        Some(o) => ChunkSpec::new(window, o),
        None => ChunkSpec::with_default_overlap(window),
    }
    .map_err(|e| anyhow!("{e}"))
}

fn chunk_cmd(a: ChunkArgs) -> anyhow::Result<i32> {
    #[derive(Serialize)]
    struct Line<'a> {
        chunk: &'a docex_core::chunk::Chunk,
        spans: Vec<docex_core::chunk::LocalSpan>,
    }
    let ds = load(&a.input)?;
    let spec = chunk_spec(a.window, a.overlap)?;
    let mut out = String::new();
    for doc in &split(&ds, &a.split)?.documents {
        for c in chunk(&doc.id, doc.tokens.len(), spec) {
            let spans = remap(&c, &doc.entities, a.boundary);
            out.push_str(&serde_json::to_string(&Line { chunk: &c, spans })?);
            out.push('\n');
        }
    }
    write_string(&a.output_dir.join("chunks.jsonl"), &out)?;
    println!("{} chunk(s), window {}, overlap {}", out.lines().count(), spec.window, spec.overlap);
    Ok(0)
}

fn subsample_cmd(a: SubsampleArgs) -> anyhow::Result<i32> {
    let mut ds = load(&a.input)?;
    let targets: Vec<String> = if a.splits.is_empty() {
        ds.splits.iter().map(|s| s.name.clone()).filter(|n| n != "test").collect()
    } else {
        a.splits.clone()
    };
    for name in &targets {
        let s = split(&ds, name)?;
        let degraded = match a.kind {
            SubsampleKind::Tags => subsample_tags(s, a.ratio, a.seed, a.tag_sampling),
            SubsampleKind::Documents => subsample_documents(s, a.ratio, a.seed),
        }
        .map_err(|e| anyhow!("{e}"))?;
        println!(
            "{name}: {} -> {} document(s), {} -> {} entities",
            s.documents.len(),
            degraded.documents.len(),
            s.entity_count(),
            degraded.entity_count()
        );
        *ds.split_mut(name).expect("split exists") = degraded;
    }
    dataset::save(&ds, &a.output_dir)?;
    Ok(0)
}

fn score_cmd(a: ScoreArgs) -> anyhow::Result<i32> {
    let endpoint: Endpoint = a
        .scorer
        .as_deref()
        .ok_or_else(|| anyhow!("no scorer: pass --scorer or set {ENDPOINT_ENV}"))?
        .parse()
        .map_err(|e: String| anyhow!(e))?;
    let ds = match &a.dataset {
        Some(p) => Some(dataset::load(p, a.format).with_context(|| format!("loading {}", p.display()))?),
        None => None,
    };

    if let Some(mode) = a.serve {
        let Endpoint::Builtin(b) = &endpoint else { bail!("--serve needs a builtin scorer") };
        let scorer: Arc<dyn Scorer> = match (b, &ds) {
            (Builtin::Constant(v), _) => Arc::new(Constant(*v)),
            (_, Some(ds)) => Arc::from(b.build(ds, &a.template, a.ratio, a.seed)?),
            (_, None) => bail!("{endpoint} needs a dataset"),
        };
        let mut handler = Handler::new(scorer);
        if !a.training_f1.is_empty() {
            handler = handler.with_training(a.training_f1.clone());
        }
        match mode {
            ServeMode::Stdio => serve_stdio(&handler, std::io::stdin().lock(), std::io::stdout().lock())?,
            ServeMode::Http => {
                let server = HttpServer::start(&a.addr, Arc::new(handler), 4)?;
                eprintln!("serving on {}", server.url());
                server.join();
            }
        }
        return Ok(0);
    }

    let output_dir = a.output_dir.clone().ok_or_else(|| anyhow!("--output-dir is required unless --serve is given"))?;
    let ds = ds.ok_or_else(|| anyhow!("a dataset is required to build requests"))?;
    let (scorer, control): (Box<dyn Scorer>, Option<Box<dyn Control>>) = match &endpoint {
        Endpoint::Builtin(b) => (b.build(&ds, &a.template, a.ratio, a.seed)?, None),
        Endpoint::Stdio(cmd) => {
            let s = Arc::new(StdioScorer::spawn(cmd)?);
            (Box::new(ArcScorer(s.clone())), Some(Box::new(ArcControl(s))))
        }
        Endpoint::Http(url) => {
            let s = Arc::new(HttpScorer::new(url.clone(), a.max_in_flight));
            (Box::new(ArcScorer(s.clone())), Some(Box::new(ArcControl(s))))
        }
    };
    if a.train {
        let control = control.ok_or_else(|| anyhow!("--train needs a stdio or http scorer"))?;
        let trace = drive_schedule(control.as_ref(), &ScheduleConfig::default(), a.max_epochs)?;
        let mut csv = String::from("epoch,lr,epochs_since_improvement,best_val_f1,halvings,stopped\n");
        for s in &trace {
            csv.push_str(&format!(
                "{},{:e},{},{:.4},{},{}\n",
                s.epoch, s.lr, s.epochs_since_improvement, s.best_val_f1, s.halvings, s.stopped
            ));
        }
        write_string(&output_dir.join("schedule.csv"), &csv)?;
        println!("training stopped after {} epoch(s)", trace.len());
    }
    let cfg = PipelineConfig {
        mode: a.mode,
        chunk: chunk_spec(a.window, a.overlap)?,
        extract: ExtractConfig::default(),
        policy: RepairPolicy::default(),
        template: a.template.clone(),
    };
    let labels = labels_or(&ds, &a.labels);
    let mut out = String::new();
    let mut n = 0;
    for doc in &split(&ds, &a.split)?.documents {
        for s in pipeline::score_document(scorer.as_ref(), doc, &labels, &cfg)? {
            out.push_str(&serde_json::to_string(&s)?);
            out.push('\n');
            n += 1;
        }
    }
    write_string(&output_dir.join("scores.jsonl"), &out)?;
    println!("{n} scored chunk(s)");
    Ok(0)
}

struct ArcScorer<S>(Arc<S>);

impl<S: Scorer> Scorer for ArcScorer<S> {
    fn score(&self, r: &crate::protocol::ScoreRequest) -> Result<crate::protocol::ScoreResponse, crate::protocol::BridgeError> {
        self.0.score(r)
    }
}

struct ArcControl<S>(Arc<S>);

impl<S: Control> Control for ArcControl<S> {
    fn exchange(&self, m: &crate::protocol::Message) -> Result<crate::protocol::Message, crate::protocol::BridgeError> {
        self.0.exchange(m)
    }
}

fn read_scores(path: &Path) -> anyhow::Result<Vec<ScoredChunk>> {
    let content = read_to_string(path)?;
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct PredictionsFile {
    split: String,
    documents: Vec<DocPredictions>,
}

fn decode_cmd(a: DecodeArgs) -> anyhow::Result<i32> {
    let ds = load(&a.input)?;
    let sp = split(&ds, &a.split)?;
    let scored = read_scores(&a.scores)?;
    let mut by_doc: BTreeMap<&str, Vec<ScoredChunk>> = BTreeMap::new();
    for s in &scored {
        by_doc.entry(s.doc_id.as_str()).or_default().push(s.clone());
    }
    let mode = scored.first().map_or(Mode::Qa, |s| s.response.mode);
    let cfg = PipelineConfig {
        mode,
        chunk: ChunkSpec { window: 1, overlap: 0 },
        extract: ExtractConfig {
            k: a.k,
            max_answer_len: a.max_answer_len,
            answerability: a.answerability,
            allow_overlap: a.allow_overlap,
        },
        policy: a.policy,
        template: DEFAULT_TEMPLATE.into(),
    };
    let labels = labels_or(&ds, &a.labels);
    let mut documents = Vec::new();
    for doc in &sp.documents {
        let chunks = by_doc.remove(doc.id.as_str()).unwrap_or_default();
        documents.push(pipeline::decode_document(doc, &chunks, &labels, &cfg)?);
    }
    if let Some(id) = by_doc.keys().next() {
        bail!("scores refer to document {id:?}, which is not in split {:?}", a.split);
    }
    let n: usize = documents.iter().map(|d| d.entities.len()).sum();
    let file = PredictionsFile { split: a.split.clone(), documents };
    write_string(&a.output_dir.join("predictions.json"), &(serde_json::to_string_pretty(&file)? + "\n"))?;
    println!("{n} prediction(s) over {} document(s) [policy {}]", file.documents.len(), a.policy);
    Ok(0)
}

fn eval_cmd(a: EvalArgs) -> anyhow::Result<i32> {
    let ds = load(&a.input)?;
    let sp = split(&ds, &a.split)?;
    let content = read_to_string(&a.predictions)?;
    let file: PredictionsFile =
        serde_json::from_str(&content).map_err(|e| crate::Error::json(&a.predictions, &content, e))?;
    let labels = labels_or(&ds, &a.labels);
    let r = pipeline::evaluate(sp, &file.documents, &labels, a.match_mode);
    let md = report::metrics_markdown(&r);
    print!("{md}");
    if let Some(dir) = &a.output_dir {
        write_string(&dir.join("metrics.csv"), &report::metrics_csv(&r))?;
        write_string(&dir.join("metrics.md"), &md)?;
    }
    Ok(0)
}

fn rank_labels_cmd(a: RankLabelsArgs) -> anyhow::Result<i32> {
    let ds = load(&a.input)?;
    let splits: Vec<&str> = if a.splits.is_empty() {
        ds.splits.iter().map(|s| s.name.as_str()).collect()
    } else {
        for s in &a.splits {
            split(&ds, s)?;
        }
        a.splits.iter().map(String::as_str).collect()
    };
    let ranked = rank_labels_by_length(&ds, &splits, a.top);
    let mut csv = String::from("label,count,mean_chars,median_chars\n");
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "| label | count | mean chars | median chars |\n|---|---:|---:|---:|")?;
    for r in &ranked {
        writeln!(stdout, "| {} | {} | {:.1} | {:.1} |", r.label, r.count, r.mean_chars, r.median_chars)?;
        csv.push_str(&format!("{},{},{:.4},{:.4}\n", csv_field(&r.label), r.count, r.mean_chars, r.median_chars));
    }
    if let Some(dir) = &a.output_dir {
        write_string(&dir.join("label_lengths.csv"), &csv)?;
    }
    Ok(0)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn experiment_cmd(a: ExperimentArgs) -> anyhow::Result<i32> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    cfg.apply_env();
    if let Some(s) = a.scorer {
        cfg.scorer = s;
    }
    if let Some(j) = a.jobs {
        cfg.jobs = j;
    }
    let plan = cfg.plan()?;
    let ds = experiment::load_dataset(&plan)?;
    let grid = experiment::run(&plan, &ds)?;
    report::emit(&grid, &a.output_dir)?;
    print!("{}", report::summary_markdown(&grid));
    let failed = grid.failed();
    if failed > 0 {
        eprintln!("{failed} cell(s) failed");
        return Ok(1);
    }
    Ok(0)
}

fn report_cmd(a: ReportArgs) -> anyhow::Result<i32> {
    let grid = report::read_report(&a.report)?;
    for p in report::emit(&grid, &a.output_dir)? {
        println!("{}", p.display());
    }
    Ok(if grid.failed() > 0 { 1 } else { 0 })
}
