//! Ratio × seed experiment grids.
//!
//! Each cell degrades the training splits (never the test split), runs the
//! pipeline against the test split and records a metrics report. Cells are
//! independent: builtin scorers are keyed by the cell's ratio and seed, so
//! results do not depend on execution order or on `jobs`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use docex_core::chunk::ChunkSpec;
use docex_core::decode::ExtractConfig;
use docex_core::iob::RepairPolicy;
use docex_core::metrics::{MatchMode, Report};
use docex_core::model::{Dataset, Split};
use docex_core::qa::check_template;
use docex_core::rng::stable_hash;
use docex_core::schedule::ScheduleConfig;
use docex_core::subsample::{check_ratio, subsample_documents, subsample_tags, TagSampling};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, Format};
use crate::error::{read_to_string, Error, Result};
use crate::pipeline::{default_match_mode, evaluate, predict_split, PipelineConfig};
use crate::protocol::Mode;
use crate::scorer::{Builtin, Endpoint, HttpScorer, Scorer, StdioScorer, ENDPOINT_ENV};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Vanilla,
    NoisyTags,
    FewShotDocs,
    ZeroShot,
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Setting::Vanilla => "vanilla",
            Setting::NoisyTags => "noisy_tags",
            Setting::FewShotDocs => "few_shot_docs",
            Setting::ZeroShot => "zero_shot",
        })
    }
}

pub const DEFAULT_RATIOS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const DEFAULT_WINDOW: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkConfig {
    #[serde(default = "default_window")]
    pub window: usize,
    /// Defaults to 128 for windows of at least 256 tokens, else half the window.
    #[serde(default)]
    pub overlap: Option<usize>,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        ChunkConfig { window: DEFAULT_WINDOW, overlap: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitNames {
    #[serde(default = "default_train")]
    pub train: String,
    #[serde(default = "default_validation")]
    pub validation: String,
    #[serde(default = "default_test")]
    pub test: String,
}

impl Default for SplitNames {
    fn default() -> Self {
        SplitNames { train: default_train(), validation: default_validation(), test: default_test() }
    }
}

/// Experiment configuration, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    /// Dataset location; relative paths resolve against the config file.
    pub dataset: PathBuf,
    #[serde(default = "default_format")]
    pub format: String,
    /// Re-split a single-split dataset by document id with this train fraction.
    #[serde(default)]
    pub split_by_id: Option<f64>,
    pub mode: Mode,
    pub setting: Setting,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub scorer: String,
    #[serde(default = "default_template")]
    pub template: String,
    /// `span` or `text`; defaults to span for tc, text for qa.
    #[serde(default)]
    pub match_mode: Option<String>,
    #[serde(default = "default_policy")]
    pub policy: String,
    #[serde(default)]
    pub tag_sampling: TagSampling,
    #[serde(default)]
    pub chunk: ChunkConfig,
    #[serde(default)]
    pub extract: ExtractConfig,
    /// Labels asked about in the zero-shot setting.
    #[serde(default)]
    pub zero_shot_labels: Vec<String>,
    #[serde(default)]
    pub splits: SplitNames,
    #[serde(default = "one")]
    pub max_in_flight: usize,
    #[serde(default = "one")]
    pub jobs: usize,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    /// Passed through to training servers untouched (batch sizes etc.).
    #[serde(default)]
    pub training: toml::Table,
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_train() -> String {
    "train".into()
}
fn default_validation() -> String {
    "validation".into()
}
fn default_test() -> String {
    "test".into()
}
fn default_format() -> String {
    "canonical".into()
}
fn default_ratios() -> Vec<f64> {
    DEFAULT_RATIOS.to_vec()
}
fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}
fn default_template() -> String {
    docex_core::qa::DEFAULT_TEMPLATE.into()
}
fn default_policy() -> String {
    RepairPolicy::default().to_string()
}
fn one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and resolves the dataset path against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&read_to_string(path)?).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if cfg.dataset.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.dataset = dir.join(&cfg.dataset);
            }
        }
        Ok(cfg)
    }

    /// Applies the scorer endpoint override from the environment, if set.
    pub fn apply_env(&mut self) {
        if let Ok(v) = std::env::var(ENDPOINT_ENV) {
            if !v.trim().is_empty() {
                self.scorer = v;
            }
        }
    }

    pub fn plan(&self) -> Result<Plan> {
        let bad = |m: String| Err(Error::Config(m));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        for &r in &self.ratios {
            if check_ratio(r).is_err() {
                return bad(format!("ratio {r} outside (0, 1]"));
            }
        }
        if self.ratios.is_empty() && matches!(self.setting, Setting::NoisyTags | Setting::FewShotDocs) {
            return bad("ratios must not be empty".into());
        }
        for (i, r) in self.ratios.iter().enumerate() {
            if self.ratios[..i].contains(r) {
                return bad(format!("ratio {r} listed twice"));
            }
        }
        for (i, s) in self.seeds.iter().enumerate() {
            if self.seeds[..i].contains(s) {
                return bad(format!("seed {s} listed twice"));
            }
        }
        if self.setting == Setting::ZeroShot {
            if self.mode != Mode::Qa {
                return bad("zero_shot requires mode = \"qa\": token classification cannot predict unseen labels".into());
            }
            if self.zero_shot_labels.is_empty() {
                return bad("zero_shot requires a non-empty zero_shot_labels list".into());
            }
        }
        if let Some(f) = self.split_by_id {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("split_by_id fraction {f} outside (0, 1)"));
            }
        }
        let format: Format = self.format.parse().map_err(Error::Config)?;
        let endpoint: Endpoint = self.scorer.parse().map_err(Error::Config)?;
        let policy: RepairPolicy = self.policy.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let match_mode = match &self.match_mode {
            Some(m) => m.parse().map_err(Error::Config)?,
            None => default_match_mode(self.mode),
        };
        check_template(&self.template).map_err(|e| Error::Config(e.to_string()))?;
        let chunk = match self.chunk.overlap {
            Some(o) => ChunkSpec::new(self.chunk.window, o),
            None => ChunkSpec::with_default_overlap(self.chunk.window),
        }
        .map_err(|e| Error::Config(e.to_string()))?;
        if self.extract.k == 0 || self.extract.max_answer_len == 0 {
            return bad("extract.k and extract.max_answer_len must be at least 1".into());
        }
        let cells = match self.setting {
            Setting::Vanilla | Setting::ZeroShot => vec![(1.0, self.seeds[0])],
            Setting::NoisyTags | Setting::FewShotDocs => {
                self.ratios.iter().flat_map(|&r| self.seeds.iter().map(move |&s| (r, s))).collect()
            }
        };
        Ok(Plan {
            config: self.clone(),
            format,
            endpoint,
            match_mode,
            pipeline: PipelineConfig { mode: self.mode, chunk, extract: self.extract, policy, template: self.template.clone() },
            cells,
        })
    }
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Plan {
    pub config: ExperimentConfig,
    pub format: Format,
    pub endpoint: Endpoint,
    pub match_mode: MatchMode,
    pub pipeline: PipelineConfig,
    /// `(ratio, seed)` in run order.
    pub cells: Vec<(f64, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub ratio: f64,
    pub seed: u64,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Sizes of the degraded training splits.
    pub train_documents: usize,
    pub train_entities: usize,
    pub validation_entities: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<Report>,
    /// Hash of the cell's predictions, for determinism checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub ratio: f64,
    /// Successful cells aggregated.
    pub cells: usize,
    pub failed: usize,
    pub mean_f1: f64,
    /// Sample standard deviation; 0 for fewer than two cells.
    pub std_f1: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub name: String,
    pub dataset: String,
    pub mode: Mode,
    pub setting: Setting,
    pub scorer: String,
    pub match_mode: MatchMode,
    pub policy: String,
    pub tag_sampling: TagSampling,
    pub template: String,
    pub chunk: ChunkSpec,
    pub extract: ExtractConfig,
    pub labels: Vec<String>,
    pub test_split: String,
    pub test_documents: usize,
    pub schedule: ScheduleConfig,
    pub training: toml::Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub run: RunInfo,
    pub cells: Vec<CellResult>,
    pub ratios: Vec<RatioSummary>,
}

impl GridReport {
    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.status == CellStatus::Failed).count()
    }
}

/// Mean and sample standard deviation (`n - 1`); `(0, 0)` for no values and a
/// zero deviation for a single value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Loads the dataset the plan refers to, applying `split_by_id` if set.
pub fn load_dataset(plan: &Plan) -> Result<Dataset> {
    let ds = dataset::load(&plan.config.dataset, plan.format)?;
    match plan.config.split_by_id {
        Some(f) => {
            let source = ds.splits.first().map(|s| s.name.clone()).unwrap_or_default();
            dataset::split_by_id(&ds, &source, f)
        }
        None => Ok(ds),
    }
}

/// Connects to the plan's scorer; builtin scorers are created per cell.
enum Connection {
    Builtin(Builtin),
    Shared(Arc<dyn Scorer>),
}

fn connect(endpoint: &Endpoint, max_in_flight: usize) -> Result<Connection> {
    Ok(match endpoint {
        Endpoint::Builtin(b) => Connection::Builtin(b.clone()),
        Endpoint::Stdio(cmd) => Connection::Shared(Arc::new(StdioScorer::spawn(cmd)?)),
        Endpoint::Http(url) => Connection::Shared(Arc::new(HttpScorer::new(url.clone(), max_in_flight))),
    })
}

pub fn run(plan: &Plan, dataset: &Dataset) -> Result<GridReport> {
    let cfg = &plan.config;
    let test = dataset
        .split(&cfg.splits.test)
        .ok_or_else(|| Error::Config(format!("dataset has no {:?} split", cfg.splits.test)))?;
    let labels = match cfg.setting {
        Setting::ZeroShot => cfg.zero_shot_labels.clone(),
        _ => dataset.label_set.clone(),
    };
    let connection = connect(&plan.endpoint, cfg.max_in_flight)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let cells: Vec<CellResult> = pool.install(|| {
        plan.cells.par_iter().map(|&(ratio, seed)| run_cell(plan, dataset, test, &labels, &connection, ratio, seed)).collect()
    });

    let mut ratios = Vec::new();
    for &(ratio, _) in &plan.cells {
        if ratios.iter().any(|r: &RatioSummary| r.ratio == ratio) {
            continue;
        }
        let of_ratio: Vec<&CellResult> = cells.iter().filter(|c| c.ratio == ratio).collect();
        let ok: Vec<&Report> = of_ratio.iter().filter_map(|c| c.report.as_ref()).collect();
        let f1s: Vec<f64> = ok.iter().map(|r| r.weighted_avg.f1).collect();
        let (mean_f1, std_f1) = mean_std(&f1s);
        let mean_of = |f: fn(&Report) -> f64| mean_std(&ok.iter().map(|r| f(r)).collect::<Vec<_>>()).0;
        ratios.push(RatioSummary {
            ratio,
            cells: ok.len(),
            failed: of_ratio.len() - ok.len(),
            mean_f1,
            std_f1,
            mean_precision: mean_of(|r| r.weighted_avg.precision),
            mean_recall: mean_of(|r| r.weighted_avg.recall),
        });
    }

    Ok(GridReport {
        run: RunInfo {
            name: if cfg.name.is_empty() { format!("{}-{}-{}", dataset.name, cfg.mode, cfg.setting) } else { cfg.name.clone() },
            dataset: dataset.name.clone(),
            mode: cfg.mode,
            setting: cfg.setting,
            scorer: plan.endpoint.to_string(),
            match_mode: plan.match_mode,
            policy: plan.pipeline.policy.to_string(),
            tag_sampling: cfg.tag_sampling,
            template: cfg.template.clone(),
            chunk: plan.pipeline.chunk,
            extract: plan.pipeline.extract,
            labels,
            test_split: test.name.clone(),
            test_documents: test.documents.len(),
            schedule: cfg.schedule,
            training: cfg.training.clone(),
        },
        cells,
        ratios,
    })
}

fn degrade(plan: &Plan, split: &Split, ratio: f64, seed: u64) -> Split {
    let r = match plan.config.setting {
        Setting::NoisyTags => subsample_tags(split, ratio, seed, plan.config.tag_sampling),
        Setting::FewShotDocs => subsample_documents(split, ratio, seed),
        Setting::Vanilla | Setting::ZeroShot => return split.clone(),
    };
    r.expect("ratios validated by plan")
}

fn run_cell(
    plan: &Plan,
    dataset: &Dataset,
    test: &Split,
    labels: &[String],
    connection: &Connection,
    ratio: f64,
    seed: u64,
) -> CellResult {
    let names = &plan.config.splits;
    let train = dataset.split(&names.train).map(|s| degrade(plan, s, ratio, seed));
    let validation = dataset.split(&names.validation).map(|s| degrade(plan, s, ratio, seed));
    let mut cell = CellResult {
        ratio,
        seed,
        status: CellStatus::Failed,
        error: None,
        train_documents: train.as_ref().map_or(0, |s| s.documents.len()),
        train_entities: train.as_ref().map_or(0, Split::entity_count),
        validation_entities: validation.as_ref().map_or(0, Split::entity_count),
        report: None,
        digest: None,
    };
    let owned;
    let scorer: &dyn Scorer = match connection {
        Connection::Shared(s) => s.as_ref(),
        Connection::Builtin(b) => match b.build(dataset, &plan.pipeline.template, ratio, seed) {
            Ok(s) => {
                owned = s;
                owned.as_ref()
            }
            Err(e) => {
                cell.error = Some(e.to_string());
                return cell;
            }
        },
    };
    match predict_split(scorer, test, labels, &plan.pipeline) {
        Ok(predictions) => {
            let json = serde_json::to_string(&predictions).expect("predictions serialize");
            cell.digest = Some(format!("{:016x}", stable_hash(json.as_bytes())));
            cell.report = Some(evaluate(test, &predictions, labels, plan.match_mode));
            cell.status = CellStatus::Ok;
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
dataset = "data"
mode = "qa"
setting = "noisy_tags"
scorer = "builtin:noisy"
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.ratios, DEFAULT_RATIOS);
        assert_eq!(cfg.seeds, [0, 1, 2, 3, 4]);
        assert_eq!(cfg.extract, ExtractConfig::default());
        assert_eq!(cfg.schedule, ScheduleConfig::default());
        let plan = cfg.plan().unwrap();
        assert_eq!(plan.cells.len(), 25);
        assert_eq!(plan.match_mode, MatchMode::Text);
        assert_eq!(plan.pipeline.chunk, ChunkSpec { window: 256, overlap: 128 });
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let with = |extra: &str| ExperimentConfig::from_toml(&format!("{MINIMAL}{extra}"));
        assert!(with("bogus = 1").is_err());
        for extra in ["ratios = [0.0]", "ratios = [1.5]", "seeds = []", "ratios = [0.5, 0.5]", "policy = \"sideways\""] {
            assert!(with(extra).unwrap().plan().is_err(), "{extra}");
        }
        let tc_zero = MINIMAL.replace("\"qa\"", "\"tc\"").replace("noisy_tags", "zero_shot") + "zero_shot_labels = [\"party\"]";
        let err = ExperimentConfig::from_toml(&tc_zero).unwrap().plan().unwrap_err();
        assert!(err.to_string().contains("zero_shot requires mode"));
    }

    #[test]
    fn vanilla_is_one_cell() {
        let cfg = ExperimentConfig::from_toml(&MINIMAL.replace("noisy_tags", "vanilla")).unwrap();
        assert_eq!(cfg.plan().unwrap().cells, [(1.0, 0)]);
    }

    #[test]
    fn sample_standard_deviation() {
        assert_eq!(mean_std(&[]), (0.0, 0.0));
        assert_eq!(mean_std(&[0.4]), (0.4, 0.0));
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, 5.0);
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    }
}
