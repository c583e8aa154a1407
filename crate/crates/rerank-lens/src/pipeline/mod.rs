//! Config-driven pipeline: ingest → score → rerank → eval → separate →
//! report, with a run manifest for reproducibility.
//!
//! Stage artifacts are plain files handed between stages, so any stage
//! can be replaced by an external script producing the same format.
//! Every artifact is written through a `.partial` sibling and renamed
//! into place; a failing stage never clobbers completed outputs.

mod manifest;

pub use manifest::{file_digest, partial_path, stage_seed, write_atomic, RunManifest};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    self, ChunkingSpec, ChunkingStrategy, CorpusError, Dataset, DatasetFormat, LoadOptions,
    QueryTemplate,
};
use crate::lexical::{self, Bm25Params, IdfScope, SimilarityMatrix, TokenizerConfig};
use crate::metrics::{self, BootstrapSpec, MetricSpec, SeparationRecord};
use crate::report::{self, GridFormat};
use crate::rerankers::{self, ChatTransport, Ranking};

/// Errors from pipeline configuration and stage execution.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("stage {stage}: {message}")]
    Stage { stage: &'static str, message: String },
}

fn stage_err<E: std::fmt::Display>(stage: &'static str, e: E) -> PipelineError {
    PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

/// Corpus transform applied at ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformTag {
    #[default]
    None,
    PrependTitles,
    IncorporateContext,
}

impl TransformTag {
    pub fn as_str(self) -> &'static str {
        match self {
            TransformTag::None => "none",
            TransformTag::PrependTitles => "prepend-titles",
            TransformTag::IncorporateContext => "incorporate-context",
        }
    }
}

/// Re-ranker backend selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Bm25,
    File,
    ListwiseLlm,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Bm25 => "bm25",
            Backend::File => "file",
            Backend::ListwiseLlm => "listwise-llm",
        }
    }
}

/// Similarity measure selector for the score stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    #[default]
    Bm25,
    Jaccard,
}

fn default_format() -> DatasetFormat {
    DatasetFormat::Jsonl
}
fn default_chunking() -> ChunkingStrategy {
    ChunkingStrategy::PreChunked
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestConfig {
    pub input: PathBuf,
    #[serde(default = "default_format")]
    pub format: DatasetFormat,
    #[serde(default = "default_chunking")]
    pub chunking: ChunkingStrategy,
    #[serde(default)]
    pub fuzzy_threshold: Option<f64>,
    #[serde(default)]
    pub transform: TransformTag,
    #[serde(default)]
    pub skip_invalid: bool,
}

fn default_k1() -> f64 {
    1.5
}
fn default_b() -> f64 {
    0.75
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreConfig {
    #[serde(default)]
    pub measure: Measure,
    #[serde(default = "default_k1")]
    pub k1: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default)]
    pub idf_scope: IdfScope,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            measure: Measure::Bm25,
            k1: default_k1(),
            b: default_b(),
            idf_scope: IdfScope::default(),
        }
    }
}

impl ScoreConfig {
    pub fn bm25_params(&self) -> Bm25Params {
        Bm25Params {
            k1: self.k1,
            b: self.b,
            idf_scope: self.idf_scope,
        }
    }
}

fn default_window() -> usize {
    20
}
fn default_step() -> usize {
    2
}
fn default_query_template() -> QueryTemplate {
    QueryTemplate::Default
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RerankConfig {
    pub backend: Backend,
    /// Score file for the `file` backend.
    #[serde(default)]
    pub scores: Option<PathBuf>,
    /// Chat-completion endpoint for the `listwise-llm` backend.
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_step")]
    pub step: usize,
    #[serde(default = "default_query_template")]
    pub query_template: QueryTemplate,
    /// Requests per second cap for the HTTP transport.
    #[serde(default)]
    pub rate_limit: Option<f64>,
}

fn default_metrics() -> Vec<String> {
    vec!["p@1".into(), "delta".into()]
}
fn default_bootstrap() -> usize {
    1000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
    /// Bootstrap resamples; 0 disables confidence intervals.
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default)]
    pub reranker_tag: Option<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            metrics: default_metrics(),
            bootstrap: default_bootstrap(),
            reranker_tag: None,
        }
    }
}

fn default_threshold() -> f64 {
    -0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparateConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl Default for SeparateConfig {
    fn default() -> Self {
        SeparateConfig {
            threshold: default_threshold(),
        }
    }
}

fn default_grid_format() -> GridFormat {
    GridFormat::Markdown
}
fn default_bin_width() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportConfig {
    #[serde(default = "default_grid_format")]
    pub format: GridFormat,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            format: default_grid_format(),
            bin_width: default_bin_width(),
        }
    }
}

fn default_seed() -> u64 {
    7
}

/// The full pipeline configuration, read from a TOML file. Relative
/// paths resolve against the config file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Dataset tag for reports; defaults to the input file stem.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub out_dir: PathBuf,
    pub ingest: IngestConfig,
    #[serde(default)]
    pub score: ScoreConfig,
    pub rerank: RerankConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub separate: SeparateConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<(Self, toml::Value), PipelineError> {
        let content = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let snapshot: toml::Value =
            toml::from_str(&content).map_err(|e| PipelineError::Config {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        let mut config: PipelineConfig =
            toml::from_str(&content).map_err(|e| PipelineError::Config {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.ingest.input = base.join(&config.ingest.input);
        if let Some(scores) = &config.rerank.scores {
            config.rerank.scores = Some(base.join(scores));
        }
        config.out_dir = base.join(&config.out_dir);
        Ok((config, snapshot))
    }
}

/// Run-level options from the command line.
#[derive(Debug, Clone, Default)]
pub struct PipelineOptions {
    /// Worker thread cap for within-stage parallelism.
    pub jobs: Option<usize>,
    /// Replay listwise replies from the previous run's audit log.
    pub replay: bool,
    /// Overrides the config seed.
    pub seed: Option<u64>,
    /// Recorded in the manifest.
    pub command_line: String,
}

/// Paths of the artifacts a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub manifest: PathBuf,
}

struct Ctx {
    out_dir: PathBuf,
    artifacts: Vec<PathBuf>,
}

impl Ctx {
    fn artifact(&mut self, name: &str) -> PathBuf {
        let path = self.out_dir.join(name);
        self.artifacts.push(path.clone());
        path
    }
}

/// Executes the full stage sequence described by the config file and
/// writes all artifacts plus the run manifest under `out_dir`. Any stage
/// failure halts the run with a stage-tagged error, leaving at most a
/// `.partial` file behind.
pub fn run_pipeline(
    config_path: &Path,
    opts: &PipelineOptions,
) -> Result<RunSummary, PipelineError> {
    let (config, snapshot) = PipelineConfig::load(config_path)?;
    let seed = opts.seed.unwrap_or(config.seed);
    let started_at = chrono::Utc::now().to_rfc3339();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| stage_err("setup", e))?;

    std::fs::create_dir_all(&config.out_dir).map_err(|source| PipelineError::Io {
        path: config.out_dir.display().to_string(),
        source,
    })?;
    let mut ctx = Ctx {
        out_dir: config.out_dir.clone(),
        artifacts: Vec::new(),
    };

    let mut input_digests = BTreeMap::new();
    input_digests.insert(
        config_path.display().to_string(),
        file_digest(config_path)?,
    );
    input_digests.insert(
        config.ingest.input.display().to_string(),
        file_digest(&config.ingest.input)?,
    );
    if let Some(scores) = &config.rerank.scores {
        input_digests.insert(scores.display().to_string(), file_digest(scores)?);
    }

    let mut stage_seeds = BTreeMap::new();
    for stage in ["ingest", "score", "rerank", "eval", "separate", "report"] {
        stage_seeds.insert(stage.to_string(), stage_seed(seed, stage));
    }

    let summary = pool.install(|| -> Result<RunSummary, PipelineError> {
        // ingest
        let dataset = ingest_stage(&config)?;
        let dataset_path = ctx.artifact("dataset.jsonl");
        write_via_partial(&dataset_path, |p| corpus::write_dataset(&dataset, p))
            .map_err(|e| stage_err("ingest", e))?;

        // score
        let tok = TokenizerConfig::new();
        let bm25_matrices = lexical::score_dataset(&dataset, &config.score.bm25_params(), &tok);
        let bm25_path = ctx.artifact("bm25_scores.csv");
        write_via_partial(&bm25_path, |p| lexical::write_scores(&bm25_matrices, p))
            .map_err(|e| stage_err("score", e))?;
        let measure_matrices: Vec<SimilarityMatrix> = match config.score.measure {
            Measure::Bm25 => bm25_matrices.clone(),
            Measure::Jaccard => {
                let ms: Vec<SimilarityMatrix> = dataset
                    .samples()
                    .par_iter()
                    .map(|s| lexical::jaccard_scores(s, &tok))
                    .collect();
                let path = ctx.artifact("jaccard_scores.csv");
                write_via_partial(&path, |p| lexical::write_scores(&ms, p))
                    .map_err(|e| stage_err("score", e))?;
                ms
            }
        };

        // rerank
        let rankings = rerank_stage(&config, &dataset, &bm25_matrices, opts, &mut ctx)?;
        let rankings_path = ctx.artifact("rankings.jsonl");
        write_via_partial(&rankings_path, |p| {
            rerankers::write_rankings(&rankings, p)
        })
        .map_err(|e| stage_err("rerank", e))?;

        // eval
        let specs: Vec<MetricSpec> = config
            .eval
            .metrics
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, String>>()
            .map_err(|e| stage_err("eval", e))?;
        let reranker_tag = config
            .eval
            .reranker_tag
            .clone()
            .unwrap_or_else(|| config.rerank.backend.as_str().to_string());
        let eval_report = metrics::evaluate(
            &dataset,
            &rankings,
            &bm25_matrices,
            &specs,
            BootstrapSpec {
                resamples: config.eval.bootstrap,
                level: 0.95,
                seed: stage_seed(seed, "eval"),
            },
            &reranker_tag,
            config.ingest.transform.as_str(),
        )
        .map_err(|e| stage_err("eval", e))?;
        let report_path = ctx.artifact("report.json");
        write_via_partial(&report_path, |p| eval_report.write_json(p))
            .map_err(|e| stage_err("eval", e))?;

        // separate
        let records = metrics::separation_profile(&dataset, &measure_matrices, &rankings)
            .map_err(|e| stage_err("separate", e))?;
        let profile_path = ctx.artifact("profile.csv");
        write_via_partial(&profile_path, |p| metrics::write_profile_csv(&records, p))
            .map_err(|e| stage_err("separate", e))?;

        // report
        report_stage(&config, &dataset, &eval_report, &records, &mut ctx)?;

        Ok(RunSummary {
            out_dir: ctx.out_dir.clone(),
            artifacts: std::mem::take(&mut ctx.artifacts),
            manifest: ctx.out_dir.join("manifest.json"),
        })
    })?;

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command_line: opts.command_line.clone(),
        seed,
        config: snapshot,
        input_digests,
        stage_seeds,
        started_at,
        finished_at: chrono::Utc::now().to_rfc3339(),
    };
    manifest.write_json(&summary.manifest)?;
    Ok(summary)
}

/// Writes through the shared `.partial` convention, adapting writers that
/// take a target path.
fn write_via_partial<E: std::fmt::Display>(
    path: &Path,
    write: impl FnOnce(&Path) -> Result<(), E>,
) -> Result<(), String> {
    let partial = partial_path(path);
    write(&partial).map_err(|e| e.to_string())?;
    std::fs::rename(&partial, path).map_err(|e| e.to_string())
}

fn ingest_stage(config: &PipelineConfig) -> Result<Dataset, PipelineError> {
    let err = |e: CorpusError| stage_err("ingest", e);
    let ic = &config.ingest;
    let spec = ChunkingSpec {
        strategy: ic.chunking,
        fuzzy_threshold: ic.fuzzy_threshold,
    };
    let dataset = match ic.chunking {
        ChunkingStrategy::PreChunked => {
            corpus::load_dataset_opts(
                &ic.input,
                ic.format,
                LoadOptions {
                    skip_invalid: ic.skip_invalid,
                },
            )
            .map_err(err)?
            .dataset
        }
        ChunkingStrategy::HtmlElement | ChunkingStrategy::NewlineParagraph => {
            spec.validate().map_err(err)?;
            let raws = corpus::load_raw_documents(&ic.input).map_err(err)?;
            let mut samples = Vec::new();
            for raw in raws {
                let id = raw.id.clone();
                match raw.into_sample(&spec) {
                    Ok(s) => samples.push(s),
                    Err(e) if ic.skip_invalid => {
                        log::warn!("skipping document {id}: {e}");
                    }
                    Err(e) => return Err(stage_err("ingest", e)),
                }
            }
            let name = ic
                .input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into());
            Dataset::new(name, samples).map_err(err)?
        }
    };
    let dataset = match &config.name {
        Some(name) => dataset.renamed(name),
        None => dataset,
    };
    let dataset = match ic.transform {
        TransformTag::None => dataset,
        TransformTag::PrependTitles => corpus::prepend_titles(&dataset).map_err(err)?,
        TransformTag::IncorporateContext => corpus::incorporate_context(&dataset).map_err(err)?,
    };
    Ok(dataset)
}

fn rerank_stage(
    config: &PipelineConfig,
    dataset: &Dataset,
    bm25_matrices: &[SimilarityMatrix],
    opts: &PipelineOptions,
    ctx: &mut Ctx,
) -> Result<Vec<Ranking>, PipelineError> {
    match config.rerank.backend {
        Backend::Bm25 => dataset
            .samples()
            .iter()
            .zip(bm25_matrices)
            .map(|(s, m)| rerankers::rerank_bm25(s, m).map_err(|e| stage_err("rerank", e)))
            .collect(),
        Backend::File => {
            let path = config.rerank.scores.as_ref().ok_or_else(|| {
                PipelineError::Stage {
                    stage: "rerank",
                    message: "file backend requires [rerank] scores".into(),
                }
            })?;
            rerankers::rerank_from_file(dataset, path).map_err(|e| stage_err("rerank", e))
        }
        Backend::ListwiseLlm => {
            let endpoint = config.rerank.endpoint.clone().ok_or_else(|| {
                PipelineError::Stage {
                    stage: "rerank",
                    message: "listwise-llm backend requires [rerank] endpoint".into(),
                }
            })?;
            let model = config.rerank.model.clone().ok_or_else(|| {
                PipelineError::Stage {
                    stage: "rerank",
                    message: "listwise-llm backend requires [rerank] model".into(),
                }
            })?;
            let mut llm = rerankers::ListwiseLlmConfig::new(endpoint, model);
            llm.window_size = config.rerank.window;
            llm.step_size = config.rerank.step;

            let log_path = ctx.out_dir.join("listwise_log.jsonl");
            let transport: Box<dyn ChatTransport> = if opts.replay {
                Box::new(rerankers::ReplayTransport::from_log_file(&log_path).map_err(|e| stage_err("rerank", e))?)
            } else {
                let http = rerankers::HttpTransport::from_env(&llm).map_err(|e| stage_err("rerank", e))?;
                match config.rerank.rate_limit {
                    Some(rate) => Box::new(http.with_rate_limit(rate)),
                    None => Box::new(http),
                }
            };

            let outcomes: Vec<_> = dataset
                .samples()
                .par_iter()
                .map(|sample| {
                    let query = corpus::render_query(sample, config.rerank.query_template)
                        .map_err(|e| e.to_string())?;
                    rerankers::rerank_listwise(sample, &query, &llm, transport.as_ref())
                        .map_err(|e| e.to_string())
                })
                .collect();

            let mut rankings = Vec::with_capacity(outcomes.len());
            let mut logs = Vec::with_capacity(outcomes.len());
            for outcome in outcomes {
                let outcome = outcome.map_err(|e| stage_err("rerank", e))?;
                rankings.push(outcome.ranking);
                logs.push(outcome.log);
            }
            ctx.artifacts.push(log_path.clone());
            write_via_partial(&log_path, |p| rerankers::write_listwise_logs(&logs, p))
                .map_err(|e| stage_err("rerank", e))?;
            Ok(rankings)
        }
    }
}

fn report_stage(
    config: &PipelineConfig,
    dataset: &Dataset,
    eval_report: &metrics::EvalReport,
    records: &[SeparationRecord],
    ctx: &mut Ctx,
) -> Result<(), PipelineError> {
    let report_dir = ctx.out_dir.join("report");
    std::fs::create_dir_all(&report_dir).map_err(|source| PipelineError::Io {
        path: report_dir.display().to_string(),
        source,
    })?;

    let grid = report::build_grid(std::slice::from_ref(eval_report));
    let grid_doc = report::render_grid(&grid, config.report.format);
    let grid_path = report_dir.join(format!("grid.{}", config.report.format.extension()));
    write_atomic(&grid_path, grid_doc.as_bytes())?;
    ctx.artifacts.push(grid_path);

    let table = metrics::partition_eval(records, config.separate.threshold);
    let partitions_path = report_dir.join("partitions.csv");
    write_atomic(
        &partitions_path,
        report::render_partitions_csv(&[table]).as_bytes(),
    )?;
    ctx.artifacts.push(partitions_path);

    let hist = report::histogram(records, config.report.bin_width);
    let hist_path = report_dir.join(format!(
        "hist_{}_{}.csv",
        sanitize(dataset.name()),
        sanitize(&hist.measure)
    ));
    write_atomic(&hist_path, hist.to_csv().as_bytes())?;
    ctx.artifacts.push(hist_path);

    let stats = report::render_stats_csv(&[(dataset.name().to_string(), dataset.stats().clone())]);
    let stats_path = report_dir.join("stats.csv");
    write_atomic(&stats_path, stats.as_bytes())?;
    ctx.artifacts.push(stats_path);

    Ok(())
}

fn sanitize(tag: &str) -> String {
    tag.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}
