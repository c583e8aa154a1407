//! Command-line interface: ingest → score → rerank → eval → separate →
//! report, as single stages or as a config-driven pipeline (`run`).

use std::error::Error;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use rerank_lens::corpus::{
    self, ChunkingSpec, ChunkingStrategy, Dataset, DatasetFormat, LoadOptions, QueryTemplate,
};
use rerank_lens::lexical::{self, Bm25Params, IdfScope, TokenizerConfig};
use rerank_lens::metrics::{self, BootstrapSpec, MetricSpec};
use rerank_lens::pipeline::{self, PipelineOptions};
use rerank_lens::report::{self, GridFormat};
use rerank_lens::rerankers::{self, ChatTransport, ListwiseLlmConfig};

type CliResult = Result<(), Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "rerank-lens",
    version,
    about = "Evaluate passage re-rankers against gold labels and a BM25 baseline"
)]
struct Cli {
    /// Worker threads for within-stage parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for stochastic steps such as bootstrap resampling.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Replay listwise-LLM replies from the audit log instead of
    /// calling the endpoint.
    #[arg(long, global = true)]
    replay: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChunkingArg {
    HtmlElement,
    NewlineParagraph,
    PreChunked,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformArg {
    None,
    PrependTitles,
    IncorporateContext,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureArg {
    Bm25,
    Jaccard,
}

#[derive(Clone, Copy, ValueEnum)]
enum IdfScopeArg {
    PerSample,
    WholeDataset,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Bm25,
    File,
    ListwiseLlm,
}

#[derive(Clone, Copy, ValueEnum)]
enum QueryTemplateArg {
    Default,
    ClaimVerification,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw documents or a pre-chunked dataset into validated
    /// dataset JSONL, optionally applying a corpus transform.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "jsonl")]
        format: String,
        #[arg(long, value_enum, default_value_t = ChunkingArg::PreChunked)]
        chunking: ChunkingArg,
        /// Gold-matching threshold (newline-paragraph chunking only).
        #[arg(long)]
        fuzzy_threshold: Option<f64>,
        #[arg(long, value_enum, default_value_t = TransformArg::None)]
        transform: TransformArg,
        /// Downgrade invalid samples to warnings instead of failing.
        #[arg(long)]
        skip_invalid: bool,
        #[arg(long)]
        output: PathBuf,
    },
    /// Compute query-passage similarity scores for every sample.
    Score {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = MeasureArg::Bm25)]
        measure: MeasureArg,
        #[arg(long, default_value_t = 1.5)]
        k1: f64,
        #[arg(long, default_value_t = 0.75)]
        b: f64,
        #[arg(long, value_enum, default_value_t = IdfScopeArg::PerSample)]
        idf_scope: IdfScopeArg,
        #[arg(long)]
        output: PathBuf,
    },
    /// Produce a ranking per sample with the chosen backend.
    Rerank {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        backend: BackendArg,
        /// Score file for the file backend.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Chat-completion endpoint for the listwise-llm backend.
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long, default_value_t = 20)]
        window: usize,
        #[arg(long, default_value_t = 2)]
        step: usize,
        #[arg(long, value_enum, default_value_t = QueryTemplateArg::Default)]
        query_template: QueryTemplateArg,
        /// Requests per second cap for the HTTP transport.
        #[arg(long)]
        rate_limit: Option<f64>,
        /// Audit-log path (default: <output>.log.jsonl). Written on
        /// live runs, read under --replay.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Evaluate rankings: P@1, ΔP@1, recall@k, nDCG@k with bootstrap CIs.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        rankings: PathBuf,
        /// BM25 score file backing the BM25-max relevance view.
        #[arg(long)]
        bm25_scores: PathBuf,
        /// Comma-separated list: p@1,delta,recall@5,ndcg@10
        #[arg(long, value_delimiter = ',', default_value = "p@1,delta")]
        metrics: Vec<String>,
        /// Bootstrap resamples; 0 disables confidence intervals.
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        /// Re-ranker tag recorded in the report.
        #[arg(long, default_value = "reranker")]
        reranker_tag: String,
        /// Transform tag recorded in the report.
        #[arg(long, default_value = "none")]
        transform_tag: String,
        #[arg(long)]
        output: PathBuf,
    },
    /// Join per-sample separation values D_S with ranking correctness.
    Separate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        rankings: PathBuf,
        #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
        threshold: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Render grids, partition tables, histograms and dataset stats.
    Report {
        /// Evaluation report(s) produced by `eval`; repeatable.
        #[arg(long, required = true)]
        eval: Vec<PathBuf>,
        /// Separation profile produced by `separate`.
        #[arg(long)]
        profile: PathBuf,
        /// Dataset file for the stats table.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Markdown)]
        format: FormatArg,
        #[arg(long, default_value_t = 0.5)]
        bin_width: f64,
        #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
        threshold: f64,
        /// Output directory.
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the whole pipeline from a TOML config, writing a run manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // The pipeline builds its own pool; this covers single stages.
        let _ = rayon_global(jobs);
    }
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn rayon_global(jobs: usize) -> Result<(), String> {
    rerank_lens::set_worker_threads(jobs)
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Ingest {
            input,
            format,
            chunking,
            fuzzy_threshold,
            transform,
            skip_invalid,
            output,
        } => ingest(
            &input,
            &format,
            chunking,
            fuzzy_threshold,
            transform,
            skip_invalid,
            &output,
        ),
        Command::Score {
            dataset,
            measure,
            k1,
            b,
            idf_scope,
            output,
        } => score(&dataset, measure, k1, b, idf_scope, &output),
        Command::Rerank {
            dataset,
            backend,
            scores,
            endpoint,
            model,
            window,
            step,
            query_template,
            rate_limit,
            log,
            output,
        } => rerank(RerankArgs {
            dataset,
            backend,
            scores,
            endpoint,
            model,
            window,
            step,
            query_template,
            rate_limit,
            log,
            output,
            replay: cli.replay,
        }),
        Command::Eval {
            dataset,
            rankings,
            bm25_scores,
            metrics,
            bootstrap,
            reranker_tag,
            transform_tag,
            output,
        } => eval(
            &dataset,
            &rankings,
            &bm25_scores,
            &metrics,
            bootstrap,
            cli.seed,
            &reranker_tag,
            &transform_tag,
            &output,
        ),
        Command::Separate {
            dataset,
            scores,
            rankings,
            threshold,
            output,
        } => separate(&dataset, &scores, &rankings, threshold, &output),
        Command::Report {
            eval,
            profile,
            dataset,
            format,
            bin_width,
            threshold,
            output,
        } => render_report(&eval, &profile, dataset.as_deref(), format, bin_width, threshold, &output),
        Command::Run { config } => {
            let opts = PipelineOptions {
                jobs: cli.jobs,
                replay: cli.replay,
                seed: Some(cli.seed),
                command_line: std::env::args().collect::<Vec<_>>().join(" "),
            };
            let summary = pipeline::run_pipeline(&config, &opts)?;
            for artifact in &summary.artifacts {
                println!("wrote {}", artifact.display());
            }
            println!("wrote {}", summary.manifest.display());
            Ok(())
        }
    }
}

fn parse_format(format: &str) -> Result<DatasetFormat, Box<dyn Error>> {
    match format {
        "jsonl" => Ok(DatasetFormat::Jsonl),
        other => Err(format!("unsupported format {other}; expected jsonl").into()),
    }
}

fn load(path: &Path) -> Result<Dataset, Box<dyn Error>> {
    Ok(corpus::load_dataset(path, DatasetFormat::Jsonl)?)
}

fn ingest(
    input: &Path,
    format: &str,
    chunking: ChunkingArg,
    fuzzy_threshold: Option<f64>,
    transform: TransformArg,
    skip_invalid: bool,
    output: &Path,
) -> CliResult {
    let format = parse_format(format)?;
    let opts = LoadOptions { skip_invalid };
    let dataset = match chunking {
        ChunkingArg::PreChunked => {
            let outcome = corpus::load_dataset_opts(input, format, opts)?;
            if !outcome.skipped.is_empty() {
                eprintln!("skipped {} invalid sample(s)", outcome.skipped.len());
            }
            outcome.dataset
        }
        ChunkingArg::HtmlElement | ChunkingArg::NewlineParagraph => {
            let strategy = match chunking {
                ChunkingArg::HtmlElement => ChunkingStrategy::HtmlElement,
                _ => ChunkingStrategy::NewlineParagraph,
            };
            let spec = ChunkingSpec {
                strategy,
                fuzzy_threshold,
            };
            spec.validate()?;
            let raws = corpus::load_raw_documents(input)?;
            let mut samples = Vec::new();
            let mut skipped = 0;
            for raw in raws {
                let id = raw.id.clone();
                match raw.into_sample(&spec) {
                    Ok(s) => samples.push(s),
                    Err(e) if skip_invalid => {
                        log::warn!("skipping document {id}: {e}");
                        skipped += 1;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            if skipped > 0 {
                eprintln!("skipped {skipped} invalid document(s)");
            }
            let name = input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into());
            Dataset::new(name, samples)?
        }
    };
    let dataset = match transform {
        TransformArg::None => dataset,
        TransformArg::PrependTitles => corpus::prepend_titles(&dataset)?,
        TransformArg::IncorporateContext => corpus::incorporate_context(&dataset)?,
    };
    corpus::write_dataset(&dataset, output)?;
    println!(
        "wrote {} ({} samples)",
        output.display(),
        dataset.len()
    );
    Ok(())
}

fn score(
    dataset: &Path,
    measure: MeasureArg,
    k1: f64,
    b: f64,
    idf_scope: IdfScopeArg,
    output: &Path,
) -> CliResult {
    let dataset = load(dataset)?;
    let tok = TokenizerConfig::new();
    let matrices = match measure {
        MeasureArg::Bm25 => {
            let params = Bm25Params {
                k1,
                b,
                idf_scope: match idf_scope {
                    IdfScopeArg::PerSample => IdfScope::PerSample,
                    IdfScopeArg::WholeDataset => IdfScope::WholeDataset,
                },
            };
            lexical::score_dataset(&dataset, &params, &tok)
        }
        MeasureArg::Jaccard => dataset
            .samples()
            .iter()
            .map(|s| lexical::jaccard_scores(s, &tok))
            .collect(),
    };
    lexical::write_scores(&matrices, output)?;
    println!("wrote {}", output.display());
    Ok(())
}

struct RerankArgs {
    dataset: PathBuf,
    backend: BackendArg,
    scores: Option<PathBuf>,
    endpoint: Option<String>,
    model: Option<String>,
    window: usize,
    step: usize,
    query_template: QueryTemplateArg,
    rate_limit: Option<f64>,
    log: Option<PathBuf>,
    output: PathBuf,
    replay: bool,
}

fn rerank(args: RerankArgs) -> CliResult {
    let dataset = load(&args.dataset)?;
    let rankings = match args.backend {
        BackendArg::Bm25 => {
            let params = Bm25Params::default();
            let tok = TokenizerConfig::new();
            let matrices = lexical::score_dataset(&dataset, &params, &tok);
            dataset
                .samples()
                .iter()
                .zip(&matrices)
                .map(|(s, m)| rerankers::rerank_bm25(s, m))
                .collect::<Result<Vec<_>, _>>()?
        }
        BackendArg::File => {
            let scores = args
                .scores
                .ok_or("file backend requires --scores <path>")?;
            rerankers::rerank_from_file(&dataset, &scores)?
        }
        BackendArg::ListwiseLlm => {
            let endpoint = args
                .endpoint
                .ok_or("listwise-llm backend requires --endpoint <url>")?;
            let model = args.model.ok_or("listwise-llm backend requires --model <tag>")?;
            let mut cfg = ListwiseLlmConfig::new(endpoint, model);
            cfg.window_size = args.window;
            cfg.step_size = args.step;
            let template = match args.query_template {
                QueryTemplateArg::Default => QueryTemplate::Default,
                QueryTemplateArg::ClaimVerification => QueryTemplate::ClaimVerification,
            };
            let log_path = args.log.unwrap_or_else(|| {
                let mut name = args.output.file_name().unwrap_or_default().to_os_string();
                name.push(".log.jsonl");
                args.output.with_file_name(name)
            });
            let transport: Box<dyn ChatTransport> = if args.replay {
                Box::new(rerankers::ReplayTransport::from_log_file(&log_path)?)
            } else {
                let http = rerankers::HttpTransport::from_env(&cfg)?;
                match args.rate_limit {
                    Some(rate) => Box::new(http.with_rate_limit(rate)),
                    None => Box::new(http),
                }
            };
            let mut rankings = Vec::new();
            let mut logs = Vec::new();
            for sample in dataset.samples() {
                let query = corpus::render_query(sample, template)?;
                let outcome = rerankers::rerank_listwise(sample, &query, &cfg, transport.as_ref())?;
                rankings.push(outcome.ranking);
                logs.push(outcome.log);
            }
            rerankers::write_listwise_logs(&logs, &log_path)?;
            println!("wrote {}", log_path.display());
            rankings
        }
    };
    rerankers::write_rankings(&rankings, &args.output)?;
    println!("wrote {}", args.output.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn eval(
    dataset: &Path,
    rankings: &Path,
    bm25_scores: &Path,
    metric_names: &[String],
    bootstrap: usize,
    seed: u64,
    reranker_tag: &str,
    transform_tag: &str,
    output: &Path,
) -> CliResult {
    let dataset = load(dataset)?;
    let rankings = rerankers::read_rankings(rankings, &dataset)?;
    let matrices = lexical::import_scores(bm25_scores, "bm25", &dataset)?;
    let specs: Vec<MetricSpec> = metric_names
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, String>>()?;
    let report = metrics::evaluate(
        &dataset,
        &rankings,
        &matrices,
        &specs,
        BootstrapSpec {
            resamples: bootstrap,
            level: 0.95,
            seed: pipeline::stage_seed(seed, "eval"),
        },
        reranker_tag,
        transform_tag,
    )?;
    report.write_json(output)?;
    for m in &report.metrics {
        match m.ci95 {
            Some((lo, hi)) => println!("{}: {:.4} [{:.4}, {:.4}] (n={})", m.name, m.value, lo, hi, m.n),
            None => println!("{}: {:.4} (n={})", m.name, m.value, m.n),
        }
    }
    println!("wrote {}", output.display());
    Ok(())
}

fn separate(
    dataset: &Path,
    scores: &Path,
    rankings: &Path,
    threshold: f64,
    output: &Path,
) -> CliResult {
    let dataset = load(dataset)?;
    let matrices = lexical::import_scores(scores, "imported", &dataset)?;
    let rankings = rerankers::read_rankings(rankings, &dataset)?;
    let records = metrics::separation_profile(&dataset, &matrices, &rankings)?;
    metrics::write_profile_csv(&records, output)?;
    let table = metrics::partition_eval(&records, threshold);
    print!("{}", report::render_partitions_csv(&[table]));
    println!("wrote {}", output.display());
    Ok(())
}

fn render_report(
    eval_paths: &[PathBuf],
    profile: &Path,
    dataset: Option<&Path>,
    format: FormatArg,
    bin_width: f64,
    threshold: f64,
    output: &Path,
) -> CliResult {
    std::fs::create_dir_all(output)?;
    let format = match format {
        FormatArg::Markdown => GridFormat::Markdown,
        FormatArg::Csv => GridFormat::Csv,
        FormatArg::Json => GridFormat::Json,
    };
    let reports: Vec<metrics::EvalReport> = eval_paths
        .iter()
        .map(|p| metrics::EvalReport::read_json(p))
        .collect::<Result<_, String>>()?;
    let rows = report::build_grid(&reports);
    let grid_path = output.join(format!("grid.{}", format.extension()));
    std::fs::write(&grid_path, report::render_grid(&rows, format))?;
    println!("wrote {}", grid_path.display());

    let records = metrics::read_profile_csv(profile)?;
    if records.is_empty() {
        return Err("profile has no records".into());
    }
    let table = metrics::partition_eval(&records, threshold);
    let partitions_path = output.join("partitions.csv");
    std::fs::write(&partitions_path, report::render_partitions_csv(&[table]))?;
    println!("wrote {}", partitions_path.display());

    let dataset_tag = reports
        .first()
        .map(|r| r.dataset.clone())
        .unwrap_or_else(|| "dataset".into());
    let hist = report::histogram(&records, bin_width);
    let hist_path = output.join(format!(
        "hist_{}_{}.csv",
        sanitize(&dataset_tag),
        sanitize(&hist.measure)
    ));
    std::fs::write(&hist_path, hist.to_csv())?;
    println!("wrote {}", hist_path.display());

    if let Some(dataset) = dataset {
        let dataset = load(dataset)?;
        let stats_path = output.join("stats.csv");
        std::fs::write(
            &stats_path,
            report::render_stats_csv(&[(dataset.name().to_string(), dataset.stats().clone())]),
        )?;
        println!("wrote {}", stats_path.display());
    }
    Ok(())
}

fn sanitize(tag: &str) -> String {
    tag.chars()
        .map(|c| if c.is_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}
