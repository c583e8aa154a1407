//! Ranking-quality metrics.
//!
//! P@1, recall@k and nDCG@k are computed against a [`RelevanceView`]: a
//! rule assigning each sample its set of relevant passage ids, either
//! from gold labels or from the passages attaining the sample's maximum
//! BM25 score (ties included). The alignment metric ΔP@1 is the gold
//! P@1 minus the BM25-max P@1 of the same rankings; negative values mean
//! the re-ranker mimics BM25 more than the gold labels.

mod bootstrap;
mod separation;

pub use bootstrap::bootstrap_ci;
pub use separation::{partition_eval, read_profile_csv, separation, separation_profile,
    write_profile_csv, PartitionRow, PartitionTable, SeparationRecord};

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Dataset;
use crate::lexical::SimilarityMatrix;
use crate::rerankers::Ranking;

/// Errors from metric computation.
#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("sample {sample_id}: empty relevant set under the {view} view")]
    EmptyRelevantSet { sample_id: String, view: String },
    #[error("sample {sample_id}: not covered by the {what}")]
    Coverage { sample_id: String, what: String },
    #[error("sample {sample_id}: no gold passage")]
    NoGold { sample_id: String },
    #[error("sample {sample_id}: no non-gold passage")]
    NoNonGold { sample_id: String },
    #[error("bootstrap needs at least 2 values, got {n}")]
    TooFewValues { n: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no records")]
    EmptyRecords,
}

/// Where a relevance view's relevant sets come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViewSource {
    GoldLabels,
    Bm25Max,
}

impl std::fmt::Display for ViewSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ViewSource::GoldLabels => write!(f, "gold-labels"),
            ViewSource::Bm25Max => write!(f, "bm25-max"),
        }
    }
}

/// Per-sample sets of relevant passage ids under a fixed rule.
#[derive(Debug, Clone)]
pub struct RelevanceView {
    source: ViewSource,
    relevant: HashMap<String, HashSet<String>>,
}

impl RelevanceView {
    /// Relevant = passages with gold = true.
    pub fn gold_labels(dataset: &Dataset) -> Self {
        let relevant = dataset
            .samples()
            .iter()
            .map(|s| {
                let ids = s
                    .passages
                    .iter()
                    .filter(|p| p.gold)
                    .map(|p| p.id.clone())
                    .collect();
                (s.id.clone(), ids)
            })
            .collect();
        RelevanceView {
            source: ViewSource::GoldLabels,
            relevant,
        }
    }

    /// Relevant = every passage attaining the sample's maximum BM25
    /// score, ties included.
    pub fn bm25_max(
        dataset: &Dataset,
        matrices: &[SimilarityMatrix],
    ) -> Result<Self, MetricsError> {
        let by_id: HashMap<&str, &SimilarityMatrix> =
            matrices.iter().map(|m| (m.sample_id.as_str(), m)).collect();
        let mut relevant = HashMap::new();
        for sample in dataset.samples() {
            let matrix = by_id
                .get(sample.id.as_str())
                .ok_or_else(|| MetricsError::Coverage {
                    sample_id: sample.id.clone(),
                    what: "similarity matrices".into(),
                })?;
            if !matrix.covers(sample) {
                return Err(MetricsError::Coverage {
                    sample_id: sample.id.clone(),
                    what: "similarity matrix scores".into(),
                });
            }
            let max = matrix
                .scores
                .iter()
                .map(|&(_, s)| s)
                .fold(f64::NEG_INFINITY, f64::max);
            let ids = matrix
                .scores
                .iter()
                .filter(|&&(_, s)| s == max)
                .map(|(id, _)| id.clone())
                .collect();
            relevant.insert(sample.id.clone(), ids);
        }
        Ok(RelevanceView {
            source: ViewSource::Bm25Max,
            relevant,
        })
    }

    pub fn source(&self) -> ViewSource {
        self.source
    }

    pub fn relevant(&self, sample_id: &str) -> Option<&HashSet<String>> {
        self.relevant.get(sample_id)
    }

    fn relevant_checked(&self, sample_id: &str) -> Result<&HashSet<String>, MetricsError> {
        let ids = self
            .relevant
            .get(sample_id)
            .ok_or_else(|| MetricsError::Coverage {
                sample_id: sample_id.to_string(),
                what: "relevance view".into(),
            })?;
        if ids.is_empty() {
            return Err(MetricsError::EmptyRelevantSet {
                sample_id: sample_id.to_string(),
                view: self.source.to_string(),
            });
        }
        Ok(ids)
    }
}

/// An aggregate metric value with its sample count and optional 95% CI.
///
/// The interval always brackets the value: it is widened to include the
/// point estimate if a bootstrap draw lands outside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub name: String,
    pub value: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci95: Option<(f64, f64)>,
}

impl MetricResult {
    pub fn new(name: impl Into<String>, value: f64, n: usize) -> Self {
        MetricResult {
            name: name.into(),
            value,
            n,
            ci95: None,
        }
    }

    pub fn with_ci(mut self, lo: f64, hi: f64) -> Self {
        self.ci95 = Some((lo.min(self.value), hi.max(self.value)));
        self
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Per-sample P@1 contributions: 1.0 when the top-ranked passage is
/// relevant under the view, else 0.0. Returned in ranking order.
pub fn p_at_1_per_sample(
    rankings: &[Ranking],
    view: &RelevanceView,
) -> Result<Vec<(String, f64)>, MetricsError> {
    rankings
        .iter()
        .map(|r| {
            let relevant = view.relevant_checked(&r.sample_id)?;
            let hit = r
                .top1()
                .map(|id| relevant.contains(id))
                .unwrap_or(false);
            Ok((r.sample_id.clone(), if hit { 1.0 } else { 0.0 }))
        })
        .collect()
}

/// Fraction of samples whose top-ranked passage is relevant under `view`.
pub fn p_at_1(rankings: &[Ranking], view: &RelevanceView) -> Result<MetricResult, MetricsError> {
    let per_sample = p_at_1_per_sample(rankings, view)?;
    let values: Vec<f64> = per_sample.iter().map(|&(_, v)| v).collect();
    Ok(MetricResult::new("p@1", mean(&values), values.len()))
}

/// Per-sample ΔP@1 contributions: gold hit minus BM25-max hit, in {-1, 0, 1}.
pub fn delta_p_at_1_per_sample(
    rankings: &[Ranking],
    gold: &RelevanceView,
    bm25: &RelevanceView,
) -> Result<Vec<(String, f64)>, MetricsError> {
    let g = p_at_1_per_sample(rankings, gold)?;
    let b = p_at_1_per_sample(rankings, bm25)?;
    Ok(g.into_iter()
        .zip(b)
        .map(|((id, gv), (_, bv))| (id, gv - bv))
        .collect())
}

/// ΔP@1: P@1 under gold relevance minus P@1 under BM25-max relevance.
/// Negative values mean the rankings align more with BM25 scores than
/// with gold labels.
pub fn delta_p_at_1(
    rankings: &[Ranking],
    gold: &RelevanceView,
    bm25: &RelevanceView,
) -> Result<MetricResult, MetricsError> {
    let per_sample = delta_p_at_1_per_sample(rankings, gold, bm25)?;
    let values: Vec<f64> = per_sample.iter().map(|&(_, v)| v).collect();
    Ok(MetricResult::new("delta_p@1", mean(&values), values.len()))
}

fn top_k(ranking: &Ranking, k: usize) -> (&[String], usize) {
    let clamped = k.min(ranking.order.len());
    if clamped < k {
        log::debug!(
            "sample {}: k={k} exceeds passage count, clamped to {clamped}",
            ranking.sample_id
        );
    }
    (&ranking.order[..clamped], clamped)
}

/// Per-sample recall@k: fraction of the sample's relevant passages that
/// appear in its top k. `k` is clamped per sample to the passage count.
pub fn recall_at_k_per_sample(
    rankings: &[Ranking],
    view: &RelevanceView,
    k: usize,
) -> Result<Vec<(String, f64)>, MetricsError> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    rankings
        .iter()
        .map(|r| {
            let relevant = view.relevant_checked(&r.sample_id)?;
            let (top, _) = top_k(r, k);
            let hits = top.iter().filter(|id| relevant.contains(*id)).count();
            Ok((r.sample_id.clone(), hits as f64 / relevant.len() as f64))
        })
        .collect()
}

/// Mean recall@k over samples.
pub fn recall_at_k(
    rankings: &[Ranking],
    view: &RelevanceView,
    k: usize,
) -> Result<MetricResult, MetricsError> {
    let per_sample = recall_at_k_per_sample(rankings, view, k)?;
    let values: Vec<f64> = per_sample.iter().map(|&(_, v)| v).collect();
    Ok(MetricResult::new(
        format!("recall@{k}"),
        mean(&values),
        values.len(),
    ))
}

/// Per-sample nDCG@k with binary gains and log2 discount. The ideal DCG
/// places all relevant passages first.
pub fn ndcg_at_k_per_sample(
    rankings: &[Ranking],
    view: &RelevanceView,
    k: usize,
) -> Result<Vec<(String, f64)>, MetricsError> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    rankings
        .iter()
        .map(|r| {
            let relevant = view.relevant_checked(&r.sample_id)?;
            let (top, clamped) = top_k(r, k);
            let dcg: f64 = top
                .iter()
                .enumerate()
                .filter(|(_, id)| relevant.contains(*id))
                .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
                .sum();
            let ideal_count = clamped.min(relevant.len());
            let idcg: f64 = (0..ideal_count)
                .map(|i| 1.0 / ((i + 2) as f64).log2())
                .sum();
            Ok((r.sample_id.clone(), dcg / idcg))
        })
        .collect()
}

/// Mean nDCG@k over samples.
pub fn ndcg_at_k(
    rankings: &[Ranking],
    view: &RelevanceView,
    k: usize,
) -> Result<MetricResult, MetricsError> {
    let per_sample = ndcg_at_k_per_sample(rankings, view, k)?;
    let values: Vec<f64> = per_sample.iter().map(|&(_, v)| v).collect();
    Ok(MetricResult::new(
        format!("ndcg@{k}"),
        mean(&values),
        values.len(),
    ))
}

/// Aggregate metrics for one re-ranker on one dataset, with per-sample
/// records for downstream analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub reranker: String,
    pub transform: String,
    pub n_samples: usize,
    pub metrics: Vec<MetricResult>,
    pub per_sample: Vec<PerSampleRecord>,
}

/// Per-sample metric values, keyed by metric name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSampleRecord {
    pub sample_id: String,
    pub values: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn write_json(&self, path: &std::path::Path) -> std::io::Result<()> {
        let mut body = serde_json::to_string_pretty(self).expect("report serialization");
        body.push('\n');
        std::fs::write(path, body)
    }

    pub fn read_json(path: &std::path::Path) -> Result<Self, String> {
        let content = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        serde_json::from_str(&content).map_err(|e| e.to_string())
    }

    pub fn metric(&self, name: &str) -> Option<&MetricResult> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

/// A metric requested by name, as parsed from `p@1,delta,recall@5,ndcg@10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricSpec {
    PAt1,
    Delta,
    RecallAt(usize),
    NdcgAt(usize),
}

impl std::str::FromStr for MetricSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("p@1") {
            return Ok(MetricSpec::PAt1);
        }
        if s.eq_ignore_ascii_case("delta") || s.eq_ignore_ascii_case("delta_p@1") {
            return Ok(MetricSpec::Delta);
        }
        for (prefix, make) in [
            ("recall@", MetricSpec::RecallAt as fn(usize) -> MetricSpec),
            ("ndcg@", MetricSpec::NdcgAt as fn(usize) -> MetricSpec),
        ] {
            if let Some(k) = s.strip_prefix(prefix) {
                let k: usize = k.parse().map_err(|_| format!("bad k in {s}"))?;
                if k == 0 {
                    return Err(format!("k must be at least 1 in {s}"));
                }
                return Ok(make(k));
            }
        }
        Err(format!(
            "unknown metric {s}; expected p@1, delta, recall@K or ndcg@K"
        ))
    }
}

impl std::fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricSpec::PAt1 => write!(f, "p@1"),
            MetricSpec::Delta => write!(f, "delta_p@1"),
            MetricSpec::RecallAt(k) => write!(f, "recall@{k}"),
            MetricSpec::NdcgAt(k) => write!(f, "ndcg@{k}"),
        }
    }
}

/// Bootstrap settings for [`evaluate`]. `resamples = 0` disables CIs.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapSpec {
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

/// Runs the requested metrics for one re-ranker's rankings over a
/// dataset, attaching bootstrap CIs and per-sample records. The BM25
/// matrices feed the BM25-max view used by ΔP@1.
pub fn evaluate(
    dataset: &Dataset,
    rankings: &[Ranking],
    bm25_matrices: &[SimilarityMatrix],
    specs: &[MetricSpec],
    bootstrap: BootstrapSpec,
    reranker_tag: &str,
    transform_tag: &str,
) -> Result<EvalReport, MetricsError> {
    let gold = RelevanceView::gold_labels(dataset);
    let bm25 = RelevanceView::bm25_max(dataset, bm25_matrices)?;

    let mut metrics = Vec::new();
    let mut per_sample: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut record = |name: &str, values: &[(String, f64)]| {
        for (id, v) in values {
            per_sample
                .entry(id.clone())
                .or_default()
                .insert(name.to_string(), *v);
        }
    };
    for spec in specs {
        let name = spec.to_string();
        let values: Vec<(String, f64)> = match spec {
            MetricSpec::PAt1 => p_at_1_per_sample(rankings, &gold)?,
            MetricSpec::Delta => delta_p_at_1_per_sample(rankings, &gold, &bm25)?,
            MetricSpec::RecallAt(k) => recall_at_k_per_sample(rankings, &gold, *k)?,
            MetricSpec::NdcgAt(k) => ndcg_at_k_per_sample(rankings, &gold, *k)?,
        };
        record(&name, &values);
        let plain: Vec<f64> = values.iter().map(|&(_, v)| v).collect();
        let mut result = MetricResult::new(name.clone(), mean(&plain), plain.len());
        if bootstrap.resamples > 0 && plain.len() >= 2 {
            let seed = crate::pipeline::stage_seed(bootstrap.seed, &format!("bootstrap:{name}"));
            let (lo, hi) = bootstrap_ci(&plain, bootstrap.resamples, bootstrap.level, seed)?;
            result = result.with_ci(lo, hi);
        }
        metrics.push(result);
    }

    Ok(EvalReport {
        dataset: dataset.name().to_string(),
        reranker: reranker_tag.to_string(),
        transform: transform_tag.to_string(),
        n_samples: rankings.len(),
        metrics,
        per_sample: per_sample
            .into_iter()
            .map(|(sample_id, values)| PerSampleRecord { sample_id, values })
            .collect(),
    })
}
