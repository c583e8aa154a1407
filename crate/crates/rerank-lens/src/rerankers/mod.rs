//! Re-ranker backends producing a [`Ranking`] per sample.
//!
//! Three built-ins share the abstraction: the BM25 baseline
//! ([`rerank_bm25`]), file-imported scores from offline models
//! ([`rerank_from_file`]), and a listwise LLM client speaking the
//! RankGPT message protocol with sliding windows ([`rerank_listwise`]).

mod io;
mod listwise;
mod transport;

pub use io::{read_listwise_logs, read_rankings, write_listwise_logs, write_rankings};
pub use listwise::{
    build_listwise_messages, parse_permutation, rerank_listwise, window_schedule, ExchangeRecord,
    ListwiseLlmConfig, ListwiseLog, ListwiseOutcome, Message, Role,
};
pub use transport::{ChatTransport, HttpTransport, ReplayTransport, TokenBucket, TransportError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sample;
use crate::lexical::{SimilarityMatrix, BM25_MEASURE};

/// Errors from re-ranking backends.
#[derive(Debug, Error)]
pub enum RerankError {
    #[error("matrix measure is {got}, expected {expected}")]
    MeasureMismatch { expected: String, got: String },
    #[error("sample {sample_id}: matrix does not cover the sample's passages")]
    CoverageMismatch { sample_id: String },
    #[error("no ranking for sample {sample_id}")]
    MissingRanking { sample_id: String },
    #[error("ranking for sample {sample_id}: order is not a permutation of the passage ids")]
    NotAPermutation { sample_id: String },
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    ScoreImport(#[from] crate::lexical::ScoreImportError),
    #[error("listwise config: step size {step} exceeds window size {window}")]
    InvalidWindow { window: usize, step: usize },
    #[error("listwise config: window and step sizes must be at least 1")]
    ZeroWindow,
    #[error("empty window")]
    EmptyWindow,
    #[error("sample {sample_id}: no usable ranking in the model reply after {attempts} attempts")]
    Protocol { sample_id: String, attempts: u32 },
    #[error("sample {sample_id}: transport failed after {attempts} attempts: {source}")]
    Transport {
        sample_id: String,
        attempts: u32,
        #[source]
        source: TransportError,
    },
    #[error("request budget of {budget} exhausted at sample {sample_id}")]
    BudgetExhausted { sample_id: String, budget: usize },
}

/// A re-ranker's output for one sample: passage ids, most relevant first,
/// with the backing scores when the backend produces them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub sample_id: String,
    pub order: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<(String, f64)>>,
}

impl Ranking {
    /// Checks that `order` is a permutation of the sample's passage ids.
    pub fn validate_against(&self, sample: &Sample) -> Result<(), RerankError> {
        let mut expected: Vec<&str> = sample.passages.iter().map(|p| p.id.as_str()).collect();
        let mut got: Vec<&str> = self.order.iter().map(|s| s.as_str()).collect();
        expected.sort_unstable();
        got.sort_unstable();
        if expected != got {
            return Err(RerankError::NotAPermutation {
                sample_id: self.sample_id.clone(),
            });
        }
        Ok(())
    }

    pub fn top1(&self) -> Option<&str> {
        self.order.first().map(|s| s.as_str())
    }
}

/// Ranks a sample's passages by descending matrix score. The sort is
/// stable: ties keep the original passage order.
pub fn rank_by_scores(sample: &Sample, matrix: &SimilarityMatrix) -> Result<Ranking, RerankError> {
    if !matrix.covers(sample) {
        return Err(RerankError::CoverageMismatch {
            sample_id: sample.id.clone(),
        });
    }
    // Scores in passage order so the stable sort's tie rule is the
    // original retrieval order.
    let scores: Vec<(String, f64)> = sample
        .passages
        .iter()
        .map(|p| (p.id.clone(), matrix.score_of(&p.id).expect("covered")))
        .collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .1
            .partial_cmp(&scores[a].1)
            .expect("scores are finite")
    });
    Ok(Ranking {
        sample_id: sample.id.clone(),
        order: order.into_iter().map(|i| scores[i].0.clone()).collect(),
        scores: Some(scores),
    })
}

/// The BM25 baseline: a stable descending sort of BM25 scores.
pub fn rerank_bm25(sample: &Sample, matrix: &SimilarityMatrix) -> Result<Ranking, RerankError> {
    if matrix.measure != BM25_MEASURE {
        return Err(RerankError::MeasureMismatch {
            expected: BM25_MEASURE.to_string(),
            got: matrix.measure.clone(),
        });
    }
    rank_by_scores(sample, matrix)
}

/// Ranks every sample of a dataset from an offline score file (same
/// format as score import; coverage of every sample enforced).
pub fn rerank_from_file(
    dataset: &crate::corpus::Dataset,
    path: &std::path::Path,
) -> Result<Vec<Ranking>, RerankError> {
    let matrices = crate::lexical::import_scores(path, "file", dataset)?;
    dataset
        .samples()
        .iter()
        .zip(&matrices)
        .map(|(s, m)| rank_by_scores(s, m))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Passage;

    fn sample(n: usize) -> Sample {
        Sample {
            id: "s".into(),
            query: "q".into(),
            claimant: None,
            passages: (1..=n)
                .map(|i| Passage::new(format!("p{i}"), format!("text {i}"), i == 1))
                .collect(),
        }
    }

    fn matrix(scores: &[f64]) -> SimilarityMatrix {
        SimilarityMatrix {
            sample_id: "s".into(),
            measure: "bm25".into(),
            scores: scores
                .iter()
                .enumerate()
                .map(|(i, &s)| (format!("p{}", i + 1), s))
                .collect(),
        }
    }

    #[test]
    fn sorts_descending() {
        let r = rerank_bm25(&sample(2), &matrix(&[0.5, 2.0])).unwrap();
        assert_eq!(r.order, ["p2", "p1"]);
    }

    #[test]
    fn all_zero_keeps_original_order() {
        let r = rerank_bm25(&sample(3), &matrix(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(r.order, ["p1", "p2", "p3"]);
    }

    #[test]
    fn stable_tie_break() {
        let r = rerank_bm25(&sample(3), &matrix(&[1.0, 1.0, 2.0])).unwrap();
        assert_eq!(r.order, ["p3", "p1", "p2"]);
    }

    #[test]
    fn measure_mismatch_rejected() {
        let mut m = matrix(&[1.0, 0.0]);
        m.measure = "jaccard".into();
        assert!(matches!(
            rerank_bm25(&sample(2), &m),
            Err(RerankError::MeasureMismatch { .. })
        ));
    }

    #[test]
    fn coverage_mismatch_rejected() {
        let m = matrix(&[1.0, 0.0]);
        assert!(matches!(
            rerank_bm25(&sample(3), &m),
            Err(RerankError::CoverageMismatch { .. })
        ));
    }

    #[test]
    fn permutation_validation() {
        let r = Ranking {
            sample_id: "s".into(),
            order: vec!["p1".into(), "p1".into()],
            scores: None,
        };
        assert!(r.validate_against(&sample(2)).is_err());
    }
}
