//! A toolkit for evaluating passage re-rankers against gold labels and a
//! BM25 lexical baseline.
//!
//! The crate is organized around a small pipeline:
//!
//! 1. [`corpus`] — dataset model, chunking raw documents into passages,
//!    gold-label assignment and alleviation transforms.
//! 2. [`lexical`] — tokenization and query-passage similarity measures
//!    (BM25, Jaccard) plus an import path for externally computed scores.
//! 3. [`rerankers`] — producing a [`Ranking`] per sample: the BM25
//!    baseline, file-imported model scores, or a listwise LLM re-ranker
//!    speaking the RankGPT message protocol with sliding windows.
//! 4. [`metrics`] — P@1, recall@k, nDCG@k, the ΔP@1 alignment metric,
//!    the gold-from-similar separation metric `D_S`, and bootstrap
//!    confidence intervals.
//! 5. [`report`] — result grids, partition tables, histogram data and
//!    dataset statistics as plot-ready files.
//! 6. [`pipeline`] — config-driven orchestration of the stages with a
//!    run manifest for reproducibility.
//!
//! All data types are immutable after construction and safe to share
//! across threads.

pub mod corpus;
pub mod lexical;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod rerankers;

pub use corpus::{Dataset, Passage, Sample};
pub use lexical::SimilarityMatrix;
pub use rerankers::Ranking;

/// Caps the global worker pool used for within-stage parallelism.
/// Callable at most once per process, before any parallel work.
pub fn set_worker_threads(n: usize) -> Result<(), String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}
