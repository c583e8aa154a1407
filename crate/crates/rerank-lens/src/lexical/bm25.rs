//! Okapi BM25 scoring.
//!
//! For query q and passage p:
//!
//! ```text
//! score(q, p) = sum over t in q of
//!     idf(t) * tf(t, p) * (k1 + 1) / (tf(t, p) + k1 * (1 - b + b * |p| / avgdl))
//! idf(t) = ln((N - df(t) + 0.5) / (df(t) + 0.5) + 1)
//! ```
//!
//! Query tokens count with multiplicity. The +1 inside the log keeps idf
//! positive for every df <= N. N, df and avgdl come from the configured
//! corpus scope: the sample's own passages (default) or the whole dataset.

use std::collections::HashMap;

use rayon::prelude::*;

use super::{tokenize, Bm25Params, IdfScope, SimilarityMatrix, TokenizerConfig, BM25_MEASURE};
use crate::corpus::{Dataset, Sample};

/// Document statistics for BM25: document count, per-term document
/// frequencies and average document length.
#[derive(Debug, Clone)]
pub struct Bm25Corpus {
    n_docs: usize,
    df: HashMap<String, usize>,
    avgdl: f64,
}

impl Bm25Corpus {
    fn from_token_lists<'a, I>(docs: I) -> Self
    where
        I: Iterator<Item = &'a Vec<String>>,
    {
        let mut n_docs = 0usize;
        let mut total_len = 0usize;
        let mut df: HashMap<String, usize> = HashMap::new();
        for tokens in docs {
            n_docs += 1;
            total_len += tokens.len();
            let mut seen: Vec<&String> = tokens.iter().collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t.clone()).or_insert(0) += 1;
            }
        }
        let avgdl = if n_docs == 0 {
            0.0
        } else {
            total_len as f64 / n_docs as f64
        };
        Bm25Corpus { n_docs, df, avgdl }
    }

    /// Pools statistics over every passage of the dataset.
    pub fn from_dataset(dataset: &Dataset, tok: &TokenizerConfig) -> Self {
        let token_lists: Vec<Vec<String>> = dataset
            .samples()
            .iter()
            .flat_map(|s| &s.passages)
            .map(|p| tokenize(&p.text, tok))
            .collect();
        Self::from_token_lists(token_lists.iter())
    }

    fn idf(&self, term: &str) -> f64 {
        let n = self.n_docs as f64;
        let df = self.df.get(term).copied().unwrap_or(0) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }
}

fn score_against(
    sample: &Sample,
    corpus: &Bm25Corpus,
    params: &Bm25Params,
    tok: &TokenizerConfig,
) -> SimilarityMatrix {
    let query_tokens = tokenize(&sample.query, tok);
    let mut scores = Vec::with_capacity(sample.passages.len());
    let mut any_overlap = false;
    for passage in &sample.passages {
        let tokens = tokenize(&passage.text, tok);
        let mut tf: HashMap<&str, usize> = HashMap::new();
        for t in &tokens {
            *tf.entry(t.as_str()).or_insert(0) += 1;
        }
        let dl = tokens.len() as f64;
        let mut score = 0.0;
        for term in &query_tokens {
            let freq = tf.get(term.as_str()).copied().unwrap_or(0) as f64;
            if freq == 0.0 {
                continue;
            }
            any_overlap = true;
            let norm = 1.0 - params.b + params.b * dl / corpus.avgdl;
            score += corpus.idf(term) * freq * (params.k1 + 1.0) / (freq + params.k1 * norm);
        }
        scores.push((passage.id.clone(), score));
    }
    if !any_overlap {
        log::warn!(
            "sample {}: query shares no token with any passage; all BM25 scores are zero",
            sample.id
        );
    }
    SimilarityMatrix {
        sample_id: sample.id.clone(),
        measure: BM25_MEASURE.to_string(),
        scores,
    }
}

/// Okapi BM25 scores of a sample's passages against its query, with the
/// sample's own passages as the corpus. A query with no in-vocabulary
/// token yields all-zero scores (logged, not an error).
pub fn bm25_scores(
    sample: &Sample,
    params: &Bm25Params,
    tok: &TokenizerConfig,
) -> SimilarityMatrix {
    let token_lists: Vec<Vec<String>> = sample
        .passages
        .iter()
        .map(|p| tokenize(&p.text, tok))
        .collect();
    let corpus = Bm25Corpus::from_token_lists(token_lists.iter());
    score_against(sample, &corpus, params, tok)
}

/// Scores every sample of a dataset, honoring `params.idf_scope`:
/// per-sample statistics (default) or statistics pooled across the whole
/// dataset. One matrix per sample, in sample order.
pub fn score_dataset(
    dataset: &Dataset,
    params: &Bm25Params,
    tok: &TokenizerConfig,
) -> Vec<SimilarityMatrix> {
    match params.idf_scope {
        IdfScope::PerSample => dataset
            .samples()
            .par_iter()
            .map(|s| bm25_scores(s, params, tok))
            .collect(),
        IdfScope::WholeDataset => {
            let corpus = Bm25Corpus::from_dataset(dataset, tok);
            dataset
                .samples()
                .par_iter()
                .map(|s| score_against(s, &corpus, params, tok))
                .collect()
        }
    }
}
