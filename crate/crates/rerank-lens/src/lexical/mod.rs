//! Tokenization and query-passage similarity measures.
//!
//! BM25 is both the evaluation baseline and the default similarity `S`
//! for the separation metric; Jaccard is a second lexical measure.
//! Embedding-based measures are computed externally and consumed through
//! [`import_scores`].

mod bm25;
mod io;
mod jaccard;

pub use bm25::{bm25_scores, score_dataset, Bm25Corpus};
pub use io::{import_scores, write_scores, ScoreImportError, ScoreRow};
pub use jaccard::jaccard_scores;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::Sample;

/// Similarity measure tag for BM25 matrices.
pub const BM25_MEASURE: &str = "bm25";
/// Similarity measure tag for Jaccard matrices.
pub const JACCARD_MEASURE: &str = "jaccard";

/// Token splitting rule. Reserved for future variants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitRule {
    #[default]
    NonAlphanumeric,
}

/// Stemming rule. Reserved for future variants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stemming {
    #[default]
    None,
}

/// Tokenizer configuration shared by all lexical measures.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub split: SplitRule,
    pub stopwords: Option<HashSet<String>>,
    pub stemming: Stemming,
}

impl TokenizerConfig {
    /// Lowercasing on, no stopwords.
    pub fn new() -> Self {
        TokenizerConfig {
            lowercase: true,
            split: SplitRule::NonAlphanumeric,
            stopwords: None,
            stemming: Stemming::None,
        }
    }
}

/// Splits `text` into maximal alphanumeric runs, lowercased when
/// configured, with stopwords removed after case folding.
pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            if config.lowercase {
                current.extend(ch.to_lowercase());
            } else {
                current.push(ch);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    if let Some(stop) = &config.stopwords {
        tokens.retain(|t| !stop.contains(t));
    }
    tokens
}

/// Which corpus BM25 document statistics (N, df, avgdl) come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdfScope {
    /// The corpus is exactly the sample's own passages.
    #[default]
    PerSample,
    /// Statistics pooled over every passage of the dataset.
    WholeDataset,
}

/// Okapi BM25 parameters. Defaults are k1 = 1.5, b = 0.75, per-sample idf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub idf_scope: IdfScope,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: 1.5,
            b: 0.75,
            idf_scope: IdfScope::PerSample,
        }
    }
}

/// Query-to-passage scores for one sample under a named measure.
///
/// Holds exactly one score per passage of the sample, in passage order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub sample_id: String,
    pub measure: String,
    pub scores: Vec<(String, f64)>,
}

impl SimilarityMatrix {
    pub fn score_of(&self, passage_id: &str) -> Option<f64> {
        self.scores
            .iter()
            .find(|(id, _)| id == passage_id)
            .map(|&(_, s)| s)
    }

    /// Checks complete, exact coverage of the sample's passages.
    pub fn covers(&self, sample: &Sample) -> bool {
        self.sample_id == sample.id
            && self.scores.len() == sample.passages.len()
            && sample
                .passages
                .iter()
                .all(|p| self.score_of(&p.id).is_some())
    }
}
