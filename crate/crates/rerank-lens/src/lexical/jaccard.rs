//! Jaccard token-set similarity.

use std::collections::HashSet;

use super::{tokenize, SimilarityMatrix, TokenizerConfig, JACCARD_MEASURE};
use crate::corpus::Sample;

/// Jaccard similarity |Q ∩ P| / |Q ∪ P| between the query's and each
/// passage's token sets. Two empty sets score 0 by convention.
pub fn jaccard_scores(sample: &Sample, tok: &TokenizerConfig) -> SimilarityMatrix {
    let query: HashSet<String> = tokenize(&sample.query, tok).into_iter().collect();
    let scores = sample
        .passages
        .iter()
        .map(|p| {
            let passage: HashSet<String> = tokenize(&p.text, tok).into_iter().collect();
            let inter = query.intersection(&passage).count();
            let union = query.union(&passage).count();
            let score = if union == 0 {
                0.0
            } else {
                inter as f64 / union as f64
            };
            (p.id.clone(), score)
        })
        .collect();
    SimilarityMatrix {
        sample_id: sample.id.clone(),
        measure: JACCARD_MEASURE.to_string(),
        scores,
    }
}
