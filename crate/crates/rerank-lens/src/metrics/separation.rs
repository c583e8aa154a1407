//! The gold-from-similar separation metric `D_S` and its diagnostics.
//!
//! For similarity measure S, query q, passages p with gold labels y:
//!
//! ```text
//! D_S(q, p, y) = max over gold passages of S(q, p_i)
//!              - max over non-gold passages of S(q, p_i)
//! ```
//!
//! `D_S` indicates whether the most similar gold passage is more or less
//! similar to the query than the most similar non-gold passage. Samples
//! with low `D_S` are where re-rankers are prone to be fooled by
//! distractors.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{MetricsError, RelevanceView};
use crate::corpus::{Dataset, Sample};
use crate::lexical::SimilarityMatrix;
use crate::rerankers::Ranking;

/// One sample's separation value joined with a re-ranker's correctness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationRecord {
    pub sample_id: String,
    pub measure: String,
    pub d_value: f64,
    /// Per-sample P@1 of the designated re-ranker under gold labels.
    pub correct: bool,
}

/// Computes `D_S` for one sample: maximal gold similarity minus maximal
/// non-gold similarity. Requires at least one gold and one non-gold
/// passage and a matrix covering the sample.
pub fn separation(sample: &Sample, matrix: &SimilarityMatrix) -> Result<f64, MetricsError> {
    if !matrix.covers(sample) {
        return Err(MetricsError::Coverage {
            sample_id: sample.id.clone(),
            what: "similarity matrix scores".into(),
        });
    }
    let mut max_gold = f64::NEG_INFINITY;
    let mut max_non_gold = f64::NEG_INFINITY;
    for passage in &sample.passages {
        let score = matrix.score_of(&passage.id).expect("covered");
        if passage.gold {
            max_gold = max_gold.max(score);
        } else {
            max_non_gold = max_non_gold.max(score);
        }
    }
    if max_gold == f64::NEG_INFINITY {
        return Err(MetricsError::NoGold {
            sample_id: sample.id.clone(),
        });
    }
    if max_non_gold == f64::NEG_INFINITY {
        return Err(MetricsError::NoNonGold {
            sample_id: sample.id.clone(),
        });
    }
    Ok(max_gold - max_non_gold)
}

/// Joins each sample's `D_S` with the ranking's gold-label correctness.
/// Matrices and rankings must cover the dataset exactly; records come
/// back in dataset sample order.
pub fn separation_profile(
    dataset: &Dataset,
    matrices: &[SimilarityMatrix],
    rankings: &[Ranking],
) -> Result<Vec<SeparationRecord>, MetricsError> {
    let matrix_by_id: HashMap<&str, &SimilarityMatrix> =
        matrices.iter().map(|m| (m.sample_id.as_str(), m)).collect();
    let ranking_by_id: HashMap<&str, &Ranking> =
        rankings.iter().map(|r| (r.sample_id.as_str(), r)).collect();
    let gold = RelevanceView::gold_labels(dataset);

    dataset
        .samples()
        .iter()
        .map(|sample| {
            let matrix =
                matrix_by_id
                    .get(sample.id.as_str())
                    .ok_or_else(|| MetricsError::Coverage {
                        sample_id: sample.id.clone(),
                        what: "similarity matrices".into(),
                    })?;
            let ranking =
                ranking_by_id
                    .get(sample.id.as_str())
                    .ok_or_else(|| MetricsError::Coverage {
                        sample_id: sample.id.clone(),
                        what: "rankings".into(),
                    })?;
            let d_value = separation(sample, matrix)?;
            let relevant = gold.relevant(&sample.id).expect("view built from dataset");
            let correct = ranking
                .top1()
                .map(|id| relevant.contains(id))
                .unwrap_or(false);
            Ok(SeparationRecord {
                sample_id: sample.id.clone(),
                measure: matrix.measure.clone(),
                d_value,
                correct,
            })
        })
        .collect()
}

/// Writes separation records as CSV with header
/// `sample_id,measure,d_value,correct`.
pub fn write_profile_csv(records: &[SeparationRecord], path: &std::path::Path) -> csv::Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads separation records written by [`write_profile_csv`].
pub fn read_profile_csv(path: &std::path::Path) -> csv::Result<Vec<SeparationRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().collect()
}

/// One side of a threshold partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRow {
    pub n: usize,
    /// Share of all records in this partition; the two shares sum to 1.
    pub share: f64,
    /// Mean correctness, absent when the partition is empty.
    pub p_at_1: Option<f64>,
}

/// Records partitioned into `{D < threshold}` and `{threshold <= D}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionTable {
    pub measure: String,
    pub threshold: f64,
    pub below: PartitionRow,
    pub above: PartitionRow,
}

fn partition_row(records: &[&SeparationRecord], total: usize) -> PartitionRow {
    let n = records.len();
    let p_at_1 = if n == 0 {
        None
    } else {
        Some(records.iter().filter(|r| r.correct).count() as f64 / n as f64)
    };
    PartitionRow {
        n,
        share: n as f64 / total as f64,
        p_at_1,
    }
}

/// Splits records at `threshold` and reports each side's share of the
/// data and P@1. An empty side reports n = 0 and no P@1.
///
/// # Panics
///
/// Panics when `records` is empty.
pub fn partition_eval(records: &[SeparationRecord], threshold: f64) -> PartitionTable {
    assert!(!records.is_empty(), "partition_eval needs records");
    let below: Vec<&SeparationRecord> =
        records.iter().filter(|r| r.d_value < threshold).collect();
    let above: Vec<&SeparationRecord> =
        records.iter().filter(|r| r.d_value >= threshold).collect();
    PartitionTable {
        measure: records[0].measure.clone(),
        threshold,
        below: partition_row(&below, records.len()),
        above: partition_row(&above, records.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Passage;

    fn sample(golds: &[bool]) -> Sample {
        Sample {
            id: "s".into(),
            query: "q".into(),
            claimant: None,
            passages: golds
                .iter()
                .enumerate()
                .map(|(i, &g)| Passage::new(format!("p{}", i + 1), "t", g))
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
    fn direct_arithmetic() {
        // gold {0.2, 0.9}, non-gold {0.5} -> 0.9 - 0.5 = 0.4
        let s = sample(&[true, true, false]);
        let m = matrix(&[0.2, 0.9, 0.5]);
        assert!((separation(&s, &m).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn identical_scores_zero() {
        let s = sample(&[true, false, false]);
        let m = matrix(&[0.7, 0.7, 0.7]);
        assert_eq!(separation(&s, &m).unwrap(), 0.0);
    }

    #[test]
    fn negative_when_distractor_wins() {
        let s = sample(&[true, false]);
        let m = matrix(&[0.1, 0.8]);
        assert!((separation(&s, &m).unwrap() + 0.7).abs() < 1e-15);
    }

    #[test]
    fn missing_side_rejected() {
        let all_gold = sample(&[true, true]);
        assert!(matches!(
            separation(&all_gold, &matrix(&[0.1, 0.2])),
            Err(MetricsError::NoNonGold { .. })
        ));
        let no_gold = sample(&[false, false]);
        assert!(matches!(
            separation(&no_gold, &matrix(&[0.1, 0.2])),
            Err(MetricsError::NoGold { .. })
        ));
    }

    #[test]
    fn coverage_checked() {
        let s = sample(&[true, false, false]);
        assert!(matches!(
            separation(&s, &matrix(&[0.1, 0.2])),
            Err(MetricsError::Coverage { .. })
        ));
    }

    fn record(d: f64, correct: bool) -> SeparationRecord {
        SeparationRecord {
            sample_id: "s".into(),
            measure: "bm25".into(),
            d_value: d,
            correct,
        }
    }

    #[test]
    fn partition_shares_sum_to_one() {
        let records = vec![
            record(-1.0, false),
            record(-0.7, false),
            record(0.2, true),
            record(0.9, true),
            record(1.4, false),
        ];
        let table = partition_eval(&records, -0.5);
        assert_eq!(table.below.n, 2);
        assert_eq!(table.above.n, 3);
        assert!((table.below.share + table.above.share - 1.0).abs() < 1e-15);
        assert_eq!(table.below.p_at_1, Some(0.0));
        assert!((table.above.p_at_1.unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn uneven_32_68_split() {
        // 8 of 25 records below -0.5 gives the 32% / 68% shape.
        let mut records = Vec::new();
        for i in 0..8 {
            records.push(record(-1.0 - i as f64, false));
        }
        for i in 0..17 {
            records.push(record(0.1 + i as f64 * 0.01, true));
        }
        let table = partition_eval(&records, -0.5);
        assert!((table.below.share - 0.32).abs() < 1e-12);
        assert!((table.above.share - 0.68).abs() < 1e-12);
    }

    #[test]
    fn empty_partition_reports_absent_p1() {
        let records = vec![record(0.5, true), record(0.7, false)];
        let table = partition_eval(&records, 0.0);
        assert_eq!(table.below.n, 0);
        assert_eq!(table.below.p_at_1, None);
        assert_eq!(table.above.n, 2);
    }

    #[test]
    fn threshold_boundary_goes_above() {
        let records = vec![record(0.0, true)];
        let table = partition_eval(&records, 0.0);
        assert_eq!(table.above.n, 1);
        assert_eq!(table.below.n, 0);
    }
}
