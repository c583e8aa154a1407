//! Rankings and audit-log file IO.
//!
//! Rankings travel as JSONL, one per line:
//! `{"sample_id": …, "order": [passage_id, …], "scores": {…}?}`.
//! Scores serialize as an id-to-score object with lexicographic keys.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ListwiseLog, Ranking, RerankError};
use crate::corpus::Dataset;

#[derive(Serialize, Deserialize)]
struct RankingRecord {
    sample_id: String,
    order: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scores: Option<BTreeMap<String, f64>>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RerankError + '_ {
    move |source| RerankError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes rankings as JSONL in the given order.
pub fn write_rankings(rankings: &[Ranking], path: &Path) -> Result<(), RerankError> {
    let mut out = Vec::new();
    for r in rankings {
        let record = RankingRecord {
            sample_id: r.sample_id.clone(),
            order: r.order.clone(),
            scores: r
                .scores
                .as_ref()
                .map(|s| s.iter().cloned().collect::<BTreeMap<_, _>>()),
        };
        serde_json::to_writer(&mut out, &record).expect("ranking serialization");
        out.push(b'\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(io_err(path))
}

/// Reads rankings and validates them against the dataset: every sample
/// has exactly one ranking whose order is a permutation of its passage
/// ids. Returned in dataset sample order.
pub fn read_rankings(path: &Path, dataset: &Dataset) -> Result<Vec<Ranking>, RerankError> {
    let content = fs::read_to_string(path).map_err(io_err(path))?;
    let mut by_id: std::collections::HashMap<String, Ranking> = std::collections::HashMap::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RankingRecord =
            serde_json::from_str(line).map_err(|e| RerankError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        let sample = dataset
            .sample(&record.sample_id)
            .ok_or_else(|| RerankError::MissingRanking {
                sample_id: record.sample_id.clone(),
            })?;
        // Scores back in passage order, so downstream tie handling sees
        // the original retrieval order.
        let scores = record.scores.map(|map| {
            sample
                .passages
                .iter()
                .filter_map(|p| map.get(&p.id).map(|&s| (p.id.clone(), s)))
                .collect::<Vec<_>>()
        });
        let ranking = Ranking {
            sample_id: record.sample_id.clone(),
            order: record.order,
            scores,
        };
        ranking.validate_against(sample)?;
        if let Some(scores) = &ranking.scores {
            check_order_matches_scores(&ranking.sample_id, &ranking.order, scores, idx + 1)?;
        }
        by_id.insert(record.sample_id, ranking);
    }
    dataset
        .samples()
        .iter()
        .map(|s| {
            by_id.remove(&s.id).ok_or_else(|| RerankError::MissingRanking {
                sample_id: s.id.clone(),
            })
        })
        .collect()
}

/// A ranking that carries scores must be their stable descending sort:
/// scores never increase along the order, and ties keep passage order
/// (the index within `scores`, which is the sample's passage order).
fn check_order_matches_scores(
    sample_id: &str,
    order: &[String],
    scores: &[(String, f64)],
    line: usize,
) -> Result<(), RerankError> {
    let slot = |id: &str| scores.iter().position(|(p, _)| p == id);
    for pair in order.windows(2) {
        let (a, b) = (slot(&pair[0]), slot(&pair[1]));
        let (Some(a), Some(b)) = (a, b) else {
            continue; // permutation check already rejects unknown ids
        };
        let (sa, sb) = (scores[a].1, scores[b].1);
        if sa < sb || (sa == sb && a > b) {
            return Err(RerankError::Parse {
                line,
                message: format!(
                    "sample {sample_id}: order is not the stable descending sort of its scores"
                ),
            });
        }
    }
    Ok(())
}

/// Writes listwise audit logs as JSONL, one log per sample.
pub fn write_listwise_logs(logs: &[ListwiseLog], path: &Path) -> Result<(), RerankError> {
    let mut out = Vec::new();
    for log in logs {
        serde_json::to_writer(&mut out, log).expect("log serialization");
        out.push(b'\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(io_err(path))
}

/// Reads listwise audit logs written by [`write_listwise_logs`].
pub fn read_listwise_logs(path: &Path) -> Result<Vec<ListwiseLog>, RerankError> {
    let content = fs::read_to_string(path).map_err(io_err(path))?;
    let mut logs = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        logs.push(
            serde_json::from_str(line).map_err(|e| RerankError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(logs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Passage, Sample};

    fn dataset() -> Dataset {
        let mk = |id: &str| Sample {
            id: id.into(),
            query: "q".into(),
            claimant: None,
            passages: vec![
                Passage::new("p1", "a", true),
                Passage::new("p2", "b", false),
                Passage::new("p3", "c", false),
            ],
        };
        Dataset::new("d", vec![mk("s1"), mk("s2")]).unwrap()
    }

    #[test]
    fn rankings_round_trip() {
        let ds = dataset();
        let rankings = vec![
            Ranking {
                sample_id: "s1".into(),
                order: vec!["p3".into(), "p1".into(), "p2".into()],
                scores: Some(vec![("p1".into(), 0.5), ("p2".into(), 0.1), ("p3".into(), 2.0)]),
            },
            Ranking {
                sample_id: "s2".into(),
                order: vec!["p1".into(), "p2".into(), "p3".into()],
                scores: None,
            },
        ];
        let f = tempfile::Builder::new().suffix(".jsonl").tempfile().unwrap();
        write_rankings(&rankings, f.path()).unwrap();
        let back = read_rankings(f.path(), &ds).unwrap();
        assert_eq!(back, rankings);
    }

    #[test]
    fn read_rejects_missing_sample() {
        let ds = dataset();
        let rankings = vec![Ranking {
            sample_id: "s1".into(),
            order: vec!["p1".into(), "p2".into(), "p3".into()],
            scores: None,
        }];
        let f = tempfile::Builder::new().suffix(".jsonl").tempfile().unwrap();
        write_rankings(&rankings, f.path()).unwrap();
        let err = read_rankings(f.path(), &ds).unwrap_err();
        assert!(matches!(err, RerankError::MissingRanking { ref sample_id } if sample_id == "s2"));
    }

    #[test]
    fn read_rejects_order_contradicting_scores() {
        let ds = dataset();
        let f = tempfile::Builder::new().suffix(".jsonl").tempfile().unwrap();
        std::fs::write(
            f.path(),
            concat!(
                r#"{"sample_id":"s1","order":["p1","p2","p3"],"scores":{"p1":0.1,"p2":0.9,"p3":0.5}}"#, "\n",
                r#"{"sample_id":"s2","order":["p1","p2","p3"]}"#, "\n",
            ),
        )
        .unwrap();
        let err = read_rankings(f.path(), &ds).unwrap_err();
        assert!(err.to_string().contains("stable descending"), "{err}");
    }

    #[test]
    fn read_rejects_non_permutation() {
        let ds = dataset();
        let f = tempfile::Builder::new().suffix(".jsonl").tempfile().unwrap();
        std::fs::write(
            f.path(),
            concat!(
                r#"{"sample_id":"s1","order":["p1","p1","p2"]}"#, "\n",
                r#"{"sample_id":"s2","order":["p1","p2","p3"]}"#, "\n",
            ),
        )
        .unwrap();
        let err = read_rankings(f.path(), &ds).unwrap_err();
        assert!(matches!(err, RerankError::NotAPermutation { .. }));
    }
}
