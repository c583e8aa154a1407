//! Score-file import and export.
//!
//! Two interchangeable formats carry externally computed scores:
//!
//! * CSV with header `sample_id,passage_id,score`
//! * JSONL, one `{"sample_id": …, "passage_id": …, "score": …}` per line
//!
//! Import enforces complete coverage: every passage of every sample gets
//! exactly one finite score.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SimilarityMatrix;
use crate::corpus::Dataset;

/// One score-file row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRow {
    pub sample_id: String,
    pub passage_id: String,
    pub score: f64,
}

/// Errors from importing a score file.
#[derive(Debug, Error)]
pub enum ScoreImportError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: parse error: {message}")]
    Parse { row: usize, message: String },
    #[error("row {row}: unknown sample id {sample_id}")]
    UnknownSample { row: usize, sample_id: String },
    #[error("row {row}: unknown passage id {passage_id} in sample {sample_id}")]
    UnknownPassage {
        row: usize,
        sample_id: String,
        passage_id: String,
    },
    #[error("row {row}: duplicate score for sample {sample_id} passage {passage_id}")]
    DuplicateRow {
        row: usize,
        sample_id: String,
        passage_id: String,
    },
    #[error("row {row}: non-finite score for sample {sample_id} passage {passage_id}")]
    NonFiniteScore {
        row: usize,
        sample_id: String,
        passage_id: String,
    },
    #[error("sample {sample_id}: no score for passage {passage_id}")]
    MissingScore {
        sample_id: String,
        passage_id: String,
    },
    #[error("no score rows found in {path}")]
    EmptyFile { path: String },
}

fn read_rows(path: &Path) -> Result<Vec<ScoreRow>, ScoreImportError> {
    let content = fs::read_to_string(path).map_err(|source| ScoreImportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let first = content
        .lines()
        .find(|l| !l.trim().is_empty())
        .unwrap_or_default();
    let rows = if first.trim_start().starts_with('{') {
        let mut rows = Vec::new();
        for (idx, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: ScoreRow =
                serde_json::from_str(line).map_err(|e| ScoreImportError::Parse {
                    row: idx + 1,
                    message: e.to_string(),
                })?;
            rows.push(row);
        }
        rows
    } else {
        let mut reader = csv::Reader::from_reader(content.as_bytes());
        let mut rows = Vec::new();
        for (idx, record) in reader.deserialize::<ScoreRow>().enumerate() {
            let row = record.map_err(|e| ScoreImportError::Parse {
                row: idx + 2, // header is row 1
                message: e.to_string(),
            })?;
            rows.push(row);
        }
        rows
    };
    if rows.is_empty() {
        return Err(ScoreImportError::EmptyFile {
            path: path.display().to_string(),
        });
    }
    Ok(rows)
}

/// Imports externally computed scores for `dataset`, returning one matrix
/// per sample in dataset order, tagged with `measure_tag`.
pub fn import_scores(
    path: &Path,
    measure_tag: &str,
    dataset: &Dataset,
) -> Result<Vec<SimilarityMatrix>, ScoreImportError> {
    let rows = read_rows(path)?;

    // sample id -> (passage id -> slot index)
    let mut layout: HashMap<&str, HashMap<&str, usize>> = HashMap::new();
    for sample in dataset.samples() {
        let slots = sample
            .passages
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.as_str(), i))
            .collect();
        layout.insert(sample.id.as_str(), slots);
    }

    let mut filled: HashMap<&str, Vec<Option<f64>>> = dataset
        .samples()
        .iter()
        .map(|s| (s.id.as_str(), vec![None; s.passages.len()]))
        .collect();

    for (idx, row) in rows.iter().enumerate() {
        let row_no = idx + 1;
        let slots =
            layout
                .get(row.sample_id.as_str())
                .ok_or_else(|| ScoreImportError::UnknownSample {
                    row: row_no,
                    sample_id: row.sample_id.clone(),
                })?;
        let &slot =
            slots
                .get(row.passage_id.as_str())
                .ok_or_else(|| ScoreImportError::UnknownPassage {
                    row: row_no,
                    sample_id: row.sample_id.clone(),
                    passage_id: row.passage_id.clone(),
                })?;
        if !row.score.is_finite() {
            return Err(ScoreImportError::NonFiniteScore {
                row: row_no,
                sample_id: row.sample_id.clone(),
                passage_id: row.passage_id.clone(),
            });
        }
        let cell = &mut filled.get_mut(row.sample_id.as_str()).unwrap()[slot];
        if cell.is_some() {
            return Err(ScoreImportError::DuplicateRow {
                row: row_no,
                sample_id: row.sample_id.clone(),
                passage_id: row.passage_id.clone(),
            });
        }
        *cell = Some(row.score);
    }

    let mut matrices = Vec::with_capacity(dataset.len());
    for sample in dataset.samples() {
        let cells = &filled[sample.id.as_str()];
        let mut scores = Vec::with_capacity(cells.len());
        for (passage, cell) in sample.passages.iter().zip(cells) {
            let score = cell.ok_or_else(|| ScoreImportError::MissingScore {
                sample_id: sample.id.clone(),
                passage_id: passage.id.clone(),
            })?;
            scores.push((passage.id.clone(), score));
        }
        matrices.push(SimilarityMatrix {
            sample_id: sample.id.clone(),
            measure: measure_tag.to_string(),
            scores,
        });
    }
    Ok(matrices)
}

/// Writes matrices as a CSV score file with header `sample_id,passage_id,score`.
pub fn write_scores(matrices: &[SimilarityMatrix], path: &Path) -> Result<(), ScoreImportError> {
    let file = fs::File::create(path).map_err(|source| ScoreImportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut writer = csv::Writer::from_writer(file);
    for m in matrices {
        for (passage_id, score) in &m.scores {
            writer
                .serialize(ScoreRow {
                    sample_id: m.sample_id.clone(),
                    passage_id: passage_id.clone(),
                    score: *score,
                })
                .map_err(|e| ScoreImportError::Parse {
                    row: 0,
                    message: e.to_string(),
                })?;
        }
    }
    writer.flush().map_err(|source| ScoreImportError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Passage, Sample};
    use std::io::Write as _;

    fn dataset() -> Dataset {
        let mk = |id: &str| Sample {
            id: id.into(),
            query: "q".into(),
            claimant: None,
            passages: vec![
                Passage::new("p1", "a", true),
                Passage::new("p2", "b", false),
            ],
        };
        Dataset::new("d", vec![mk("s1"), mk("s2")]).unwrap()
    }

    fn temp(content: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn complete_csv_imports() {
        let f = temp(
            "sample_id,passage_id,score\ns1,p1,0.5\ns1,p2,0.25\ns2,p1,1\ns2,p2,2\n",
            ".csv",
        );
        let ms = import_scores(f.path(), "ext", &dataset()).unwrap();
        assert_eq!(ms.len(), 2);
        assert_eq!(ms[0].measure, "ext");
        assert_eq!(ms[0].score_of("p2"), Some(0.25));
        assert_eq!(ms[1].score_of("p2"), Some(2.0));
    }

    #[test]
    fn complete_jsonl_imports() {
        let f = temp(
            concat!(
                r#"{"sample_id":"s1","passage_id":"p1","score":0.5}"#, "\n",
                r#"{"sample_id":"s1","passage_id":"p2","score":0.25}"#, "\n",
                r#"{"sample_id":"s2","passage_id":"p1","score":1}"#, "\n",
                r#"{"sample_id":"s2","passage_id":"p2","score":2}"#, "\n",
            ),
            ".jsonl",
        );
        let ms = import_scores(f.path(), "ext", &dataset()).unwrap();
        assert_eq!(ms.len(), 2);
    }

    #[test]
    fn missing_passage_named() {
        let f = temp(
            "sample_id,passage_id,score\ns1,p1,0.5\ns2,p1,1\ns2,p2,2\n",
            ".csv",
        );
        let err = import_scores(f.path(), "ext", &dataset()).unwrap_err();
        match err {
            ScoreImportError::MissingScore {
                sample_id,
                passage_id,
            } => {
                assert_eq!(sample_id, "s1");
                assert_eq!(passage_id, "p2");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn unknown_sample_rejected() {
        let f = temp("sample_id,passage_id,score\nsX,p1,0.5\n", ".csv");
        let err = import_scores(f.path(), "ext", &dataset()).unwrap_err();
        assert!(matches!(err, ScoreImportError::UnknownSample { .. }));
    }

    #[test]
    fn duplicate_row_rejected() {
        let f = temp(
            "sample_id,passage_id,score\ns1,p1,0.5\ns1,p1,0.6\n",
            ".csv",
        );
        let err = import_scores(f.path(), "ext", &dataset()).unwrap_err();
        assert!(matches!(err, ScoreImportError::DuplicateRow { .. }));
    }

    #[test]
    fn non_finite_rejected() {
        let f = temp(
            concat!(r#"{"sample_id":"s1","passage_id":"p1","score":null}"#, "\n"),
            ".jsonl",
        );
        assert!(import_scores(f.path(), "ext", &dataset()).is_err());
        let f = temp("sample_id,passage_id,score\ns1,p1,NaN\n", ".csv");
        let err = import_scores(f.path(), "ext", &dataset()).unwrap_err();
        assert!(matches!(err, ScoreImportError::NonFiniteScore { .. }));
    }

    #[test]
    fn write_then_import_round_trips() {
        let ds = dataset();
        let ms: Vec<SimilarityMatrix> = ds
            .samples()
            .iter()
            .map(|s| super::super::bm25_scores(s, &Default::default(), &Default::default()))
            .collect();
        let f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        write_scores(&ms, f.path()).unwrap();
        let back = import_scores(f.path(), "bm25", &ds).unwrap();
        for (a, b) in ms.iter().zip(&back) {
            assert_eq!(a.scores, b.scores);
        }
    }
}
