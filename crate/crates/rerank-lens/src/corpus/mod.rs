//! Dataset model: samples, passages, gold labels, chunking and transforms.
//!
//! A [`Sample`] is the unit of evaluation: one query plus its candidate
//! passages and per-passage gold labels. A [`Dataset`] is a validated,
//! ordered collection of samples. Every constructor enforces the
//! invariants the downstream metrics rely on (at least one gold and one
//! non-gold passage per sample, unique ids, non-empty text).

mod chunk;
mod fuzzy;
mod load;
mod transform;

pub use chunk::{chunk_html, chunk_newlines};
pub use fuzzy::similarity as fuzzy_similarity;
pub use load::{
    load_dataset, load_dataset_opts, load_raw_documents, write_dataset, DatasetFormat,
    LoadOptions, LoadOutcome, RawDocument,
};
pub use transform::{incorporate_context, prepend_titles, render_query, QueryTemplate};

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors produced by dataset loading, validation, chunking and transforms.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("sample {sample_id}: fewer than 2 passages ({count})")]
    TooFewPassages { sample_id: String, count: usize },
    #[error("sample {sample_id}: no gold passage")]
    NoGoldPassage { sample_id: String },
    #[error("sample {sample_id}: no non-gold passage")]
    NoNonGoldPassage { sample_id: String },
    #[error("sample {sample_id}: duplicate passage id {passage_id}")]
    DuplicatePassageId {
        sample_id: String,
        passage_id: String,
    },
    #[error("sample {sample_id}: passage {passage_id} has empty text")]
    EmptyPassageText {
        sample_id: String,
        passage_id: String,
    },
    #[error("duplicate sample id {sample_id}")]
    DuplicateSampleId { sample_id: String },
    #[error("dataset {name} has no samples")]
    EmptyDataset { name: String },
    #[error("gold span {start}..{end} not covered by any element ({n_tokens} tokens in document)")]
    GoldSpanNotCovered {
        start: usize,
        end: usize,
        n_tokens: usize,
    },
    #[error("gold not matched: best fuzzy score {best:.4} below threshold {threshold}")]
    GoldNotMatched { best: f64, threshold: f64 },
    #[error("document is empty")]
    EmptyDocument,
    #[error("gold excerpt is empty")]
    EmptyGoldExcerpt,
    #[error("fuzzy threshold {threshold} outside [0, 1]")]
    InvalidThreshold { threshold: f64 },
    #[error("chunking spec: fuzzy threshold is {}", if *.present { "only valid for the newline-paragraph strategy" } else { "required for the newline-paragraph strategy" })]
    ThresholdMismatch { present: bool },
    #[error("transform {tag} already applied to this dataset")]
    TransformAlreadyApplied { tag: String },
    #[error("no contexts present: no passage in the dataset carries a context")]
    NoContexts,
    #[error("sample {sample_id}: claim-verification template requires a claimant")]
    MissingClaimant { sample_id: String },
    #[error("raw document {id}: {message}")]
    RawDocument { id: String, message: String },
}

/// One candidate passage of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    pub gold: bool,
}

impl Passage {
    /// A bare passage with just an id, text and gold label.
    pub fn new(id: impl Into<String>, text: impl Into<String>, gold: bool) -> Self {
        Passage {
            id: id.into(),
            text: text.into(),
            title: None,
            context: None,
            url: None,
            gold,
        }
    }
}

/// One query plus its candidate passages — the unit of evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claimant: Option<String>,
    pub passages: Vec<Passage>,
}

impl Sample {
    /// Checks the per-sample invariants: at least 2 passages, at least one
    /// gold and one non-gold passage, unique passage ids, non-empty text.
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.passages.len() < 2 {
            return Err(CorpusError::TooFewPassages {
                sample_id: self.id.clone(),
                count: self.passages.len(),
            });
        }
        if !self.passages.iter().any(|p| p.gold) {
            return Err(CorpusError::NoGoldPassage {
                sample_id: self.id.clone(),
            });
        }
        if !self.passages.iter().any(|p| !p.gold) {
            return Err(CorpusError::NoNonGoldPassage {
                sample_id: self.id.clone(),
            });
        }
        let mut seen = HashSet::new();
        for p in &self.passages {
            if !seen.insert(p.id.as_str()) {
                return Err(CorpusError::DuplicatePassageId {
                    sample_id: self.id.clone(),
                    passage_id: p.id.clone(),
                });
            }
            if p.text.trim().is_empty() {
                return Err(CorpusError::EmptyPassageText {
                    sample_id: self.id.clone(),
                    passage_id: p.id.clone(),
                });
            }
        }
        Ok(())
    }

    /// Ids of the gold passages, in passage order.
    pub fn gold_ids(&self) -> Vec<&str> {
        self.passages
            .iter()
            .filter(|p| p.gold)
            .map(|p| p.id.as_str())
            .collect()
    }

    /// Number of gold passages.
    pub fn gold_count(&self) -> usize {
        self.passages.iter().filter(|p| p.gold).count()
    }
}

/// Summary statistics derived from a dataset's samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub samples: usize,
    pub mean_passages: f64,
    pub min_passages: usize,
    pub max_passages: usize,
    /// Distribution of golds per sample: gold count -> number of samples.
    pub gold_per_sample: BTreeMap<usize, usize>,
}

impl DatasetStats {
    fn compute(samples: &[Sample]) -> Self {
        let counts: Vec<usize> = samples.iter().map(|s| s.passages.len()).collect();
        let total: usize = counts.iter().sum();
        let mut gold_per_sample = BTreeMap::new();
        for s in samples {
            *gold_per_sample.entry(s.gold_count()).or_insert(0) += 1;
        }
        DatasetStats {
            samples: samples.len(),
            mean_passages: total as f64 / samples.len() as f64,
            min_passages: counts.iter().copied().min().unwrap_or(0),
            max_passages: counts.iter().copied().max().unwrap_or(0),
            gold_per_sample,
        }
    }
}

/// A validated, ordered collection of samples.
///
/// Immutable after construction; the stored stats are recomputed from the
/// samples on every construction. The transform history records which
/// non-idempotent transforms have been applied so that accidental double
/// application is rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    samples: Vec<Sample>,
    stats: DatasetStats,
    transforms: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, validating every sample and the uniqueness of
    /// sample ids. Sample order is preserved.
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self, CorpusError> {
        let name = name.into();
        if samples.is_empty() {
            return Err(CorpusError::EmptyDataset { name });
        }
        let mut seen = HashSet::new();
        for s in &samples {
            if !seen.insert(s.id.as_str()) {
                return Err(CorpusError::DuplicateSampleId {
                    sample_id: s.id.clone(),
                });
            }
            s.validate()?;
        }
        let stats = DatasetStats::compute(&samples);
        Ok(Dataset {
            name,
            samples,
            stats,
            transforms: Vec::new(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn stats(&self) -> &DatasetStats {
        &self.stats
    }

    /// Tags of transforms applied to this dataset, in application order.
    pub fn transforms(&self) -> &[String] {
        &self.transforms
    }

    pub fn sample(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    /// The same dataset under a different report tag.
    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub(crate) fn with_transform(
        &self,
        tag: &str,
        samples: Vec<Sample>,
    ) -> Result<Self, CorpusError> {
        let mut ds = Dataset::new(self.name.clone(), samples)?;
        ds.transforms = self.transforms.clone();
        ds.transforms.push(tag.to_string());
        Ok(ds)
    }
}

/// How raw documents are segmented into passages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChunkingStrategy {
    /// One passage per top-level html element; gold from a token span.
    HtmlElement,
    /// Passages are blank-line separated paragraphs; gold via fuzzy match.
    NewlineParagraph,
    /// Input is already chunked into passages with gold labels.
    PreChunked,
}

/// Chunking strategy plus its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkingSpec {
    pub strategy: ChunkingStrategy,
    /// Gold-matching threshold, newline-paragraph strategy only.
    pub fuzzy_threshold: Option<f64>,
}

impl ChunkingSpec {
    pub fn html_element() -> Self {
        ChunkingSpec {
            strategy: ChunkingStrategy::HtmlElement,
            fuzzy_threshold: None,
        }
    }

    pub fn newline_paragraph(threshold: f64) -> Self {
        ChunkingSpec {
            strategy: ChunkingStrategy::NewlineParagraph,
            fuzzy_threshold: Some(threshold),
        }
    }

    pub fn pre_chunked() -> Self {
        ChunkingSpec {
            strategy: ChunkingStrategy::PreChunked,
            fuzzy_threshold: None,
        }
    }

    /// The threshold must be present iff the strategy is newline-paragraph,
    /// and must lie in [0, 1].
    pub fn validate(&self) -> Result<(), CorpusError> {
        match (self.strategy, self.fuzzy_threshold) {
            (ChunkingStrategy::NewlineParagraph, Some(t)) => {
                if !(0.0..=1.0).contains(&t) {
                    Err(CorpusError::InvalidThreshold { threshold: t })
                } else {
                    Ok(())
                }
            }
            (ChunkingStrategy::NewlineParagraph, None) => {
                Err(CorpusError::ThresholdMismatch { present: false })
            }
            (_, Some(_)) => Err(CorpusError::ThresholdMismatch { present: true }),
            (_, None) => Ok(()),
        }
    }
}
