//! Dataset file IO.
//!
//! Datasets travel as JSONL, one sample per line:
//!
//! ```text
//! {"id": "s1", "query": "...", "claimant": "...", "passages": [
//!   {"id": "p1", "text": "...", "title": "...", "context": "...",
//!    "url": "...", "gold": true}, ...]}
//! ```
//!
//! Raw (un-chunked) documents for ingestion use one JSON object per line
//! with a `document` field plus either `gold_span` (html-element chunking)
//! or `gold_excerpt` (newline-paragraph chunking).

use super::{ChunkingSpec, ChunkingStrategy, CorpusError, Dataset, Sample};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;

/// Supported dataset serialization formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    Jsonl,
}

/// Loader behaviour for samples that fail validation.
#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Downgrade invalid samples to warnings instead of failing the load.
    pub skip_invalid: bool,
}

/// A loaded dataset plus any lines skipped under [`LoadOptions::skip_invalid`].
#[derive(Debug)]
pub struct LoadOutcome {
    pub dataset: Dataset,
    /// (line number, reason) for every skipped sample.
    pub skipped: Vec<(usize, String)>,
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Loads and validates a dataset. Any parse error or invariant violation
/// fails the load, naming the line or sample.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset, CorpusError> {
    load_dataset_opts(path, format, LoadOptions::default()).map(|o| o.dataset)
}

/// Like [`load_dataset`], but with `skip_invalid` set, samples failing
/// validation are collected as warnings instead of failing the load.
/// Parse errors (malformed JSON) always fail.
pub fn load_dataset_opts(
    path: &Path,
    format: DatasetFormat,
    opts: LoadOptions,
) -> Result<LoadOutcome, CorpusError> {
    let DatasetFormat::Jsonl = format;
    let content = fs::read_to_string(path).map_err(io_err(path))?;
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let sample: Sample =
            serde_json::from_str(line).map_err(|e| CorpusError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        let check = sample.validate().and_then(|()| {
            if seen_ids.contains(sample.id.as_str()) {
                Err(CorpusError::DuplicateSampleId {
                    sample_id: sample.id.clone(),
                })
            } else {
                Ok(())
            }
        });
        match check {
            Ok(()) => {
                seen_ids.insert(sample.id.clone());
                samples.push(sample);
            }
            Err(e) if opts.skip_invalid => {
                log::warn!("skipping line {line_no}: {e}");
                skipped.push((line_no, e.to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    let dataset = Dataset::new(dataset_name(path), samples)?;
    Ok(LoadOutcome { dataset, skipped })
}

/// Writes a dataset as JSONL, one sample per line, in sample order.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<(), CorpusError> {
    let mut out = Vec::new();
    for sample in dataset.samples() {
        serde_json::to_writer(&mut out, sample).expect("sample serialization cannot fail");
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(&out).map_err(io_err(path))?;
    Ok(())
}

/// One raw document awaiting chunking, as read from an ingestion file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: String,
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claimant: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
    pub document: String,
    /// Token index range of the gold annotation (html-element chunking).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_span: Option<(usize, usize)>,
    /// Gold passage text to fuzzy-match (newline-paragraph chunking).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_excerpt: Option<String>,
}

impl RawDocument {
    /// Chunks this document into a validated sample under `spec`. Title
    /// and url propagate to every passage.
    pub fn into_sample(self, spec: &ChunkingSpec) -> Result<Sample, CorpusError> {
        spec.validate()?;
        let mut passages = match spec.strategy {
            ChunkingStrategy::HtmlElement => {
                let (start, end) = self.gold_span.ok_or_else(|| CorpusError::RawDocument {
                    id: self.id.clone(),
                    message: "html-element chunking requires gold_span".into(),
                })?;
                super::chunk_html(&self.document, start..end)?
            }
            ChunkingStrategy::NewlineParagraph => {
                let excerpt =
                    self.gold_excerpt
                        .as_deref()
                        .ok_or_else(|| CorpusError::RawDocument {
                            id: self.id.clone(),
                            message: "newline-paragraph chunking requires gold_excerpt".into(),
                        })?;
                let threshold = spec.fuzzy_threshold.expect("validated above");
                super::chunk_newlines(&self.document, excerpt, threshold)?
            }
            ChunkingStrategy::PreChunked => {
                return Err(CorpusError::RawDocument {
                    id: self.id,
                    message: "pre-chunked input is a dataset file, not raw documents".into(),
                })
            }
        };
        for p in &mut passages {
            p.title = self.title.clone();
            p.url = self.url.clone();
        }
        let sample = Sample {
            id: self.id,
            query: self.query,
            claimant: self.claimant,
            passages,
        };
        sample.validate()?;
        Ok(sample)
    }
}

/// Loads raw documents (one JSON object per line) for ingestion.
pub fn load_raw_documents(path: &Path) -> Result<Vec<RawDocument>, CorpusError> {
    let content = fs::read_to_string(path).map_err(io_err(path))?;
    let mut docs = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: RawDocument = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}
