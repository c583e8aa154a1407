//! Alleviation transforms and query rendering.
//!
//! The corpus transforms splice document-level information into passage
//! text: page titles or externally generated context blurbs, each joined
//! with a single newline. Both are non-idempotent, so the dataset's
//! transform history rejects double application. Neither touches gold
//! labels, ids, order or counts.

use super::{CorpusError, Dataset, Sample};

pub const PREPEND_TITLES_TAG: &str = "prepend-titles";
pub const INCORPORATE_CONTEXT_TAG: &str = "incorporate-context";

/// Separator between a spliced prefix (title or context) and passage text.
const SEPARATOR: char = '\n';

/// Returns a new dataset with each titled passage's text replaced by
/// `title`, a newline, then the original text. Passages without a title
/// pass through unchanged. The input dataset is not mutated.
pub fn prepend_titles(dataset: &Dataset) -> Result<Dataset, CorpusError> {
    guard_history(dataset, PREPEND_TITLES_TAG)?;
    let samples = dataset
        .samples()
        .iter()
        .map(|s| splice(s, |p| p.title.as_deref()))
        .collect();
    dataset.with_transform(PREPEND_TITLES_TAG, samples)
}

/// Returns a new dataset with each passage carrying a context getting its
/// text replaced by `context`, a newline, then the original text.
///
/// Errors when no passage in the dataset has a context: the transform
/// would be a silent no-op.
pub fn incorporate_context(dataset: &Dataset) -> Result<Dataset, CorpusError> {
    guard_history(dataset, INCORPORATE_CONTEXT_TAG)?;
    let any_context = dataset
        .samples()
        .iter()
        .flat_map(|s| &s.passages)
        .any(|p| p.context.is_some());
    if !any_context {
        return Err(CorpusError::NoContexts);
    }
    let samples = dataset
        .samples()
        .iter()
        .map(|s| splice(s, |p| p.context.as_deref()))
        .collect();
    dataset.with_transform(INCORPORATE_CONTEXT_TAG, samples)
}

fn guard_history(dataset: &Dataset, tag: &str) -> Result<(), CorpusError> {
    if dataset.transforms().iter().any(|t| t == tag) {
        return Err(CorpusError::TransformAlreadyApplied {
            tag: tag.to_string(),
        });
    }
    Ok(())
}

fn splice(sample: &Sample, prefix: impl Fn(&super::Passage) -> Option<&str>) -> Sample {
    let mut out = sample.clone();
    for p in &mut out.passages {
        if let Some(pre) = prefix(p) {
            p.text = format!("{pre}{SEPARATOR}{}", p.text);
        }
    }
    out
}

/// How a sample's query is rendered for a re-ranker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryTemplate {
    /// The bare query.
    Default,
    /// Fact-checking wording with the claim source spliced in.
    ClaimVerification,
}

/// Renders the query for `sample` under `template`. The claim-verification
/// template requires a claimant.
pub fn render_query(sample: &Sample, template: QueryTemplate) -> Result<String, CorpusError> {
    match template {
        QueryTemplate::Default => Ok(sample.query.clone()),
        QueryTemplate::ClaimVerification => {
            let claimant =
                sample
                    .claimant
                    .as_deref()
                    .ok_or_else(|| CorpusError::MissingClaimant {
                        sample_id: sample.id.clone(),
                    })?;
            Ok(format!(
                "Is the following claim accurate?\nClaimant: {claimant}\nClaim: {}",
                sample.query
            ))
        }
    }
}
