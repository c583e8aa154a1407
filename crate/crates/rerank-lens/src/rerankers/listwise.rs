//! Listwise LLM re-ranking: the RankGPT message protocol with
//! sliding-window scheduling.
//!
//! Each window of passages is sent as a chat-completion conversation;
//! the model replies with a ranked list of bracketed identifiers like
//! `[3] > [1] > [2]`. Lists longer than the window are processed in
//! overlapping windows advancing from the tail of the list toward its
//! head, re-ordering each window in place before the window slides.

use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use std::sync::LazyLock;

use super::{ChatTransport, Ranking, RerankError};
use crate::corpus::{Passage, Sample};

/// Chat message role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One chat message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Message {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Configuration of the listwise LLM re-ranker client.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ListwiseLlmConfig {
    pub endpoint: String,
    pub model_tag: String,
    /// Sliding window size `w`.
    pub window_size: usize,
    /// Sliding step size `s`; must not exceed `window_size`.
    pub step_size: usize,
    /// Retries after the first attempt, for transport and protocol errors.
    pub max_retries: u32,
    pub timeout: Duration,
    /// Hard cap on transport requests across the sample, retries included.
    pub request_budget: Option<usize>,
    /// First retry delay; doubles per retry.
    pub backoff_base: Duration,
}

impl ListwiseLlmConfig {
    pub fn new(endpoint: impl Into<String>, model_tag: impl Into<String>) -> Self {
        ListwiseLlmConfig {
            endpoint: endpoint.into(),
            model_tag: model_tag.into(),
            window_size: 20,
            step_size: 2,
            max_retries: 3,
            timeout: Duration::from_secs(60),
            request_budget: None,
            backoff_base: Duration::from_secs(1),
        }
    }

    pub fn validate(&self) -> Result<(), RerankError> {
        if self.window_size == 0 || self.step_size == 0 {
            return Err(RerankError::ZeroWindow);
        }
        if self.step_size > self.window_size {
            return Err(RerankError::InvalidWindow {
                window: self.window_size,
                step: self.step_size,
            });
        }
        Ok(())
    }
}

const SYSTEM_PROMPT: &str = "You are RankGPT, an intelligent assistant that can rank passages \
                             based on their relevancy to the query.";

/// Builds the full message sequence for one window: system prompt,
/// task announcement, acknowledgment, one user/assistant pair per
/// passage with 1-based window-local identifiers, and the final ranking
/// instruction. Passage text passes through verbatim.
pub fn build_listwise_messages(
    query: &str,
    window: &[&Passage],
) -> Result<Vec<Message>, RerankError> {
    if window.is_empty() {
        return Err(RerankError::EmptyWindow);
    }
    let num = window.len();
    let mut messages = Vec::with_capacity(2 * num + 4);
    messages.push(Message::system(SYSTEM_PROMPT));
    messages.push(Message::user(format!(
        "I will provide you with {num} passages, each indicated by number identifier []. \
         Rank them based on their relevance to query: {query}."
    )));
    messages.push(Message::assistant("Okay, please provide the passages."));
    for (i, passage) in window.iter().enumerate() {
        let id = i + 1;
        messages.push(Message::user(format!("[{id}] {}", passage.text)));
        messages.push(Message::assistant(format!("Received passage [{id}]")));
    }
    messages.push(Message::user(format!(
        "Search Query: {query}.\nRank the {num} passages above based on their relevance to the \
         search query. The passages should be listed in descending order using identifiers, and \
         the most relevant passages should be listed first, and the output format should be \
         [] > [], e.g., [1] > [2]. Only response the ranking results, do not say any word or \
         explain."
    )));
    Ok(messages)
}

static BRACKETED_INT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[(\d+)\]").expect("valid regex"));

/// Extracts a window-local permutation of `1..=n` from a model reply.
///
/// Bracketed integers are taken in order of appearance; duplicates after
/// the first occurrence and out-of-range identifiers are dropped; missing
/// identifiers are appended in original window order. A reply with zero
/// extractable in-range identifiers is a protocol error (the caller
/// retries).
pub fn parse_permutation(response: &str, n: usize) -> Result<Vec<usize>, RerankError> {
    let mut seen = vec![false; n + 1];
    let mut perm = Vec::with_capacity(n);
    for cap in BRACKETED_INT.captures_iter(response) {
        let Ok(id) = cap[1].parse::<usize>() else {
            continue;
        };
        if id >= 1 && id <= n && !seen[id] {
            seen[id] = true;
            perm.push(id);
        }
    }
    if perm.is_empty() {
        return Err(RerankError::Protocol {
            sample_id: String::new(),
            attempts: 0,
        });
    }
    for (id, &present) in seen.iter().enumerate().skip(1) {
        if !present {
            perm.push(id);
        }
    }
    Ok(perm)
}

/// Window positions for a list of `n` passages: `(start, end)` index
/// pairs, end exclusive, in processing order. A single window covers
/// everything when `n <= w`; otherwise windows advance from the tail
/// toward the head in steps of `s`, with the final window clamped to
/// start at the head so the first passages are always covered.
pub fn window_schedule(n: usize, w: usize, s: usize) -> Vec<(usize, usize)> {
    if n <= w {
        return vec![(0, n)];
    }
    let mut windows = Vec::new();
    let mut start = n - w;
    loop {
        windows.push((start, start + w));
        if start == 0 {
            break;
        }
        start = start.saturating_sub(s);
    }
    windows
}

/// Audit record of one window exchange.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExchangeRecord {
    pub window_start: usize,
    pub window_len: usize,
    pub messages: Vec<Message>,
    pub reply: String,
    pub permutation: Vec<usize>,
}

/// Per-sample request log: every message sequence sent, the raw reply,
/// and the repaired permutation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ListwiseLog {
    pub sample_id: String,
    pub exchanges: Vec<ExchangeRecord>,
}

/// A ranking plus the audit log that produced it.
#[derive(Debug, Clone)]
pub struct ListwiseOutcome {
    pub ranking: Ranking,
    pub log: ListwiseLog,
}

/// Re-ranks one sample through the listwise protocol. `query` is the
/// rendered query string. Windows are strictly sequential: each depends
/// on the order produced by the previous one. Deterministic given a
/// deterministic transport.
pub fn rerank_listwise(
    sample: &Sample,
    query: &str,
    cfg: &ListwiseLlmConfig,
    transport: &dyn ChatTransport,
) -> Result<ListwiseOutcome, RerankError> {
    cfg.validate()?;
    let n = sample.passages.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = ListwiseLog {
        sample_id: sample.id.clone(),
        exchanges: Vec::new(),
    };
    let mut budget = cfg.request_budget;

    for (start, end) in window_schedule(n, cfg.window_size, cfg.step_size) {
        let window: Vec<&Passage> = order[start..end]
            .iter()
            .map(|&i| &sample.passages[i])
            .collect();
        let messages = build_listwise_messages(query, &window)?;
        let (reply, permutation) =
            exchange_with_retry(transport, &messages, window.len(), cfg, sample, &mut budget)?;

        let current: Vec<usize> = order[start..end].to_vec();
        for (offset, &local) in permutation.iter().enumerate() {
            order[start + offset] = current[local - 1];
        }
        log.exchanges.push(ExchangeRecord {
            window_start: start,
            window_len: end - start,
            messages,
            reply,
            permutation,
        });
    }

    let ranking = Ranking {
        sample_id: sample.id.clone(),
        order: order
            .into_iter()
            .map(|i| sample.passages[i].id.clone())
            .collect(),
        scores: None,
    };
    ranking.validate_against(sample)?;
    Ok(ListwiseOutcome { ranking, log })
}

fn exchange_with_retry(
    transport: &dyn ChatTransport,
    messages: &[Message],
    window_len: usize,
    cfg: &ListwiseLlmConfig,
    sample: &Sample,
    budget: &mut Option<usize>,
) -> Result<(String, Vec<usize>), RerankError> {
    let attempts_allowed = cfg.max_retries + 1;
    let mut last_transport_err: Option<super::TransportError> = None;
    for attempt in 0..attempts_allowed {
        if attempt > 0 {
            let backoff = cfg.backoff_base * 2u32.saturating_pow(attempt - 1);
            if !backoff.is_zero() {
                std::thread::sleep(backoff);
            }
        }
        if let Some(b) = budget {
            if *b == 0 {
                return Err(RerankError::BudgetExhausted {
                    sample_id: sample.id.clone(),
                    budget: cfg.request_budget.unwrap_or(0),
                });
            }
            *b -= 1;
        }
        match transport.exchange(messages) {
            Ok(reply) => match parse_permutation(&reply, window_len) {
                Ok(perm) => return Ok((reply, perm)),
                Err(_) => {
                    log::warn!(
                        "sample {}: attempt {}: reply carried no usable ranking: {:?}",
                        sample.id,
                        attempt + 1,
                        reply.chars().take(80).collect::<String>()
                    );
                    last_transport_err = None;
                }
            },
            Err(e) => {
                log::warn!("sample {}: attempt {}: transport error: {e}", sample.id, attempt + 1);
                last_transport_err = Some(e);
            }
        }
    }
    match last_transport_err {
        Some(source) => Err(RerankError::Transport {
            sample_id: sample.id.clone(),
            attempts: attempts_allowed,
            source,
        }),
        None => Err(RerankError::Protocol {
            sample_id: sample.id.clone(),
            attempts: attempts_allowed,
        }),
    }
}
