//! Message-exchange transports for the listwise re-ranker.
//!
//! The re-ranking logic is transport-agnostic: anything implementing
//! [`ChatTransport`] works, including plain closures (used by tests).
//! [`HttpTransport`] speaks the JSON chat-completion wire format;
//! [`ReplayTransport`] replays raw replies from a previous run's audit
//! log, keyed by message content, for bit-reproducible re-runs.

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{ListwiseLlmConfig, ListwiseLog, Message};

/// Environment variable holding the bearer token for [`HttpTransport`].
pub const API_KEY_ENV: &str = "RERANK_LENS_API_KEY";

/// Errors raised by a transport.
#[derive(Debug, Error)]
pub enum TransportError {
    #[error("http status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("network error: {0}")]
    Network(#[from] reqwest::Error),
    #[error("malformed reply: {0}")]
    Protocol(String),
    #[error("missing api key: set {API_KEY_ENV}")]
    MissingApiKey,
    #[error("replay log has no reply for this message sequence")]
    ReplayMiss,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Sends one message sequence and returns the model's text reply.
///
/// Implementations must be shareable across threads; samples may be
/// re-ranked concurrently against one transport.
pub trait ChatTransport: Send + Sync {
    fn exchange(&self, messages: &[Message]) -> Result<String, TransportError>;
}

impl<F> ChatTransport for F
where
    F: Fn(&[Message]) -> Result<String, TransportError> + Send + Sync,
{
    fn exchange(&self, messages: &[Message]) -> Result<String, TransportError> {
        self(messages)
    }
}

/// A token bucket admitting at most `rate` request starts per second,
/// with burst capacity equal to one second of refill.
#[derive(Debug)]
pub struct TokenBucket {
    state: Mutex<BucketState>,
    rate: f64,
    capacity: f64,
}

#[derive(Debug)]
struct BucketState {
    tokens: f64,
    last_refill: Instant,
}

impl TokenBucket {
    pub fn new(rate_per_sec: f64) -> Self {
        let capacity = rate_per_sec.max(1.0);
        TokenBucket {
            state: Mutex::new(BucketState {
                tokens: capacity,
                last_refill: Instant::now(),
            }),
            rate: rate_per_sec,
            capacity,
        }
    }

    /// Takes a token if available; otherwise returns how long to wait.
    pub fn try_acquire(&self) -> Result<(), Duration> {
        let mut state = self.state.lock().expect("bucket lock");
        let now = Instant::now();
        let elapsed = now.duration_since(state.last_refill).as_secs_f64();
        state.tokens = (state.tokens + elapsed * self.rate).min(self.capacity);
        state.last_refill = now;
        if state.tokens >= 1.0 {
            state.tokens -= 1.0;
            Ok(())
        } else {
            Err(Duration::from_secs_f64((1.0 - state.tokens) / self.rate))
        }
    }

    /// Blocks until a token is available.
    pub fn acquire(&self) {
        while let Err(wait) = self.try_acquire() {
            std::thread::sleep(wait);
        }
    }
}

/// Blocking HTTP transport for OpenAI-style chat-completion endpoints.
///
/// Sends `{"model": …, "messages": [{"role": …, "content": …}, …]}` with
/// a bearer-token auth header and reads the reply text from the first
/// choice's message content.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: String,
    bucket: Option<TokenBucket>,
}

impl HttpTransport {
    /// Builds a transport taking the bearer token from `RERANK_LENS_API_KEY`.
    pub fn from_env(cfg: &ListwiseLlmConfig) -> Result<Self, TransportError> {
        let key = std::env::var(API_KEY_ENV).map_err(|_| TransportError::MissingApiKey)?;
        Ok(Self::with_api_key(cfg, key))
    }

    pub fn with_api_key(cfg: &ListwiseLlmConfig, api_key: impl Into<String>) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .expect("client construction");
        HttpTransport {
            client,
            endpoint: cfg.endpoint.clone(),
            model: cfg.model_tag.clone(),
            api_key: api_key.into(),
            bucket: None,
        }
    }

    /// Caps request starts at `rate_per_sec`.
    pub fn with_rate_limit(mut self, rate_per_sec: f64) -> Self {
        self.bucket = Some(TokenBucket::new(rate_per_sec));
        self
    }
}

impl ChatTransport for HttpTransport {
    fn exchange(&self, messages: &[Message]) -> Result<String, TransportError> {
        if let Some(bucket) = &self.bucket {
            bucket.acquire();
        }
        let body = serde_json::json!({
            "model": self.model,
            "messages": messages,
        });
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()?;
        let status = response.status();
        if !status.is_success() {
            return Err(TransportError::Http {
                status: status.as_u16(),
                body: response.text().unwrap_or_default(),
            });
        }
        let value: serde_json::Value = response.json()?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| {
                TransportError::Protocol("reply has no choices[0].message.content".into())
            })
    }
}

fn message_digest(messages: &[Message]) -> String {
    let mut hasher = Sha256::new();
    for m in messages {
        hasher.update(serde_json::to_vec(m).expect("message serialization"));
        hasher.update([0]);
    }
    format!("{:x}", hasher.finalize())
}

/// Replays raw replies recorded in listwise audit logs. Replies are keyed
/// by the digest of the message sequence, so replay is independent of
/// sample processing order; repeated identical sequences replay in their
/// recorded order.
pub struct ReplayTransport {
    replies: Mutex<HashMap<String, VecDeque<String>>>,
}

impl ReplayTransport {
    pub fn from_logs(logs: &[ListwiseLog]) -> Self {
        let mut replies: HashMap<String, VecDeque<String>> = HashMap::new();
        for log in logs {
            for exchange in &log.exchanges {
                replies
                    .entry(message_digest(&exchange.messages))
                    .or_default()
                    .push_back(exchange.reply.clone());
            }
        }
        ReplayTransport {
            replies: Mutex::new(replies),
        }
    }

    /// Loads a JSONL audit-log file written by a previous run.
    pub fn from_log_file(path: &Path) -> Result<Self, TransportError> {
        let logs = super::io::read_listwise_logs(path).map_err(|e| match e {
            super::RerankError::Io { path, source } => TransportError::Io { path, source },
            other => TransportError::Protocol(other.to_string()),
        })?;
        Ok(Self::from_logs(&logs))
    }
}

impl ChatTransport for ReplayTransport {
    fn exchange(&self, messages: &[Message]) -> Result<String, TransportError> {
        let mut replies = self.replies.lock().expect("replay lock");
        replies
            .get_mut(&message_digest(messages))
            .and_then(|q| q.pop_front())
            .ok_or(TransportError::ReplayMiss)
    }
}
