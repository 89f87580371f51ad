//! Chat-model plumbing.
//!
//! One trait, three implementations: [`http::HttpBackend`] speaks the
//! OpenAI-compatible chat-completions protocol to a remote (usually locally
//! served) model; [`scripted::ScriptedBackend`] replays canned replies for
//! byte-stable tests; [`oracle::OracleBackend`] is a benchmark-guided
//! heuristic that emits grammar-valid proposals, standing in for a language
//! model during offline end-to-end runs.
//!
//! All implementations strip delimited thinking segments before returning
//! text, and every exchange can be captured in a JSON-lines [`RunLog`] from
//! which a scripted backend can later replay the whole run.

pub mod http;
pub mod oracle;
pub mod scripted;

use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

/// Message author.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One message of a chat exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Decode parameters sent with each request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    /// Ask the model to reason before answering (chain of thought). How the
    /// flag is transported is backend-specific; the reasoning text itself is
    /// always stripped from the returned reply.
    pub reasoning: bool,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            temperature: 0.6,
            max_tokens: None,
            reasoning: true,
        }
    }
}

/// Backend failures.
#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("http status {status}: {message}")]
    Http { status: u16, message: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("scripted backend exhausted after {served} replies")]
    ScriptExhausted { served: usize },
    #[error("model returned an empty reply")]
    EmptyReply,
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("transport failed: {0}")]
    Transport(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad backend configuration: {0}")]
    Config(String),
}

/// A synchronous chat-completion endpoint.
///
/// `chat` takes the full message list (implementations are stateless with
/// respect to conversation history; sessions are managed by the caller) and
/// returns the assistant's visible text with any thinking segments removed.
pub trait ChatBackend: Send {
    fn chat(
        &mut self,
        messages: &[ChatMessage],
        params: &SamplingParams,
    ) -> Result<String, BackendError>;

    /// Short identity string for run manifests.
    fn describe(&self) -> String;
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn chat(
        &mut self,
        messages: &[ChatMessage],
        params: &SamplingParams,
    ) -> Result<String, BackendError> {
        (**self).chat(messages, params)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// Shared request-shape check: non-empty, at most one system message, and
/// only in first position.
pub(crate) fn validate_messages(messages: &[ChatMessage]) -> Result<(), BackendError> {
    if messages.is_empty() {
        return Err(BackendError::BadRequest("no messages".into()));
    }
    for (i, m) in messages.iter().enumerate() {
        if m.role == Role::System && i != 0 {
            return Err(BackendError::BadRequest(
                "system message must be first and unique".into(),
            ));
        }
    }
    Ok(())
}

/// Remove delimited thinking blocks from a reply. Balanced pairs are cut
/// out; an unterminated opening delimiter swallows the rest of the text
/// (a truncated thought is not usable output). The result is trimmed.
pub fn strip_thinking(text: &str, open: &str, close: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    loop {
        match rest.find(open) {
            None => {
                out.push_str(rest);
                break;
            }
            Some(start) => {
                out.push_str(&rest[..start]);
                let after = &rest[start + open.len()..];
                match after.find(close) {
                    Some(end) => rest = &after[end + close.len()..],
                    None => break, // unterminated: drop the tail
                }
            }
        }
    }
    out.trim().to_string()
}

/// One logged exchange: the full request and the raw reply text.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub messages: Vec<ChatMessage>,
    pub params: SamplingParams,
    pub response: String,
}

/// JSON-lines sink for chat exchanges. One [`LogEntry`] per line;
/// [`scripted::ScriptedBackend::from_run_log`] replays the responses.
pub struct RunLog {
    writer: Box<dyn Write + Send>,
    seq: u64,
}

impl RunLog {
    pub fn to_file(path: &Path) -> std::io::Result<Self> {
        let file = std::fs::File::create(path)?;
        Ok(RunLog {
            writer: Box::new(std::io::BufWriter::new(file)),
            seq: 0,
        })
    }

    pub fn to_writer(writer: impl Write + Send + 'static) -> Self {
        RunLog {
            writer: Box::new(writer),
            seq: 0,
        }
    }

    pub fn record(
        &mut self,
        messages: &[ChatMessage],
        params: &SamplingParams,
        response: &str,
    ) -> std::io::Result<()> {
        self.seq += 1;
        let entry = LogEntry {
            seq: self.seq,
            messages: messages.to_vec(),
            params: params.clone(),
            response: response.to_string(),
        };
        serde_json::to_writer(&mut self.writer, &entry)?;
        self.writer.write_all(b"\n")?;
        self.writer.flush()
    }

    /// Read every entry of a JSON-lines run log.
    pub fn read_entries(path: &Path) -> Result<Vec<LogEntry>, BackendError> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut entries = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: LogEntry = serde_json::from_str(&line).map_err(|e| {
                BackendError::MalformedResponse(format!(
                    "run log line {}: {e}",
                    lineno + 1
                ))
            })?;
            entries.push(entry);
        }
        Ok(entries)
    }
}

/// Wrapper that mirrors every exchange of an inner backend into a
/// [`RunLog`].
pub struct LoggingBackend<B: ChatBackend> {
    inner: B,
    log: RunLog,
}

impl<B: ChatBackend> LoggingBackend<B> {
    pub fn new(inner: B, log: RunLog) -> Self {
        LoggingBackend { inner, log }
    }
}

impl<B: ChatBackend> ChatBackend for LoggingBackend<B> {
    fn chat(
        &mut self,
        messages: &[ChatMessage],
        params: &SamplingParams,
    ) -> Result<String, BackendError> {
        let reply = self.inner.chat(messages, params)?;
        self.log.record(messages, params, &reply)?;
        Ok(reply)
    }

    fn describe(&self) -> String {
        format!("logged({})", self.inner.describe())
    }
}
