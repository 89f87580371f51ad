//! Replay backend: serves a fixed queue of replies.
//!
//! The workhorse of deterministic testing. Build it from an explicit reply
//! list or from a recorded [`RunLog`](super::RunLog) file, then drive any
//! search loop against it — the same script always produces byte-identical
//! runs. Every request received is retained for post-hoc inspection, which
//! is how the transcript-shape properties (session growth, statelessness)
//! are asserted in tests.

use super::{
    validate_messages, BackendError, ChatBackend, ChatMessage, SamplingParams,
};
use std::collections::VecDeque;
use std::path::Path;

pub struct ScriptedBackend {
    replies: VecDeque<String>,
    served: usize,
    requests: Vec<Vec<ChatMessage>>,
}

impl ScriptedBackend {
    pub fn from_replies<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedBackend {
            replies: replies.into_iter().map(Into::into).collect(),
            served: 0,
            requests: Vec::new(),
        }
    }

    /// Replay the responses recorded in a JSON-lines run log, in order.
    pub fn from_run_log(path: &Path) -> Result<Self, BackendError> {
        let entries = super::RunLog::read_entries(path)?;
        Ok(Self::from_replies(
            entries.into_iter().map(|e| e.response),
        ))
    }

    /// Requests seen so far, oldest first.
    pub fn requests(&self) -> &[Vec<ChatMessage>] {
        &self.requests
    }

    /// Replies not yet served.
    pub fn remaining(&self) -> usize {
        self.replies.len()
    }
}

impl ChatBackend for ScriptedBackend {
    fn chat(
        &mut self,
        messages: &[ChatMessage],
        _params: &SamplingParams,
    ) -> Result<String, BackendError> {
        validate_messages(messages)?;
        self.requests.push(messages.to_vec());
        match self.replies.pop_front() {
            Some(reply) => {
                self.served += 1;
                Ok(reply)
            }
            None => Err(BackendError::ScriptExhausted {
                served: self.served,
            }),
        }
    }

    fn describe(&self) -> String {
        format!("scripted({} replies)", self.served + self.replies.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serves_replies_in_order_then_errors() {
        let mut backend = ScriptedBackend::from_replies(["r1", "r2"]);
        let params = SamplingParams::default();
        let q = [ChatMessage::user("q")];
        assert_eq!(backend.chat(&q, &params).unwrap(), "r1");
        assert_eq!(backend.chat(&q, &params).unwrap(), "r2");
        match backend.chat(&q, &params) {
            Err(BackendError::ScriptExhausted { served }) => assert_eq!(served, 2),
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn retains_requests_for_inspection() {
        let mut backend = ScriptedBackend::from_replies(["a"]);
        let params = SamplingParams::default();
        backend
            .chat(
                &[ChatMessage::system("s"), ChatMessage::user("u")],
                &params,
            )
            .unwrap();
        assert_eq!(backend.requests().len(), 1);
        assert_eq!(backend.requests()[0][1].content, "u");
    }

    #[test]
    fn replays_a_recorded_run_log() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        {
            let mut log = super::super::RunLog::to_file(&path).unwrap();
            let params = SamplingParams::default();
            log.record(&[ChatMessage::user("x")], &params, "first")
                .unwrap();
            log.record(&[ChatMessage::user("y")], &params, "second")
                .unwrap();
        }
        let mut backend = ScriptedBackend::from_run_log(&path).unwrap();
        let params = SamplingParams::default();
        let q = [ChatMessage::user("anything")];
        assert_eq!(backend.chat(&q, &params).unwrap(), "first");
        assert_eq!(backend.chat(&q, &params).unwrap(), "second");
    }
}
