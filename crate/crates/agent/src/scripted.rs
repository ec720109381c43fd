use std::collections::VecDeque;
use std::path::Path;
use std::sync::Mutex;

use crate::backend::{BackendError, ChatBackend, ChatOptions, Message};

/// Replays a fixed list of responses in order, ignoring the prompts.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<String>>,
}

impl ScriptedBackend {
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self {
            queue: Mutex::new(responses.into_iter().map(Into::into).collect()),
        }
    }

    /// Reads a transcript file holding a JSON array of response strings.
    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self::new(load_transcript(path)?))
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}

pub fn load_transcript(path: &Path) -> std::io::Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("{}: expected a JSON array of strings ({e})", path.display()),
        )
    })
}

pub fn scripted_backend<S: Into<String>>(
    responses: impl IntoIterator<Item = S>,
) -> ScriptedBackend {
    ScriptedBackend::new(responses)
}

impl ChatBackend for ScriptedBackend {
    fn complete(
        &self,
        _messages: &[Message],
        _options: &ChatOptions,
    ) -> Result<String, BackendError> {
        self.queue
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .pop_front()
            .ok_or_else(|| BackendError::bad_response("scripted backend exhausted"))
    }
}
