//! Chat backend interface shared by the HTTP client and the test doubles.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Default sampling temperature for real backends.
pub const DEFAULT_TEMPERATURE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatOptions {
    pub model: String,
    /// Within [0, 2].
    pub temperature: f64,
    pub max_tokens: u32,
    /// Per-attempt request timeout [s].
    pub timeout_s: f64,
}

impl Default for ChatOptions {
    fn default() -> Self {
        Self {
            model: "gpt-4o".into(),
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: 2048,
            timeout_s: 60.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendErrorKind {
    Transport,
    Auth,
    RateLimited,
    Timeout,
    BadResponse,
}

impl BackendErrorKind {
    pub fn is_retryable(self) -> bool {
        matches!(
            self,
            BackendErrorKind::Transport | BackendErrorKind::RateLimited
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendError {
    pub kind: BackendErrorKind,
    pub retryable: bool,
    pub detail: String,
}

impl BackendError {
    pub fn new(kind: BackendErrorKind, detail: impl Into<String>) -> Self {
        Self {
            kind,
            retryable: kind.is_retryable(),
            detail: detail.into(),
        }
    }

    pub fn bad_response(detail: impl Into<String>) -> Self {
        Self::new(BackendErrorKind::BadResponse, detail)
    }
}

impl fmt::Display for BackendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} backend error: {}", self.kind, self.detail)
    }
}

impl std::error::Error for BackendError {}

/// A chat-completion endpoint. Implementations must not panic on any input
/// and report every failure as a [`BackendError`].
pub trait ChatBackend: Send + Sync {
    fn complete(&self, messages: &[Message], options: &ChatOptions)
        -> Result<String, BackendError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for Box<T> {
    fn complete(
        &self,
        messages: &[Message],
        options: &ChatOptions,
    ) -> Result<String, BackendError> {
        (**self).complete(messages, options)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    fn complete(
        &self,
        messages: &[Message],
        options: &ChatOptions,
    ) -> Result<String, BackendError> {
        (**self).complete(messages, options)
    }
}

impl<T: ChatBackend + ?Sized> ChatBackend for &T {
    fn complete(
        &self,
        messages: &[Message],
        options: &ChatOptions,
    ) -> Result<String, BackendError> {
        (**self).complete(messages, options)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retryability_follows_kind() {
        assert!(BackendError::new(BackendErrorKind::RateLimited, "").retryable);
        assert!(BackendError::new(BackendErrorKind::Transport, "").retryable);
        assert!(!BackendError::new(BackendErrorKind::Auth, "").retryable);
        assert!(!BackendError::bad_response("x").retryable);
    }

    #[test]
    fn roles_serialize_lowercase() {
        let m = Message::user("hi");
        assert_eq!(
            serde_json::to_string(&m).unwrap(),
            r#"{"role":"user","content":"hi"}"#
        );
    }
}
