//! LLM-driven selection and wiring of planning and control algorithms.
//!
//! A round asks the model for a subset of the eight catalog APIs, then for a
//! declarative pipeline wiring them together; the pipeline is validated,
//! executed against the scenario, and judged. Failures are fed back as
//! diagnostics for up to `max_rounds` rounds.

pub mod backend;
pub mod baseline;
pub mod catalog;
pub mod episode;
pub mod http;
pub mod mock;
pub mod pipeline;
pub mod prompts;
pub mod scripted;
pub mod selection;

pub use backend::{BackendError, BackendErrorKind, ChatBackend, ChatOptions, Message, Role};
pub use baseline::predict_baseline_episode;
pub use catalog::{ApiCatalog, ApiEntry, ApiId};
pub use episode::{
    diagnostic_summary, run_episode, EpisodeConfig, EpisodeResult, ErrorKind, Orchestrator,
    RoundError, RoundRecord,
};
pub use http::{http_complete, HttpBackend, HttpConfig, RetryPolicy};
pub use mock::{rule_based_backend, RuleBasedBackend};
pub use pipeline::{execute_pipeline, parse_pipeline, validate_pipeline, PipelineConfig};
pub use prompts::{DocsMode, PromptTemplates};
pub use scripted::{scripted_backend, ScriptedBackend};
pub use selection::{parse_selection, StrategySelection};
