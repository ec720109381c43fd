//! The bounded refinement loop: prompt, parse, validate, execute, check,
//! and re-prompt with diagnostics.

use std::fmt;
use std::time::Instant;

use ctrlsel_core::environment::TRACKING_TOLERANCE;
use ctrlsel_core::environment::{
    check_outcome, environment_summary, render_task_description, OutcomeReason,
};
use ctrlsel_core::planners::Path;
use ctrlsel_core::{Control, ScenarioKind, ScenarioSpec, TaskOutcome, Trajectory};
use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, BackendErrorKind, ChatBackend, ChatOptions, Message};
use crate::catalog::ApiCatalog;
use crate::pipeline::{
    execute_pipeline, parse_pipeline, validate_pipeline, ExecError, PipelineConfig,
};
use crate::prompts::{
    build_pipeline_prompt, build_selection_prompt, retrieve_api_docs, DocsMode, PromptContext,
    PromptTemplates,
};
use crate::selection::{parse_selection, StrategySelection};

pub const DEFAULT_MAX_ROUNDS: usize = 6;
pub const DEFAULT_TIMEOUT_S: f64 = 30.0;

/// Consecutive pipeline-level failures after which the selection is asked
/// for again.
pub const RESELECT_AFTER: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Parse,
    Validation,
    Timeout,
    TaskFailure,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 4] = [
        ErrorKind::Parse,
        ErrorKind::Validation,
        ErrorKind::Timeout,
        ErrorKind::TaskFailure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Parse => "parse",
            ErrorKind::Validation => "validation",
            ErrorKind::Timeout => "timeout",
            ErrorKind::TaskFailure => "task_failure",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ErrorKind::Parse => "Parse",
            ErrorKind::Validation => "Validation",
            ErrorKind::Timeout => "Timeout",
            ErrorKind::TaskFailure => "TaskFailure",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundError {
    pub kind: ErrorKind,
    pub message: String,
    /// Every violated rule, for validation errors.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
    /// Offending stage, e.g. `stage 2 (pid)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
}

impl RoundError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            violations: Vec::new(),
            stage: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    pub selection: Option<StrategySelection>,
    pub config: Option<PipelineConfig>,
    pub error: Option<RoundError>,
    pub outcome: Option<TaskOutcome>,
    pub diagnostic: String,
    pub wall_time_s: f64,
}

impl RoundRecord {
    pub(crate) fn new(round: usize) -> Self {
        Self {
            round,
            selection: None,
            config: None,
            error: None,
            outcome: None,
            diagnostic: String::new(),
            wall_time_s: 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EpisodeResult {
    pub scenario_id: String,
    pub kind: ScenarioKind,
    pub seed: u64,
    pub success: bool,
    pub rounds_used: usize,
    pub records: Vec<RoundRecord>,
    pub outcome: Option<TaskOutcome>,
    /// Set when the backend failed in a way that retrying cannot fix.
    pub aborted: Option<BackendError>,
    #[serde(skip)]
    pub trajectory: Option<Trajectory>,
    #[serde(skip)]
    pub controls: Vec<Control>,
    #[serde(skip)]
    pub paths: Vec<(String, Path)>,
}

impl EpisodeResult {
    pub(crate) fn new(spec: &ScenarioSpec) -> Self {
        Self {
            scenario_id: spec.id(),
            kind: spec.kind,
            seed: spec.seed,
            success: false,
            rounds_used: 0,
            records: Vec::new(),
            outcome: None,
            aborted: None,
            trajectory: None,
            controls: Vec::new(),
            paths: Vec::new(),
        }
    }

    pub fn error_kinds(&self) -> Vec<ErrorKind> {
        self.records
            .iter()
            .filter_map(|r| r.error.as_ref().map(|e| e.kind))
            .collect()
    }

    /// Round at which the episode succeeded.
    pub fn success_round(&self) -> Option<usize> {
        self.success.then_some(self.rounds_used)
    }
}

/// Human-readable metric of an unsuccessful outcome.
pub fn outcome_phrase(kind: ScenarioKind, outcome: &TaskOutcome) -> String {
    let step = outcome
        .step
        .map(|s| s.to_string())
        .unwrap_or_else(|| "?".into());
    match outcome.reason {
        OutcomeReason::Collision => format!("collision at step {step}"),
        OutcomeReason::OutOfBounds => format!("left the workspace at step {step}"),
        OutcomeReason::StlViolated => format!("STL robustness {:.3}", outcome.metric),
        OutcomeReason::GoalMissed if kind.is_tracking() => format!(
            "RMS tracking error {:.3} m exceeds the tolerance {TRACKING_TOLERANCE:.3} m",
            outcome.metric
        ),
        OutcomeReason::GoalMissed => format!("final goal distance {:.2} m", outcome.metric),
        OutcomeReason::GoalReached => format!("goal reached (metric {:.3})", outcome.metric),
        OutcomeReason::TrackingOk => format!("tracking ok (RMS {:.3} m)", outcome.metric),
    }
}

/// One paragraph describing a failed round for the next prompt.
pub fn diagnostic_summary(record: &RoundRecord) -> String {
    let Some(e) = &record.error else {
        return format!("Round {} succeeded.", record.round);
    };
    let mut out = format!(
        "Round {} failed with a {} error",
        record.round,
        e.kind.title()
    );
    if let Some(s) = &e.stage {
        out.push_str(&format!(" in {s}"));
    }
    match e.kind {
        ErrorKind::Validation if !e.violations.is_empty() => {
            out.push_str(&format!("; {} rule(s) violated: ", e.violations.len()));
            let items: Vec<String> = e
                .violations
                .iter()
                .enumerate()
                .map(|(i, v)| format!("({}) {v}", i + 1))
                .collect();
            out.push_str(&items.join("; "));
            out.push('.');
        }
        _ => {
            out.push_str(": ");
            out.push_str(&e.message);
            if !e.message.ends_with('.') {
                out.push('.');
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub max_rounds: usize,
    /// Wall-clock budget of one round's pipeline execution [s].
    pub timeout_s: f64,
    pub docs_mode: DocsMode,
    pub chat: ChatOptions,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            max_rounds: DEFAULT_MAX_ROUNDS,
            timeout_s: DEFAULT_TIMEOUT_S,
            docs_mode: DocsMode::OnDemand,
            chat: ChatOptions::default(),
        }
    }
}

/// Catalog, templates and loop settings; shareable across concurrent
/// episodes.
#[derive(Clone, Debug, Default)]
pub struct Orchestrator {
    pub catalog: ApiCatalog,
    pub templates: PromptTemplates,
    pub config: EpisodeConfig,
}

enum Phase {
    Selection,
    Pipeline,
}

struct Failure {
    phase: Phase,
    error: RoundError,
    abort: Option<BackendError>,
}

fn backend_failure(phase: Phase, what: &str, e: BackendError) -> Failure {
    match e.kind {
        BackendErrorKind::BadResponse => Failure {
            phase,
            error: RoundError::new(
                ErrorKind::Parse,
                format!("the {what} response could not be loaded ({})", e.detail),
            ),
            abort: None,
        },
        BackendErrorKind::Timeout => Failure {
            phase,
            error: RoundError::new(
                ErrorKind::Timeout,
                format!("the {what} request timed out ({})", e.detail),
            ),
            abort: None,
        },
        _ => Failure {
            phase,
            error: RoundError::new(ErrorKind::Parse, format!("the {what} request failed: {e}")),
            abort: Some(e),
        },
    }
}

impl Orchestrator {
    pub fn new(config: EpisodeConfig) -> Self {
        Self {
            config,
            ..Self::default()
        }
    }

    pub(crate) fn ask(
        &self,
        backend: &dyn ChatBackend,
        prompt: String,
    ) -> Result<String, BackendError> {
        let messages = [
            Message::system(self.templates.system.trim_end()),
            Message::user(prompt),
        ];
        backend.complete(&messages, &self.config.chat)
    }

    pub fn run_episode(&self, spec: &ScenarioSpec, backend: &dyn ChatBackend) -> EpisodeResult {
        let task = render_task_description(spec);
        let env = environment_summary(spec);
        let max_rounds = self.config.max_rounds.max(1);
        let mut result = EpisodeResult::new(spec);
        let mut selection: Option<StrategySelection> = None;
        let mut pipeline_failures = 0;

        for round in 1..=max_rounds {
            let started = Instant::now();
            let ctx = PromptContext {
                task: &task,
                env_summary: &env,
                round,
                max_rounds,
            };
            let mut rec = RoundRecord::new(round);
            let attempt = self.round(spec, backend, &ctx, &mut selection, &mut rec, &mut result);
            rec.wall_time_s = started.elapsed().as_secs_f64();
            let mut abort = None;
            match attempt {
                Ok(()) => {}
                Err(f) => {
                    match f.phase {
                        Phase::Selection => selection = None,
                        Phase::Pipeline => {
                            pipeline_failures += 1;
                            if pipeline_failures >= RESELECT_AFTER {
                                selection = None;
                                pipeline_failures = 0;
                            }
                        }
                    }
                    rec.error = Some(f.error);
                    abort = f.abort;
                }
            }
            rec.diagnostic = diagnostic_summary(&rec);
            let success = rec.error.is_none();
            result.records.push(rec);
            result.rounds_used = round;
            if success {
                result.success = true;
                break;
            }
            if let Some(e) = abort {
                result.aborted = Some(e);
                break;
            }
        }
        result
    }

    #[allow(clippy::too_many_arguments)]
    fn round(
        &self,
        spec: &ScenarioSpec,
        backend: &dyn ChatBackend,
        ctx: &PromptContext<'_>,
        selection: &mut Option<StrategySelection>,
        rec: &mut RoundRecord,
        result: &mut EpisodeResult,
    ) -> Result<(), Failure> {
        let catalog = &self.catalog;
        let history = result.records.clone();
        let history = &history[..];
        let sel = match selection.clone() {
            Some(s) => s,
            None => {
                let upfront = (self.config.docs_mode == DocsMode::Upfront).then(|| {
                    retrieve_api_docs(
                        &StrategySelection::new(Vec::new(), ""),
                        catalog,
                        DocsMode::Upfront,
                    )
                });
                let prompt = build_selection_prompt(
                    &self.templates,
                    ctx,
                    catalog,
                    history,
                    upfront.as_ref(),
                );
                let text = self
                    .ask(backend, prompt)
                    .map_err(|e| backend_failure(Phase::Selection, "selection", e))?;
                let s = parse_selection(&text, catalog).map_err(|m| Failure {
                    phase: Phase::Selection,
                    error: RoundError::new(ErrorKind::Parse, format!("selection response: {m}")),
                    abort: None,
                })?;
                *selection = Some(s.clone());
                s
            }
        };
        rec.selection = Some(sel.clone());

        let docs = retrieve_api_docs(&sel, catalog, self.config.docs_mode);
        let prompt = build_pipeline_prompt(&self.templates, ctx, &sel, &docs, history);
        let text = self
            .ask(backend, prompt)
            .map_err(|e| backend_failure(Phase::Pipeline, "pipeline", e))?;
        let pipeline_err = |error: RoundError| Failure {
            phase: Phase::Pipeline,
            error,
            abort: None,
        };
        let config = parse_pipeline(&text, catalog).map_err(|m| {
            pipeline_err(RoundError::new(
                ErrorKind::Parse,
                format!("pipeline response: {m}"),
            ))
        })?;
        rec.config = Some(config.clone());

        if let Err(violations) = validate_pipeline(&config, spec, catalog) {
            let mut e = RoundError::new(ErrorKind::Validation, violations.join("; "));
            e.violations = violations;
            return Err(pipeline_err(e));
        }

        let out = execute_pipeline(&config, spec, catalog, self.config.timeout_s).map_err(|e| {
            pipeline_err(match e {
                ExecError::Timeout { stage } => {
                    let mut r = RoundError::new(
                        ErrorKind::Timeout,
                        format!(
                            "the pipeline exceeded its time limit of {} s",
                            self.config.timeout_s
                        ),
                    );
                    r.stage = stage;
                    r
                }
                ExecError::Stage { stage, message } => {
                    let mut r = RoundError::new(ErrorKind::TaskFailure, message);
                    r.stage = Some(stage);
                    r
                }
            })
        })?;
        result.trajectory = Some(out.trajectory.clone());
        result.controls = out.controls.clone();
        result.paths = out.paths;

        let final_stage = config
            .stage(&config.final_output)
            .map(|(i, s)| format!("stage {} ({})", i + 1, s.api));
        let outcome = check_outcome(spec, &out.trajectory, &out.controls).map_err(|e| {
            let mut r = RoundError::new(
                ErrorKind::TaskFailure,
                format!("the final trajectory is unusable: {e}"),
            );
            r.stage = final_stage.clone();
            pipeline_err(r)
        })?;
        rec.outcome = Some(outcome.clone());
        result.outcome = Some(outcome.clone());
        if !outcome.success {
            let mut r = RoundError::new(
                ErrorKind::TaskFailure,
                format!(
                    "the executed trajectory fails the task: {}",
                    outcome_phrase(spec.kind, &outcome)
                ),
            );
            r.stage = final_stage;
            return Err(pipeline_err(r));
        }
        Ok(())
    }
}

/// Runs one episode with the standard catalog and templates.
pub fn run_episode(
    spec: &ScenarioSpec,
    backend: &dyn ChatBackend,
    max_rounds: usize,
    timeout_s: f64,
) -> EpisodeResult {
    Orchestrator::new(EpisodeConfig {
        max_rounds,
        timeout_s,
        ..EpisodeConfig::default()
    })
    .run_episode(spec, backend)
}
