//! Direct-prediction baseline: the model writes the state or control
//! sequence itself, with the same round budget and diagnostics as the
//! pipeline loop.

use std::time::Instant;

use ctrlsel_core::environment::{check_outcome, environment_summary, render_task_description};
use ctrlsel_core::{Control, ScenarioSpec, State, Trajectory};

use crate::backend::{BackendErrorKind, ChatBackend};
use crate::episode::{
    diagnostic_summary, outcome_phrase, EpisodeResult, ErrorKind, Orchestrator, RoundError,
    RoundRecord,
};
use crate::prompts::{build_prediction_prompt, PromptContext};
use crate::selection::last_fenced_block;

/// Tolerance on the first predicted state against `x0`.
pub const X0_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub enum Prediction {
    States(Vec<Vec<f64>>),
    Controls(Vec<Vec<f64>>),
}

/// Reads the last fenced table. Only syntax is checked here.
pub fn parse_prediction(response: &str) -> Result<Prediction, String> {
    let body = last_fenced_block(response)?;
    let mut lines = body.lines().map(str::trim).filter(|l| !l.is_empty());
    let head = lines.next().ok_or("prediction block is empty")?;
    let rows = lines
        .enumerate()
        .map(|(i, l)| {
            l.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| format!("row {} has the non-numeric value `{t}`", i + 1))
                })
                .collect::<Result<Vec<f64>, String>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    match head.to_ascii_lowercase().as_str() {
        "states" => Ok(Prediction::States(rows)),
        "controls" => Ok(Prediction::Controls(rows)),
        other => Err(format!(
            "prediction block must start with `states` or `controls`, got `{other}`"
        )),
    }
}

fn check_widths(rows: &[Vec<f64>], expected_rows: usize, width: usize, what: &str) -> Vec<String> {
    let mut v = Vec::new();
    if rows.len() != expected_rows {
        v.push(format!(
            "{} {what} rows given, expected {expected_rows}",
            rows.len()
        ));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            v.push(format!(
                "{what} row {} has {} values, expected {width}",
                i + 1,
                r.len()
            ));
        }
    }
    v
}

/// Turns a parsed table into a trajectory, or lists why it cannot be used.
pub fn prediction_trajectory(
    prediction: &Prediction,
    spec: &ScenarioSpec,
) -> Result<(Trajectory, Vec<Control>), Vec<String>> {
    let n = spec.model.state_dim();
    let m = spec.model.control_dim();
    match prediction {
        Prediction::States(rows) => {
            let mut v = check_widths(rows, spec.horizon + 1, n, "state");
            if v.is_empty() {
                let err = rows[0]
                    .iter()
                    .zip(spec.x0.iter())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if err > X0_TOLERANCE {
                    v.push(format!("the first state differs from x0 by {err:.3}"));
                }
            }
            if !v.is_empty() {
                return Err(v);
            }
            let states = rows.iter().map(|r| State::from_column_slice(r)).collect();
            Ok((Trajectory::new(spec.dt, states), Vec::new()))
        }
        Prediction::Controls(rows) => {
            let v = check_widths(rows, spec.horizon, m, "control");
            if !v.is_empty() {
                return Err(v);
            }
            let controls: Vec<Control> =
                rows.iter().map(|r| Control::from_column_slice(r)).collect();
            let traj = spec
                .model
                .rollout(&spec.x0, &controls, spec.dt, spec.integrator)
                .map_err(|e| vec![format!("the controls cannot be rolled out: {e}")])?;
            Ok((traj, controls))
        }
    }
}

impl Orchestrator {
    pub fn run_baseline_episode(
        &self,
        spec: &ScenarioSpec,
        backend: &dyn ChatBackend,
    ) -> EpisodeResult {
        let task = render_task_description(spec);
        let env = environment_summary(spec);
        let max_rounds = self.config.max_rounds.max(1);
        let dims = (spec.model.state_dim(), spec.model.control_dim());
        let mut result = EpisodeResult::new(spec);

        for round in 1..=max_rounds {
            let started = Instant::now();
            let ctx = PromptContext {
                task: &task,
                env_summary: &env,
                round,
                max_rounds,
            };
            let mut rec = RoundRecord::new(round);
            let prompt =
                build_prediction_prompt(&self.templates, &ctx, dims, spec.horizon, &result.records);
            let mut abort = None;
            let error = match self.ask(backend, prompt) {
                Err(e) => {
                    let kind = if e.kind == BackendErrorKind::Timeout {
                        ErrorKind::Timeout
                    } else {
                        ErrorKind::Parse
                    };
                    if !matches!(
                        e.kind,
                        BackendErrorKind::Timeout | BackendErrorKind::BadResponse
                    ) {
                        abort = Some(e.clone());
                    }
                    Some(RoundError::new(
                        kind,
                        format!("the prediction request failed: {e}"),
                    ))
                }
                Ok(text) => self.judge_prediction(spec, &text, &mut rec, &mut result),
            };
            rec.error = error;
            rec.wall_time_s = started.elapsed().as_secs_f64();
            rec.diagnostic = diagnostic_summary(&rec);
            let success = rec.error.is_none();
            result.records.push(rec);
            result.rounds_used = round;
            if success {
                result.success = true;
                break;
            }
            if abort.is_some() {
                result.aborted = abort;
                break;
            }
        }
        result
    }

    fn judge_prediction(
        &self,
        spec: &ScenarioSpec,
        text: &str,
        rec: &mut RoundRecord,
        result: &mut EpisodeResult,
    ) -> Option<RoundError> {
        let prediction = match parse_prediction(text) {
            Ok(p) => p,
            Err(m) => {
                return Some(RoundError::new(
                    ErrorKind::Parse,
                    format!("prediction response: {m}"),
                ))
            }
        };
        let (traj, controls) = match prediction_trajectory(&prediction, spec) {
            Ok(v) => v,
            Err(violations) => {
                let mut e = RoundError::new(ErrorKind::Validation, violations.join("; "));
                e.violations = violations;
                return Some(e);
            }
        };
        let outcome = match check_outcome(spec, &traj, &controls) {
            Ok(o) => o,
            Err(e) => return Some(RoundError::new(ErrorKind::Validation, e.to_string())),
        };
        result.trajectory = Some(traj);
        result.controls = controls;
        rec.outcome = Some(outcome.clone());
        result.outcome = Some(outcome.clone());
        (!outcome.success).then(|| {
            RoundError::new(
                ErrorKind::TaskFailure,
                format!(
                    "the predicted trajectory fails the task: {}",
                    outcome_phrase(spec.kind, &outcome)
                ),
            )
        })
    }
}

/// Runs one baseline episode with the standard templates.
pub fn predict_baseline_episode(
    spec: &ScenarioSpec,
    backend: &dyn ChatBackend,
    max_rounds: usize,
) -> EpisodeResult {
    let mut o = Orchestrator::default();
    o.config.max_rounds = max_rounds;
    o.run_baseline_episode(spec, backend)
}
