//! Rule-based backend: reads the scenario marker out of the prompt and
//! answers with the known-good selection and pipeline for that kind.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use ctrlsel_core::environment::generate_scenario;
use ctrlsel_core::{ScenarioKind, ScenarioSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::backend::{BackendError, ChatBackend, ChatOptions, Message};
use crate::catalog::ApiId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Request {
    Selection,
    Pipeline,
    Prediction,
}

/// Markers the templates embed in every user prompt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptMarkers {
    pub request: Request,
    pub kind: ScenarioKind,
    pub seed: u64,
    pub scenario_id: String,
    pub round: usize,
}

fn after<'a>(text: &'a str, prefix: &str) -> Option<&'a str> {
    text.lines()
        .find_map(|l| l.trim().strip_prefix(prefix))
        .map(str::trim)
}

pub fn parse_markers(prompt: &str) -> Result<PromptMarkers, String> {
    let request = match after(prompt, "[request:").map(|s| s.trim_end_matches(']').trim()) {
        Some("selection") => Request::Selection,
        Some("pipeline") => Request::Pipeline,
        Some("prediction") => Request::Prediction,
        Some(other) => return Err(format!("unknown request marker `{other}`")),
        None => return Err("no request marker".into()),
    };
    let kind: ScenarioKind = after(prompt, "[scenario-kind:")
        .ok_or("no scenario-kind marker")?
        .trim_end_matches(']')
        .trim()
        .parse()
        .map_err(|e| format!("bad scenario-kind marker: {e}"))?;
    let scenario_id = after(prompt, "scenario:")
        .and_then(|s| s.split_whitespace().next())
        .ok_or("no scenario id marker")?
        .to_string();
    let seed = scenario_id
        .rsplit_once('_')
        .and_then(|(_, s)| s.parse().ok())
        .ok_or_else(|| format!("scenario id `{scenario_id}` carries no seed"))?;
    let round = after(prompt, "Round ")
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    Ok(PromptMarkers {
        request,
        kind,
        seed,
        scenario_id,
        round,
    })
}

/// Ground-truth API choice per scenario kind. Tracking stages that follow
/// a planner are part of the wiring, not the selection.
pub fn ground_truth_selection(kind: ScenarioKind) -> Vec<ApiId> {
    match kind {
        ScenarioKind::TrackLinear | ScenarioKind::TrackDubins => vec![ApiId::Mpc],
        ScenarioKind::SimplePlan => vec![ApiId::Rrt],
        ScenarioKind::MazePlan => vec![ApiId::Astar, ApiId::Rrt],
        ScenarioKind::StlTask => vec![ApiId::Milp],
    }
}

fn pid_stage(path: &str) -> Value {
    json!({
        "api": "pid",
        "params": {"kp": 10.0},
        "inputs": {"x0": "scenario.x0", "model": "scenario.model", "reference": format!("as_reference({path})")},
        "output": "traj"
    })
}

/// Known-good pipeline per scenario kind, as JSON in the pipeline grammar.
/// `round` varies the planner seeds so a retried round is a fresh draw.
pub fn ground_truth_pipeline(kind: ScenarioKind, round: usize) -> Value {
    let planning_inputs =
        json!({"start": "scenario.x0", "goal": "scenario.goal", "obstacles": "scenario.obstacles"});
    let rrt_seed = round as u64;
    let stages = match kind {
        ScenarioKind::TrackLinear | ScenarioKind::TrackDubins => vec![json!({
            "api": "mpc",
            "params": {},
            "inputs": {"x0": "scenario.x0", "model": "scenario.model", "reference": "scenario.reference"},
            "output": "traj"
        })],
        ScenarioKind::SimplePlan => vec![
            json!({
                "api": "rrt",
                "params": {"clearance": 0.2, "seed": rrt_seed},
                "inputs": planning_inputs,
                "output": "path"
            }),
            pid_stage("path"),
        ],
        ScenarioKind::MazePlan => {
            let mut rrt_inputs = planning_inputs.clone();
            rrt_inputs["route"] = json!("route");
            vec![
                json!({
                    "api": "astar",
                    "params": {},
                    "inputs": planning_inputs,
                    "output": "route"
                }),
                json!({
                    "api": "rrt",
                    "params": {"clearance": 0.15, "seed": rrt_seed},
                    "inputs": rrt_inputs,
                    "output": "path"
                }),
                pid_stage("path"),
            ]
        }
        ScenarioKind::StlTask => vec![json!({
            "api": "milp",
            "params": {},
            "inputs": {"x0": "scenario.x0", "model": "scenario.model", "stl_formula": "scenario.stl_formula"},
            "output": "traj"
        })],
    };
    json!({"schema_version": 1, "stages": stages, "final_output": "traj"})
}

fn fenced(v: &Value) -> String {
    format!(
        "```json\n{}\n```",
        serde_json::to_string_pretty(v).expect("json serializes")
    )
}

/// Table answer for the direct-prediction baseline: the reference itself
/// for tracking, a straight line to the goal for planning, and a
/// standstill otherwise.
pub fn prediction_answer(spec: &ScenarioSpec) -> String {
    let n = spec.model.state_dim();
    let h = spec.horizon;
    let row = |k: usize| -> Vec<f64> {
        if k == 0 {
            return spec.x0.iter().copied().collect();
        }
        if let Some(r) = &spec.reference {
            return r.sample_held(k).iter().copied().collect();
        }
        let mut x: Vec<f64> = spec.x0.iter().copied().collect();
        if let Some(goal) = &spec.goal {
            let s = k as f64 / h as f64;
            x[0] += s * (goal.center[0] - x[0]);
            x[1] += s * (goal.center[1] - x[1]);
        }
        x
    };
    let mut out = String::from("```\nstates\n");
    for k in 0..=h {
        let r = row(k);
        let cells: Vec<String> = r.iter().take(n).map(|v| format!("{v:.6}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out.push_str("```");
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Fault {
    NoFence,
    Truncated,
    UnknownId,
    BadParam,
}

/// Deterministic rule-based backend with seeded per-round fault injection.
#[derive(Clone, Debug)]
pub struct RuleBasedBackend {
    fault_p: f64,
    seed: u64,
}

impl Default for RuleBasedBackend {
    fn default() -> Self {
        Self::new(0.0, 0)
    }
}

impl RuleBasedBackend {
    /// `fault_p` is the probability that a round's responses are malformed.
    pub fn new(fault_p: f64, seed: u64) -> Self {
        Self {
            fault_p: fault_p.clamp(0.0, 1.0),
            seed,
        }
    }

    pub fn fault_p(&self) -> f64 {
        self.fault_p
    }

    fn fault(&self, m: &PromptMarkers) -> Option<Fault> {
        if self.fault_p <= 0.0 {
            return None;
        }
        let mut h = DefaultHasher::new();
        (self.seed, &m.scenario_id, m.round).hash(&mut h);
        let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
        if !rng.random_bool(self.fault_p) {
            return None;
        }
        Some(match rng.random_range(0..4) {
            0 => Fault::NoFence,
            1 => Fault::Truncated,
            2 => Fault::UnknownId,
            _ => Fault::BadParam,
        })
    }

    fn answer(&self, m: &PromptMarkers) -> String {
        let fault = self.fault(m);
        let selection = json!({
            "apis": ground_truth_selection(m.kind).iter().map(|a| a.name()).collect::<Vec<_>>(),
            "rationale": format!("standard choice for {}", m.kind)
        });
        let mut body = match m.request {
            Request::Selection => selection,
            Request::Pipeline => ground_truth_pipeline(m.kind, m.round),
            Request::Prediction => {
                let spec = generate_scenario(m.kind, m.seed);
                let text = prediction_answer(&spec);
                return match fault {
                    None => text,
                    Some(Fault::Truncated) => text.trim_end_matches('`').to_string(),
                    Some(_) => text.replace("```\nstates", "```\nstates\nnan"),
                };
            }
        };
        match fault {
            None => fenced(&body),
            Some(Fault::NoFence) => {
                "I would combine a planner with a tracking controller.".to_string()
            }
            Some(Fault::Truncated) => {
                let text = fenced(&body);
                text[..text.len() / 2].to_string()
            }
            Some(Fault::BadParam) if m.request == Request::Pipeline => {
                body["stages"][0]["params"]["seed"] = json!(-1);
                fenced(&body)
            }
            Some(_) => {
                if m.request == Request::Selection {
                    body["apis"] = json!(["warp_drive"]);
                } else {
                    body["stages"][0]["api"] = json!("warp_drive");
                }
                fenced(&body)
            }
        }
    }
}

impl ChatBackend for RuleBasedBackend {
    fn complete(
        &self,
        messages: &[Message],
        _options: &ChatOptions,
    ) -> Result<String, BackendError> {
        let prompt = messages
            .iter()
            .rev()
            .find(|m| m.role == crate::backend::Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let markers = parse_markers(prompt)
            .map_err(|e| BackendError::bad_response(format!("unknown scenario: {e}")))?;
        Ok(self.answer(&markers))
    }
}

pub fn rule_based_backend(fault_p: f64, seed: u64) -> RuleBasedBackend {
    RuleBasedBackend::new(fault_p, seed)
}
