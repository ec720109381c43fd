use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use ctrlsel_agent::backend::ChatBackend;
use ctrlsel_agent::episode::{EpisodeResult, ErrorKind, Orchestrator};
use ctrlsel_agent::http::{HttpBackend, HttpConfig};
use ctrlsel_agent::mock::RuleBasedBackend;
use ctrlsel_agent::scripted::{load_transcript, ScriptedBackend};
use ctrlsel_agent::DocsMode;
use ctrlsel_core::environment::generate_scenario;
use ctrlsel_core::ScenarioKind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{BackendSpec, BatchConfig, ConfigError, Mode};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const AVG_ROUNDS_NOTE: &str =
    "avg_rounds_to_success averages rounds_used over successful episodes only";

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("invalid batch config: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot load the scripted transcript {path}: {source}")]
    Transcript {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot start the worker pool: {0}")]
    Pool(String),
}

/// One line of the per-episode table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub scenario_id: String,
    pub success: bool,
    pub rounds_used: usize,
    pub success_round: Option<usize>,
    pub final_reason: Option<String>,
    pub final_metric: Option<f64>,
    pub parse_errors: usize,
    pub validation_errors: usize,
    pub timeout_errors: usize,
    pub task_failure_errors: usize,
    pub aborted: bool,
    /// Selection of the last round, `+`-joined.
    pub final_apis: String,
}

impl EpisodeRow {
    pub fn from_result(r: &EpisodeResult) -> Self {
        let count = |k: ErrorKind| r.error_kinds().into_iter().filter(|&e| e == k).count();
        Self {
            kind: r.kind,
            seed: r.seed,
            scenario_id: r.scenario_id.clone(),
            success: r.success,
            rounds_used: r.rounds_used,
            success_round: r.success_round(),
            final_reason: r.outcome.as_ref().map(|o| o.reason.name().to_string()),
            final_metric: r.outcome.as_ref().map(|o| o.metric),
            parse_errors: count(ErrorKind::Parse),
            validation_errors: count(ErrorKind::Validation),
            timeout_errors: count(ErrorKind::Timeout),
            task_failure_errors: count(ErrorKind::TaskFailure),
            aborted: r.aborted.is_some(),
            final_apis: r
                .records
                .iter()
                .rev()
                .find_map(|x| x.selection.as_ref())
                .map(|s| {
                    s.apis
                        .iter()
                        .map(|a| a.name())
                        .collect::<Vec<_>>()
                        .join("+")
                })
                .unwrap_or_default(),
        }
    }

    pub fn errors(&self) -> usize {
        self.parse_errors + self.validation_errors + self.timeout_errors + self.task_failure_errors
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub parse: usize,
    pub validation: usize,
    pub timeout: usize,
    pub task_failure: usize,
}

impl ErrorHistogram {
    pub fn total(&self) -> usize {
        self.parse + self.validation + self.timeout + self.task_failure
    }

    pub fn get(&self, kind: ErrorKind) -> usize {
        match kind {
            ErrorKind::Parse => self.parse,
            ErrorKind::Validation => self.validation,
            ErrorKind::Timeout => self.timeout,
            ErrorKind::TaskFailure => self.task_failure,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub kind: ScenarioKind,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub avg_rounds_to_success: Option<f64>,
    /// Fraction of episodes solved within `r` rounds, for `r = 1..=max_rounds`.
    pub cumulative_success: Vec<f64>,
    pub errors: ErrorHistogram,
}

/// Settings of one ablation batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSetting {
    pub temperature: f64,
    pub model: String,
    pub docs_mode: DocsMode,
}

impl AblationSetting {
    pub fn label(&self) -> String {
        format!("t{}_{}_{}", self.temperature, self.model, self.docs_mode)
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                    c
                } else {
                    '_'
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatchReport {
    pub schema_version: u32,
    pub note: String,
    pub backend: String,
    pub mode: Mode,
    pub setting: AblationSetting,
    pub experiments: usize,
    pub seed_base: u64,
    pub max_rounds: usize,
    /// A backend failure stopped the batch before every episode ran.
    pub incomplete: bool,
    pub kinds: Vec<KindSummary>,
    pub rows: Vec<EpisodeRow>,
    #[serde(skip)]
    pub episodes: Vec<EpisodeResult>,
}

impl BatchReport {
    pub fn summary(&self, kind: ScenarioKind) -> Option<&KindSummary> {
        self.kinds.iter().find(|k| k.kind == kind)
    }
}

/// Per-kind aggregates of the episode table, in the order of `kinds`.
pub fn aggregate(
    rows: &[EpisodeRow],
    kinds: &[ScenarioKind],
    max_rounds: usize,
) -> Vec<KindSummary> {
    kinds
        .iter()
        .map(|&kind| {
            let mine: Vec<&EpisodeRow> = rows.iter().filter(|r| r.kind == kind).collect();
            let episodes = mine.len();
            let successes = mine.iter().filter(|r| r.success).count();
            let frac = |n: usize| {
                if episodes == 0 {
                    0.0
                } else {
                    n as f64 / episodes as f64
                }
            };
            let rounds: usize = mine
                .iter()
                .filter(|r| r.success)
                .map(|r| r.rounds_used)
                .sum();
            let cumulative_success = (1..=max_rounds)
                .map(|r| {
                    frac(
                        mine.iter()
                            .filter(|x| x.success_round.is_some_and(|s| s <= r))
                            .count(),
                    )
                })
                .collect();
            let errors = ErrorHistogram {
                parse: mine.iter().map(|r| r.parse_errors).sum(),
                validation: mine.iter().map(|r| r.validation_errors).sum(),
                timeout: mine.iter().map(|r| r.timeout_errors).sum(),
                task_failure: mine.iter().map(|r| r.task_failure_errors).sum(),
            };
            KindSummary {
                kind,
                episodes,
                successes,
                success_rate: frac(successes),
                avg_rounds_to_success: (successes > 0).then(|| rounds as f64 / successes as f64),
                cumulative_success,
                errors,
            }
        })
        .collect()
}

enum Backends {
    Shared(Arc<dyn ChatBackend>),
    Scripted(Vec<String>),
    Mock(RuleBasedBackend),
}

impl Backends {
    fn new(spec: &BackendSpec) -> Result<Self, BatchError> {
        Ok(match spec {
            BackendSpec::Http { endpoint } => {
                let mut c = HttpConfig::from_env();
                if let Some(e) = endpoint {
                    c.endpoint = e.clone();
                }
                Backends::Shared(Arc::new(HttpBackend::new(c)))
            }
            BackendSpec::Scripted { path } => {
                Backends::Scripted(load_transcript(path).map_err(|source| {
                    BatchError::Transcript {
                        path: path.display().to_string(),
                        source,
                    }
                })?)
            }
            BackendSpec::RuleBased { fault_p, seed } => {
                Backends::Mock(RuleBasedBackend::new(*fault_p, *seed))
            }
        })
    }

    /// A fresh session for one episode.
    fn session(&self) -> Box<dyn ChatBackend + '_> {
        match self {
            Backends::Shared(b) => Box::new(b.as_ref()),
            Backends::Scripted(t) => Box::new(ScriptedBackend::new(t.clone())),
            Backends::Mock(m) => Box::new(m),
        }
    }
}

pub fn run_batch(config: &BatchConfig) -> Result<BatchReport, BatchError> {
    config.validate()?;
    let backends = Backends::new(&config.backend)?;
    let orchestrator = Orchestrator::new(config.episode_config());
    let jobs: Vec<(usize, ScenarioKind, u64)> = config
        .kinds
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| {
            (0..config.experiments as u64).map(move |s| (i, k, config.seed_base + s))
        })
        .collect();
    let stop = AtomicBool::new(false);
    let run_one = |&(i, kind, seed): &(usize, ScenarioKind, u64)| {
        if stop.load(Ordering::SeqCst) {
            return None;
        }
        let spec = generate_scenario(kind, seed);
        let session = backends.session();
        let result = match config.mode {
            Mode::Pipeline => orchestrator.run_episode(&spec, session.as_ref()),
            Mode::Predict => orchestrator.run_baseline_episode(&spec, session.as_ref()),
        };
        if result.aborted.is_some() {
            stop.store(true, Ordering::SeqCst);
        }
        Some((i, result))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| BatchError::Pool(e.to_string()))?;
    let mut done: Vec<(usize, EpisodeResult)> = pool
        .install(|| jobs.par_iter().map(run_one).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect();
    done.sort_by_key(|(i, r)| (*i, r.seed));
    let incomplete = done.len() < jobs.len() || done.iter().any(|(_, r)| r.aborted.is_some());
    let episodes: Vec<EpisodeResult> = done.into_iter().map(|(_, r)| r).collect();
    let rows: Vec<EpisodeRow> = episodes.iter().map(EpisodeRow::from_result).collect();
    Ok(BatchReport {
        schema_version: REPORT_SCHEMA_VERSION,
        note: AVG_ROUNDS_NOTE.to_string(),
        backend: config.backend.label(),
        mode: config.mode,
        setting: AblationSetting {
            temperature: config.temperature,
            model: config.model.clone(),
            docs_mode: config.docs_mode,
        },
        experiments: config.experiments,
        seed_base: config.seed_base,
        max_rounds: config.max_rounds,
        incomplete,
        kinds: aggregate(&rows, &config.kinds, config.max_rounds),
        rows,
        episodes,
    })
}

/// Cartesian sweep over the declared settings, one batch per setting.
pub fn run_ablation(
    config: &BatchConfig,
) -> Result<Vec<(AblationSetting, BatchReport)>, BatchError> {
    let spec = &config.ablation;
    if spec.is_empty() {
        return Err(ConfigError::EmptyAblation.into());
    }
    config.validate()?;
    let or = |v: &[f64], d: f64| if v.is_empty() { vec![d] } else { v.to_vec() };
    let temperatures = or(&spec.temperatures, config.temperature);
    let models = if spec.models.is_empty() {
        vec![config.model.clone()]
    } else {
        spec.models.clone()
    };
    let docs = if spec.docs_modes.is_empty() {
        vec![config.docs_mode]
    } else {
        spec.docs_modes.clone()
    };
    let mut out = Vec::new();
    for &temperature in &temperatures {
        for model in &models {
            for &docs_mode in &docs {
                let c = BatchConfig {
                    temperature,
                    model: model.clone(),
                    docs_mode,
                    ..config.clone()
                };
                let report = run_batch(&c)?;
                let stop = report.incomplete;
                out.push((report.setting.clone(), report));
                if stop {
                    return Ok(out);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(
        kind: ScenarioKind,
        seed: u64,
        success_round: Option<usize>,
        errors: usize,
    ) -> EpisodeRow {
        EpisodeRow {
            kind,
            seed,
            scenario_id: format!("{kind}_{seed}"),
            success: success_round.is_some(),
            rounds_used: success_round.unwrap_or(6),
            success_round,
            final_reason: None,
            final_metric: None,
            parse_errors: errors,
            validation_errors: 0,
            timeout_errors: 0,
            task_failure_errors: 0,
            aborted: false,
            final_apis: String::new(),
        }
    }

    #[test]
    fn aggregates_by_hand() {
        let k = ScenarioKind::SimplePlan;
        let rows = vec![
            row(k, 0, Some(1), 0),
            row(k, 1, Some(3), 2),
            row(k, 2, None, 6),
            row(k, 3, Some(1), 0),
        ];
        let s = &aggregate(&rows, &[k], 6)[0];
        assert_eq!(s.successes, 3);
        assert_eq!(s.success_rate, 0.75);
        assert_eq!(s.avg_rounds_to_success, Some(5.0 / 3.0));
        assert_eq!(s.cumulative_success, vec![0.5, 0.5, 0.75, 0.75, 0.75, 0.75]);
        assert_eq!(s.errors.total(), 8);
    }

    #[test]
    fn empty_kind_has_no_average() {
        let s = &aggregate(&[], &[ScenarioKind::StlTask], 6)[0];
        assert_eq!(
            (s.episodes, s.success_rate, s.avg_rounds_to_success),
            (0, 0.0, None)
        );
    }

    #[test]
    fn mock_batch_is_perfect() {
        let c = BatchConfig {
            kinds: vec![ScenarioKind::TrackLinear, ScenarioKind::SimplePlan],
            experiments: 20,
            ..BatchConfig::default()
        };
        let r = run_batch(&c).unwrap();
        assert!(!r.incomplete);
        for s in &r.kinds {
            assert_eq!(
                (s.success_rate, s.avg_rounds_to_success),
                (1.0, Some(1.0)),
                "{}",
                s.kind
            );
        }
    }

    #[test]
    fn faulty_batch_fails_every_round() {
        let c = BatchConfig {
            kinds: vec![ScenarioKind::MazePlan],
            experiments: 5,
            backend: BackendSpec::RuleBased {
                fault_p: 1.0,
                seed: 4,
            },
            ..BatchConfig::default()
        };
        let r = run_batch(&c).unwrap();
        assert_eq!(r.kinds[0].success_rate, 0.0);
        assert_eq!(r.kinds[0].errors.total(), 30);
    }

    #[test]
    fn ablation_needs_settings() {
        assert!(matches!(
            run_ablation(&BatchConfig::default()),
            Err(BatchError::Config(ConfigError::EmptyAblation))
        ));
        let mut c = BatchConfig {
            kinds: vec![ScenarioKind::TrackLinear],
            experiments: 2,
            ..BatchConfig::default()
        };
        c.ablation.temperatures = vec![0.1, 0.7, 1.5];
        let out = run_ablation(&c).unwrap();
        let temps: Vec<f64> = out.iter().map(|(s, _)| s.temperature).collect();
        assert_eq!(temps, vec![0.1, 0.7, 1.5]);
        c.ablation.temperatures.clear();
        c.ablation.docs_modes = vec![DocsMode::OnDemand, DocsMode::Upfront];
        let out = run_ablation(&c).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|(_, r)| r.kinds[0].success_rate == 1.0));
    }
}
