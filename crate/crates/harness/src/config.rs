use std::path::PathBuf;

use ctrlsel_agent::backend::{ChatOptions, DEFAULT_TEMPERATURE};
use ctrlsel_agent::episode::{EpisodeConfig, DEFAULT_MAX_ROUNDS, DEFAULT_TIMEOUT_S};
use ctrlsel_agent::DocsMode;
use ctrlsel_core::ScenarioKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_EXPERIMENTS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("experiments per kind must be at least 1")]
    NoExperiments,
    #[error("no scenario kinds selected")]
    NoKinds,
    #[error("max_rounds must be at least 1")]
    NoRounds,
    #[error("parallelism must be at least 1")]
    NoWorkers,
    #[error("temperature {0} is outside [0, 2]")]
    Temperature(f64),
    #[error("fault probability {0} is outside [0, 1]")]
    FaultProbability(f64),
    #[error("timeout_s must be positive, got {0}")]
    Timeout(f64),
    #[error("the ablation spec declares no settings")]
    EmptyAblation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BackendSpec {
    /// Chat-completions endpoint; credentials come from the environment.
    Http {
        endpoint: Option<String>,
    },
    /// JSON array of responses, replayed from the start for every episode.
    Scripted {
        path: PathBuf,
    },
    RuleBased {
        fault_p: f64,
        seed: u64,
    },
}

impl BackendSpec {
    pub fn label(&self) -> String {
        match self {
            BackendSpec::Http { .. } => "http".into(),
            BackendSpec::Scripted { path } => format!("scripted:{}", path.display()),
            BackendSpec::RuleBased { fault_p, seed } => {
                format!("rule_based(p={fault_p}, seed={seed})")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Select, wire and execute catalog APIs.
    #[default]
    Pipeline,
    /// The model predicts the trajectory or controls directly.
    Predict,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pipeline" => Ok(Mode::Pipeline),
            "predict" => Ok(Mode::Predict),
            _ => Err(format!("unknown mode `{s}` (expected pipeline or predict)")),
        }
    }
}

/// Settings swept by an ablation. An empty list keeps the batch's own value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub temperatures: Vec<f64>,
    pub models: Vec<String>,
    pub docs_modes: Vec<DocsMode>,
}

impl AblationSpec {
    pub fn is_empty(&self) -> bool {
        self.temperatures.is_empty() && self.models.is_empty() && self.docs_modes.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchConfig {
    pub kinds: Vec<ScenarioKind>,
    pub experiments: usize,
    pub seed_base: u64,
    pub max_rounds: usize,
    pub backend: BackendSpec,
    pub timeout_s: f64,
    pub temperature: f64,
    pub model: String,
    pub docs_mode: DocsMode,
    pub mode: Mode,
    pub ablation: AblationSpec,
    pub out_dir: Option<PathBuf>,
    pub parallelism: usize,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            kinds: ScenarioKind::ALL.to_vec(),
            experiments: DEFAULT_EXPERIMENTS,
            seed_base: 0,
            max_rounds: DEFAULT_MAX_ROUNDS,
            backend: BackendSpec::RuleBased {
                fault_p: 0.0,
                seed: 0,
            },
            timeout_s: DEFAULT_TIMEOUT_S,
            temperature: DEFAULT_TEMPERATURE,
            model: ChatOptions::default().model,
            docs_mode: DocsMode::OnDemand,
            mode: Mode::Pipeline,
            ablation: AblationSpec::default(),
            out_dir: None,
            parallelism: 1,
        }
    }
}

impl BatchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.experiments == 0 {
            return Err(ConfigError::NoExperiments);
        }
        if self.kinds.is_empty() {
            return Err(ConfigError::NoKinds);
        }
        if self.max_rounds == 0 {
            return Err(ConfigError::NoRounds);
        }
        if self.parallelism == 0 {
            return Err(ConfigError::NoWorkers);
        }
        if !(self.timeout_s > 0.0) {
            return Err(ConfigError::Timeout(self.timeout_s));
        }
        for &t in std::iter::once(&self.temperature).chain(&self.ablation.temperatures) {
            if !(0.0..=2.0).contains(&t) {
                return Err(ConfigError::Temperature(t));
            }
        }
        if let BackendSpec::RuleBased { fault_p, .. } = self.backend {
            if !(0.0..=1.0).contains(&fault_p) {
                return Err(ConfigError::FaultProbability(fault_p));
            }
        }
        Ok(())
    }

    pub fn episode_config(&self) -> EpisodeConfig {
        EpisodeConfig {
            max_rounds: self.max_rounds,
            timeout_s: self.timeout_s,
            docs_mode: self.docs_mode,
            chat: ChatOptions {
                model: self.model.clone(),
                temperature: self.temperature,
                ..ChatOptions::default()
            },
        }
    }
}
