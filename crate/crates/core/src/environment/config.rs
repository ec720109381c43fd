//! TOML form of [`ScenarioSpec`].
//!
//! ```toml
//! schema_version = 1
//! kind = "simple_plan"
//! seed = 7
//! horizon = 80
//! dt = 0.1
//! integrator = "Euler"
//! x0 = [1.0, 2.0]
//! workspace = { min = [0.0, 0.0], max = [10.0, 10.0] }
//! model = { kind = "SingleIntegrator2D", params = {}, control_bounds = [{ lo = -3.0, hi = 3.0 }, { lo = -3.0, hi = 3.0 }] }
//! goal = { center = [8.0, 8.0], radius = 0.5 }
//! obstacles = [{ shape = "circle", center = [5.0, 5.0], radius = 1.0 }]
//! ```
//!
//! Optional keys: `reference` (array of state arrays), `stl_formula` (prefix
//! syntax), `stl_regions` (array of `{ name, rect }`), `maze`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::{Disc, Obstacle, Rect};
use super::{MazeLayout, NamedRegion, ScenarioKind, ScenarioSpec};
use crate::dynamics::{DynamicsModel, Integrator, Trajectory};
use crate::stl::parse_formula;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    schema_version: u32,
    kind: ScenarioKind,
    seed: u64,
    horizon: usize,
    dt: f64,
    integrator: Integrator,
    x0: Vec<f64>,
    workspace: Rect,
    model: DynamicsModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    goal: Option<Disc>,
    #[serde(default)]
    obstacles: Vec<Obstacle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stl_formula: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    stl_regions: Vec<NamedRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    maze: Option<MazeLayout>,
}

impl ScenarioSpec {
    pub fn to_toml(&self) -> Result<String, ConfigError> {
        let file = ScenarioFile {
            schema_version: SCHEMA_VERSION,
            kind: self.kind,
            seed: self.seed,
            horizon: self.horizon,
            dt: self.dt,
            integrator: self.integrator,
            x0: self.x0.iter().copied().collect(),
            workspace: self.workspace,
            model: self.model.clone(),
            goal: self.goal,
            obstacles: self.obstacles.clone(),
            reference: self.reference.as_ref().map(|r| {
                r.states
                    .iter()
                    .map(|s| s.iter().copied().collect())
                    .collect()
            }),
            stl_formula: self.stl_formula.as_ref().map(|f| f.to_string()),
            stl_regions: self.stl_regions.clone(),
            maze: self.maze.clone(),
        };
        Ok(toml::to_string(&file)?)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let f: ScenarioFile = toml::from_str(text)?;
        if f.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion(f.schema_version));
        }
        f.model
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let n = f.model.state_dim();
        if f.x0.len() != n {
            return Err(ConfigError::Invalid(format!(
                "x0 has {} components, model needs {n}",
                f.x0.len()
            )));
        }
        if !(f.dt > 0.0) || f.horizon == 0 {
            return Err(ConfigError::Invalid(
                "dt and horizon must be positive".into(),
            ));
        }
        if let Some(o) = f.obstacles.iter().find(|o| !o.is_valid()) {
            return Err(ConfigError::Invalid(format!("degenerate obstacle {o:?}")));
        }
        let reference = match f.reference {
            Some(rows) => {
                if let Some(bad) = rows.iter().position(|r| r.len() != n) {
                    return Err(ConfigError::Invalid(format!(
                        "reference row {bad} does not have {n} components"
                    )));
                }
                Some(Trajectory::new(
                    f.dt,
                    rows.into_iter().map(DVector::from_vec).collect(),
                ))
            }
            None => None,
        };
        let stl_formula = match f.stl_formula {
            Some(s) => Some(parse_formula(&s).map_err(|e| ConfigError::Invalid(e.to_string()))?),
            None => None,
        };
        Ok(ScenarioSpec {
            kind: f.kind,
            seed: f.seed,
            workspace: f.workspace,
            model: f.model,
            integrator: f.integrator,
            x0: DVector::from_vec(f.x0),
            goal: f.goal,
            obstacles: f.obstacles,
            reference,
            horizon: f.horizon,
            dt: f.dt,
            stl_regions: f.stl_regions,
            stl_formula,
            maze: f.maze,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::generate_scenario;

    #[test]
    fn round_trip_every_kind() {
        for kind in ScenarioKind::ALL {
            for seed in 0..5 {
                let spec = generate_scenario(kind, seed);
                let text = spec.to_toml().unwrap();
                assert!(text.contains("schema_version = 1"));
                let back = ScenarioSpec::from_toml(&text).unwrap();
                assert_eq!(back, spec, "{kind} {seed}");
            }
        }
    }

    #[test]
    fn rejects_wrong_version_and_dims() {
        let spec = generate_scenario(ScenarioKind::SimplePlan, 1);
        let text = spec.to_toml().unwrap();
        let bumped = text.replace("schema_version = 1", "schema_version = 9");
        assert!(matches!(
            ScenarioSpec::from_toml(&bumped),
            Err(ConfigError::SchemaVersion(9))
        ));
        let mut short = spec.clone();
        short.x0 = DVector::from_vec(vec![1.0]);
        let text = short.to_toml().unwrap();
        assert!(matches!(
            ScenarioSpec::from_toml(&text),
            Err(ConfigError::Invalid(_))
        ));
    }
}
