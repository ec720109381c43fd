//! Declarative execution pipelines: ordered API stages with typed data-flow
//! bindings, emitted by the model as a fenced JSON block.
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "stages": [
//!     {"api": "rrt", "params": {"max_iters": 3000},
//!      "inputs": {"start": "scenario.x0", "goal": "scenario.goal", "obstacles": "scenario.obstacles"},
//!      "output": "path"},
//!     {"api": "pid", "params": {"kp": 10.0},
//!      "inputs": {"x0": "scenario.x0", "model": "scenario.model", "reference": "as_reference(path)"},
//!      "output": "traj"}
//!   ],
//!   "final_output": "traj"
//! }
//! ```
//!
//! A binding is `scenario.<field>`, the output name of an earlier stage, or
//! `as_reference(<name>)`, which time-parameterizes a path output into a
//! reference at the scenario's `dt` and horizon.

mod execute;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::catalog::{ApiCatalog, ApiId};
use crate::selection::last_fenced_block;

pub use execute::{execute_pipeline, ExecError, ExecOutput};
pub use validate::validate_pipeline;

pub const PIPELINE_SCHEMA_VERSION: u32 = 1;

/// Scenario fields a stage input may bind to.
pub const SCENARIO_FIELDS: [&str; 6] = [
    "x0",
    "model",
    "goal",
    "obstacles",
    "reference",
    "stl_formula",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Binding {
    Scenario(String),
    Stage(String),
    AsReference(String),
}

impl Binding {
    pub fn parse(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let ident_ok =
            |n: &str| !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if let Some(field) = s.strip_prefix("scenario.") {
            if !ident_ok(field) {
                return Err(format!("malformed scenario binding `{s}`"));
            }
            return Ok(Binding::Scenario(field.to_string()));
        }
        if let Some(rest) = s.strip_prefix("as_reference(") {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| format!("unclosed as_reference(...) in binding `{s}`"))?
                .trim();
            if !ident_ok(inner) {
                return Err(format!(
                    "as_reference needs a stage output name, got `{inner}`"
                ));
            }
            return Ok(Binding::AsReference(inner.to_string()));
        }
        if !ident_ok(s) {
            return Err(format!(
                "malformed binding `{s}`: use scenario.<field>, <output name> or as_reference(<output name>)"
            ));
        }
        Ok(Binding::Stage(s.to_string()))
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Binding::Scenario(x) => write!(f, "scenario.{x}"),
            Binding::Stage(x) => f.write_str(x),
            Binding::AsReference(x) => write!(f, "as_reference({x})"),
        }
    }
}

impl Serialize for Binding {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Binding {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Binding::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub api: ApiId,
    #[serde(default)]
    pub params: Map<String, Value>,
    pub inputs: BTreeMap<String, Binding>,
    pub output: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub stages: Vec<Stage>,
    pub final_output: String,
}

impl PipelineConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pipeline serializes")
    }

    /// The config as the model is asked to emit it.
    pub fn to_fenced(&self) -> String {
        format!("```json\n{}\n```", self.to_json())
    }

    pub fn stage(&self, output: &str) -> Option<(usize, &Stage)> {
        self.stages
            .iter()
            .enumerate()
            .find(|(_, s)| s.output == output)
    }
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, ctx: &str) -> Result<&'a Value, String> {
    obj.get(key)
        .ok_or_else(|| format!("{ctx} is missing the \"{key}\" field"))
}

fn parse_stage(i: usize, v: &Value, catalog: &ApiCatalog) -> Result<Stage, String> {
    let ctx = format!("stage {}", i + 1);
    let obj = v
        .as_object()
        .ok_or_else(|| format!("{ctx} must be a JSON object"))?;
    let api_name = field(obj, "api", &ctx)?
        .as_str()
        .ok_or_else(|| format!("{ctx}: \"api\" must be a string"))?;
    let api = catalog
        .lookup(api_name)
        .ok_or_else(|| format!("{ctx}: unknown API id `{api_name}`"))?
        .id;
    let params = match obj.get("params") {
        None | Some(Value::Null) => Map::new(),
        Some(Value::Object(m)) => m.clone(),
        Some(_) => return Err(format!("{ctx} ({api}): \"params\" must be an object")),
    };
    let raw_inputs = field(obj, "inputs", &ctx)?
        .as_object()
        .ok_or_else(|| format!("{ctx} ({api}): \"inputs\" must be an object of bindings"))?;
    let mut inputs = BTreeMap::new();
    for (name, b) in raw_inputs {
        let s = b
            .as_str()
            .ok_or_else(|| format!("{ctx} ({api}): binding of input `{name}` must be a string"))?;
        let binding = Binding::parse(s).map_err(|e| format!("{ctx} ({api}): {e}"))?;
        inputs.insert(name.clone(), binding);
    }
    let output = field(obj, "output", &ctx)?
        .as_str()
        .ok_or_else(|| format!("{ctx} ({api}): \"output\" must be a string"))?
        .to_string();
    Ok(Stage {
        api,
        params,
        inputs,
        output,
    })
}

/// Structural parse of the last fenced block. Semantic problems (unresolved
/// bindings, bad parameter values, type mismatches) are left to validation.
pub fn parse_pipeline(response: &str, catalog: &ApiCatalog) -> Result<PipelineConfig, String> {
    let body = last_fenced_block(response)?;
    let v: Value = serde_json::from_str(body.trim())
        .map_err(|e| format!("pipeline block is not valid JSON: {e}"))?;
    let obj = v
        .as_object()
        .ok_or("pipeline block must be a JSON object")?;
    let version = field(obj, "schema_version", "pipeline")?
        .as_u64()
        .ok_or("\"schema_version\" must be a non-negative integer")?;
    if version != PIPELINE_SCHEMA_VERSION as u64 {
        return Err(format!(
            "unsupported pipeline schema_version {version} (expected {PIPELINE_SCHEMA_VERSION})"
        ));
    }
    let stages = field(obj, "stages", "pipeline")?
        .as_array()
        .ok_or("\"stages\" must be a list")?
        .iter()
        .enumerate()
        .map(|(i, s)| parse_stage(i, s, catalog))
        .collect::<Result<Vec<_>, _>>()?;
    let final_output = field(obj, "final_output", "pipeline")?
        .as_str()
        .ok_or("\"final_output\" must be a string")?
        .to_string();
    Ok(PipelineConfig {
        schema_version: PIPELINE_SCHEMA_VERSION,
        stages,
        final_output,
    })
}
