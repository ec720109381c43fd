//! Prompt templates with `{{name}}` placeholders and the builders that fill
//! them.

use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{ApiCatalog, ApiId};
use crate::episode::RoundRecord;
use crate::pipeline::SCENARIO_FIELDS;
use crate::selection::StrategySelection;

/// Most recent diagnostics carried into a prompt.
pub const HISTORY_CAP: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplates {
    pub system: String,
    pub selection: String,
    pub pipeline: String,
    pub prediction: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            system: include_str!("../templates/system.txt").to_string(),
            selection: include_str!("../templates/selection.txt").to_string(),
            pipeline: include_str!("../templates/pipeline.txt").to_string(),
            prediction: include_str!("../templates/prediction.txt").to_string(),
        }
    }
}

impl PromptTemplates {
    /// Loads `system.txt`, `selection.txt`, `pipeline.txt` and
    /// `prediction.txt` from `dir`, keeping the built-in text for missing
    /// files.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let mut t = Self::default();
        for (name, slot) in [
            ("system.txt", &mut t.system),
            ("selection.txt", &mut t.selection),
            ("pipeline.txt", &mut t.pipeline),
            ("prediction.txt", &mut t.prediction),
        ] {
            let p = dir.join(name);
            if p.exists() {
                *slot = std::fs::read_to_string(&p)?;
            }
        }
        Ok(t)
    }
}

/// Replaces every `{{key}}` with its value.
pub fn render(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in values {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DocsMode {
    /// Documentation of the selected APIs only, after selection.
    #[default]
    OnDemand,
    /// Documentation of every API, already in the selection prompt.
    Upfront,
}

impl std::str::FromStr for DocsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "on_demand" => Ok(DocsMode::OnDemand),
            "upfront" => Ok(DocsMode::Upfront),
            _ => Err(format!(
                "unknown docs mode `{s}` (expected on-demand or upfront)"
            )),
        }
    }
}

impl std::fmt::Display for DocsMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DocsMode::OnDemand => "on-demand",
            DocsMode::Upfront => "upfront",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DocsBundle {
    pub entries: Vec<(ApiId, String)>,
}

impl DocsBundle {
    pub fn text(&self) -> String {
        self.entries
            .iter()
            .map(|(_, d)| d.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

pub fn retrieve_api_docs(
    selection: &StrategySelection,
    catalog: &ApiCatalog,
    mode: DocsMode,
) -> DocsBundle {
    let ids: Vec<ApiId> = match mode {
        DocsMode::OnDemand => selection.apis.clone(),
        DocsMode::Upfront => ApiId::ALL.to_vec(),
    };
    DocsBundle {
        entries: ids
            .into_iter()
            .map(|id| (id, catalog.get(id).docs()))
            .collect(),
    }
}

/// Task, environment and round position shared by every prompt.
#[derive(Clone, Copy, Debug)]
pub struct PromptContext<'a> {
    pub task: &'a str,
    pub env_summary: &'a str,
    pub round: usize,
    pub max_rounds: usize,
}

/// Feedback section listing the most recent failed rounds.
pub fn history_section(history: &[RoundRecord]) -> String {
    let failed: Vec<&RoundRecord> = history.iter().filter(|r| r.error.is_some()).collect();
    if failed.is_empty() {
        return String::new();
    }
    let mut out = String::from("\n## Feedback from previous rounds\n");
    for r in &failed[failed.len().saturating_sub(HISTORY_CAP)..] {
        let _ = writeln!(out, "- Round {}: {}", r.round, r.diagnostic);
    }
    out.push_str("Fix these problems in your new answer.\n");
    out
}

pub fn build_selection_prompt(
    templates: &PromptTemplates,
    ctx: &PromptContext<'_>,
    catalog: &ApiCatalog,
    history: &[RoundRecord],
    upfront_docs: Option<&DocsBundle>,
) -> String {
    let docs = upfront_docs
        .map(|d| format!("\n## API documentation\n{}", d.text()))
        .unwrap_or_default();
    render(
        &templates.selection,
        &[
            ("round", &ctx.round.to_string()),
            ("max_rounds", &ctx.max_rounds.to_string()),
            ("env_summary", ctx.env_summary),
            ("task", ctx.task),
            ("catalog", &catalog.descriptions()),
            ("docs", &docs),
            ("history", &history_section(history)),
        ],
    )
}

pub fn build_pipeline_prompt(
    templates: &PromptTemplates,
    ctx: &PromptContext<'_>,
    selection: &StrategySelection,
    docs: &DocsBundle,
    history: &[RoundRecord],
) -> String {
    let mut sel = selection.ids();
    if !selection.rationale.is_empty() {
        let _ = write!(sel, " ({})", selection.rationale);
    }
    render(
        &templates.pipeline,
        &[
            ("round", &ctx.round.to_string()),
            ("max_rounds", &ctx.max_rounds.to_string()),
            ("env_summary", ctx.env_summary),
            ("task", ctx.task),
            ("selection", &sel),
            ("docs", &docs.text()),
            ("scenario_fields", &SCENARIO_FIELDS.join(", ")),
            ("history", &history_section(history)),
        ],
    )
}

pub fn build_prediction_prompt(
    templates: &PromptTemplates,
    ctx: &PromptContext<'_>,
    dims: (usize, usize),
    horizon: usize,
    history: &[RoundRecord],
) -> String {
    render(
        &templates.prediction,
        &[
            ("round", &ctx.round.to_string()),
            ("max_rounds", &ctx.max_rounds.to_string()),
            ("env_summary", ctx.env_summary),
            ("task", ctx.task),
            ("state_dim", &dims.0.to_string()),
            ("control_dim", &dims.1.to_string()),
            ("horizon", &horizon.to_string()),
            ("state_rows", &(horizon + 1).to_string()),
            ("history", &history_section(history)),
        ],
    )
}
