//! Fenced-block extraction and strategy selection parsing.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::{ApiCatalog, ApiId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategySelection {
    pub apis: Vec<ApiId>,
    pub rationale: String,
}

impl StrategySelection {
    pub fn new(apis: Vec<ApiId>, rationale: impl Into<String>) -> Self {
        Self {
            apis,
            rationale: rationale.into(),
        }
    }

    pub fn ids(&self) -> String {
        self.apis
            .iter()
            .map(|a| a.name())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Body of the last complete fenced block (```...```), with the info
/// string on the opening fence dropped.
pub fn last_fenced_block(text: &str) -> Result<String, String> {
    let mut open: Option<Vec<&str>> = None;
    let mut last: Option<Vec<&str>> = None;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            match open.take() {
                Some(body) => last = Some(body),
                None => open = Some(Vec::new()),
            }
        } else if let Some(body) = open.as_mut() {
            body.push(line);
        }
    }
    match (open, last) {
        (Some(_), _) => {
            Err("truncated structured block: the last ``` fence is never closed".into())
        }
        (None, Some(body)) => Ok(body.join("\n")),
        (None, None) => Err("missing structured block: expected a fenced ``` block".into()),
    }
}

/// Reads the last fenced block as `{"apis": [...], "rationale": "..."}` or a
/// bare list of ids and checks every id against the catalog.
pub fn parse_selection(response: &str, catalog: &ApiCatalog) -> Result<StrategySelection, String> {
    let body = last_fenced_block(response)?;
    let v: Value = serde_json::from_str(body.trim())
        .map_err(|e| format!("selection block is not valid JSON: {e}"))?;
    let (list, rationale) = match &v {
        Value::Array(_) => (&v, String::new()),
        Value::Object(map) => {
            let list = map
                .get("apis")
                .ok_or("selection block has no \"apis\" field")?;
            let rationale = map
                .get("rationale")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string();
            (list, rationale)
        }
        _ => return Err("selection block must be a JSON object with an \"apis\" list".into()),
    };
    let items = list
        .as_array()
        .ok_or("\"apis\" must be a list of API ids")?;
    if items.is_empty() {
        return Err("selection is empty: choose at least one API".into());
    }
    let mut apis = Vec::new();
    let mut unknown = Vec::new();
    for item in items {
        let name = item
            .as_str()
            .ok_or_else(|| format!("API ids must be strings, got {item}"))?;
        match catalog.lookup(name) {
            Some(e) if apis.contains(&e.id) => {
                return Err(format!("API id `{name}` is selected twice"))
            }
            Some(e) => apis.push(e.id),
            None => unknown.push(format!("`{name}`")),
        }
    }
    if !unknown.is_empty() {
        return Err(format!(
            "unknown API id {} (available: {})",
            unknown.join(", "),
            ApiId::ALL.map(|a| a.name()).join(", ")
        ));
    }
    Ok(StrategySelection { apis, rationale })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat() -> ApiCatalog {
        ApiCatalog::standard()
    }

    #[test]
    fn bare_list() {
        let s = parse_selection("```json\n[\"astar\", \"rrt\"]\n```", &cat()).unwrap();
        assert_eq!(s.apis, vec![ApiId::Astar, ApiId::Rrt]);
    }

    #[test]
    fn object_and_last_block_wins() {
        let text = "first\n```\n{\"apis\": [\"pid\"]}\n```\nthen\n```json\n{\"apis\": [\"mpc\"], \"rationale\": \"tracking\"}\n```\n";
        let s = parse_selection(text, &cat()).unwrap();
        assert_eq!(s.apis, vec![ApiId::Mpc]);
        assert_eq!(s.rationale, "tracking");
    }

    #[test]
    fn defects_are_named() {
        let e = parse_selection("```\n[\"warp_drive\"]\n```", &cat()).unwrap_err();
        assert!(e.contains("warp_drive"), "{e}");
        assert!(parse_selection("I would use mpc.", &cat())
            .unwrap_err()
            .contains("missing structured block"));
        assert!(parse_selection("```\n[\"mpc\"]", &cat())
            .unwrap_err()
            .contains("truncated"));
        assert!(parse_selection("```\n[]\n```", &cat())
            .unwrap_err()
            .contains("empty"));
        assert!(parse_selection("```\n[\"mpc\", \"mpc\"]\n```", &cat())
            .unwrap_err()
            .contains("twice"));
        assert!(parse_selection("```\n{apis: mpc}\n```", &cat())
            .unwrap_err()
            .contains("JSON"));
        assert!(parse_selection("```\n{\"api\": [\"mpc\"]}\n```", &cat())
            .unwrap_err()
            .contains("\"apis\""));
    }
}
