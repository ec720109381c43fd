use std::collections::HashMap;

use ctrlsel_core::{ModelKind, ScenarioSpec};
use serde_json::Value;

use super::{Binding, PipelineConfig, Stage, SCENARIO_FIELDS};
use crate::catalog::{ApiCatalog, ApiId, SemType};

fn scenario_type(field: &str) -> Option<SemType> {
    Some(match field {
        "x0" => SemType::State,
        "model" => SemType::Model,
        "goal" => SemType::Goal,
        "obstacles" => SemType::Obstacles,
        "reference" => SemType::Reference,
        "stl_formula" => SemType::StlFormula,
        _ => return None,
    })
}

fn scenario_has(spec: &ScenarioSpec, field: &str) -> bool {
    match field {
        "goal" => spec.goal.is_some(),
        "reference" => spec.reference.is_some(),
        "stl_formula" => spec.stl_formula.is_some(),
        _ => true,
    }
}

fn check_params(prefix: &str, stage: &Stage, catalog: &ApiCatalog, out: &mut Vec<String>) {
    let entry = catalog.get(stage.api);
    for (name, v) in &stage.params {
        match entry.param(name) {
            None => out.push(format!(
                "{prefix}: unknown parameter `{name}` (known: {})",
                entry
                    .params
                    .iter()
                    .map(|p| p.name)
                    .collect::<Vec<_>>()
                    .join(", ")
            )),
            Some(p) => {
                if let Err(e) = p.check(v) {
                    out.push(format!("{prefix}: {e}"));
                }
            }
        }
    }
    if stage.api == ApiId::Cem {
        let get = |k: &str| {
            stage
                .params
                .get(k)
                .and_then(Value::as_f64)
                .or_else(|| entry.param(k).and_then(|p| p.default.as_f64()))
        };
        if let (Some(pop), Some(frac)) = (get("population"), get("elite_fraction")) {
            let elites = (frac * pop).ceil();
            if pop < 2.0 * elites {
                out.push(format!(
                    "{prefix}: population {pop} must be at least twice the elite count {elites}"
                ));
            }
        }
    }
}

/// Checks bindings, types, parameter schemas and model compatibility,
/// reporting every violated rule.
pub fn validate_pipeline(
    config: &PipelineConfig,
    spec: &ScenarioSpec,
    catalog: &ApiCatalog,
) -> Result<(), Vec<String>> {
    let mut out = Vec::new();
    if config.stages.is_empty() {
        out.push("pipeline has no stages".to_string());
    }
    let n = spec.model.state_dim();
    if spec.x0.len() != n {
        out.push(format!(
            "scenario x0 has {} entries but the model state has {n}",
            spec.x0.len()
        ));
    }
    if let Some(r) = &spec.reference {
        if r.states.iter().any(|s| s.len() != n) {
            out.push(format!(
                "scenario reference states do not have the model dimension {n}"
            ));
        }
    }

    let positions: HashMap<&str, usize> = {
        let mut m = HashMap::new();
        for (i, s) in config.stages.iter().enumerate() {
            let name = s.output.as_str();
            let bad_name = name.is_empty()
                || name == "scenario"
                || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if bad_name {
                out.push(format!(
                    "stage {} ({}): invalid output name `{name}`",
                    i + 1,
                    s.api
                ));
            }
            if m.insert(name, i).is_some() {
                out.push(format!(
                    "stage {} ({}): output name `{name}` is declared twice",
                    i + 1,
                    s.api
                ));
            }
        }
        m
    };

    for (i, stage) in config.stages.iter().enumerate() {
        let entry = catalog.get(stage.api);
        let prefix = format!("stage {} ({})", i + 1, stage.api);
        check_params(&prefix, stage, catalog, &mut out);

        for name in stage.inputs.keys() {
            if entry.input(name).is_none() {
                out.push(format!(
                    "{prefix}: unknown input `{name}` (signature {})",
                    entry.signature()
                ));
            }
        }
        for spec_in in &entry.inputs {
            let Some(binding) = stage.inputs.get(spec_in.name) else {
                if spec_in.required {
                    out.push(format!(
                        "{prefix}: required input `{}` ({}) is not bound",
                        spec_in.name, spec_in.ty
                    ));
                }
                continue;
            };
            let actual = match binding {
                Binding::Scenario(field) => {
                    match scenario_type(field) {
                        None => {
                            out.push(format!(
                                "{prefix}: `{binding}` is not a scenario field (available: {})",
                                SCENARIO_FIELDS.join(", ")
                            ));
                            continue;
                        }
                        Some(_) if !scenario_has(spec, field) => {
                            out.push(format!("{prefix}: this scenario has no {field}; `{binding}` cannot be bound"));
                            continue;
                        }
                        Some(t) => t,
                    }
                }
                Binding::Stage(name) | Binding::AsReference(name) => {
                    let Some(&j) = positions.get(name.as_str()) else {
                        out.push(format!(
                            "{prefix}: input `{}` binds `{name}`, which no stage declares",
                            spec_in.name
                        ));
                        continue;
                    };
                    if j >= i {
                        out.push(format!(
                            "{prefix}: input `{}` binds `{name}`, which is produced by stage {} at or after this one",
                            spec_in.name,
                            j + 1
                        ));
                        continue;
                    }
                    let produced = catalog.get(config.stages[j].api).output;
                    if matches!(binding, Binding::AsReference(_)) {
                        if produced != SemType::Path {
                            out.push(format!(
                                "{prefix}: as_reference({name}) needs a Path, but `{name}` is a {produced}"
                            ));
                            continue;
                        }
                        if spec.model.kind == ModelKind::Pendulum {
                            out.push(format!(
                                "{prefix}: a planar path cannot become a pendulum reference"
                            ));
                            continue;
                        }
                        SemType::Reference
                    } else {
                        produced
                    }
                }
            };
            if actual != spec_in.ty {
                let hint = if actual == SemType::Path && spec_in.ty == SemType::Reference {
                    " (convert it with as_reference(...))"
                } else {
                    ""
                };
                out.push(format!(
                    "{prefix}: input `{}` expects {} but `{binding}` is {}{hint}",
                    spec_in.name, spec_in.ty, actual
                ));
            }
        }

        if entry.requires_linear && !spec.model.kind.is_linear() {
            out.push(format!(
                "{prefix}: {} requires linear dynamics, the scenario model is {}",
                stage.api, spec.model.kind
            ));
        }
        let planar = matches!(stage.api, ApiId::Astar | ApiId::Rrt);
        if planar && spec.model.kind == ModelKind::Pendulum {
            out.push(format!(
                "{prefix}: {} needs a planar position state, the model is a pendulum",
                stage.api
            ));
        }
        if stage.api == ApiId::Grad {
            let targets = ["goal", "reference"]
                .iter()
                .filter(|k| stage.inputs.contains_key(**k))
                .count();
            if targets != 1 {
                out.push(format!(
                    "{prefix}: grad needs exactly one of `goal` or `reference`, {targets} bound"
                ));
            }
        }
    }

    match positions.get(config.final_output.as_str()) {
        None => out.push(format!(
            "final_output `{}` is not declared by any stage",
            config.final_output
        )),
        Some(&j) => {
            let t = catalog.get(config.stages[j].api).output;
            if t != SemType::Trajectory {
                out.push(format!(
                    "final_output `{}` is a {t}; the final stage must produce a Trajectory (add a tracking stage)",
                    config.final_output
                ));
            }
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::parse_pipeline;
    use ctrlsel_core::environment::generate_scenario;
    use ctrlsel_core::{DynamicsModel, ScenarioKind};

    fn stage_json(api: &str, params: &str, inputs: &[(&str, &str)], output: &str) -> String {
        let ins: Vec<String> = inputs
            .iter()
            .map(|(k, v)| format!("\"{k}\": \"{v}\""))
            .collect();
        format!(
            r#"{{"api": "{api}", "params": {params}, "inputs": {{{}}}, "output": "{output}"}}"#,
            ins.join(", ")
        )
    }

    fn config(stages: &[String], final_output: &str) -> PipelineConfig {
        let text = format!(
            "```\n{{\"schema_version\": 1, \"stages\": [{}], \"final_output\": \"{final_output}\"}}\n```",
            stages.join(", ")
        );
        parse_pipeline(&text, &ApiCatalog::standard()).unwrap()
    }

    const TRACK: [(&str, &str); 3] = [
        ("x0", "scenario.x0"),
        ("model", "scenario.model"),
        ("reference", "scenario.reference"),
    ];
    const PLAN: [(&str, &str); 3] = [
        ("start", "scenario.x0"),
        ("goal", "scenario.goal"),
        ("obstacles", "scenario.obstacles"),
    ];

    #[test]
    fn rrt_then_pid_is_valid_for_simple_plan() {
        let spec = generate_scenario(ScenarioKind::SimplePlan, 0);
        let c = config(
            &[
                stage_json("rrt", "{}", &PLAN, "path"),
                stage_json(
                    "pid",
                    r#"{"kp": 10}"#,
                    &[
                        ("x0", "scenario.x0"),
                        ("model", "scenario.model"),
                        ("reference", "as_reference(path)"),
                    ],
                    "traj",
                ),
            ],
            "traj",
        );
        assert_eq!(
            validate_pipeline(&c, &spec, &ApiCatalog::standard()),
            Ok(())
        );
    }

    #[test]
    fn milp_with_unicycle_is_rejected() {
        let mut spec = generate_scenario(ScenarioKind::StlTask, 0);
        spec.model = DynamicsModel::unicycle(3.0, 3.0);
        spec.x0 = ctrlsel_core::State::from_vec(vec![spec.x0[0], spec.x0[1], 0.0]);
        let c = config(
            &[stage_json(
                "milp",
                "{}",
                &[
                    ("x0", "scenario.x0"),
                    ("model", "scenario.model"),
                    ("stl_formula", "scenario.stl_formula"),
                ],
                "traj",
            )],
            "traj",
        );
        let errs = validate_pipeline(&c, &spec, &ApiCatalog::standard()).unwrap_err();
        assert_eq!(errs.len(), 1, "{errs:?}");
        assert!(errs[0].contains("milp requires linear dynamics"));
    }

    #[test]
    fn every_violation_is_reported() {
        let spec = generate_scenario(ScenarioKind::TrackLinear, 0);
        let c = config(
            &[stage_json(
                "mpc",
                r#"{"horizon": -5, "colour": "blue"}"#,
                &[("x0", "scenario.x0"), ("reference", "as_reference(pathX)")],
                "traj",
            )],
            "result",
        );
        let errs = validate_pipeline(&c, &spec, &ApiCatalog::standard()).unwrap_err();
        let joined = errs.join("\n");
        assert!(
            joined.contains("`horizon` = -5 is outside the range"),
            "{joined}"
        );
        assert!(joined.contains("unknown parameter `colour`"));
        assert!(joined.contains("`model` (Model) is not bound"));
        assert!(joined.contains("pathX"));
        assert!(joined.contains("final_output `result`"));
        assert_eq!(errs.len(), 5);
    }

    #[test]
    fn path_needs_conversion_and_order_matters() {
        let spec = generate_scenario(ScenarioKind::SimplePlan, 1);
        let c = config(
            &[
                stage_json(
                    "pid",
                    "{}",
                    &[
                        ("x0", "scenario.x0"),
                        ("model", "scenario.model"),
                        ("reference", "path"),
                    ],
                    "traj",
                ),
                stage_json("rrt", "{}", &PLAN, "path"),
            ],
            "traj",
        );
        let errs = validate_pipeline(&c, &spec, &ApiCatalog::standard()).unwrap_err();
        assert!(
            errs.iter().any(|e| e.contains("at or after this one")),
            "{errs:?}"
        );

        let c = config(
            &[
                stage_json("rrt", "{}", &PLAN, "path"),
                stage_json(
                    "pid",
                    "{}",
                    &[
                        ("x0", "scenario.x0"),
                        ("model", "scenario.model"),
                        ("reference", "path"),
                    ],
                    "traj",
                ),
            ],
            "traj",
        );
        let errs = validate_pipeline(&c, &spec, &ApiCatalog::standard()).unwrap_err();
        assert!(errs[0].contains("as_reference"), "{errs:?}");
    }

    #[test]
    fn missing_scenario_field_and_non_trajectory_final() {
        let spec = generate_scenario(ScenarioKind::SimplePlan, 2);
        let c = config(&[stage_json("mpc", "{}", &TRACK, "traj")], "traj");
        let errs = validate_pipeline(&c, &spec, &ApiCatalog::standard()).unwrap_err();
        assert!(errs[0].contains("no reference"), "{errs:?}");
        let c = config(&[stage_json("astar", "{}", &PLAN, "route")], "route");
        let errs = validate_pipeline(&c, &spec, &ApiCatalog::standard()).unwrap_err();
        assert!(errs[0].contains("must produce a Trajectory"), "{errs:?}");
    }

    #[test]
    fn verdict_is_pure() {
        let spec = generate_scenario(ScenarioKind::TrackDubins, 3);
        let c = config(&[stage_json("lqr", r#"{"q": -1}"#, &TRACK, "t")], "t");
        let a = validate_pipeline(&c, &spec, &ApiCatalog::standard());
        let b = validate_pipeline(&c, &spec, &ApiCatalog::standard());
        assert_eq!(a, b);
        assert!(a.is_err());
    }
}
