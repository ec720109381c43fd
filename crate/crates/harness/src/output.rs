//! Files written for a batch.
//!
//! ```text
//! <out>/episodes.csv            one row per episode (header below)
//! <out>/report.json             aggregates, schema-versioned
//! <out>/trajectories/<id>.csv   executed trajectory of each successful episode
//! <out>/plots/panels_<kind>.svg workspace, obstacles and trajectory per episode
//! <out>/plots/success_rates.svg
//! <out>/plots/round_curves.svg
//! <out>/plots/error_histogram.svg
//! ```
//!
//! `episodes.csv` columns: `kind, seed, scenario_id, success, rounds_used,
//! success_round, final_reason, final_metric, parse_errors,
//! validation_errors, timeout_errors, task_failure_errors, aborted,
//! final_apis`. Empty cells mean "none". Wall-clock times are left out so
//! tables of equal runs are byte-identical.

use std::io::Write;
use std::path::{Path, PathBuf};

use ctrlsel_core::environment::generate_scenario;
use ctrlsel_core::{ScenarioSpec, Trajectory};
use thiserror::Error;

use crate::batch::{AblationSetting, BatchReport, EpisodeRow};
use crate::svg;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| OutputError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn episode_table(rows: &[EpisodeRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_episode_table(text: &str) -> Result<Vec<EpisodeRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect()
}

pub fn read_episode_table(path: &Path) -> Result<Vec<EpisodeRow>, OutputError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_episode_table(&text).map_err(|source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_report(path: &Path) -> Result<BatchReport, OutputError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| OutputError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// `step, t, x0.., u0..`; the last state has no control.
pub fn trajectory_table(traj: &Trajectory, controls: &[ctrlsel_core::Control]) -> String {
    let n = traj.states.first().map_or(0, |s| s.len());
    let m = controls.first().map_or(0, |u| u.len());
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend((0..m).map(|i| format!("u{i}")));
    let mut out = header.join(",");
    out.push('\n');
    for (k, x) in traj.states.iter().enumerate() {
        let mut cells = vec![k.to_string(), format!("{}", traj.time(k))];
        cells.extend(x.iter().map(|v| v.to_string()));
        match controls.get(k) {
            Some(u) => cells.extend(u.iter().map(|v| v.to_string())),
            None => cells.extend((0..m).map(|_| String::new())),
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn panels_for(report: &BatchReport) -> Vec<(String, String)> {
    report
        .kinds
        .iter()
        .map(|s| {
            let episodes: Vec<(ScenarioSpec, Option<Trajectory>)> = report
                .rows
                .iter()
                .filter(|r| r.kind == s.kind)
                .map(|r| {
                    let traj = report
                        .episodes
                        .iter()
                        .find(|e| e.scenario_id == r.scenario_id)
                        .and_then(|e| e.trajectory.clone());
                    (generate_scenario(r.kind, r.seed), traj)
                })
                .collect();
            let title = format!("{} ({} episodes)", s.kind, episodes.len());
            (
                format!("panels_{}.svg", s.kind),
                svg::episode_panels(&title, &episodes),
            )
        })
        .collect()
}

/// Writes the plots only; usable on a report read back from disk.
pub fn emit_plots(report: &BatchReport, out_dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    let plots = out_dir.join("plots");
    let mut files = panels_for(report);
    files.push(("success_rates.svg".into(), svg::success_bars(report)));
    files.push(("round_curves.svg".into(), svg::round_curves(report)));
    files.push(("error_histogram.svg".into(), svg::error_histogram(report)));
    let mut written = Vec::new();
    for (name, body) in files {
        let p = plots.join(name);
        write_atomic(&p, body.as_bytes())?;
        written.push(p);
    }
    Ok(written)
}

pub fn emit_outputs(report: &BatchReport, out_dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    let mut written = Vec::new();
    let table = out_dir.join("episodes.csv");
    let text = episode_table(&report.rows).map_err(|source| OutputError::Csv {
        path: table.clone(),
        source,
    })?;
    write_atomic(&table, text.as_bytes())?;
    written.push(table);

    let json_path = out_dir.join("report.json");
    let json = serde_json::to_string_pretty(report).map_err(|source| OutputError::Json {
        path: json_path.clone(),
        source,
    })?;
    write_atomic(&json_path, json.as_bytes())?;
    written.push(json_path);

    let traj_dir = out_dir.join("trajectories");
    for e in report.episodes.iter().filter(|e| e.success) {
        if let Some(t) = &e.trajectory {
            let p = traj_dir.join(format!("{}.csv", e.scenario_id));
            write_atomic(&p, trajectory_table(t, &e.controls).as_bytes())?;
            written.push(p);
        }
    }
    written.extend(emit_plots(report, out_dir)?);
    Ok(written)
}

/// One subdirectory per setting plus `ablation.csv` comparing them.
pub fn emit_ablation(
    results: &[(AblationSetting, BatchReport)],
    out_dir: &Path,
) -> Result<Vec<PathBuf>, OutputError> {
    let mut written = Vec::new();
    let mut table = String::from("setting,temperature,model,docs_mode,kind,episodes,success_rate,avg_rounds_to_success,errors\n");
    for (setting, report) in results {
        written.extend(emit_outputs(report, &out_dir.join(setting.label()))?);
        for s in &report.kinds {
            table.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                setting.label(),
                setting.temperature,
                setting.model,
                setting.docs_mode,
                s.kind,
                s.episodes,
                s.success_rate,
                s.avg_rounds_to_success
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
                s.errors.total()
            ));
        }
    }
    let p = out_dir.join("ablation.csv");
    write_atomic(&p, table.as_bytes())?;
    written.push(p);
    Ok(written)
}
