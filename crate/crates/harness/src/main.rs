use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctrlsel_agent::episode::{EpisodeResult, Orchestrator};
use ctrlsel_agent::http::{HttpBackend, HttpConfig, ENV_MODEL};
use ctrlsel_agent::mock::RuleBasedBackend;
use ctrlsel_agent::scripted::ScriptedBackend;
use ctrlsel_agent::{ChatBackend, DocsMode};
use ctrlsel_core::environment::{environment_summary, generate_scenario, render_task_description};
use ctrlsel_core::{ScenarioKind, ScenarioSpec};
use ctrlsel_harness::config::DEFAULT_EXPERIMENTS;
use ctrlsel_harness::{
    emit_ablation, emit_outputs, emit_plots, read_report, run_ablation, run_batch, AblationSpec,
    BackendSpec, BatchConfig, BatchReport, Mode,
};

const EXIT_PARTIAL: u8 = 2;
const EXIT_USAGE: u8 = 1;

#[derive(Parser)]
#[command(
    name = "ctrlsel",
    version,
    about = "Language-model selection of planning and control algorithms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or inspect scenarios.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Run a single episode.
    Episode {
        #[command(subcommand)]
        action: EpisodeAction,
    },
    /// Run a seeded batch over scenario kinds.
    Batch {
        #[command(subcommand)]
        action: BatchAction,
    },
    /// Sweep temperatures, models and documentation modes.
    Ablate {
        #[command(subcommand)]
        action: AblateAction,
    },
    /// Re-render plots from a saved report.
    Report {
        #[command(subcommand)]
        action: ReportAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// Write a scenario as TOML.
    Gen {
        #[arg(long)]
        kind: ScenarioKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the task text and environment summary.
    Show {
        #[command(flatten)]
        source: ScenarioSource,
    },
}

#[derive(Args)]
struct ScenarioSource {
    #[arg(long, required_unless_present = "file")]
    kind: Option<ScenarioKind>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scenario TOML written by `scenario gen`.
    #[arg(long, conflicts_with = "kind")]
    file: Option<PathBuf>,
}

impl ScenarioSource {
    fn load(&self) -> Result<ScenarioSpec, String> {
        match (&self.file, self.kind) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("{}: {e}", path.display()))?;
                ScenarioSpec::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
            }
            (None, Some(kind)) => Ok(generate_scenario(kind, self.seed)),
            (None, None) => Err("either --kind or --file is required".into()),
        }
    }
}

#[derive(Subcommand)]
enum EpisodeAction {
    Run {
        #[command(flatten)]
        source: ScenarioSource,
        #[command(flatten)]
        run: RunArgs,
        /// Print the full episode record as JSON.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum BatchAction {
    Run {
        #[command(flatten)]
        batch: BatchArgs,
    },
}

#[derive(Subcommand)]
enum AblateAction {
    Run {
        #[command(flatten)]
        batch: BatchArgs,
        #[arg(long, value_delimiter = ',')]
        temperatures: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        docs_modes: Vec<DocsMode>,
    },
}

#[derive(Subcommand)]
enum ReportAction {
    Render {
        /// `report.json` written by a batch.
        #[arg(long)]
        report: PathBuf,
        /// Defaults to the report's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Mock,
    Http,
    Scripted,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "mock")]
    backend: BackendKind,
    /// Probability of a malformed mock response per round.
    #[arg(long, default_value_t = 0.0)]
    fault_p: f64,
    #[arg(long, default_value_t = 0)]
    mock_seed: u64,
    /// JSON array of responses for the scripted backend.
    #[arg(long, required_if_eq("backend", "scripted"))]
    transcript: Option<PathBuf>,
    /// Chat-completions URL; overrides the environment.
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name; defaults to the environment or gpt-4o.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = ctrlsel_agent::backend::DEFAULT_TEMPERATURE)]
    temperature: f64,
    #[arg(long, default_value_t = 6)]
    max_rounds: usize,
    #[arg(long, default_value_t = 30.0)]
    timeout_s: f64,
    #[arg(long, default_value = "on-demand")]
    docs_mode: DocsMode,
    #[arg(long, default_value = "pipeline")]
    mode: Mode,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated kinds; all five when omitted.
    #[arg(long, value_delimiter = ',')]
    kinds: Vec<ScenarioKind>,
    #[arg(long, default_value_t = DEFAULT_EXPERIMENTS)]
    experiments: usize,
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// Output directory for tables, reports and plots.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn backend_spec(&self) -> BackendSpec {
        match self.backend {
            BackendKind::Mock => BackendSpec::RuleBased {
                fault_p: self.fault_p,
                seed: self.mock_seed,
            },
            BackendKind::Http => BackendSpec::Http {
                endpoint: self.endpoint.clone(),
            },
            BackendKind::Scripted => BackendSpec::Scripted {
                path: self.transcript.clone().unwrap_or_default(),
            },
        }
    }

    fn model(&self) -> String {
        self.model
            .clone()
            .or_else(|| std::env::var(ENV_MODEL).ok())
            .unwrap_or_else(|| BatchConfig::default().model)
    }
}

impl BatchArgs {
    fn config(&self) -> BatchConfig {
        BatchConfig {
            kinds: if self.kinds.is_empty() {
                ScenarioKind::ALL.to_vec()
            } else {
                self.kinds.clone()
            },
            experiments: self.experiments,
            seed_base: self.seed_base,
            max_rounds: self.run.max_rounds,
            backend: self.run.backend_spec(),
            timeout_s: self.run.timeout_s,
            temperature: self.run.temperature,
            model: self.run.model(),
            docs_mode: self.run.docs_mode,
            mode: self.run.mode,
            ablation: AblationSpec::default(),
            out_dir: self.out.clone(),
            parallelism: self.parallelism,
        }
    }
}

enum Failure {
    Usage(String),
    Partial,
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Usage(s)
    }
}

fn print_summary(report: &BatchReport) {
    println!(
        "{:<14} {:>8} {:>9} {:>12} {:>7}",
        "kind", "episodes", "success", "avg_rounds", "errors"
    );
    for s in &report.kinds {
        let rounds = s
            .avg_rounds_to_success
            .map(|r| format!("{r:.2}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<14} {:>8} {:>9.3} {:>12} {:>7}",
            s.kind.name(),
            s.episodes,
            s.success_rate,
            rounds,
            s.errors.total()
        );
    }
    if report.incomplete {
        println!("batch incomplete: a backend failure stopped it early");
    }
}

fn print_episode(r: &EpisodeResult) {
    for rec in &r.records {
        println!("round {}: {}", rec.round, rec.diagnostic);
    }
    let outcome = r
        .outcome
        .as_ref()
        .map(|o| format!("{} (metric {:.4})", o.reason, o.metric))
        .unwrap_or_else(|| "no trajectory".into());
    println!(
        "{}: {} after {} round(s), {outcome}",
        r.scenario_id,
        if r.success { "success" } else { "failure" },
        r.rounds_used
    );
    if let Some(e) = &r.aborted {
        println!("aborted: {e}");
    }
}

fn episode_run(spec: &ScenarioSpec, run: &RunArgs, json: bool) -> Result<(), Failure> {
    let config = BatchConfig {
        max_rounds: run.max_rounds,
        backend: run.backend_spec(),
        timeout_s: run.timeout_s,
        temperature: run.temperature,
        model: run.model(),
        docs_mode: run.docs_mode,
        mode: run.mode,
        ..BatchConfig::default()
    };
    config.validate().map_err(|e| e.to_string())?;
    let backend: Box<dyn ChatBackend> = match &config.backend {
        BackendSpec::Http { endpoint } => {
            let mut c = HttpConfig::from_env();
            if let Some(e) = endpoint {
                c.endpoint = e.clone();
            }
            Box::new(HttpBackend::new(c))
        }
        BackendSpec::Scripted { path } => Box::new(
            ScriptedBackend::from_file(path).map_err(|e| format!("{}: {e}", path.display()))?,
        ),
        BackendSpec::RuleBased { fault_p, seed } => {
            Box::new(RuleBasedBackend::new(*fault_p, *seed))
        }
    };
    let orchestrator = Orchestrator::new(config.episode_config());
    let result = match run.mode {
        Mode::Pipeline => orchestrator.run_episode(spec, backend.as_ref()),
        Mode::Predict => orchestrator.run_baseline_episode(spec, backend.as_ref()),
    };
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&result).map_err(|e| e.to_string())?
        );
    } else {
        print_episode(&result);
    }
    if result.aborted.is_some() {
        return Err(Failure::Partial);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Scenario { action } => match action {
            ScenarioAction::Gen { kind, seed, out } => {
                let text = generate_scenario(kind, seed)
                    .to_toml()
                    .map_err(|e| e.to_string())?;
                match out {
                    Some(p) => ctrlsel_harness::output::write_atomic(&p, text.as_bytes())
                        .map_err(|e| e.to_string())?,
                    None => print!("{text}"),
                }
            }
            ScenarioAction::Show { source } => {
                let spec = source.load()?;
                println!(
                    "{}\n\n{}",
                    environment_summary(&spec),
                    render_task_description(&spec)
                );
            }
        },
        Command::Episode {
            action: EpisodeAction::Run { source, run, json },
        } => {
            let spec = source.load()?;
            episode_run(&spec, &run, json)?;
        }
        Command::Batch {
            action: BatchAction::Run { batch },
        } => {
            let config = batch.config();
            let report = run_batch(&config).map_err(|e| e.to_string())?;
            print_summary(&report);
            if let Some(out) = &config.out_dir {
                let files = emit_outputs(&report, out).map_err(|e| e.to_string())?;
                println!("wrote {} files to {}", files.len(), out.display());
            }
            if report.incomplete {
                return Err(Failure::Partial);
            }
        }
        Command::Ablate {
            action:
                AblateAction::Run {
                    batch,
                    temperatures,
                    models,
                    docs_modes,
                },
        } => {
            let mut config = batch.config();
            config.ablation = AblationSpec {
                temperatures,
                models,
                docs_modes,
            };
            let results = run_ablation(&config).map_err(|e| e.to_string())?;
            for (setting, report) in &results {
                println!("== {}", setting.label());
                print_summary(report);
            }
            if let Some(out) = &config.out_dir {
                let files = emit_ablation(&results, out).map_err(|e| e.to_string())?;
                println!("wrote {} files to {}", files.len(), out.display());
            }
            if results.iter().any(|(_, r)| r.incomplete) {
                return Err(Failure::Partial);
            }
        }
        Command::Report {
            action: ReportAction::Render { report, out },
        } => {
            let r = read_report(&report).map_err(|e| e.to_string())?;
            let dir = out.unwrap_or_else(|| report.parent().map(PathBuf::from).unwrap_or_default());
            let files = emit_plots(&r, &dir).map_err(|e| e.to_string())?;
            print_summary(&r);
            println!("wrote {} plots to {}", files.len(), dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Partial) => ExitCode::from(EXIT_PARTIAL),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
