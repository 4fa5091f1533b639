//! `latte` drives the pipeline from the shell: build a model from an app
//! description, generate targeted suites, run the random baseline, sweep
//! the similarity threshold, and compare targeted against random cost.
//!
//! Exit codes are stable so scripts can branch on outcomes: 0 success,
//! 1 bad input (parse/validation failures, unknown labels, bad flags),
//! 2 truncated build (model still written), 3 target not fully covered.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use latte_core::bench::{
    compare, random_explore, st_sweep, sweep_table, RandomConfig, DEFAULT_SEEDS,
};
use latte_core::builder::{build_model, BuildConfig};
use latte_core::target::{generate, Target, DEFAULT_MAXTRY};
use latte_core::{parse_app_spec, AppSpec, LabelId, LatteModel, Severity, SpecError};

const EXIT_BAD_INPUT: u8 = 1;
const EXIT_TRUNCATED: u8 = 2;
const EXIT_UNCOVERED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "latte",
    about = "Infer labelled activity-transition models from simulated apps and generate targeted event sequences",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ExploreFlags {
    /// Weight of view similarity against stack similarity
    #[arg(long, default_value_t = 0.5)]
    omega: f64,
    /// Event budget for exploration, replay prefixes included
    #[arg(long)]
    max_events: Option<u64>,
    /// Wall-clock bound for exploration, in seconds
    #[arg(long, default_value_t = 3 * 3600)]
    max_seconds: u64,
}

impl ExploreFlags {
    fn to_config(&self, similarity_threshold: f64) -> BuildConfig {
        BuildConfig {
            omega: self.omega,
            similarity_threshold,
            max_events: self.max_events,
            max_wall_time: Some(std::time::Duration::from_secs(self.max_seconds)),
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct BuildFlags {
    #[command(flatten)]
    explore: ExploreFlags,
    /// Similarity threshold for state merging
    #[arg(long, default_value_t = 0.8)]
    st: f64,
}

impl BuildFlags {
    fn to_config(&self) -> BuildConfig {
        self.explore.to_config(self.st)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Explore an app and write its model
    Build {
        /// App description file
        spec: PathBuf,
        #[command(flatten)]
        flags: BuildFlags,
        /// Model JSON output path
        #[arg(long)]
        out: PathBuf,
        /// Also write the model in DOT graph format
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Generate a targeted event-sequence suite over a built model
    Target {
        /// App description file
        spec: PathBuf,
        /// Model JSON produced by `build`
        model: PathBuf,
        /// Comma-separated target labels
        #[arg(long, value_delimiter = ',', required = true)]
        labels: Vec<String>,
        /// Attempt cap per labelled transition
        #[arg(long, default_value_t = DEFAULT_MAXTRY)]
        maxtry: u32,
        /// Suite JSON output path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the seeded random baseline against a label target
    Random {
        /// App description file
        spec: PathBuf,
        /// Comma-separated target labels
        #[arg(long, value_delimiter = ',', required = true)]
        labels: Vec<String>,
        /// Baseline RNG seed
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Events per iteration
        #[arg(long, default_value_t = 1000)]
        batch: u64,
        /// Iteration cap
        #[arg(long, default_value_t = 100)]
        max_batches: u64,
        /// Outcome JSON output path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build once per similarity threshold and tabulate model sizes
    Sweep {
        /// App description file
        spec: PathBuf,
        /// Comma-separated thresholds to sweep
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5, 0.8, 1.0])]
        thresholds: Vec<f64>,
        #[command(flatten)]
        flags: ExploreFlags,
        /// Sweep JSON output path (stdout table either way)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare targeted generation cost against the random baseline
    Compare {
        /// App description file
        spec: PathBuf,
        /// Comma-separated target labels
        #[arg(long, value_delimiter = ',', required = true)]
        labels: Vec<String>,
        #[command(flatten)]
        flags: BuildFlags,
        /// Attempt cap per labelled transition
        #[arg(long, default_value_t = DEFAULT_MAXTRY)]
        maxtry: u32,
        /// Events per baseline iteration
        #[arg(long, default_value_t = 1000)]
        batch: u64,
        /// Baseline iteration cap
        #[arg(long, default_value_t = 100)]
        max_batches: u64,
        /// Comma-separated baseline seeds
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SEEDS)]
        seeds: Vec<u64>,
        /// Report JSON output path (stdout table either way)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_spec(path: &PathBuf) -> Result<Arc<AppSpec>, u8> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return Err(EXIT_BAD_INPUT);
        }
    };
    match parse_app_spec(&text) {
        Ok(spec) => {
            // surface warnings without failing
            for issue in latte_core::validate(&spec) {
                if issue.severity == Severity::Warning {
                    eprintln!("{issue}");
                }
            }
            Ok(Arc::new(spec))
        }
        Err(SpecError::Syntax { line, column, message }) => {
            eprintln!("error: {}: syntax error at {line}:{column}: {message}", path.display());
            Err(EXIT_BAD_INPUT)
        }
        Err(SpecError::Invalid { issues }) => {
            for issue in issues {
                eprintln!("{}: {issue}", path.display());
            }
            Err(EXIT_BAD_INPUT)
        }
    }
}

fn parse_target(spec: &AppSpec, labels: &[String]) -> Result<Target, u8> {
    match Target::new(labels.iter().map(|l| LabelId::new(l.clone())), &spec.label_universe()) {
        Ok(t) => Ok(t),
        Err(e) => {
            eprintln!("error: {e}");
            Err(EXIT_BAD_INPUT)
        }
    }
}

fn write_out(path: &PathBuf, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn emit(out: &Option<PathBuf>, contents: &str) -> Result<()> {
    match out {
        Some(path) => write_out(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Build { spec, flags, out, dot } => {
            let spec = match load_spec(&spec) {
                Ok(s) => s,
                Err(code) => return Ok(code),
            };
            let cfg = flags.to_config();
            let report = match build_model(&spec, &cfg) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(EXIT_BAD_INPUT);
                }
            };
            write_out(&out, &report.model.to_json())?;
            if let Some(dot_path) = &dot {
                write_out(dot_path, &report.model.to_dot())?;
            }
            println!(
                "states: {}  transitions: {}  events_fired: {}  states_merged: {}  wall_ms: {}  truncated: {}",
                report.model.ordinary_state_count(),
                report.model.transition_count(),
                report.events_fired,
                report.states_merged,
                report.wall_time.as_millis(),
                report.truncated
            );
            Ok(if report.truncated { EXIT_TRUNCATED } else { 0 })
        }
        Command::Target { spec, model, labels, maxtry, out } => {
            let spec = match load_spec(&spec) {
                Ok(s) => s,
                Err(code) => return Ok(code),
            };
            let target = match parse_target(&spec, &labels) {
                Ok(t) => t,
                Err(code) => return Ok(code),
            };
            let model_text = fs::read_to_string(&model)
                .with_context(|| format!("cannot read {}", model.display()))?;
            let model = match LatteModel::from_json(&model_text) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(EXIT_BAD_INPUT);
                }
            };
            let suite = generate(&model, &spec, &target, maxtry);
            emit(&out, &suite.to_json())?;
            if suite.is_fully_covered() {
                Ok(0)
            } else {
                for t in &suite.uncovered_transitions {
                    eprintln!("uncovered transition: {} --{}--> {}", t.src, t.event, t.dest);
                }
                for l in &suite.uncovered_labels {
                    eprintln!("uncovered label: {l}");
                }
                Ok(EXIT_UNCOVERED)
            }
        }
        Command::Random { spec, labels, seed, batch, max_batches, out } => {
            let spec = match load_spec(&spec) {
                Ok(s) => s,
                Err(code) => return Ok(code),
            };
            let target = match parse_target(&spec, &labels) {
                Ok(t) => t,
                Err(code) => return Ok(code),
            };
            let cfg = RandomConfig { seed, batch, max_batches };
            let outcome = random_explore(&spec, &target, &cfg);
            let mut text = serde_json::to_string_pretty(&outcome)?;
            text.push('\n');
            emit(&out, &text)?;
            Ok(if outcome.events_to_cover.is_some() { 0 } else { EXIT_UNCOVERED })
        }
        Command::Sweep { spec, thresholds, flags, out } => {
            let spec = match load_spec(&spec) {
                Ok(s) => s,
                Err(code) => return Ok(code),
            };
            let rows = match st_sweep(&spec, &thresholds, &flags.to_config(0.8)) {
                Ok(rows) => rows,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(EXIT_BAD_INPUT);
                }
            };
            if let Some(path) = &out {
                let mut text = serde_json::to_string_pretty(&rows)?;
                text.push('\n');
                write_out(path, &text)?;
            }
            print!("{}", sweep_table(&rows));
            Ok(0)
        }
        Command::Compare { spec, labels, flags, maxtry, batch, max_batches, seeds, out } => {
            let spec = match load_spec(&spec) {
                Ok(s) => s,
                Err(code) => return Ok(code),
            };
            let target = match parse_target(&spec, &labels) {
                Ok(t) => t,
                Err(code) => return Ok(code),
            };
            let random_cfg = RandomConfig { seed: 1, batch, max_batches };
            let (report, _suite) =
                match compare(&spec, &target, &flags.to_config(), &random_cfg, &seeds, maxtry) {
                    Ok(r) => r,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return Ok(EXIT_BAD_INPUT);
                    }
                };
            if let Some(path) = &out {
                write_out(path, &report.to_json())?;
            }
            print!("{}", report.to_text_table());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_BAD_INPUT)
        }
    }
}
