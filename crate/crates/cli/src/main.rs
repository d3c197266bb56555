use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use convrate::diagnostics::SequencePolicy;
use serde::Serialize;

use convrate_cli::commands::{self, TightnessArgs};
use convrate_cli::config::{parse_snapshots, parse_window};
use convrate_cli::runner::run_experiment;
use convrate_cli::{CliError, CliResult, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "convrate",
    version,
    about = "Run first-order methods and check their convergence behaviour"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a solver on a gallery problem for one or more seeds.
    Run {
        /// Config file with `key = value` lines; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        problem: Option<String>,
        #[arg(long)]
        solver: Option<String>,
        #[arg(long)]
        budget: Option<usize>,
        /// Comma-separated list or `lo..hi`.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        x0: Option<String>,
        /// `pow2`, `every` or `stride:<n>`.
        #[arg(long)]
        snapshots: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        prefix: Option<String>,
        /// `lo,hi` or `none`.
        #[arg(long)]
        window: Option<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Gradient descent on f(x) = x^p and its fitted decay rate.
    Tightness {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 1.0)]
        x0: f64,
        #[arg(long)]
        window: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        exponent_tolerance: f64,
        #[arg(long, default_value_t = 0.1)]
        constant_tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the gradient flow of x^p and compare with t^(-1/(p-2)).
    Flow {
        #[arg(long)]
        p: u32,
        #[arg(long)]
        t0: f64,
        #[arg(long)]
        t1: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
    /// Re-run the sequence diagnostics on an existing trace file.
    Check {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        fstar: Option<f64>,
        #[arg(long)]
        window: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        tail_ratio: f64,
        #[arg(long, default_value_t = 0.05)]
        summable_fraction: f64,
    },
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("summary types serialise")
    );
}

fn verdict_code(passed: bool) -> i32 {
    if passed {
        0
    } else {
        1
    }
}

fn window_arg(value: Option<&str>) -> CliResult<Option<(usize, usize)>> {
    value
        .map(|w| parse_window(w).map_err(|m| CliError::config("window", m)))
        .transpose()
        .map(Option::flatten)
}

fn execute(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Run {
            config,
            problem,
            solver,
            budget,
            seeds,
            x0,
            snapshots,
            out,
            prefix,
            window,
            jobs,
        } => {
            let mut text = match &config {
                Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?,
                None => String::new(),
            };
            // flags become trailing config lines, replacing any file entry
            let mut overrides: Vec<(&str, String)> = Vec::new();
            if let Some(v) = problem {
                overrides.push(("problem", v));
            }
            if let Some(v) = solver {
                overrides.push(("solver", v));
            }
            if let Some(v) = budget {
                overrides.push(("budget", v.to_string()));
            }
            if let Some(v) = seeds {
                overrides.push(("seeds", v));
            }
            if let Some(v) = x0 {
                overrides.push(("x0", v));
            }
            if let Some(v) = snapshots {
                parse_snapshots(&v).map_err(|m| CliError::config("snapshots", m))?;
                overrides.push(("snapshots", v));
            }
            if let Some(v) = out {
                overrides.push(("output.dir", v.display().to_string()));
            }
            if let Some(v) = prefix {
                overrides.push(("output.prefix", v));
            }
            if let Some(v) = window {
                overrides.push(("diagnostics.fit_window", v));
            }
            text = text
                .lines()
                .filter(|line| {
                    let key = line.split_once('=').map(|(k, _)| k.trim());
                    !overrides.iter().any(|(k, _)| Some(*k) == key)
                })
                .map(|l| format!("{l}\n"))
                .collect();
            for (k, v) in &overrides {
                text.push_str(&format!("{k} = {v}\n"));
            }
            let cfg = ExperimentConfig::parse(&text)?;
            let (doc, path) = run_experiment(&cfg, jobs)?;
            for v in doc.all_verdicts() {
                println!(
                    "{} {} ({:e} {})",
                    if v.passed { "PASS" } else { "FAIL" },
                    v.name,
                    v.value,
                    v.threshold
                );
            }
            println!("summary: {}", path.display());
            Ok(verdict_code(doc.passed))
        }
        Command::Tightness {
            p,
            alpha,
            budget,
            x0,
            window,
            exponent_tolerance,
            constant_tolerance,
            out,
        } => {
            let summary = commands::tightness(&TightnessArgs {
                p,
                alpha,
                budget,
                x0,
                window: window_arg(window.as_deref())?,
                exponent_tolerance,
                constant_tolerance,
                out,
            })?;
            print_json(&summary);
            Ok(verdict_code(summary.passed))
        }
        Command::Flow {
            p,
            t0,
            t1,
            steps,
            tolerance,
        } => {
            let summary = commands::flow(p, t0, t1, steps, tolerance)?;
            print_json(&summary);
            Ok(verdict_code(summary.passed))
        }
        Command::Check {
            trace,
            fstar,
            window,
            tail_ratio,
            summable_fraction,
        } => {
            let policy = SequencePolicy {
                summable_fraction,
                tail_factor: tail_ratio,
                ..SequencePolicy::default()
            };
            let summary = commands::check(
                &trace,
                fstar,
                window_arg(window.as_deref())?,
                tail_ratio,
                &policy,
            )?;
            print_json(&summary);
            Ok(verdict_code(summary.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
