//! Command-line front end. Exit codes: 0 success, 2 invalid input or
//! malformed files, 3 numerical failure, 4 divergence detected (the run
//! still leaves its reports and records behind).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pidmd::Error;
use pidmd_cli::config::{Method, RunConfig};
use pidmd_cli::pipeline::{
    run_compare, run_evaluate, run_generate, run_predict, run_train, PredictOutcome,
};

#[derive(Parser)]
#[command(name = "pidmd", version, about = "Parametric reduced-order modeling pipeline")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Override the configured output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> pidmd::Result<RunConfig> {
        RunConfig::load(&self.config, self.out.as_deref(), self.seed)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the synthetic train and test data plus a hash manifest.
    Generate(Common),
    /// Fit each configured parametric method on the training files.
    Train {
        #[command(flatten)]
        common: Common,
        /// Exit nonzero when fitting records identifiability warnings.
        #[arg(long)]
        strict_warnings: bool,
    },
    /// Predict one test trajectory with one method.
    Predict {
        #[command(flatten)]
        common: Common,
        /// Method to predict with.
        #[arg(long, value_enum)]
        method: Method,
        /// Index into the configured test parameters.
        #[arg(long, default_value_t = 0)]
        test_index: usize,
        /// Prediction transitions; defaults to the configured horizon.
        /// Zero writes only the projected initial state.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Score every configured method at every test parameter.
    Evaluate(Common),
    /// Merge the evaluation reports into tables and plots.
    Compare(Common),
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_)
        | Error::DegenerateInput(_)
        | Error::SpecRejected(_)
        | Error::Io(_)
        | Error::Format(_) => 2,
        Error::NumericalFailure(_) | Error::SingularEigenvalue(_) => 3,
        Error::DivergenceDetected { .. } => 4,
    }
}

fn dispatch(cmd: Cmd) -> pidmd::Result<u8> {
    match cmd {
        Cmd::Generate(common) => {
            let cfg = common.load()?;
            let out = run_generate(&cfg)?;
            println!("config {}", out.config_hash);
            println!(
                "wrote {} train and {} test files",
                out.train_files, out.test_files
            );
            println!("manifest {}", out.manifest_path.display());
            if let Some(gt) = out.ground_truth_path {
                println!("ground truth {}", gt.display());
            }
            Ok(0)
        }
        Cmd::Train {
            common,
            strict_warnings,
        } => {
            let cfg = common.load()?;
            let out = run_train(&cfg)?;
            for (method, path) in &out.trained {
                println!("trained {method} -> {}", path.display());
            }
            for method in &out.deferred {
                println!("deferred {method} (fitted per test trajectory at evaluation time)");
            }
            for (method, warning) in &out.warnings {
                eprintln!("warning [{method}]: {warning}");
            }
            if strict_warnings && !out.warnings.is_empty() {
                eprintln!(
                    "error: {} warning(s) escalated by --strict-warnings",
                    out.warnings.len()
                );
                return Ok(2);
            }
            Ok(0)
        }
        Cmd::Predict {
            common,
            method,
            test_index,
            steps,
        } => {
            let cfg = common.load()?;
            let steps = steps.unwrap_or(cfg.horizon);
            let out = run_predict(&cfg, method, test_index, steps)?;
            if let Some(p) = &out.trajectory_path {
                println!("trajectory {}", p.display());
            }
            println!("record {}", out.record_path.display());
            if let Some(note) = &out.note {
                eprintln!("note: {note}");
            }
            Ok(match out.outcome {
                PredictOutcome::Written => 0,
                PredictOutcome::Failed => 3,
                PredictOutcome::Diverged => 4,
            })
        }
        Cmd::Evaluate(common) => {
            let cfg = common.load()?;
            let out = run_evaluate(&cfg)?;
            println!("evaluated with {} worker(s)", out.workers);
            for (method, path, diverged) in &out.reports {
                println!("report {method} -> {} ({diverged} diverged)", path.display());
            }
            Ok(if out.had_divergence { 4 } else { 0 })
        }
        Cmd::Compare(common) => {
            let cfg = common.load()?;
            let out = run_compare(&cfg)?;
            println!("comparison {}", out.comparison_csv.display());
            println!("summary {}", out.summary_csv.display());
            for p in &out.plots {
                println!("plot {}", p.display());
            }
            for row in &out.comparison.rows {
                match row.median {
                    Some(m) => println!(
                        "{}: median delta {m:.3e} over {} entries ({} diverged)",
                        row.method, row.count, row.diverged
                    ),
                    None => println!("{}: all {} entries diverged", row.method, row.diverged),
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
