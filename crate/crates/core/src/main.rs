use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use symloss::calibration::{check_calibration, counterexample_table, excess_risk_bound};
use symloss::experiment::{losses_table, run_to_dir, ExperimentGrid};
use symloss::{verify, Error, Loss, NoiseSpec};

#[derive(Parser)]
#[command(name = "symloss", version, about = "Symmetric losses for learning from corrupted labels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the loss zoo with its properties.
    Losses,
    /// Calibration report for one loss, e.g. `sigmoid` or `barrier(b=200,r=50)`.
    Check {
        loss: Loss,
        /// Also convert this surrogate excess risk into a zero-one bound.
        #[arg(long)]
        excess: Option<f64>,
    },
    /// Run a verification suite: ber, auc, calibration or counterexample.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the three-point counterexample table as CSV.
    Counterexample {
        #[arg(long)]
        json: bool,
    },
    /// Run an experiment grid from a config (or manifest) JSON file.
    Experiment {
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long, env = "SYMLOSS_JOBS", default_value_t = 1)]
        jobs: usize,
        /// Override the root seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the data source: libsvm:<path>, csv:<path>:<labelcol> or gauss:<d>:<sep>.
        #[arg(long)]
        data: Option<String>,
        /// Run a single noise level instead of the config's grid.
        #[arg(long, requires = "pi_prime")]
        pi: Option<f64>,
        #[arg(long, requires = "pi")]
        pi_prime: Option<f64>,
        /// Also write one-sided paired t-tests against the best loss.
        #[arg(long)]
        ttest: bool,
    },
}

/// Writes to stdout; a reader that hung up early (`| head`) is not an error.
fn emit(text: &str, newline: bool) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    let r = out
        .write_all(text.as_bytes())
        .and_then(|_| if newline { out.write_all(b"\n") } else { Ok(()) })
        .and_then(|_| out.flush());
    match r {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Losses => {
            emit(&losses_table(), false)?;
            Ok(true)
        }
        Command::Check { loss, excess } => {
            let report = check_calibration(&loss);
            let mut value = serde_json::to_value(&report)?;
            value["symmetry_constant"] = serde_json::json!(loss.symmetry_constant());
            value["convex"] = serde_json::json!(loss.is_convex());
            value["recovers_eta"] = serde_json::json!(loss.recovers_eta());
            value["minimizer"] = serde_json::json!(loss.minimizer_formula());
            if let Some(e) = excess {
                value["zero_one_excess_bound"] = serde_json::json!(excess_risk_bound(&loss, e)?);
            }
            emit(&serde_json::to_string_pretty(&value)?, true)?;
            Ok(true)
        }
        Command::Verify { suite, seed } => {
            let reports = verify::run_suite(&suite, seed)?;
            emit(&serde_json::to_string_pretty(&reports)?, true)?;
            Ok(reports.iter().all(|r| r.passed()))
        }
        Command::Counterexample { json } => {
            let t = counterexample_table();
            if json {
                emit(&serde_json::to_string_pretty(&t)?, true)?;
            } else {
                emit(&t.to_csv(), false)?;
            }
            Ok(true)
        }
        Command::Experiment { config, out, jobs, seed, data, pi, pi_prime, ttest } => {
            let mut grid = ExperimentGrid::from_path(&config)?;
            if let Some(s) = seed {
                grid.seed = s;
            }
            if let Some(d) = data {
                grid.data = d;
            }
            if let (Some(pi), Some(pip)) = (pi, pi_prime) {
                grid.noise = vec![NoiseSpec::new(pi, pip)?];
            }
            grid.validate()?;
            let manifest = run_to_dir(&grid, &out, jobs, ttest)?;
            emit(&serde_json::to_string_pretty(&manifest.outputs)?, true)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
