use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use median_consensus::cli::{self, RunArgs, SweepArgs, ValidateArgs};
use median_consensus::Result;

/// Dynamic median consensus simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write trace, metrics and plot data.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's loss seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Ensemble size (seeds seed, seed+1, ...).
        #[arg(long)]
        runs: Option<usize>,
        /// Reject any violated stability condition.
        #[arg(long)]
        strict: bool,
        /// Quantization step applied to broadcast values.
        #[arg(long)]
        quantize: Option<f64>,
    },
    /// Run ensembles over a grid of parameter values.
    Sweep {
        #[arg(long, visible_alias = "scenario")]
        sweep: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        strict: bool,
    },
    /// Check a scenario's parameters against the stability conditions.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        strict: bool,
    },
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            scenario,
            out,
            seed,
            runs,
            strict,
            quantize,
        } => {
            let outcome = cli::cmd_run(&RunArgs {
                scenario,
                out,
                seed,
                runs,
                strict,
                quantize,
            })?;
            print!("{}", outcome.report);
            let m = &outcome.metrics;
            let show = |t: Option<usize>| t.map_or("not reached".to_string(), |t| t.to_string());
            println!("settling time:      {}", show(m.settling_time));
            println!("convergence time:   {}", show(m.convergence_time));
            println!("steady-state error: {:.6}", m.epsilon_ss);
            if let Some(p) = &outcome.ensemble {
                if let Some(s) = p.settling {
                    println!(
                        "ensemble of {}: settling time {:.1} +/- {:.1}",
                        p.runs, s.mean, s.std_dev
                    );
                }
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Sweep { sweep, out, strict } => {
            let outcome = cli::cmd_sweep(&SweepArgs { sweep, out, strict })?;
            println!(
                "{} points, wrote {}",
                outcome.points.len(),
                outcome.summary.display()
            );
            Ok(())
        }
        Command::Validate { scenario, strict } => {
            let report = cli::cmd_validate(&ValidateArgs { scenario, strict })?;
            print!("{report}");
            if report.passed() {
                Ok(())
            } else {
                let failed: Vec<_> = report.failures().map(|c| c.condition.label()).collect();
                Err(median_consensus::Error::ConstraintViolation {
                    condition: failed.join(", "),
                })
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = execute(cli.command);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(cli::exit_code(&result) as u8)
}
