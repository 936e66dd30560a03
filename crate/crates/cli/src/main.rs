//! `chebtraj` command-line tool.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use chebtraj::fit::DemoSamples;
use chebtraj::pipeline::{
    estimate_dir_with_observer, evaluate_dirs, fit_demo_to_dir, load_scenario, read_fit_samples,
    simulate_to_dir, EstimateOptions, DEFAULT_DEGREE, MIN_ESTIMATE_DEGREE,
};
use clap::{Parser, Subcommand};

/// Exit code when the estimate was written but the solver did not converge.
const NOT_CONVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "chebtraj",
    version,
    about = "Chebyshev pseudo-spectral trajectory estimation"
)]
struct Cli {
    /// Print progress to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Least-squares Chebyshev fit to noisy samples.
    FitDemo {
        /// CSV with `t,y` columns; defaults to 21 noisy samples of exp(sin 2x + cos 2x).
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        degree: usize,
        /// Noise seed for the built-in samples.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate a scenario and synthesize measurements.
    Simulate {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's noise seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate state and motor-speed trajectories from a simulation directory.
    Estimate {
        /// Directory written by `simulate`.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DEGREE)]
        degree: usize,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Prior standard deviation on motor speeds (rad/s) around the initial
        /// guess; defaults to 5% of hover speed.
        #[arg(long)]
        control_prior_sigma: Option<f64>,
    },
    /// Compare an estimate with ground truth.
    Evaluate {
        /// Directory written by `simulate`.
        #[arg(long)]
        scenario: PathBuf,
        /// Directory written by `estimate`.
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<ExitCode> {
    let verbose = cli.verbose;
    match cli.command {
        Command::FitDemo {
            samples,
            degree,
            seed,
            out,
        } => {
            let (data, builtin) = match samples {
                Some(path) => (read_fit_samples(&path)?, false),
                None => {
                    let mut demo = DemoSamples::default();
                    if let Some(seed) = seed {
                        demo.seed = seed;
                    }
                    (demo.generate()?, true)
                }
            };
            let (_, report) = fit_demo_to_dir(&data, degree, builtin, &out)?;
            println!(
                "degree {} fit to {} samples: rms residual {:.6}",
                report.degree, report.samples, report.rms_residual
            );
            if let Some(dev) = report.max_deviation {
                println!("max deviation from exp(sin 2x + cos 2x): {dev:.6}");
            }
        }
        Command::Simulate {
            scenario,
            out,
            seed,
        } => {
            let mut s = load_scenario(&scenario)?;
            if let Some(seed) = seed {
                s.seed = seed;
            }
            let summary = simulate_to_dir(&s, &out)
                .with_context(|| format!("simulating {}", scenario.display()))?;
            println!(
                "wrote {} truth samples, {} pixel measurements, {} poses to {}",
                summary.samples,
                summary.measurements,
                summary.poses,
                out.display()
            );
        }
        Command::Estimate {
            scenario,
            out,
            degree,
            max_iters,
            control_prior_sigma,
        } => {
            anyhow::ensure!(
                degree >= MIN_ESTIMATE_DEGREE,
                "--degree must be at least {MIN_ESTIMATE_DEGREE}"
            );
            let mut options = EstimateOptions {
                degree,
                control_prior_sigma,
                ..Default::default()
            };
            if let Some(n) = max_iters {
                options.settings.max_iterations = n;
            }
            let outcome = estimate_dir_with_observer(&scenario, &out, &options, |info| {
                if verbose {
                    eprintln!(
                        "iter {:4}  cost {:.6e}  lambda {:.1e}  step {:.3e}",
                        info.iteration, info.cost, info.damping, info.step_norm
                    );
                }
            })
            .with_context(|| format!("estimating from {}", scenario.display()))?;
            let file = &outcome.file;
            println!(
                "{:?} after {} iterations, cost {:.6e}, {:.2} s",
                file.termination,
                file.iterations,
                file.final_cost.total(),
                outcome.report.wall_time
            );
            if !file.converged {
                eprintln!("error: solver did not converge ({:?})", file.termination);
                return Ok(ExitCode::from(NOT_CONVERGED));
            }
        }
        Command::Evaluate {
            scenario,
            estimate,
            out,
        } => {
            let e = evaluate_dirs(&scenario, &estimate, &out)?;
            println!("motor  rpm_error  percent_error");
            for (i, (rpm, pct)) in e.motor.rpm.iter().zip(&e.motor.percent).enumerate() {
                println!("{:5}  {:9.3}  {:13.4}", i + 1, rpm, pct);
            }
            println!(
                "position rmse {:.4} m, attitude rmse {:.4} rad",
                e.position_rmse_m, e.attitude_rmse_rad
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
