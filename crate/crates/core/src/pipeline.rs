//! Directory-level steps shared by the command-line tool and the tests.
//!
//! A simulation directory holds `scenario.json`, `ground_truth.csv`,
//! `measurements.csv` and `poses.csv`. An estimate directory holds
//! `estimate.json`, `trajectory.csv`, `costs.csv` and `timing.json`; the
//! wall time lives in its own file so the others are reproducible byte for
//! byte.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cheb::ChebyshevGrid;
use crate::dynamics::{Quadrotor, STATE_DIM};
use crate::error::{Error, Result};
use crate::estimator::{
    initialize, solve_with_observer, CostBreakdown, EstimateReport, EstimationProblem,
    IterationInfo, SolverSettings, Termination, DEFAULT_DEFECT_VARIANCE,
};
use crate::fit::{demo_function, fit_least_squares, ChebyshevFit};
use crate::io;
use crate::measurement::MeasurementRecord;
use crate::sim::{
    attitude_rmse, motor_speed_error, position_rmse, synth_measurements, synth_poses,
    MotorSpeedError, Scenario, MAX_AMPLITUDE,
};
use crate::trajectory::Trajectory;

pub const SCENARIO_FILE: &str = "scenario.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const MEASUREMENTS_FILE: &str = "measurements.csv";
pub const POSES_FILE: &str = "poses.csv";
pub const ESTIMATE_FILE: &str = "estimate.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const COSTS_FILE: &str = "costs.csv";
pub const TIMING_FILE: &str = "timing.json";
pub const EVALUATION_CSV: &str = "evaluation.csv";
pub const EVALUATION_JSON: &str = "evaluation.json";

/// Sample rate of the exported estimate.
pub const EXPORT_RATE_HZ: f64 = 100.0;

/// Counts of what a simulation wrote.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationSummary {
    pub samples: usize,
    pub measurements: usize,
    pub poses: usize,
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Scenario::from_json(&text).map_err(|e| match e {
        Error::Json(j) => Error::Format {
            path: path.display().to_string(),
            message: j.to_string(),
        },
        other => other,
    })
}

pub fn simulate_to_dir(scenario: &Scenario, out: &Path) -> Result<SimulationSummary> {
    let truth = scenario.ground_truth()?;
    let observations = synth_measurements(&truth, scenario)?;
    let poses = synth_poses(&truth, scenario)?;
    std::fs::create_dir_all(out)?;
    io::write_json(&out.join(SCENARIO_FILE), scenario)?;
    io::write_ground_truth(&out.join(GROUND_TRUTH_FILE), &truth)?;
    io::write_measurements(&out.join(MEASUREMENTS_FILE), &observations)?;
    io::write_poses(&out.join(POSES_FILE), &poses)?;
    Ok(SimulationSummary {
        samples: truth.times().len(),
        measurements: observations.len(),
        poses: poses.len(),
    })
}

/// Knobs of the estimation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub degree: usize,
    pub settings: SolverSettings,
    pub defect_variance: f64,
    /// Prior standard deviation on motor speeds in rad/s. `None` uses
    /// [`MAX_AMPLITUDE`] times the hover speed.
    pub control_prior_sigma: Option<f64>,
}

/// Default polynomial degree.
pub const DEFAULT_DEGREE: usize = 128;

/// Smallest degree accepted for quadrotor estimation.
pub const MIN_ESTIMATE_DEGREE: usize = 4;

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            degree: DEFAULT_DEGREE,
            settings: SolverSettings::default(),
            defect_variance: DEFAULT_DEFECT_VARIANCE,
            control_prior_sigma: None,
        }
    }
}

/// Serialized form of an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateFile {
    pub degree: usize,
    pub t0: f64,
    pub tf: f64,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub measurements_used: usize,
    /// Records dropped because the initial guess put the landmark behind the camera.
    pub measurements_skipped: usize,
    pub cost_history: Vec<f64>,
    pub final_cost: CostBreakdown,
    pub node_times: Vec<f64>,
    /// One entry per node, each a full state column.
    pub state_nodes: Vec<Vec<f64>>,
    pub control_nodes: Vec<Vec<f64>>,
}

impl EstimateFile {
    fn from_report(report: &EstimateReport, used: usize, skipped: usize) -> Self {
        let grid = report.state.grid();
        let columns = |t: &Trajectory| {
            (0..grid.len())
                .map(|j| t.column(j).iter().copied().collect())
                .collect()
        };
        Self {
            degree: grid.degree(),
            t0: grid.t0(),
            tf: grid.tf(),
            converged: report.converged(),
            termination: report.termination,
            iterations: report.iterations,
            measurements_used: used,
            measurements_skipped: skipped,
            cost_history: report.cost_history.clone(),
            final_cost: report.final_cost,
            node_times: grid.nodes().to_vec(),
            state_nodes: columns(&report.state),
            control_nodes: columns(&report.control),
        }
    }

    /// Rebuilds the state and control trajectories.
    pub fn trajectories(&self) -> Result<(Trajectory, Trajectory)> {
        let grid = ChebyshevGrid::new(self.degree, self.t0, self.tf)?;
        let matrix = |cols: &[Vec<f64>]| -> Result<DMatrix<f64>> {
            if cols.len() != grid.len() || cols.is_empty() {
                return Err(Error::Dimension("node count does not match degree".into()));
            }
            let rows = cols[0].len();
            if cols.iter().any(|c| c.len() != rows) {
                return Err(Error::Dimension("ragged node columns".into()));
            }
            Ok(DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]))
        };
        let (xs, us) = (matrix(&self.state_nodes)?, matrix(&self.control_nodes)?);
        Ok((
            Trajectory::new(grid.clone(), xs)?,
            Trajectory::new(grid, us)?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Timing {
    wall_time_s: f64,
}

/// Uniform export times over `[t0, tf]`, always including `tf`.
pub fn export_times(t0: f64, tf: f64, rate: f64) -> Vec<f64> {
    let mut times: Vec<f64> = (0..)
        .map(|k| t0 + k as f64 / rate)
        .take_while(|t| *t < tf - 1e-9)
        .collect();
    times.push(tf);
    times
}

/// Output of [`estimate_dir`].
#[derive(Debug, Clone)]
pub struct EstimateOutcome {
    pub report: EstimateReport,
    pub file: EstimateFile,
}

/// Builds the quadrotor problem for a simulation directory.
pub fn build_problem(
    sim_dir: &Path,
    options: &EstimateOptions,
) -> Result<(EstimationProblem<Quadrotor>, Trajectory, Trajectory, usize)> {
    if options.degree < MIN_ESTIMATE_DEGREE {
        return Err(Error::InvalidDegree(options.degree));
    }
    let scenario = load_scenario(&sim_dir.join(SCENARIO_FILE))?;
    let observations = io::read_measurements(&sim_dir.join(MEASUREMENTS_FILE))?;
    let poses = io::read_poses(&sim_dir.join(POSES_FILE))?;
    let rig = scenario.camera.rig()?;
    let model = scenario.model()?;
    let grid = ChebyshevGrid::new(options.degree, 0.0, scenario.duration_s)?;
    let (x0, u0) = initialize(&grid, &scenario.params, &poses)?;

    let mut records = Vec::with_capacity(observations.len());
    let mut skipped = 0;
    for o in &observations {
        let record: MeasurementRecord = o.to_record(rig)?;
        match record.residual(&x0, &u0) {
            Ok(_) => records.push(record),
            Err(Error::Cheirality { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if records.is_empty() {
        return Err(Error::InsufficientObservations(
            "no usable measurements".into(),
        ));
    }
    let q = DMatrix::identity(STATE_DIM, STATE_DIM) * options.defect_variance;
    let problem = EstimationProblem::new(grid, model, q, records)?
        .with_control_prior(
            &u0,
            options
                .control_prior_sigma
                .unwrap_or(MAX_AMPLITUDE * scenario.params.hover_speed()),
        )?
        .with_settings(options.settings)?;
    Ok((problem, x0, u0, skipped))
}

/// Runs initialization and the solver, and writes the estimate files.
pub fn estimate_dir(
    sim_dir: &Path,
    out: &Path,
    options: &EstimateOptions,
) -> Result<EstimateOutcome> {
    estimate_dir_with_observer(sim_dir, out, options, |_| {})
}

/// [`estimate_dir`] reporting every accepted solver step to `observer`.
pub fn estimate_dir_with_observer<F: FnMut(&IterationInfo)>(
    sim_dir: &Path,
    out: &Path,
    options: &EstimateOptions,
    observer: F,
) -> Result<EstimateOutcome> {
    let (problem, x0, u0, skipped) = build_problem(sim_dir, options)?;
    let report = solve_with_observer(&problem, &x0, &u0, observer)?;
    let file = EstimateFile::from_report(&report, problem.measurements().len(), skipped);

    std::fs::create_dir_all(out)?;
    io::write_json(&out.join(ESTIMATE_FILE), &file)?;
    io::write_json(
        &out.join(TIMING_FILE),
        &Timing {
            wall_time_s: report.wall_time,
        },
    )?;
    let grid = problem.grid();
    let samples = export_times(grid.t0(), grid.tf(), EXPORT_RATE_HZ)
        .into_iter()
        .map(|t| Ok((t, report.state.eval(t)?, report.control.eval(t)?)))
        .collect::<Result<Vec<_>>>()?;
    io::write_samples(
        &out.join(TRAJECTORY_FILE),
        samples.iter().map(|(t, x, u)| (*t, x, u)),
    )?;
    let mut costs = csv::Writer::from_path(out.join(COSTS_FILE))?;
    costs.write_record(["iteration", "cost"])?;
    for (i, c) in report.cost_history.iter().enumerate() {
        costs.write_record([i.to_string(), c.to_string()])?;
    }
    costs.flush()?;
    Ok(EstimateOutcome { report, file })
}

/// Error table of an estimate against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub samples: usize,
    pub motor: MotorSpeedError,
    pub position_rmse_m: f64,
    pub attitude_rmse_rad: f64,
}

/// Compares `trajectory.csv` of an estimate with the simulation's ground truth
/// at every exported time inside the truth's support.
pub fn evaluate_dirs(sim_dir: &Path, estimate_dir: &Path, out: &Path) -> Result<Evaluation> {
    let scenario = load_scenario(&sim_dir.join(SCENARIO_FILE))?;
    let truth = io::read_ground_truth(&sim_dir.join(GROUND_TRUTH_FILE), &scenario.model()?)?;
    let (times, states, controls) = io::read_samples(&estimate_dir.join(TRAJECTORY_FILE))?;
    let mut pairs_x = (Vec::new(), Vec::new());
    let mut pairs_u = (Vec::new(), Vec::new());
    for ((t, x), u) in times.iter().zip(states).zip(controls) {
        if *t < truth.t0() || *t > truth.tf() {
            continue;
        }
        pairs_x.0.push(truth.state_at(*t)?);
        pairs_x.1.push(x);
        pairs_u.0.push(truth.control_at(*t)?);
        pairs_u.1.push(u);
    }
    if pairs_x.0.is_empty() {
        return Err(Error::InsufficientObservations(
            "estimate and ground truth do not overlap in time".into(),
        ));
    }
    let evaluation = Evaluation {
        samples: pairs_x.0.len(),
        motor: motor_speed_error(&pairs_u.0, &pairs_u.1)?,
        position_rmse_m: position_rmse(&pairs_x.0, &pairs_x.1)?,
        attitude_rmse_rad: attitude_rmse(&pairs_x.0, &pairs_x.1)?,
    };
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join(EVALUATION_CSV))?;
    w.write_record(["motor", "rpm_error", "percent_error"])?;
    for (i, (rpm, pct)) in evaluation
        .motor
        .rpm
        .iter()
        .zip(&evaluation.motor.percent)
        .enumerate()
    {
        w.write_record([(i + 1).to_string(), rpm.to_string(), pct.to_string()])?;
    }
    w.flush()?;
    io::write_json(&out.join(EVALUATION_JSON), &evaluation)?;
    Ok(evaluation)
}

/// Summary of the fit demo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub degree: usize,
    pub samples: usize,
    pub rms_residual: f64,
    /// Largest deviation from the demo function on a dense grid; absent for
    /// user-supplied samples.
    pub max_deviation: Option<f64>,
}

/// Fits, then writes `fit_nodes.csv`, `fit_dense.csv` and `fit_report.json`.
pub fn fit_demo_to_dir(
    samples: &[(f64, f64)],
    degree: usize,
    builtin: bool,
    out: &Path,
) -> Result<(ChebyshevFit, FitReport)> {
    let (t0, tf) = if builtin {
        (-1.0, 1.0)
    } else {
        let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        let hi = samples
            .iter()
            .map(|s| s.0)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let fit = fit_least_squares(samples, degree, t0, tf)?;
    let dense: Vec<(f64, f64)> = (0..=400)
        .map(|k| {
            let t = if k == 400 {
                tf
            } else {
                t0 + (tf - t0) * k as f64 / 400.0
            };
            fit.eval(t).map(|y| (t, y))
        })
        .collect::<Result<_>>()?;
    let max_deviation = builtin.then(|| {
        dense
            .iter()
            .map(|(t, y)| (y - demo_function(*t)).abs())
            .fold(0.0, f64::max)
    });
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("fit_nodes.csv"))?;
    w.write_record(["t", "value"])?;
    for (t, v) in fit.grid().nodes().iter().zip(fit.node_values().iter()) {
        w.write_record([io::time(*t), v.to_string()])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("fit_dense.csv"))?;
    w.write_record(["t", "fit"])?;
    for (t, y) in &dense {
        w.write_record([io::time(*t), y.to_string()])?;
    }
    w.flush()?;
    let report = FitReport {
        degree,
        samples: samples.len(),
        rms_residual: fit.rms_residual(),
        max_deviation,
    };
    io::write_json(&out.join("fit_report.json"), &report)?;
    Ok((fit, report))
}

/// Reads `t,y` samples.
pub fn read_fit_samples(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|f| f.trim().parse().ok())
                .ok_or_else(|| Error::Format {
                    path: path.display().to_string(),
                    message: format!("line {}: expected two numeric fields", i + 2),
                })
        };
        out.push((parse(0)?, parse(1)?));
    }
    Ok(out)
}
