//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use chebtraj::cheb::{chebyshev_t, chebyshev_t_derivative, ChebyshevGrid};
use chebtraj::dynamics::{Dynamics, LinearModel, Quadrotor, QuadrotorParameters, CHART_LIMIT};
use chebtraj::fit::{demo_function, fit_least_squares, DemoSamples};
use chebtraj::kron::{kron_weights, vec};
use chebtraj::measurement::{MeasurementModel, MeasurementRecord};
use chebtraj::pipeline::{estimate_dir, evaluate_dirs, simulate_to_dir, EstimateOptions};
use chebtraj::sim::Scenario;
use chebtraj::{solve, EstimationProblem, Trajectory};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion<'a> = (&'static str, Duration, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fit_demo() -> Outcome {
    let samples = DemoSamples::default().generate().unwrap();
    let fit = fit_least_squares(&samples, 6, -1.0, 1.0).unwrap();
    let max_dev = (0..=1000)
        .map(|k| -1.0 + 2.0 * k as f64 / 1000.0)
        .map(|x| (fit.eval(x).unwrap() - demo_function(x)).abs())
        .fold(0.0, f64::max);
    let rms = fit.rms_residual();
    outcome(
        (0.07..=0.14).contains(&rms) && max_dev < 0.25,
        format!("rms residual {rms:.4}, max deviation {max_dev:.4}"),
    )
}

fn differentiation() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [4, 8, 16, 32] {
        let grid = ChebyshevGrid::new(n, -1.0, 1.0).unwrap();
        for k in 0..=n {
            let samples: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|x| chebyshev_t(k, *x).unwrap())
                .collect();
            let d = grid.differentiation_matrix().apply(&samples);
            for (x, dv) in grid.nodes().iter().zip(&d) {
                worst = worst.max((dv - chebyshev_t_derivative(k, *x)).abs());
            }
        }
    }
    outcome(worst < 1e-9, format!("max abs error {worst:.2e}"))
}

fn spectral_convergence() -> Outcome {
    let errors: Vec<f64> = [4, 8, 16, 32]
        .iter()
        .map(|&n| {
            let grid = ChebyshevGrid::new(n, -1.0, 1.0).unwrap();
            let values: Vec<f64> = grid.nodes().iter().map(|x| demo_function(*x)).collect();
            (0..=2000)
                .map(|k| -1.0 + 2.0 * k as f64 / 2000.0)
                .map(|x| (grid.weights(x).unwrap().interpolate(&values) - demo_function(x)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    outcome(
        ratios.iter().all(|r| *r >= 10.0),
        format!("errors {}, ratios {ratios:.1?}", sci(&errors)),
    )
}

fn kronecker_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (r, c, m) = (
            rng.random_range(1..8),
            rng.random_range(1..13),
            rng.random_range(1..20),
        );
        let h = DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
        let delta = DMatrix::from_fn(c, m, |_, _| rng.random_range(-1.0..1.0));
        let w = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let direct = &h * &delta * &w;
        let structured = kron_weights(w.as_slice(), &h) * vec(&delta);
        worst = worst.max((&direct - structured).norm() / direct.norm().max(f64::MIN_POSITIVE));
    }
    outcome(worst < 1e-12, format!("max relative error {worst:.2e}"))
}

fn central_difference<D: Dynamics>(
    model: &D,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let column = |a: DVector<f64>, b: DVector<f64>, xa: bool, h: f64| {
        let (fa, fb) = if xa {
            (
                model.derivative(&a, u, 0.0).unwrap(),
                model.derivative(&b, u, 0.0).unwrap(),
            )
        } else {
            (
                model.derivative(x, &a, 0.0).unwrap(),
                model.derivative(x, &b, 0.0).unwrap(),
            )
        };
        (fa - fb) / (2.0 * h)
    };
    let mut fx = DMatrix::zeros(x.len(), x.len());
    for k in 0..x.len() {
        let h = 1e-6 * x[k].abs().max(1.0);
        let (mut a, mut b) = (x.clone(), x.clone());
        a[k] += h;
        b[k] -= h;
        fx.set_column(k, &column(a, b, true, h));
    }
    let mut fu = DMatrix::zeros(x.len(), u.len());
    for k in 0..u.len() {
        let h = 1e-6 * u[k].abs().max(1.0);
        let (mut a, mut b) = (u.clone(), u.clone());
        a[k] += h;
        b[k] -= h;
        fu.set_column(k, &column(a, b, false, h));
    }
    (fx, fu)
}

fn dynamics_jacobians() -> Outcome {
    let params = QuadrotorParameters::default();
    let model = Quadrotor::new(params).unwrap();
    let hover = params.hover_speed();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let mut x = DVector::from_fn(12, |_, _| rng.random_range(-3.0..3.0));
        let axis = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0)).normalize();
        let angle = rng.random_range(0.0..0.9 * CHART_LIMIT);
        x.rows_mut(3, 3).copy_from(&(axis * angle));
        let u = DVector::from_fn(4, |_, _| hover * rng.random_range(0.5..1.5));
        let (fx, fu) = model.jacobians(&x, &u, 0.0).unwrap();
        let (nx, nu) = central_difference(&model, &x, &u);
        worst = worst
            .max((&fx - &nx).norm() / nx.norm())
            .max((&fu - &nu).norm() / nu.norm());
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.2e}"))
}

fn collocation_consistency() -> Outcome {
    let scenario = Scenario::desk();
    let truth = scenario.ground_truth().unwrap();
    let model = scenario.model().unwrap();
    let rms: Vec<f64> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let grid = ChebyshevGrid::new(n, truth.t0(), truth.tf()).unwrap();
            let xs: Vec<DVector<f64>> = grid
                .nodes()
                .iter()
                .map(|t| truth.state_at(*t).unwrap())
                .collect();
            let x = Trajectory::new(grid.clone(), DMatrix::from_columns(&xs)).unwrap();
            let mut sum = 0.0;
            for (j, t) in grid.nodes().iter().enumerate() {
                let f = model
                    .derivative(&xs[j], &truth.control_at(*t).unwrap(), *t)
                    .unwrap();
                sum += (x.node_derivative(j) - f).norm_squared();
            }
            (sum / (grid.len() * xs[0].len()) as f64).sqrt()
        })
        .collect();
    let decreasing = rms.windows(2).all(|w| w[1] < w[0]);
    outcome(
        decreasing && rms[2] < 1e-3,
        format!("defect rms at N = 32, 64, 128: {}", sci(&rms)),
    )
}

fn linear_recovery() -> Outcome {
    // p(t) = t⁵ − 2t³ + t on [0, 1]; the control is p''.
    let truth = |t: f64| {
        (
            t.powi(5) - 2.0 * t.powi(3) + t,
            5.0 * t.powi(4) - 6.0 * t * t + 1.0,
            20.0 * t.powi(3) - 12.0 * t,
        )
    };
    let grid = ChebyshevGrid::new(8, 0.0, 1.0).unwrap();
    let records = (0..50)
        .map(|k| {
            let t = k as f64 / 49.0;
            MeasurementRecord::isotropic(
                t,
                DVector::from_element(1, truth(t).0),
                0.01,
                MeasurementModel::PoseDirect {
                    components: vec![0],
                },
            )
            .unwrap()
        })
        .collect();
    let problem = EstimationProblem::new(
        grid.clone(),
        LinearModel::double_integrator(),
        DMatrix::identity(2, 2) * 1e-4,
        records,
    )
    .unwrap();
    let x0 = Trajectory::constant(grid.clone(), &DVector::zeros(2)).unwrap();
    let u0 = Trajectory::constant(grid.clone(), &DVector::zeros(1)).unwrap();
    let report = solve(&problem, &x0, &u0).unwrap();
    let mut worst: f64 = 0.0;
    for j in 0..=200 {
        let t = j as f64 / 200.0;
        let (p, v, a) = truth(t);
        let x = report.state.eval(t).unwrap();
        let u = report.control.eval(t).unwrap();
        worst = worst
            .max((x[0] - p).abs())
            .max((x[1] - v).abs())
            .max((u[0] - a).abs());
    }
    let monotone = report.cost_history.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        report.converged() && monotone && worst < 1e-6,
        format!(
            "max error {worst:.2e}, {:?} after {} iterations, monotone cost {monotone}",
            report.termination, report.iterations
        ),
    )
}

fn end_to_end(root: &Path) -> Outcome {
    let sim = root.join("sim");
    let est = root.join("est");
    simulate_to_dir(&Scenario::desk(), &sim).unwrap();
    let options = EstimateOptions {
        degree: 64,
        ..Default::default()
    };
    let run = estimate_dir(&sim, &est, &options).unwrap();
    let eval = evaluate_dirs(&sim, &est, &root.join("eval")).unwrap();
    let motors_ok = eval.motor.percent.iter().all(|p| *p < 2.0);
    outcome(
        run.file.converged && motors_ok && eval.position_rmse_m < 0.05,
        format!(
            "{:?} after {} iterations, motor error % {:.3?}, position rmse {:.4} m",
            run.file.termination, run.file.iterations, eval.motor.percent, eval.position_rmse_m
        ),
    )
}

/// The same run with the generic control prior of 1e3 per unit; reported,
/// not judged.
fn end_to_end_generic_prior(root: &Path) -> String {
    let sim = root.join("sim");
    let est = root.join("est_generic");
    let mut options = EstimateOptions {
        degree: 64,
        control_prior_sigma: Some(chebtraj::estimator::CONTROL_PRIOR_SIGMA),
        ..Default::default()
    };
    options.settings.max_iterations = 100;
    let run = estimate_dir(&sim, &est, &options).unwrap();
    let eval = evaluate_dirs(&sim, &est, &root.join("eval_generic")).unwrap();
    format!(
        "control prior sigma 1e3: {:?} after {} iterations, motor error % {:.3?}, position rmse {:.4} m",
        run.file.termination, run.file.iterations, eval.motor.percent, eval.position_rmse_m
    )
}

fn determinism(root: &Path) -> Outcome {
    let sim = root.join("sim_again");
    let est = root.join("est_again");
    simulate_to_dir(&Scenario::desk(), &sim).unwrap();
    let options = EstimateOptions {
        degree: 64,
        ..Default::default()
    };
    estimate_dir(&sim, &est, &options).unwrap();
    let pairs = [
        ("sim", "scenario.json"),
        ("sim", "ground_truth.csv"),
        ("sim", "measurements.csv"),
        ("sim", "poses.csv"),
        ("est", "estimate.json"),
        ("est", "trajectory.csv"),
        ("est", "costs.csv"),
    ];
    let differing: Vec<&str> = pairs
        .iter()
        .filter(|(dir, file)| {
            let again = if *dir == "sim" { &sim } else { &est };
            std::fs::read(root.join(dir).join(file)).unwrap()
                != std::fs::read(again.join(file)).unwrap()
        })
        .map(|(_, f)| *f)
        .collect();
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} files byte-identical", pairs.len())
        } else {
            format!("differing: {differing:?}")
        },
    )
}

fn main() -> ExitCode {
    // Runs under `cargo test`, which passes harness flags; listing must not
    // trigger the long criteria.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let criteria: Vec<Criterion> = vec![
        (
            "1 spectral approximation",
            Duration::from_secs(1),
            Box::new(fit_demo),
        ),
        (
            "2 differentiation oracle",
            Duration::from_secs(1),
            Box::new(differentiation),
        ),
        (
            "3 spectral convergence",
            Duration::from_secs(1),
            Box::new(spectral_convergence),
        ),
        (
            "4 kronecker identity",
            Duration::from_secs(1),
            Box::new(kronecker_identity),
        ),
        (
            "5 dynamics jacobians",
            Duration::from_secs(5),
            Box::new(dynamics_jacobians),
        ),
        (
            "6 collocation consistency",
            Duration::from_secs(30),
            Box::new(collocation_consistency),
        ),
        (
            "7 linear exact recovery",
            Duration::from_secs(5),
            Box::new(linear_recovery),
        ),
        (
            "8 end-to-end quadrotor",
            Duration::from_secs(300),
            Box::new(|| end_to_end(root)),
        ),
        (
            "9 determinism",
            Duration::from_secs(600),
            Box::new(|| determinism(root)),
        ),
    ];
    let mut failures = 0;
    for (name, limit, check) in &criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed <= *limit;
        failures += usize::from(!pass);
        println!(
            "{} criterion {name}: {} ({:.2} s, limit {} s)",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!(
        "INFO criterion 8 variant, {}",
        end_to_end_generic_prior(root)
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
