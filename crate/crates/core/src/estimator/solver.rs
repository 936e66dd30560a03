//! Levenberg–Marquardt over the stacked node values.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CostBreakdown, EstimationProblem};
use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Damping beyond which no descent step is expected to exist.
const MAX_DAMPING: f64 = 1e16;

/// `‖∇E‖∞ ≤ STATIONARITY·(1 + E)` counts as a minimizer.
pub const STATIONARITY: f64 = 1e-6;

/// Infinity norm of `∇E = 2Jᵀr`.
pub fn gradient_norm(ne: &super::NormalEquations) -> f64 {
    2.0 * ne.gradient.amax()
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    StepTolerance,
    CostTolerance,
    ZeroCost,
    /// No descent step exists and the gradient is already negligible.
    Stationary,
    MaxIterations,
    DampingLimit,
}

#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub state: Trajectory,
    pub control: Trajectory,
    /// Cost at the initial guess followed by the cost after each accepted step.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
    pub final_cost: CostBreakdown,
    /// Seconds spent inside [`solve`]; zero where no clock is available.
    pub wall_time: f64,
}

impl EstimateReport {
    pub fn converged(&self) -> bool {
        !matches!(
            self.termination,
            Termination::MaxIterations | Termination::DampingLimit
        )
    }
}

#[cfg(not(target_arch = "wasm32"))]
struct Clock(std::time::Instant);
#[cfg(not(target_arch = "wasm32"))]
impl Clock {
    fn start() -> Self {
        Self(std::time::Instant::now())
    }
    fn elapsed(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
#[cfg(target_arch = "wasm32")]
struct Clock;
#[cfg(target_arch = "wasm32")]
impl Clock {
    fn start() -> Self {
        Self
    }
    fn elapsed(&self) -> f64 {
        0.0
    }
}

/// Solves `(H + λ·diag(H))·δ = −g`.
///
/// The system is symmetrically scaled to unit diagonal before factoring;
/// the unknowns mix metres, radians and motor speeds, and without the
/// scaling the factorization loses most of its digits.
fn damped_step(h: &DMatrix<f64>, g: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let floor = 1e-12 * h.diagonal().amax().max(1.0);
    let diag = h.diagonal().map(|d| d.max(floor));
    let scale = diag.map(|d| 1.0 / d.sqrt());
    let mut a = h.clone();
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            a[(i, j)] *= scale[i] * scale[j];
        }
    }
    for i in 0..a.nrows() {
        a[(i, i)] = h[(i, i)] * scale[i] * scale[i] + lambda;
    }
    let chol = a.cholesky()?;
    let step = -chol.solve(&g.component_mul(&scale)).component_mul(&scale);
    step.iter().all(|v| v.is_finite()).then_some(step)
}

/// Progress of one accepted iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationInfo {
    pub iteration: usize,
    pub cost: f64,
    pub damping: f64,
    pub step_norm: f64,
}

/// Minimizes the problem objective starting from `(x0, u0)`.
///
/// A trial step is accepted only if it lowers the total cost, so the
/// recorded history is non-increasing. Trial points where a residual cannot
/// be evaluated (e.g. a landmark behind the camera) count as rejected.
pub fn solve<D: Dynamics>(
    problem: &EstimationProblem<D>,
    x0: &Trajectory,
    u0: &Trajectory,
) -> Result<EstimateReport> {
    solve_with_observer(problem, x0, u0, |_| {})
}

/// [`solve`] with a callback after every accepted step.
pub fn solve_with_observer<D, F>(
    problem: &EstimationProblem<D>,
    x0: &Trajectory,
    u0: &Trajectory,
    mut observer: F,
) -> Result<EstimateReport>
where
    D: Dynamics,
    F: FnMut(&IterationInfo),
{
    let clock = Clock::start();
    let settings = *problem.settings();
    if x0.dim() != problem.state_dim()
        || u0.dim() != problem.control_dim()
        || x0.grid() != problem.grid()
    {
        return Err(Error::Dimension(
            "initial guess does not match the problem".into(),
        ));
    }
    let rows: usize = problem
        .measurements()
        .iter()
        .map(|m| m.dim())
        .sum::<usize>()
        + problem.grid().len() * problem.state_dim()
        + problem.priors().iter().map(|p| p.mean.len()).sum::<usize>();
    if rows < problem.unknowns() {
        return Err(Error::Underdetermined {
            samples: rows,
            unknowns: problem.unknowns(),
        });
    }

    let mut x = x0.clone();
    let mut u = u0.clone();
    let mut ne = problem.normal_equations(&x, &u)?;
    if !ne.cost.is_finite() {
        return Err(Error::NonFinite(ne.cost));
    }
    let mut history = vec![ne.cost];
    let mut lambda = settings.initial_damping;
    let mut iterations = 0;
    let termination = loop {
        if ne.cost == 0.0 {
            break Termination::ZeroCost;
        }
        if iterations >= settings.max_iterations {
            break Termination::MaxIterations;
        }
        iterations += 1;

        let mut accepted = None;
        while lambda <= MAX_DAMPING {
            let Some(step) = damped_step(&ne.hessian, &ne.gradient, lambda) else {
                lambda *= settings.damping_factor;
                continue;
            };
            let theta = problem.stack(&x, &u) + &step;
            let trial = problem.unstack(&theta).and_then(|(xt, ut)| {
                let cost = problem.cost(&xt, &ut)?.total();
                Ok((xt, ut, cost))
            });
            match trial {
                Ok((xt, ut, cost)) if cost.is_finite() && cost < ne.cost => {
                    lambda = (lambda / settings.damping_factor).max(1e-15);
                    accepted = Some((xt, ut, step.norm()));
                    break;
                }
                _ => lambda *= settings.damping_factor,
            }
        }
        let Some((xt, ut, step_norm)) = accepted else {
            if gradient_norm(&ne) <= STATIONARITY * (1.0 + ne.cost) {
                break Termination::Stationary;
            }
            break Termination::DampingLimit;
        };
        let previous = ne.cost;
        x = xt;
        u = ut;
        ne = problem.normal_equations(&x, &u)?;
        history.push(ne.cost);
        observer(&IterationInfo {
            iteration: iterations,
            cost: ne.cost,
            damping: lambda,
            step_norm,
        });
        if step_norm < settings.step_tolerance {
            break Termination::StepTolerance;
        }
        if (previous - ne.cost) <= settings.cost_tolerance * previous {
            break Termination::CostTolerance;
        }
    };

    let final_cost = problem.cost(&x, &u)?;
    Ok(EstimateReport {
        state: x,
        control: u,
        cost_history: history,
        iterations,
        termination,
        final_cost,
        wall_time: clock.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheb::ChebyshevGrid;
    use crate::dynamics::LinearModel;
    use crate::measurement::{MeasurementModel, MeasurementRecord};

    // Double integrator driven by u(t) = 6t − 2 from rest at the origin:
    // p(t) = t³ − t², v(t) = 3t² − 2t.
    fn truth(t: f64) -> (f64, f64, f64) {
        (t * t * t - t * t, 3.0 * t * t - 2.0 * t, 6.0 * t - 2.0)
    }

    fn problem(samples: usize, noise: impl Fn(usize) -> f64) -> EstimationProblem<LinearModel> {
        let grid = ChebyshevGrid::new(8, 0.0, 1.0).unwrap();
        let records = (0..samples)
            .map(|k| {
                let t = k as f64 / (samples - 1) as f64;
                let (p, _, _) = truth(t);
                MeasurementRecord::isotropic(
                    t,
                    DVector::from_element(1, p + noise(k)),
                    0.01,
                    MeasurementModel::PoseDirect {
                        components: vec![0],
                    },
                )
                .unwrap()
            })
            .collect();
        EstimationProblem::new(
            grid,
            LinearModel::double_integrator(),
            DMatrix::identity(2, 2) * 1e-4,
            records,
        )
        .unwrap()
    }

    fn zeros(p: &EstimationProblem<LinearModel>) -> (Trajectory, Trajectory) {
        (
            Trajectory::constant(p.grid().clone(), &DVector::zeros(2)).unwrap(),
            Trajectory::constant(p.grid().clone(), &DVector::zeros(1)).unwrap(),
        )
    }

    #[test]
    fn recovers_polynomial_trajectory_and_control() {
        let p = problem(50, |_| 0.0);
        let (x0, u0) = zeros(&p);
        let report = solve(&p, &x0, &u0).unwrap();
        assert!(report.converged(), "{:?}", report.termination);
        for t in [0.0, 0.21, 0.5, 0.77, 1.0] {
            let (pos, vel, acc) = truth(t);
            let x = report.state.eval(t).unwrap();
            let u = report.control.eval(t).unwrap();
            assert!((x[0] - pos).abs() < 1e-6);
            assert!((x[1] - vel).abs() < 1e-6);
            assert!((u[0] - acc).abs() < 1e-6);
        }
        assert!(report.final_cost.total() < 1e-12);
    }

    #[test]
    fn exact_initialization_converges_in_one_iteration() {
        let p = problem(30, |_| 0.0);
        let x0 = Trajectory::new(
            p.grid().clone(),
            DMatrix::from_fn(2, 9, |r, j| {
                let (pos, vel, _) = truth(p.grid().node(j));
                if r == 0 {
                    pos
                } else {
                    vel
                }
            }),
        )
        .unwrap();
        let u0 = Trajectory::new(
            p.grid().clone(),
            DMatrix::from_fn(1, 9, |_, j| truth(p.grid().node(j)).2),
        )
        .unwrap();
        let report = solve(&p, &x0, &u0).unwrap();
        assert!(report.converged(), "{:?}", report.termination);
        assert!(report.iterations <= 1);
        assert!(report.final_cost.total() < 1e-16);
    }

    #[test]
    fn noisy_solution_is_stationary() {
        let p = problem(30, |k| 0.01 * ((k * 7 % 5) as f64 - 2.0));
        let (x0, u0) = zeros(&p);
        let report = solve(&p, &x0, &u0).unwrap();
        assert!(report.converged(), "{:?}", report.termination);
        let ne = p.normal_equations(&report.state, &report.control).unwrap();
        assert!(
            gradient_norm(&ne) <= STATIONARITY * (1.0 + ne.cost),
            "{}",
            gradient_norm(&ne)
        );
    }

    #[test]
    fn cost_history_is_monotone() {
        let p = problem(25, |k| 0.02 * (k as f64).sin());
        let (x0, u0) = zeros(&p);
        let report = solve(&p, &x0, &u0).unwrap();
        assert!(report.cost_history.windows(2).all(|w| w[1] <= w[0]));
        let rejected = matches!(
            report.termination,
            Termination::DampingLimit | Termination::Stationary
        );
        assert_eq!(
            report.cost_history.len(),
            report.iterations + 1 - usize::from(rejected)
        );
    }

    #[test]
    fn underdetermined_without_measurements() {
        let grid = ChebyshevGrid::new(8, 0.0, 1.0).unwrap();
        let p = EstimationProblem::new(
            grid,
            LinearModel::double_integrator(),
            DMatrix::identity(2, 2),
            vec![],
        )
        .unwrap();
        let (x0, u0) = zeros(&p);
        assert!(matches!(
            solve(&p, &x0, &u0),
            Err(Error::Underdetermined { .. })
        ));
    }

    #[test]
    fn permutation_of_measurements_does_not_change_solution() {
        let p = problem(20, |k| 0.01 * ((k * 3 % 7) as f64 - 3.0));
        let mut shuffled = p.measurements().to_vec();
        shuffled.reverse();
        shuffled.swap(2, 11);
        let q = EstimationProblem::new(
            p.grid().clone(),
            LinearModel::double_integrator(),
            p.defect_covariance().clone(),
            shuffled,
        )
        .unwrap();
        let (x0, u0) = zeros(&p);
        let a = solve(&p, &x0, &u0).unwrap();
        let b = solve(&q, &x0, &u0).unwrap();
        assert!((a.state.values() - b.state.values()).amax() < 1e-8);
        assert!((a.control.values() - b.control.values()).amax() < 1e-8);
    }
}
