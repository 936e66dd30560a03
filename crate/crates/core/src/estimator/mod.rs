//! Joint state/control estimation.
//!
//! Unknowns are the node values `X` (n×(N+1)) and `U` (p×(N+1)), stacked as
//! `θ = [vec(X); vec(U)]`. The objective is the sum of whitened measurement
//! residuals, whitened collocation defects at every node, and optional
//! Gaussian priors on node columns.

mod assembly;
mod defect;
mod init;
mod solver;

pub use assembly::NormalEquations;
pub use defect::{defect_jacobian, defect_residual};
pub use init::{initialize, PoseObservation};
pub use solver::{
    gradient_norm, solve, solve_with_observer, EstimateReport, IterationInfo, Termination,
    STATIONARITY,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cheb::ChebyshevGrid;
use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::measurement::{whitening_matrix, MeasurementRecord};
use crate::trajectory::Trajectory;

/// Levenberg–Marquardt settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub max_iterations: usize,
    pub initial_damping: f64,
    pub damping_factor: f64,
    /// Relative decrease of the total cost below which the solve stops.
    pub cost_tolerance: f64,
    /// Absolute step norm below which the solve stops.
    pub step_tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            initial_damping: 1e-4,
            damping_factor: 10.0,
            cost_tolerance: 1e-9,
            step_tolerance: 1e-10,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.initial_damping > 0.0
            && self.damping_factor > 1.0
            && self.cost_tolerance > 0.0
            && self.step_tolerance > 0.0;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "invalid solver settings: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Which trajectory a prior constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorTarget {
    State,
    Control,
}

/// Independent Gaussian prior on one node column.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePrior {
    pub target: PriorTarget,
    pub node: usize,
    pub mean: DVector<f64>,
    pub sigma: DVector<f64>,
}

impl NodePrior {
    pub fn new(
        target: PriorTarget,
        node: usize,
        mean: DVector<f64>,
        sigma: DVector<f64>,
    ) -> Result<Self> {
        if mean.len() != sigma.len() {
            return Err(Error::Dimension(
                "prior mean and sigma differ in length".into(),
            ));
        }
        if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidParameter(
                "prior sigma must be positive".into(),
            ));
        }
        Ok(Self {
            target,
            node,
            mean,
            sigma,
        })
    }
}

/// Default standard deviation of the weak prior placed on every control column.
pub const CONTROL_PRIOR_SIGMA: f64 = 1e3;

/// Default defect covariance scale, `Q = 1e-4·I`.
pub const DEFAULT_DEFECT_VARIANCE: f64 = 1e-4;

/// Everything needed to evaluate and minimize the objective.
#[derive(Debug, Clone)]
pub struct EstimationProblem<D> {
    grid: ChebyshevGrid,
    dynamics: D,
    defect_covariance: DMatrix<f64>,
    defect_whitener: DMatrix<f64>,
    measurements: Vec<MeasurementRecord>,
    priors: Vec<NodePrior>,
    settings: SolverSettings,
}

impl<D: Dynamics> EstimationProblem<D> {
    pub fn new(
        grid: ChebyshevGrid,
        dynamics: D,
        defect_covariance: DMatrix<f64>,
        measurements: Vec<MeasurementRecord>,
    ) -> Result<Self> {
        let n = dynamics.state_dim();
        if defect_covariance.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "defect covariance must be {n}x{n}, got {}x{}",
                defect_covariance.nrows(),
                defect_covariance.ncols()
            )));
        }
        let defect_whitener = whitening_matrix(&defect_covariance)?;
        if let Some(m) = measurements.iter().find(|m| !grid.contains(m.time())) {
            return Err(Error::OutOfInterval {
                t: m.time(),
                t0: grid.t0(),
                tf: grid.tf(),
            });
        }
        Ok(Self {
            grid,
            dynamics,
            defect_covariance,
            defect_whitener,
            measurements,
            priors: Vec::new(),
            settings: SolverSettings::default(),
        })
    }

    pub fn with_priors(mut self, priors: Vec<NodePrior>) -> Result<Self> {
        for prior in &priors {
            let dim = match prior.target {
                PriorTarget::State => self.dynamics.state_dim(),
                PriorTarget::Control => self.dynamics.control_dim(),
            };
            if prior.node >= self.grid.len() || prior.mean.len() != dim {
                return Err(Error::Dimension(format!(
                    "prior on node {} with dimension {} does not fit the problem",
                    prior.node,
                    prior.mean.len()
                )));
            }
        }
        self.priors = priors;
        Ok(self)
    }

    /// Adds an isotropic prior with standard deviation `sigma` on every control column.
    pub fn with_control_prior(self, mean: &Trajectory, sigma: f64) -> Result<Self> {
        let p = self.dynamics.control_dim();
        let mut priors = self.priors.clone();
        for j in 0..self.grid.len() {
            priors.push(NodePrior::new(
                PriorTarget::Control,
                j,
                mean.column(j),
                DVector::from_element(p, sigma),
            )?);
        }
        self.with_priors(priors)
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        self.settings = settings;
        Ok(self)
    }

    pub fn grid(&self) -> &ChebyshevGrid {
        &self.grid
    }

    pub fn dynamics(&self) -> &D {
        &self.dynamics
    }

    pub fn defect_covariance(&self) -> &DMatrix<f64> {
        &self.defect_covariance
    }

    pub fn defect_whitener(&self) -> &DMatrix<f64> {
        &self.defect_whitener
    }

    pub fn measurements(&self) -> &[MeasurementRecord] {
        &self.measurements
    }

    pub fn priors(&self) -> &[NodePrior] {
        &self.priors
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.dynamics.control_dim()
    }

    /// Length of the stacked unknown vector, `(n + p)(N + 1)`.
    pub fn unknowns(&self) -> usize {
        (self.state_dim() + self.control_dim()) * self.grid.len()
    }

    pub fn stack(&self, x: &Trajectory, u: &Trajectory) -> DVector<f64> {
        let mut v = x.to_vec();
        v.extend(u.to_vec());
        DVector::from_vec(v)
    }

    pub fn unstack(&self, theta: &DVector<f64>) -> Result<(Trajectory, Trajectory)> {
        let nx = self.state_dim() * self.grid.len();
        let x = Trajectory::from_vec(self.grid.clone(), self.state_dim(), &theta.as_slice()[..nx])?;
        let u = Trajectory::from_vec(
            self.grid.clone(),
            self.control_dim(),
            &theta.as_slice()[nx..],
        )?;
        Ok((x, u))
    }

    /// Objective split into its parts.
    pub fn cost(&self, x: &Trajectory, u: &Trajectory) -> Result<CostBreakdown> {
        let mut out = CostBreakdown::default();
        for m in &self.measurements {
            out.measurement += m.residual(x, u)?.norm_squared();
        }
        for j in 0..self.grid.len() {
            out.defect +=
                defect_residual(x, u, j, &self.dynamics, &self.defect_whitener)?.norm_squared();
        }
        for prior in &self.priors {
            out.prior += prior_residual(prior, x, u).norm_squared();
        }
        Ok(out)
    }

    /// Full residual vector in a fixed order: measurements, defects, priors.
    pub fn residual_vector(&self, x: &Trajectory, u: &Trajectory) -> Result<DVector<f64>> {
        let mut out = Vec::new();
        for m in &self.measurements {
            out.extend(m.residual(x, u)?.iter());
        }
        for j in 0..self.grid.len() {
            out.extend(defect_residual(x, u, j, &self.dynamics, &self.defect_whitener)?.iter());
        }
        for prior in &self.priors {
            out.extend(prior_residual(prior, x, u).iter());
        }
        Ok(DVector::from_vec(out))
    }

    /// Dense Jacobian of [`Self::residual_vector`] over `θ`, built row block by
    /// row block from the Kronecker-expanded per-term Jacobians.
    pub fn jacobian_dense(&self, x: &Trajectory, u: &Trajectory) -> Result<DMatrix<f64>> {
        let nx = self.state_dim() * self.grid.len();
        let mut blocks: Vec<(DMatrix<f64>, DMatrix<f64>)> = Vec::new();
        for m in &self.measurements {
            blocks.push(m.residual_jacobian(x, u)?);
        }
        for j in 0..self.grid.len() {
            blocks.push(defect_jacobian(
                x,
                u,
                j,
                &self.dynamics,
                &self.defect_whitener,
            )?);
        }
        for prior in &self.priors {
            blocks.push(prior_jacobian(
                prior,
                self.state_dim(),
                self.control_dim(),
                self.grid.len(),
            ));
        }
        let rows: usize = blocks.iter().map(|(a, _)| a.nrows()).sum();
        let mut jac = DMatrix::zeros(rows, self.unknowns());
        let mut r = 0;
        for (jx, ju) in blocks {
            let m = jx.nrows();
            jac.view_mut((r, 0), (m, nx)).copy_from(&jx);
            jac.view_mut((r, nx), (m, ju.ncols())).copy_from(&ju);
            r += m;
        }
        Ok(jac)
    }
}

/// Components of the total objective `E = E1 + E2 (+ priors)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub measurement: f64,
    pub defect: f64,
    pub prior: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.measurement + self.defect + self.prior
    }
}

fn prior_residual(prior: &NodePrior, x: &Trajectory, u: &Trajectory) -> DVector<f64> {
    let value = match prior.target {
        PriorTarget::State => x.column(prior.node),
        PriorTarget::Control => u.column(prior.node),
    };
    (value - &prior.mean).component_div(&prior.sigma)
}

fn prior_jacobian(
    prior: &NodePrior,
    n: usize,
    p: usize,
    nodes: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = prior.mean.len();
    let mut jx = DMatrix::zeros(d, n * nodes);
    let mut ju = DMatrix::zeros(d, p * nodes);
    for k in 0..d {
        let inv = 1.0 / prior.sigma[k];
        match prior.target {
            PriorTarget::State => jx[(k, prior.node * n + k)] = inv,
            PriorTarget::Control => ju[(k, prior.node * p + k)] = inv,
        }
    }
    (jx, ju)
}
