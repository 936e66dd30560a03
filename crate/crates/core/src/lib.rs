//! Pseudo-spectral estimation of continuous state and control trajectories.
//!
//! Trajectories are represented by their values at Chebyshev–Gauss–Lobatto
//! nodes. Measurements are interpolated barycentrically, and known dynamics
//! are enforced through collocation defects at the nodes. The resulting
//! least-squares problem is solved with Levenberg–Marquardt.

// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cheb;
pub mod dynamics;
pub mod error;
pub mod estimator;
pub mod fit;
pub mod io;
pub mod kron;
pub mod measurement;
pub mod pipeline;
pub mod sim;
pub mod so3;
pub mod trajectory;

pub use cheb::{
    chebyshev_t, series_coefficients, ChebyshevGrid, DifferentiationMatrix, SeriesCoefficients,
    WeightVector,
};
pub use dynamics::{Dynamics, LinearModel, Quadrotor, QuadrotorParameters, QuadrotorState};
pub use error::{Error, Result};
pub use estimator::{solve, EstimateReport, EstimationProblem, SolverSettings};
pub use measurement::{CameraRig, MeasurementModel, MeasurementRecord};
pub use sim::{GroundTruth, Scenario};
pub use trajectory::{sample_function, ControlTrajectory, StateTrajectory, Trajectory};
