//! Continuous-time dynamics models `ẋ = f(x, u, t)` with analytic Jacobians.

mod linear;
mod quadrotor;

pub use linear::LinearModel;
pub use quadrotor::{
    MotorSpeeds, Quadrotor, QuadrotorParameters, QuadrotorState, CHART_LIMIT, CONTROL_DIM,
    STATE_DIM,
};

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// A dynamics model usable by the simulator and the estimator.
pub trait Dynamics: Send + Sync {
    fn state_dim(&self) -> usize;

    fn control_dim(&self) -> usize;

    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> Result<DVector<f64>>;

    /// `(∂f/∂x, ∂f/∂u)` at the given point.
    fn jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        t: f64,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)>;
}

impl<D: Dynamics + ?Sized> Dynamics for &D {
    fn state_dim(&self) -> usize {
        (**self).state_dim()
    }
    fn control_dim(&self) -> usize {
        (**self).control_dim()
    }
    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        (**self).derivative(x, u, t)
    }
    fn jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        t: f64,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        (**self).jacobians(x, u, t)
    }
}

#[cfg(test)]
pub(crate) mod fd {
    use super::*;

    /// Central finite-difference Jacobians with relative step.
    pub fn jacobians<D: Dynamics>(
        model: &D,
        x: &DVector<f64>,
        u: &DVector<f64>,
        rel: f64,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = model.state_dim();
        let p = model.control_dim();
        let mut fx = DMatrix::zeros(n, n);
        let mut fu = DMatrix::zeros(n, p);
        for k in 0..n {
            let h = rel * x[k].abs().max(1.0);
            let (mut a, mut b) = (x.clone(), x.clone());
            a[k] += h;
            b[k] -= h;
            let col = (model.derivative(&a, u, 0.0).unwrap()
                - model.derivative(&b, u, 0.0).unwrap())
                / (2.0 * h);
            fx.set_column(k, &col);
        }
        for k in 0..p {
            let h = rel * u[k].abs().max(1.0);
            let (mut a, mut b) = (u.clone(), u.clone());
            a[k] += h;
            b[k] -= h;
            let col = (model.derivative(x, &a, 0.0).unwrap()
                - model.derivative(x, &b, 0.0).unwrap())
                / (2.0 * h);
            fu.set_column(k, &col);
        }
        (fx, fu)
    }
}
