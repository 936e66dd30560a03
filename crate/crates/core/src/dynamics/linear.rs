use nalgebra::{DMatrix, DVector};

use super::Dynamics;
use crate::error::{Error, Result};

/// Linear time-invariant model `ẋ = A·x + B·u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LinearModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::Dimension(format!(
                "B has {} rows, A has {}",
                b.nrows(),
                a.nrows()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "linear model has non-finite entries".into(),
            ));
        }
        Ok(Self { a, b })
    }

    /// `ẍ = u` in one dimension, state `(position, velocity)`.
    pub fn double_integrator() -> Self {
        Self::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        )
        .expect("static shapes")
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    fn check(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
        if x.len() != self.a.nrows() || u.len() != self.b.ncols() {
            return Err(Error::Dimension(format!(
                "expected state {} / control {}, got {} / {}",
                self.a.nrows(),
                self.b.ncols(),
                x.len(),
                u.len()
            )));
        }
        Ok(())
    }
}

impl Dynamics for LinearModel {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> Result<DVector<f64>> {
        self.check(x, u)?;
        Ok(&self.a * x + &self.b * u)
    }

    fn jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        _t: f64,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check(x, u)?;
        Ok((self.a.clone(), self.b.clone()))
    }
}
