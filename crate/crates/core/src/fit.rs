//! Least-squares fitting of a Chebyshev interpolant to scattered samples.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cheb::ChebyshevGrid;
use crate::error::{Error, Result};

/// A scalar interpolant fitted to samples by linear least squares.
#[derive(Debug, Clone)]
pub struct ChebyshevFit {
    grid: ChebyshevGrid,
    node_values: DVector<f64>,
    rms_residual: f64,
}

impl ChebyshevFit {
    pub fn grid(&self) -> &ChebyshevGrid {
        &self.grid
    }

    pub fn node_values(&self) -> &DVector<f64> {
        &self.node_values
    }

    /// Root-mean-square residual over the fitted samples.
    pub fn rms_residual(&self) -> f64 {
        self.rms_residual
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(self
            .grid
            .weights(t)?
            .interpolate(self.node_values.as_slice()))
    }
}

/// Fits the values at the `degree + 1` CGL nodes of `[t0, tf]`.
pub fn fit_least_squares(
    samples: &[(f64, f64)],
    degree: usize,
    t0: f64,
    tf: f64,
) -> Result<ChebyshevFit> {
    let grid = ChebyshevGrid::new(degree, t0, tf)?;
    if samples.len() < grid.len() {
        return Err(Error::Underdetermined {
            samples: samples.len(),
            unknowns: grid.len(),
        });
    }
    let mut a = DMatrix::zeros(samples.len(), grid.len());
    let mut b = DVector::zeros(samples.len());
    for (i, (t, y)) in samples.iter().enumerate() {
        if !y.is_finite() {
            return Err(Error::NonFinite(*y));
        }
        a.row_mut(i)
            .copy_from(&grid.weights(*t)?.as_vector().transpose());
        b[i] = *y;
    }
    let svd = a.clone().svd(true, true);
    let smallest = svd.singular_values.min();
    if !(smallest > 1e-12 * svd.singular_values.max()) {
        return Err(Error::Underdetermined {
            samples: samples.len(),
            unknowns: grid.len(),
        });
    }
    let node_values = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Solver(e.to_string()))?;
    let residual = &a * &node_values - &b;
    let rms_residual = (residual.norm_squared() / samples.len() as f64).sqrt();
    Ok(ChebyshevFit {
        grid,
        node_values,
        rms_residual,
    })
}

/// The demo target `exp(sin 2x + cos 2x)`.
pub fn demo_function(x: f64) -> f64 {
    ((2.0 * x).sin() + (2.0 * x).cos()).exp()
}

/// Settings of the built-in fit demo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemoSamples {
    pub count: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for DemoSamples {
    fn default() -> Self {
        Self {
            count: 21,
            sigma: 0.1,
            seed: 7,
        }
    }
}

impl DemoSamples {
    /// Equally spaced samples on `[-1, 1]` with seeded Gaussian noise.
    pub fn generate(&self) -> Result<Vec<(f64, f64)>> {
        if self.count < 2 {
            return Err(Error::InvalidParameter(
                "need at least two demo samples".into(),
            ));
        }
        let noise =
            Normal::new(0.0, self.sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok((0..self.count)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / (self.count - 1) as f64;
                (x, demo_function(x) + noise.sample(&mut rng))
            })
            .collect())
    }
}
