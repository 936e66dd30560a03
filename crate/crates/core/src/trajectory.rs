//! Trajectories stored as values at grid nodes.
//!
//! Column `j` of the value matrix holds the full vector at node `j`, so the
//! column-stacked `vec(values)` is node-major: entry `(r, j)` sits at
//! `j * rows + r`.

use nalgebra::{DMatrix, DVector};

use crate::cheb::ChebyshevGrid;
use crate::error::{Error, Result};

/// Pseudo-spectral trajectory: an `rows × (N+1)` matrix of node values.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: ChebyshevGrid,
    values: DMatrix<f64>,
}

/// State trajectory `X`, one column per node.
pub type StateTrajectory = Trajectory;
/// Control trajectory `U`, one column per node.
pub type ControlTrajectory = Trajectory;

impl Trajectory {
    pub fn new(grid: ChebyshevGrid, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(Error::Dimension(format!(
                "trajectory has {} columns, grid has {} nodes",
                values.ncols(),
                grid.len()
            )));
        }
        if values.nrows() == 0 {
            return Err(Error::Empty);
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let j = pos / values.nrows();
            return Err(Error::NonFinite(grid.node(j)));
        }
        Ok(Self { grid, values })
    }

    /// Every node holds the same vector.
    pub fn constant(grid: ChebyshevGrid, value: &DVector<f64>) -> Result<Self> {
        let values = DMatrix::from_fn(value.len(), grid.len(), |r, _| value[r]);
        Self::new(grid, values)
    }

    /// Rebuilds a trajectory from its column-stacked vector.
    pub fn from_vec(grid: ChebyshevGrid, rows: usize, stacked: &[f64]) -> Result<Self> {
        if stacked.len() != rows * grid.len() {
            return Err(Error::Dimension(format!(
                "stacked vector of length {} does not match {}x{}",
                stacked.len(),
                rows,
                grid.len()
            )));
        }
        let values = DMatrix::from_column_slice(rows, grid.len(), stacked);
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &ChebyshevGrid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Column-stacked values.
    pub fn to_vec(&self) -> Vec<f64> {
        self.values.as_slice().to_vec()
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.values.column(j).into_owned()
    }

    /// Value at time `t` by barycentric interpolation.
    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        let w = self.grid.weights(t)?;
        Ok(match w.node() {
            Some(j) => self.column(j),
            None => &self.values * w.as_vector(),
        })
    }

    /// Node samples of the time derivative, `X·Dᵀ`.
    pub fn derivative_values(&self) -> DMatrix<f64> {
        &self.values * self.grid.differentiation_matrix().entries().transpose()
    }

    /// Time derivative at `t`: the derivative node samples, interpolated.
    pub fn eval_derivative(&self, t: f64) -> Result<DVector<f64>> {
        let w = self.grid.weights(t)?;
        let v = self.grid.differentiation_matrix().derivative_weights(&w);
        Ok(&self.values * v)
    }

    /// Derivative at node `j`.
    pub fn node_derivative(&self, j: usize) -> DVector<f64> {
        &self.values * self.grid.differentiation_matrix().row(j)
    }

    /// One row of the trajectory as node samples.
    pub fn row(&self, r: usize) -> Vec<f64> {
        self.values.row(r).iter().copied().collect()
    }
}

/// Samples a vector-valued function at every node of the grid.
pub fn sample_function<F, E>(grid: &ChebyshevGrid, mut f: F) -> std::result::Result<DMatrix<f64>, E>
where
    F: FnMut(f64) -> std::result::Result<DVector<f64>, E>,
{
    let mut columns = Vec::with_capacity(grid.len());
    for &t in grid.nodes() {
        columns.push(f(t)?);
    }
    let rows = columns.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(rows, grid.len(), |r, j| columns[j][r]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheb::chebyshev_t;
    use approx::assert_abs_diff_eq;
    use std::convert::Infallible;

    fn scalar(grid: &ChebyshevGrid, f: impl Fn(f64) -> f64) -> Trajectory {
        let m = sample_function(grid, |t| {
            Ok::<_, Infallible>(DVector::from_element(1, f(t)))
        })
        .unwrap();
        Trajectory::new(grid.clone(), m).unwrap()
    }

    #[test]
    fn eval_at_nodes_returns_columns() {
        let g = ChebyshevGrid::new(5, 0.0, 1.0).unwrap();
        let m = DMatrix::from_fn(3, 6, |r, j| (r * 7 + j) as f64 * 0.37 - 1.1);
        let x = Trajectory::new(g.clone(), m.clone()).unwrap();
        for j in 0..6 {
            assert_eq!(x.eval(g.node(j)).unwrap(), m.column(j).into_owned());
        }
    }

    #[test]
    fn eval_polynomial_and_constants() {
        let g = ChebyshevGrid::new(2, 0.0, 2.0).unwrap();
        let x = scalar(&g, |t| t * t);
        assert_abs_diff_eq!(x.eval(0.5).unwrap()[0], 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(x.eval_derivative(1.0).unwrap()[0], 2.0, epsilon = 1e-13);

        let c = Trajectory::constant(g.clone(), &DVector::from_vec(vec![1.0, -2.0])).unwrap();
        let v = c.eval(1.37).unwrap();
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v[1], -2.0, epsilon = 1e-14);
        assert!(c
            .eval_derivative(0.3)
            .unwrap()
            .iter()
            .all(|d| d.abs() < 1e-13));
    }

    #[test]
    fn derivative_of_t3_at_midpoint() {
        let g = ChebyshevGrid::new(8, -1.0, 1.0).unwrap();
        let x = scalar(&g, |t| chebyshev_t(3, t.clamp(-1.0, 1.0)).unwrap());
        assert_abs_diff_eq!(x.eval_derivative(0.0).unwrap()[0], -3.0, epsilon = 1e-12);
    }

    #[test]
    fn control_cubic_at_random_time() {
        let g = ChebyshevGrid::new(3, 1.0, 3.0).unwrap();
        let p = |t: f64| 0.5 * t * t * t - t * t + 0.25;
        let u = scalar(&g, p);
        for t in [1.0, 1.13, 2.2, 2.99] {
            assert_abs_diff_eq!(u.eval(t).unwrap()[0], p(t), epsilon = 1e-12);
        }
    }

    #[test]
    fn sample_function_identity_and_constant() {
        let g = ChebyshevGrid::new(2, -1.0, 1.0).unwrap();
        let m = sample_function(&g, |t| Ok::<_, Infallible>(DVector::from_element(1, t))).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 0.0, -1.0]);
        let m = sample_function(&g, |_| {
            Ok::<_, Infallible>(DVector::from_vec(vec![2.0, 3.0]))
        })
        .unwrap();
        assert!(m.column_iter().all(|c| c[0] == 2.0 && c[1] == 3.0));
        let failing: std::result::Result<DMatrix<f64>, &str> = sample_function(&g, |_| Err("boom"));
        assert_eq!(failing.unwrap_err(), "boom");
    }

    #[test]
    fn rejects_bad_shapes() {
        let g = ChebyshevGrid::new(3, 0.0, 1.0).unwrap();
        assert!(Trajectory::new(g.clone(), DMatrix::zeros(2, 3)).is_err());
        let mut m = DMatrix::zeros(2, 4);
        m[(1, 2)] = f64::NAN;
        assert!(matches!(
            Trajectory::new(g.clone(), m),
            Err(Error::NonFinite(_))
        ));
        assert!(Trajectory::new(g.clone(), DMatrix::zeros(1, 4))
            .unwrap()
            .eval(2.0)
            .is_err());
    }

    #[test]
    fn stacked_vector_round_trip() {
        let g = ChebyshevGrid::new(4, 0.0, 1.0).unwrap();
        let m = DMatrix::from_fn(3, 5, |r, j| (r + 10 * j) as f64);
        let x = Trajectory::new(g.clone(), m).unwrap();
        let v = x.to_vec();
        // node-major stacking: (r, j) at j * rows + r
        assert_eq!(v[2 * 3 + 1], 21.0);
        assert_eq!(Trajectory::from_vec(g, 3, &v).unwrap(), x);
    }
}
