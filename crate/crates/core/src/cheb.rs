//! Chebyshev–Gauss–Lobatto grids on arbitrary time intervals.
//!
//! Nodes are ordered the classical way: index `j = 0` sits at `tf` and
//! index `N` at `t0`, so node times *decrease* with `j`. Everything that
//! consumes a grid (weights, differentiation matrix, coefficient
//! transforms) uses the same ordering.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative distance (in units of the interval length) below which a query
/// time is treated as an exact node hit.
pub const NODE_SNAP_TOLERANCE: f64 = 1e-13;

/// `cos(m·π/N)` evaluated through a sine so that the grid is exactly
/// antisymmetric and the middle node is exactly zero.
fn unit_node(m: usize, n: usize) -> f64 {
    let m = m % (2 * n);
    let numerator = n as f64 - 2.0 * m as f64;
    (PI * numerator / (2.0 * n as f64)).sin()
}

/// The `N+1` Chebyshev–Gauss–Lobatto points on `[t0, tf]`.
#[derive(Debug, Clone)]
pub struct ChebyshevGrid {
    degree: usize,
    t0: f64,
    tf: f64,
    unit_nodes: Vec<f64>,
    nodes: Vec<f64>,
    diff: OnceLock<DifferentiationMatrix>,
}

impl ChebyshevGrid {
    pub fn new(degree: usize, t0: f64, tf: f64) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidDegree(degree));
        }
        if !t0.is_finite() || !tf.is_finite() || tf <= t0 {
            return Err(Error::InvalidInterval { t0, tf });
        }
        let mid = 0.5 * (tf + t0);
        let half = 0.5 * (tf - t0);
        let unit_nodes: Vec<f64> = (0..=degree).map(|j| unit_node(j, degree)).collect();
        let mut nodes: Vec<f64> = unit_nodes.iter().map(|&tau| mid + half * tau).collect();
        nodes[0] = tf;
        nodes[degree] = t0;
        Ok(Self {
            degree,
            t0,
            tf,
            unit_nodes,
            nodes,
            diff: OnceLock::new(),
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn span(&self) -> f64 {
        self.tf - self.t0
    }

    /// Node times, decreasing from `tf` to `t0`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Node positions on the reference interval `[-1, 1]`.
    pub fn unit_nodes(&self) -> &[f64] {
        &self.unit_nodes
    }

    /// Maps a time onto the reference interval.
    pub fn to_unit(&self, t: f64) -> f64 {
        (2.0 * t - (self.tf + self.t0)) / (self.tf - self.t0)
    }

    pub fn from_unit(&self, tau: f64) -> f64 {
        0.5 * ((self.tf + self.t0) + (self.tf - self.t0) * tau)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t0 && t <= self.tf
    }

    /// Barycentric interpolation weights for time `t`.
    ///
    /// Interpolating node values `f` at `t` is the inner product `f · w`.
    pub fn weights(&self, t: f64) -> Result<WeightVector> {
        if !t.is_finite() || !self.contains(t) {
            return Err(Error::OutOfInterval {
                t,
                t0: self.t0,
                tf: self.tf,
            });
        }
        let n = self.degree;
        let snap = NODE_SNAP_TOLERANCE * self.span();
        if let Some(j) = self.nodes.iter().position(|&tj| (t - tj).abs() < snap) {
            return Ok(WeightVector::unit(self.len(), j, t));
        }

        let mut weights = DVector::zeros(self.len());
        let mut total = 0.0;
        for (j, &tj) in self.nodes.iter().enumerate() {
            let mut lambda = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                lambda *= 0.5;
            }
            let term = lambda / (t - tj);
            weights[j] = term;
            total += term;
        }
        weights /= total;
        Ok(WeightVector {
            weights,
            query_time: t,
            node: None,
        })
    }

    /// Spectral differentiation matrix scaled to real time units.
    pub fn differentiation_matrix(&self) -> &DifferentiationMatrix {
        self.diff.get_or_init(|| DifferentiationMatrix::new(self))
    }
}

impl PartialEq for ChebyshevGrid {
    fn eq(&self, other: &Self) -> bool {
        self.degree == other.degree && self.t0 == other.t0 && self.tf == other.tf
    }
}

/// Interpolation weights at a single query time.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: DVector<f64>,
    query_time: f64,
    node: Option<usize>,
}

impl WeightVector {
    fn unit(len: usize, j: usize, t: f64) -> Self {
        let mut weights = DVector::zeros(len);
        weights[j] = 1.0;
        Self {
            weights,
            query_time: t,
            node: Some(j),
        }
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn as_slice(&self) -> &[f64] {
        self.weights.as_slice()
    }

    pub fn query_time(&self) -> f64 {
        self.query_time
    }

    /// Index of the node the query time coincides with, if any.
    pub fn node(&self) -> Option<usize> {
        self.node
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Interpolates a sequence of node values.
    pub fn interpolate(&self, values: &[f64]) -> f64 {
        match self.node {
            Some(j) => values[j],
            None => values
                .iter()
                .zip(self.weights.iter())
                .map(|(v, w)| v * w)
                .sum(),
        }
    }
}

/// `(N+1)×(N+1)` matrix mapping node samples of a polynomial to node
/// samples of its time derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentiationMatrix {
    entries: DMatrix<f64>,
}

impl DifferentiationMatrix {
    fn new(grid: &ChebyshevGrid) -> Self {
        let n = grid.degree();
        let x = grid.unit_nodes();
        let c = |i: usize| {
            let base = if i == 0 || i == n { 2.0 } else { 1.0 };
            if i.is_multiple_of(2) {
                base
            } else {
                -base
            }
        };
        let mut d = DMatrix::zeros(n + 1, n + 1);
        for i in 0..=n {
            for j in 0..=n {
                if i != j {
                    d[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
                }
            }
        }
        // Negative-sum trick: rows of a derivative operator annihilate constants.
        for i in 0..=n {
            let off: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
            d[(i, i)] = -off;
        }
        d *= 2.0 / grid.span();
        Self { entries: d }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Row `i` as a column vector, i.e. `Dᵀ e_i`.
    pub fn row(&self, i: usize) -> DVector<f64> {
        self.entries.row(i).transpose()
    }

    /// `Dᵀ w`: weights that interpolate the derivative at the time `w` was built for.
    pub fn derivative_weights(&self, w: &WeightVector) -> DVector<f64> {
        match w.node() {
            Some(j) => self.row(j),
            None => self.entries.tr_mul(w.as_vector()),
        }
    }

    /// Applies the matrix to a vector of node samples.
    pub fn apply(&self, samples: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(samples);
        (&self.entries * v).iter().copied().collect()
    }
}

/// `T_k(τ) = cos(k·arccos τ)`.
pub fn chebyshev_t(k: usize, tau: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&tau) {
        return Err(Error::OutOfDomain(tau));
    }
    Ok((k as f64 * tau.acos()).cos())
}

/// Derivative `T_k'(τ)` by the three-term recurrence, valid on the closed interval.
pub fn chebyshev_t_derivative(k: usize, tau: f64) -> f64 {
    // T_k' = k U_{k-1}
    if k == 0 {
        return 0.0;
    }
    let (mut u_prev, mut u) = (1.0, 2.0 * tau);
    if k == 1 {
        return 1.0;
    }
    for _ in 2..k {
        let next = 2.0 * tau * u - u_prev;
        u_prev = u;
        u = next;
    }
    k as f64 * u
}

/// Coefficients `a_k` of the truncated Chebyshev series through node samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesCoefficients {
    coeffs: Vec<f64>,
}

impl SeriesCoefficients {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Empty);
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Evaluates `Σ a_k T_k(τ)` with Clenshaw's recurrence.
    pub fn eval(&self, tau: f64) -> f64 {
        let (mut b1, mut b2) = (0.0, 0.0);
        for &a in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * tau * b1 - b2 + a;
            b2 = b1;
            b1 = b0;
        }
        tau * b1 - b2 + self.coeffs[0]
    }

    /// Node samples `Σ a_k T_k(τ_j)` on the matching CGL grid.
    pub fn to_samples(&self) -> Vec<f64> {
        let n = self.coeffs.len() - 1;
        if n == 0 {
            return vec![self.coeffs[0]];
        }
        (0..=n)
            .map(|j| {
                self.coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * unit_node(j * k, n))
                    .sum()
            })
            .collect()
    }
}

/// Cosine transform from CGL node samples (ordered `j = 0..N`) to series
/// coefficients. Explicit `O(N²)` sum.
pub fn series_coefficients(samples: &[f64]) -> Result<SeriesCoefficients> {
    if samples.is_empty() {
        return Err(Error::Empty);
    }
    let n = samples.len() - 1;
    if n == 0 {
        return SeriesCoefficients::new(vec![samples[0]]);
    }
    let end_half = |j: usize| if j == 0 || j == n { 0.5 } else { 1.0 };
    let coeffs = (0..=n)
        .map(|k| {
            let sum: f64 = samples
                .iter()
                .enumerate()
                .map(|(j, f)| end_half(j) * f * unit_node(j * k, n))
                .sum();
            end_half(k) * 2.0 * sum / n as f64
        })
        .collect();
    SeriesCoefficients::new(coeffs)
}
