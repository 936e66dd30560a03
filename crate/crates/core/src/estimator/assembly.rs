//! Gauss–Newton normal equations with Kronecker-structured assembly.
//!
//! Each residual term is linearized once in local coordinates
//! `y = [x(t); ẋ(t); u(t)]`, which depend linearly on `θ` through the
//! interpolation weights: `x(t) = (wᵀ ⊗ I)·vec(X)`, `ẋ(t) = (vᵀ ⊗ I)·vec(X)`
//! with `v = Dᵀw`, and `u(t) = (wᵀ ⊗ I)·vec(U)`. Terms that share a
//! timestamp share their weights, so their local Gram matrices are summed
//! before being lifted into the full system.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::defect::defect_local;
use super::{EstimationProblem, PriorTarget};
use crate::dynamics::Dynamics;
use crate::error::Result;
use crate::trajectory::Trajectory;

/// `JᵀJ`, `Jᵀr` and `‖r‖²` at a linearization point.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub cost: f64,
}

struct LocalGroup {
    value_weights: DVector<f64>,
    rate_weights: Option<DVector<f64>>,
    gram: DMatrix<f64>,
    grad: DVector<f64>,
}

impl LocalGroup {
    fn new(
        local_dim: usize,
        value_weights: DVector<f64>,
        rate_weights: Option<DVector<f64>>,
    ) -> Self {
        Self {
            value_weights,
            rate_weights,
            gram: DMatrix::zeros(local_dim, local_dim),
            grad: DVector::zeros(local_dim),
        }
    }

    fn add(&mut self, jac: &DMatrix<f64>, residual: &DVector<f64>) {
        self.gram += jac.tr_mul(jac);
        self.grad += jac.tr_mul(residual);
    }
}

struct Segment {
    local: usize,
    len: usize,
    coef: Vec<(usize, f64)>,
    offset: usize,
    stride: usize,
}

fn sparse(v: &DVector<f64>) -> Vec<(usize, f64)> {
    v.iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(i, c)| (i, *c))
        .collect()
}

fn block_is_zero(m: &DMatrix<f64>, r: usize, c: usize, rows: usize, cols: usize) -> bool {
    (0..cols).all(|b| (0..rows).all(|a| m[(r + a, c + b)] == 0.0))
}

/// Adds `Pᵀ·G·P` and `Pᵀ·g` for the lifting `P` defined by the group weights.
fn scatter(h: &mut DMatrix<f64>, b: &mut DVector<f64>, group: &LocalGroup, n: usize, p: usize) {
    let nodes = group.value_weights.len();
    let nx = n * nodes;
    let dim = h.nrows();
    let value = sparse(&group.value_weights);
    let mut segments = vec![
        Segment {
            local: 0,
            len: n,
            coef: value.clone(),
            offset: 0,
            stride: n,
        },
        Segment {
            local: 2 * n,
            len: p,
            coef: value,
            offset: nx,
            stride: p,
        },
    ];
    if let Some(v) = &group.rate_weights {
        segments.push(Segment {
            local: n,
            len: n,
            coef: sparse(v),
            offset: 0,
            stride: n,
        });
    }
    segments.retain(|s| !block_is_zero(&group.gram, s.local, s.local, s.len, s.len));

    let hs = h.as_mut_slice();
    for s1 in &segments {
        for s2 in &segments {
            for (k, c2) in &s2.coef {
                for bb in 0..s2.len {
                    let col = s2.offset + k * s2.stride + bb;
                    let gcol = s2.local + bb;
                    for (j, c1) in &s1.coef {
                        let c = c1 * c2;
                        let base = col * dim + s1.offset + j * s1.stride;
                        for a in 0..s1.len {
                            hs[base + a] += c * group.gram[(s1.local + a, gcol)];
                        }
                    }
                }
            }
        }
        for (j, c1) in &s1.coef {
            for a in 0..s1.len {
                b[s1.offset + j * s1.stride + a] += c1 * group.grad[s1.local + a];
            }
        }
    }
}

impl<D: Dynamics> EstimationProblem<D> {
    /// Builds the Gauss–Newton system at `(X, U)`.
    pub fn normal_equations(&self, x: &Trajectory, u: &Trajectory) -> Result<NormalEquations> {
        let n = self.state_dim();
        let p = self.control_dim();
        let local_dim = 2 * n + p;
        let dim = self.unknowns();
        let nodes = self.grid().len();
        let mut h = DMatrix::zeros(dim, dim);
        let mut b = DVector::zeros(dim);
        let mut cost = 0.0;

        // Measurements sharing a timestamp share interpolation weights.
        let mut groups: BTreeMap<(u64, bool), LocalGroup> = BTreeMap::new();
        for m in self.measurements() {
            let lin = m.linearize_local(x, u)?;
            cost += lin.residual.norm_squared();
            let key = (m.time().to_bits(), lin.weights.rate.is_some());
            let group = groups.entry(key).or_insert_with(|| {
                LocalGroup::new(
                    local_dim,
                    lin.weights.value.clone(),
                    lin.weights.rate.clone(),
                )
            });
            group.add(&lin.jacobian, &lin.residual);
        }
        for group in groups.values() {
            scatter(&mut h, &mut b, group, n, p);
        }

        let diff = self.grid().differentiation_matrix();
        for j in 0..nodes {
            let (residual, jac) = defect_local(x, u, j, self.dynamics(), self.defect_whitener())?;
            cost += residual.norm_squared();
            let mut unit = DVector::zeros(nodes);
            unit[j] = 1.0;
            let mut group = LocalGroup::new(local_dim, unit, Some(diff.row(j)));
            group.add(&jac, &residual);
            scatter(&mut h, &mut b, &group, n, p);
        }

        let nx = n * nodes;
        for prior in self.priors() {
            let (value, offset, stride) = match prior.target {
                PriorTarget::State => (x.column(prior.node), 0, n),
                PriorTarget::Control => (u.column(prior.node), nx, p),
            };
            for k in 0..prior.mean.len() {
                let inv = 1.0 / prior.sigma[k];
                let r = (value[k] - prior.mean[k]) * inv;
                let i = offset + prior.node * stride + k;
                cost += r * r;
                h[(i, i)] += inv * inv;
                b[i] += inv * r;
            }
        }

        Ok(NormalEquations {
            hessian: h,
            gradient: b,
            cost,
        })
    }
}
