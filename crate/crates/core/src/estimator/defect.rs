//! Collocation defects: spectral derivative minus dynamics, at each node.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::kron::kron_weights;
use crate::trajectory::Trajectory;

fn check_node(x: &Trajectory, j: usize) -> Result<()> {
    if j >= x.grid().len() {
        return Err(Error::Dimension(format!(
            "node index {j} out of range for {} nodes",
            x.grid().len()
        )));
    }
    Ok(())
}

/// Whitened defect `L_Q⁻¹((X·Dᵀ)·e_j − f(X·e_j, U·e_j, t_j))`.
pub fn defect_residual<D: Dynamics>(
    x: &Trajectory,
    u: &Trajectory,
    j: usize,
    dynamics: &D,
    whitener: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    check_node(x, j)?;
    let t = x.grid().node(j);
    let f = dynamics.derivative(&x.column(j), &u.column(j), t)?;
    Ok(whitener * (x.node_derivative(j) - f))
}

/// Local Jacobian of the whitened defect at node `j` over `[x_j; ẋ_j; u_j]`.
pub(crate) fn defect_local<D: Dynamics>(
    x: &Trajectory,
    u: &Trajectory,
    j: usize,
    dynamics: &D,
    whitener: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_node(x, j)?;
    let n = x.dim();
    let p = u.dim();
    let t = x.grid().node(j);
    let (xj, uj) = (x.column(j), u.column(j));
    let f = dynamics.derivative(&xj, &uj, t)?;
    let (fx, fu) = dynamics.jacobians(&xj, &uj, t)?;
    let residual = whitener * (x.node_derivative(j) - f);
    let mut jac = DMatrix::zeros(n, 2 * n + p);
    jac.view_mut((0, 0), (n, n)).copy_from(&(-whitener * fx));
    jac.view_mut((0, n), (n, n)).copy_from(whitener);
    jac.view_mut((0, 2 * n), (n, p))
        .copy_from(&(-whitener * fu));
    Ok((residual, jac))
}

/// Jacobians of the whitened defect at node `j` over `vec(X)` and `vec(U)`.
///
/// The dynamics terms touch only node `j`; the spectral derivative term
/// couples every node through row `j` of the differentiation matrix.
pub fn defect_jacobian<D: Dynamics>(
    x: &Trajectory,
    u: &Trajectory,
    j: usize,
    dynamics: &D,
    whitener: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = x.dim();
    let p = u.dim();
    let nodes = x.grid().len();
    let (_, local) = defect_local(x, u, j, dynamics, whitener)?;
    let mut unit = vec![0.0; nodes];
    unit[j] = 1.0;
    let d_row = x.grid().differentiation_matrix().row(j);
    let jx = kron_weights(&unit, &local.view((0, 0), (n, n)).into_owned())
        + kron_weights(d_row.as_slice(), &local.view((0, n), (n, n)).into_owned());
    let ju = kron_weights(&unit, &local.view((0, 2 * n), (n, p)).into_owned());
    Ok((jx, ju))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheb::ChebyshevGrid;
    use crate::dynamics::{LinearModel, Quadrotor, QuadrotorParameters};

    fn single_integrator() -> LinearModel {
        LinearModel::new(DMatrix::zeros(1, 1), DMatrix::identity(1, 1)).unwrap()
    }

    fn scalar(grid: &ChebyshevGrid, f: impl Fn(f64) -> f64) -> Trajectory {
        Trajectory::new(
            grid.clone(),
            DMatrix::from_fn(1, grid.len(), |_, j| f(grid.node(j))),
        )
        .unwrap()
    }

    #[test]
    fn polynomial_solution_has_zero_defects() {
        let g = ChebyshevGrid::new(4, 0.0, 2.0).unwrap();
        let x = scalar(&g, |t| t * t);
        let u = scalar(&g, |t| 2.0 * t);
        let w = DMatrix::identity(1, 1);
        for j in 0..g.len() {
            assert!(defect_residual(&x, &u, j, &single_integrator(), &w).unwrap()[0].abs() < 1e-10);
        }
    }

    #[test]
    fn hover_has_zero_defects() {
        let params = QuadrotorParameters::default();
        let q = Quadrotor::new(params).unwrap();
        let g = ChebyshevGrid::new(16, 0.0, 5.0).unwrap();
        let x = Trajectory::constant(g.clone(), &DVector::zeros(12)).unwrap();
        let u = Trajectory::constant(g.clone(), &DVector::from_element(4, params.hover_speed()))
            .unwrap();
        let w = DMatrix::identity(12, 12) * 100.0;
        for j in 0..g.len() {
            assert!(defect_residual(&x, &u, j, &q, &w).unwrap().amax() < 1e-9);
        }
    }

    #[test]
    fn whitening_scales_defect() {
        let g = ChebyshevGrid::new(3, 0.0, 1.0).unwrap();
        let x = scalar(&g, |t| t.sin());
        let u = scalar(&g, |t| t);
        let raw =
            defect_residual(&x, &u, 1, &single_integrator(), &DMatrix::identity(1, 1)).unwrap()[0];
        let q = DMatrix::from_element(1, 1, 4.0);
        let whitener = crate::measurement::whitening_matrix(&q).unwrap();
        let scaled = defect_residual(&x, &u, 1, &single_integrator(), &whitener).unwrap()[0];
        assert!((scaled - raw / 2.0).abs() < 1e-15);
    }

    #[test]
    fn linear_model_jacobian_is_constant() {
        let g = ChebyshevGrid::new(5, 0.0, 1.0).unwrap();
        let model = LinearModel::double_integrator();
        let w = DMatrix::identity(2, 2);
        let x1 = Trajectory::new(g.clone(), DMatrix::from_fn(2, 6, |r, c| (r + c) as f64)).unwrap();
        let u1 = Trajectory::new(g.clone(), DMatrix::from_fn(1, 6, |_, c| c as f64)).unwrap();
        let x2 = Trajectory::new(
            g.clone(),
            DMatrix::from_fn(2, 6, |r, c| (r * c) as f64 - 3.0),
        )
        .unwrap();
        let u2 = Trajectory::new(g.clone(), DMatrix::from_fn(1, 6, |_, c| -(c as f64))).unwrap();
        for j in 0..6 {
            assert_eq!(
                defect_jacobian(&x1, &u1, j, &model, &w).unwrap(),
                defect_jacobian(&x2, &u2, j, &model, &w).unwrap()
            );
        }
    }

    #[test]
    fn control_block_only_touches_node() {
        let g = ChebyshevGrid::new(4, 0.0, 1.0).unwrap();
        let model = LinearModel::double_integrator();
        let x = Trajectory::constant(g.clone(), &DVector::zeros(2)).unwrap();
        let u = Trajectory::constant(g.clone(), &DVector::zeros(1)).unwrap();
        let w = DMatrix::identity(2, 2) * 3.0;
        let (_, ju) = defect_jacobian(&x, &u, 2, &model, &w).unwrap();
        for c in 0..5 {
            let expected = if c == 2 { -3.0 } else { 0.0 };
            assert_eq!(ju[(1, c)], expected);
            assert_eq!(ju[(0, c)], 0.0);
        }
    }

    #[test]
    fn out_of_range_node() {
        let g = ChebyshevGrid::new(2, 0.0, 1.0).unwrap();
        let x = Trajectory::constant(g.clone(), &DVector::zeros(1)).unwrap();
        let u = x.clone();
        assert!(
            defect_residual(&x, &u, 3, &single_integrator(), &DMatrix::identity(1, 1)).is_err()
        );
    }
}
