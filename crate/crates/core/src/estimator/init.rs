//! Initial guess for the quadrotor problem from coarse pose observations.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::cheb::ChebyshevGrid;
use crate::dynamics::{QuadrotorParameters, CONTROL_DIM, STATE_DIM};
use crate::error::{Error, Result};
use crate::so3;
use crate::trajectory::Trajectory;

/// Position and rotation vector at one time, e.g. from visual odometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseObservation {
    pub time: f64,
    pub position: Vector3<f64>,
    pub orientation: Vector3<f64>,
}

fn interpolate_pose(poses: &[PoseObservation], t: f64) -> (Vector3<f64>, Vector3<f64>) {
    let first = &poses[0];
    let last = &poses[poses.len() - 1];
    if t <= first.time {
        return (first.position, first.orientation);
    }
    if t >= last.time {
        return (last.position, last.orientation);
    }
    let k = poses.partition_point(|p| p.time <= t);
    let (a, b) = (&poses[k - 1], &poses[k]);
    let s = (t - a.time) / (b.time - a.time);
    (
        a.position.lerp(&b.position, s),
        a.orientation.lerp(&b.orientation, s),
    )
}

/// Builds `(X, U)` from pose observations: poses are linearly interpolated to
/// the nodes, velocities and body rates come from spectral differentiation,
/// and every motor starts at hover speed.
pub fn initialize(
    grid: &ChebyshevGrid,
    params: &QuadrotorParameters,
    poses: &[PoseObservation],
) -> Result<(Trajectory, Trajectory)> {
    if poses.len() < 2 {
        return Err(Error::InsufficientObservations(format!(
            "need at least two pose observations, got {}",
            poses.len()
        )));
    }
    let mut sorted = poses.to_vec();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));
    if sorted.windows(2).any(|w| w[1].time <= w[0].time) {
        return Err(Error::InvalidParameter(
            "pose observation times must be distinct".into(),
        ));
    }

    let nodes = grid.len();
    let mut pose = DMatrix::zeros(6, nodes);
    for j in 0..nodes {
        let (p, th) = interpolate_pose(&sorted, grid.node(j));
        pose.view_mut((0, j), (3, 1)).copy_from(&p);
        pose.view_mut((3, j), (3, 1)).copy_from(&th);
    }
    let rates = &pose * grid.differentiation_matrix().entries().transpose();

    let mut x = DMatrix::zeros(STATE_DIM, nodes);
    for j in 0..nodes {
        let theta = Vector3::new(pose[(3, j)], pose[(4, j)], pose[(5, j)]);
        let theta_dot = Vector3::new(rates[(3, j)], rates[(4, j)], rates[(5, j)]);
        let omega = so3::right_jacobian(&theta) * theta_dot;
        x.view_mut((0, j), (6, 1)).copy_from(&pose.column(j));
        x.view_mut((6, j), (3, 1))
            .copy_from(&rates.view((0, j), (3, 1)));
        x.view_mut((9, j), (3, 1)).copy_from(&omega);
    }
    let x = Trajectory::new(grid.clone(), x)?;
    let u = Trajectory::constant(
        grid.clone(),
        &DVector::from_element(CONTROL_DIM, params.hover_speed()),
    )?;
    Ok((x, u))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose(t: f64, p: [f64; 3], th: [f64; 3]) -> PoseObservation {
        PoseObservation {
            time: t,
            position: Vector3::from(p),
            orientation: Vector3::from(th),
        }
    }

    #[test]
    fn linear_motion_gives_constant_velocity() {
        let grid = ChebyshevGrid::new(8, 0.0, 2.0).unwrap();
        let params = QuadrotorParameters::default();
        let poses: Vec<_> = (0..=20)
            .map(|k| {
                let t = 0.1 * k as f64;
                pose(t, [t, -2.0 * t, 0.5], [0.0, 0.0, 0.3 * t])
            })
            .collect();
        let (x, u) = initialize(&grid, &params, &poses).unwrap();
        for j in 0..grid.len() {
            let c = x.column(j);
            assert!((c[6] - 1.0).abs() < 1e-9);
            assert!((c[7] + 2.0).abs() < 1e-9);
            assert!(c[8].abs() < 1e-9);
            // pure yaw: ω = θ̇
            assert!((c[11] - 0.3).abs() < 1e-9);
            assert!((u.column(j)[2] - params.hover_speed()).abs() < 1e-12);
        }
    }

    #[test]
    fn unsorted_input_is_accepted_and_clamped() {
        let grid = ChebyshevGrid::new(4, 0.0, 1.0).unwrap();
        let poses = vec![
            pose(0.8, [1.0, 0.0, 0.0], [0.0; 3]),
            pose(0.2, [0.0, 0.0, 0.0], [0.0; 3]),
        ];
        let (x, _) = initialize(&grid, &QuadrotorParameters::default(), &poses).unwrap();
        // node 0 is tf = 1.0, beyond the last pose
        assert_eq!(x.column(0)[0], 1.0);
        assert_eq!(x.column(grid.len() - 1)[0], 0.0);
    }

    #[test]
    fn rejects_too_few_or_duplicate_poses() {
        let grid = ChebyshevGrid::new(4, 0.0, 1.0).unwrap();
        let params = QuadrotorParameters::default();
        assert!(initialize(&grid, &params, &[pose(0.0, [0.0; 3], [0.0; 3])]).is_err());
        let dup = vec![pose(0.5, [0.0; 3], [0.0; 3]), pose(0.5, [1.0; 3], [0.0; 3])];
        assert!(initialize(&grid, &params, &dup).is_err());
    }
}
