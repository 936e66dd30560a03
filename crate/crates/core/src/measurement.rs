//! Measurement models and whitened residuals.
//!
//! Every model is evaluated at a single time from the local quantities
//! `x(t)`, `ẋ(t)` and `u(t)`, with a local Jacobian laid out over the
//! concatenation `[x; ẋ; u]`. The estimator lifts local Jacobians onto the
//! stacked node values with the interpolation weights.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kron::kron_weights;
use crate::so3;
use crate::trajectory::{ControlTrajectory, StateTrajectory};

/// Minimum camera-frame depth accepted by the projection model, m.
pub const MIN_DEPTH: f64 = 0.01;

/// Mount rotation of a camera looking along body +x.
pub fn forward_mount() -> Matrix3<f64> {
    Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0)
}

/// Pinhole intrinsics plus the rigid mount of the camera on the body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraRig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Camera axes expressed in the body frame.
    body_from_camera: Matrix3<f64>,
    /// Camera origin in the body frame, m.
    camera_in_body: Vector3<f64>,
}

impl CameraRig {
    pub fn new(
        intrinsics: [f64; 4],
        body_from_camera: Matrix3<f64>,
        camera_in_body: Vector3<f64>,
    ) -> Result<Self> {
        let [fx, fy, cx, cy] = intrinsics;
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "focal lengths must be positive: {fx}, {fy}"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidParameter(
                "principal point must be finite".into(),
            ));
        }
        let ortho = (body_from_camera.transpose() * body_from_camera - Matrix3::identity())
            .abs()
            .max();
        if !(ortho < 1e-9) || body_from_camera.determinant() < 0.0 {
            return Err(Error::InvalidParameter(
                "camera mount rotation is not orthonormal".into(),
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            body_from_camera,
            camera_in_body,
        })
    }

    /// Camera looking along body +x with image x to body −y and image y to body −z.
    pub fn forward_looking(intrinsics: [f64; 4], lever_arm: f64) -> Result<Self> {
        Self::new(
            intrinsics,
            forward_mount(),
            Vector3::new(lever_arm, 0.0, 0.0),
        )
    }

    pub fn body_from_camera(&self) -> &Matrix3<f64> {
        &self.body_from_camera
    }

    pub fn camera_in_body(&self) -> &Vector3<f64> {
        &self.camera_in_body
    }

    /// Landmark in camera coordinates for a body pose.
    pub fn to_camera(
        &self,
        position: &Vector3<f64>,
        orientation: &Vector3<f64>,
        landmark: &Vector3<f64>,
    ) -> Vector3<f64> {
        let r = so3::exp(orientation);
        let in_body = r.transpose() * (landmark - position);
        self.body_from_camera.transpose() * (in_body - self.camera_in_body)
    }

    /// Inverse of the projection for a known camera-frame depth.
    pub fn unproject(
        &self,
        position: &Vector3<f64>,
        orientation: &Vector3<f64>,
        pixel: &Vector2<f64>,
        depth: f64,
    ) -> Vector3<f64> {
        let pc = Vector3::new(
            (pixel.x - self.cx) * depth / self.fx,
            (pixel.y - self.cy) * depth / self.fy,
            depth,
        );
        let in_body = self.body_from_camera * pc + self.camera_in_body;
        so3::exp(orientation) * in_body + position
    }
}

/// Pixel coordinates of a known landmark seen from a body pose.
pub fn project_landmark(
    position: &Vector3<f64>,
    orientation: &Vector3<f64>,
    landmark: &Vector3<f64>,
    rig: &CameraRig,
) -> Result<Vector2<f64>> {
    let pc = rig.to_camera(position, orientation, landmark);
    if !(pc.z > MIN_DEPTH) {
        return Err(Error::Cheirality { depth: pc.z });
    }
    Ok(Vector2::new(
        rig.fx * pc.x / pc.z + rig.cx,
        rig.fy * pc.y / pc.z + rig.cy,
    ))
}

/// Projection and its Jacobians with respect to position and rotation vector.
pub fn project_landmark_with_jacobian(
    position: &Vector3<f64>,
    orientation: &Vector3<f64>,
    landmark: &Vector3<f64>,
    rig: &CameraRig,
) -> Result<(Vector2<f64>, Matrix2x3<f64>, Matrix2x3<f64>)> {
    let r = so3::exp(orientation);
    let in_body = r.transpose() * (landmark - position);
    let rbc_t = rig.body_from_camera.transpose();
    let pc = rbc_t * (in_body - rig.camera_in_body);
    if !(pc.z > MIN_DEPTH) {
        return Err(Error::Cheirality { depth: pc.z });
    }
    let iz = 1.0 / pc.z;
    let pixel = Vector2::new(rig.fx * pc.x * iz + rig.cx, rig.fy * pc.y * iz + rig.cy);
    let d_pixel = Matrix2x3::new(
        rig.fx * iz,
        0.0,
        -rig.fx * pc.x * iz * iz,
        0.0,
        rig.fy * iz,
        -rig.fy * pc.y * iz * iz,
    );
    let d_position = d_pixel * (-rbc_t * r.transpose());
    let d_orientation = d_pixel * rbc_t * so3::hat(&in_body) * so3::right_jacobian(orientation);
    Ok((pixel, d_position, d_orientation))
}

/// Quantities a measurement may depend on at its timestamp.
#[derive(Debug, Clone)]
pub struct LocalPoint {
    pub state: DVector<f64>,
    pub state_rate: DVector<f64>,
    pub control: DVector<f64>,
}

/// Prediction `h` and its Jacobians with respect to `x`, `ẋ` and `u`.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub value: DVector<f64>,
    pub d_state: DMatrix<f64>,
    pub d_state_rate: Option<DMatrix<f64>>,
    pub d_control: Option<DMatrix<f64>>,
}

/// User-supplied measurement function, which may depend on controls.
pub trait MeasurementFunction: Send + Sync {
    fn output_dim(&self) -> usize;
    fn predict(&self, point: &LocalPoint) -> Result<Prediction>;
}

/// Which measurement model a record uses, with its fixed parameters.
#[derive(Clone)]
pub enum MeasurementModel {
    /// Pixel observation of a known world landmark (quadrotor state layout).
    LandmarkProjection {
        landmark: Vector3<f64>,
        rig: CameraRig,
    },
    /// Direct observation of the selected state components.
    PoseDirect {
        components: Vec<usize>,
    },
    /// Observation of the selected components of `ẋ`.
    StateDerivative {
        components: Vec<usize>,
    },
    Custom(Arc<dyn MeasurementFunction>),
}

impl fmt::Debug for MeasurementModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LandmarkProjection { landmark, .. } => f
                .debug_struct("LandmarkProjection")
                .field("landmark", landmark)
                .finish(),
            Self::PoseDirect { components } => f
                .debug_struct("PoseDirect")
                .field("components", components)
                .finish(),
            Self::StateDerivative { components } => f
                .debug_struct("StateDerivative")
                .field("components", components)
                .finish(),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Serialized tag naming a measurement model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelTag {
    LandmarkProjection,
    PoseDirect,
    StateDerivative,
    Custom,
}

impl MeasurementModel {
    pub fn tag(&self) -> ModelTag {
        match self {
            Self::LandmarkProjection { .. } => ModelTag::LandmarkProjection,
            Self::PoseDirect { .. } => ModelTag::PoseDirect,
            Self::StateDerivative { .. } => ModelTag::StateDerivative,
            Self::Custom(_) => ModelTag::Custom,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Self::LandmarkProjection { .. } => 2,
            Self::PoseDirect { components } | Self::StateDerivative { components } => {
                components.len()
            }
            Self::Custom(m) => m.output_dim(),
        }
    }

    fn uses_state_rate(&self) -> bool {
        match self {
            Self::StateDerivative { .. } | Self::Custom(_) => true,
            Self::LandmarkProjection { .. } | Self::PoseDirect { .. } => false,
        }
    }

    pub fn predict(&self, point: &LocalPoint) -> Result<Prediction> {
        let n = point.state.len();
        match self {
            Self::LandmarkProjection { landmark, rig } => {
                if n < 6 {
                    return Err(Error::Dimension(
                        "projection needs position and rotation states".into(),
                    ));
                }
                let p = Vector3::new(point.state[0], point.state[1], point.state[2]);
                let th = Vector3::new(point.state[3], point.state[4], point.state[5]);
                let (pixel, dp, dth) = project_landmark_with_jacobian(&p, &th, landmark, rig)?;
                let mut d_state = DMatrix::zeros(2, n);
                d_state.fixed_view_mut::<2, 3>(0, 0).copy_from(&dp);
                d_state.fixed_view_mut::<2, 3>(0, 3).copy_from(&dth);
                Ok(Prediction {
                    value: DVector::from_column_slice(pixel.as_slice()),
                    d_state,
                    d_state_rate: None,
                    d_control: None,
                })
            }
            Self::PoseDirect { components } => Ok(Prediction {
                value: select(&point.state, components)?,
                d_state: selector(components, n),
                d_state_rate: None,
                d_control: None,
            }),
            Self::StateDerivative { components } => Ok(Prediction {
                value: select(&point.state_rate, components)?,
                d_state: DMatrix::zeros(components.len(), n),
                d_state_rate: Some(selector(components, n)),
                d_control: None,
            }),
            Self::Custom(m) => m.predict(point),
        }
    }
}

fn select(v: &DVector<f64>, components: &[usize]) -> Result<DVector<f64>> {
    if let Some(&bad) = components.iter().find(|&&c| c >= v.len()) {
        return Err(Error::Dimension(format!(
            "component {bad} out of range for dimension {}",
            v.len()
        )));
    }
    Ok(DVector::from_iterator(
        components.len(),
        components.iter().map(|&c| v[c]),
    ))
}

fn selector(components: &[usize], n: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(components.len(), n);
    for (i, &c) in components.iter().enumerate() {
        s[(i, c)] = 1.0;
    }
    s
}

/// One measurement: timestamp, value, noise covariance and model.
#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    time: f64,
    z: DVector<f64>,
    covariance: DMatrix<f64>,
    /// `L⁻¹` with `L·Lᵀ = R`.
    whitener: DMatrix<f64>,
    model: MeasurementModel,
}

impl MeasurementRecord {
    pub fn new(
        time: f64,
        z: DVector<f64>,
        covariance: DMatrix<f64>,
        model: MeasurementModel,
    ) -> Result<Self> {
        if !time.is_finite() {
            return Err(Error::InvalidParameter(
                "measurement time must be finite".into(),
            ));
        }
        if z.len() != model.output_dim() {
            return Err(Error::Dimension(format!(
                "measurement has {} entries, model produces {}",
                z.len(),
                model.output_dim()
            )));
        }
        let whitener = whitening_matrix(&covariance)?;
        if whitener.nrows() != z.len() {
            return Err(Error::Dimension(format!(
                "covariance is {}x{}, measurement has {} entries",
                covariance.nrows(),
                covariance.ncols(),
                z.len()
            )));
        }
        Ok(Self {
            time,
            z,
            covariance,
            whitener,
            model,
        })
    }

    /// Isotropic covariance `σ²·I`.
    pub fn isotropic(
        time: f64,
        z: DVector<f64>,
        sigma: f64,
        model: MeasurementModel,
    ) -> Result<Self> {
        let dim = z.len();
        Self::new(
            time,
            z,
            DMatrix::identity(dim, dim) * (sigma * sigma),
            model,
        )
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn z(&self) -> &DVector<f64> {
        &self.z
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn whitener(&self) -> &DMatrix<f64> {
        &self.whitener
    }

    pub fn model(&self) -> &MeasurementModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    fn local_point(
        &self,
        x: &StateTrajectory,
        u: &ControlTrajectory,
    ) -> Result<(LocalPoint, LocalWeights)> {
        let grid = x.grid();
        let w = grid.weights(self.time)?;
        let state = match w.node() {
            Some(j) => x.column(j),
            None => x.values() * w.as_vector(),
        };
        let control = match w.node() {
            Some(j) => u.column(j),
            None => u.values() * w.as_vector(),
        };
        let rate_weights = self
            .model
            .uses_state_rate()
            .then(|| grid.differentiation_matrix().derivative_weights(&w));
        let state_rate = match &rate_weights {
            Some(v) => x.values() * v,
            None => DVector::zeros(x.dim()),
        };
        Ok((
            LocalPoint {
                state,
                state_rate,
                control,
            },
            LocalWeights {
                value: w.as_vector().clone(),
                rate: rate_weights,
            },
        ))
    }

    /// Whitened residual `L⁻¹(z − h)`.
    pub fn residual(&self, x: &StateTrajectory, u: &ControlTrajectory) -> Result<DVector<f64>> {
        let (point, _) = self.local_point(x, u)?;
        let pred = self.model.predict(&point)?;
        Ok(&self.whitener * (&self.z - pred.value))
    }

    /// Whitened residual and its Jacobian over `[x; ẋ; u]` at the record time.
    pub fn linearize_local(
        &self,
        x: &StateTrajectory,
        u: &ControlTrajectory,
    ) -> Result<LocalLinearization> {
        let n = x.dim();
        let p = u.dim();
        let (point, weights) = self.local_point(x, u)?;
        let pred = self.model.predict(&point)?;
        let m = self.dim();
        let mut jac = DMatrix::zeros(m, 2 * n + p);
        jac.view_mut((0, 0), (m, n))
            .copy_from(&(-&self.whitener * &pred.d_state));
        if let Some(d) = &pred.d_state_rate {
            jac.view_mut((0, n), (m, n))
                .copy_from(&(-&self.whitener * d));
        }
        if let Some(d) = &pred.d_control {
            jac.view_mut((0, 2 * n), (m, p))
                .copy_from(&(-&self.whitener * d));
        }
        Ok(LocalLinearization {
            residual: &self.whitener * (&self.z - pred.value),
            jacobian: jac,
            weights,
        })
    }

    /// Jacobians of the whitened residual over `vec(X)` and `vec(U)`.
    pub fn residual_jacobian(
        &self,
        x: &StateTrajectory,
        u: &ControlTrajectory,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let n = x.dim();
        let p = u.dim();
        let lin = self.linearize_local(x, u)?;
        let m = self.dim();
        let w = lin.weights.value.as_slice();
        let mut jx = kron_weights(w, &lin.jacobian.view((0, 0), (m, n)).into_owned());
        if let Some(v) = &lin.weights.rate {
            jx += kron_weights(
                v.as_slice(),
                &lin.jacobian.view((0, n), (m, n)).into_owned(),
            );
        }
        let ju = kron_weights(w, &lin.jacobian.view((0, 2 * n), (m, p)).into_owned());
        Ok((jx, ju))
    }
}

/// Interpolation weights for value and (optionally) time derivative.
#[derive(Debug, Clone)]
pub struct LocalWeights {
    pub value: DVector<f64>,
    pub rate: Option<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct LocalLinearization {
    pub residual: DVector<f64>,
    /// Jacobian over `[x; ẋ; u]`.
    pub jacobian: DMatrix<f64>,
    pub weights: LocalWeights,
}

/// `L⁻¹` for the lower Cholesky factor `L` of a symmetric positive-definite matrix.
pub fn whitening_matrix(covariance: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !covariance.is_square() || covariance.nrows() == 0 {
        return Err(Error::NotPositiveDefinite);
    }
    let scale = covariance.abs().max();
    let asym = (covariance - covariance.transpose()).abs().max();
    if !(asym <= 1e-12 * scale) || covariance.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    let chol = covariance
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let n = l.nrows();
    l.solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(Error::NotPositiveDefinite)
}
