//! X-configuration quadrotor with Newton–Euler rigid-body dynamics.
//!
//! World frame is z-up with gravity `(0, 0, -g)`. The packed state is
//! `[p, θ, v, ω]` with `θ` the world←body rotation vector and `ω` the body
//! angular rate. Controls are the four motor speeds in rad/s, numbered
//! counter-clockwise from the front-left motor seen from above.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use super::Dynamics;
use crate::error::{Error, Result};
use crate::so3;

pub const STATE_DIM: usize = 12;
pub const CONTROL_DIM: usize = 4;

/// Largest admissible rotation-vector norm.
pub const CHART_LIMIT: f64 = PI - 1e-6;

fn default_gravity() -> f64 {
    9.81
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadrotorParameters {
    /// kg
    pub mass: f64,
    /// `(Ixx, Iyy, Izz)`, kg·m²
    pub inertia: [f64; 3],
    /// m
    pub arm_length: f64,
    /// N/(rad/s)²
    pub thrust_coeff: f64,
    /// N/(m/s)²
    pub drag_coeff: f64,
    /// Yaw torque per unit thrust, m.
    pub torque_ratio: f64,
    /// m/s²
    #[serde(default = "default_gravity")]
    pub gravity: f64,
}

impl Default for QuadrotorParameters {
    fn default() -> Self {
        Self {
            mass: 1.0,
            inertia: [0.0049, 0.0049, 0.0069],
            arm_length: 0.17,
            thrust_coeff: 1.91e-6,
            drag_coeff: 0.1,
            torque_ratio: 0.013,
            gravity: default_gravity(),
        }
    }
}

impl QuadrotorParameters {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("inertia[0]", self.inertia[0]),
            ("inertia[1]", self.inertia[1]),
            ("inertia[2]", self.inertia[2]),
            ("arm_length", self.arm_length),
            ("thrust_coeff", self.thrust_coeff),
            ("torque_ratio", self.torque_ratio),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.drag_coeff.is_finite() && self.drag_coeff >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "drag_coeff must be non-negative, got {}",
                self.drag_coeff
            )));
        }
        if !self.gravity.is_finite() {
            return Err(Error::InvalidParameter("gravity must be finite".into()));
        }
        Ok(())
    }

    /// Motor speed at which four equal thrusts balance gravity.
    pub fn hover_speed(&self) -> f64 {
        (self.mass * self.gravity / (4.0 * self.thrust_coeff)).sqrt()
    }

    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.inertia))
    }

    /// Per-motor thrust to body torque.
    pub fn mixing_matrix(&self) -> Matrix3x4<f64> {
        let l = self.arm_length;
        let c = self.torque_ratio;
        Matrix3x4::new(l, l, -l, -l, -l, l, l, -l, -c, c, -c, c)
    }
}

/// Unpacked 12-dimensional quadrotor state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadrotorState {
    pub position: Vector3<f64>,
    pub orientation: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub angular_rate: Vector3<f64>,
}

impl QuadrotorState {
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() != STATE_DIM {
            return Err(Error::Dimension(format!(
                "quadrotor state has 12 entries, got {}",
                x.len()
            )));
        }
        Ok(Self {
            position: Vector3::new(x[0], x[1], x[2]),
            orientation: Vector3::new(x[3], x[4], x[5]),
            velocity: Vector3::new(x[6], x[7], x[8]),
            angular_rate: Vector3::new(x[9], x[10], x[11]),
        })
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            STATE_DIM,
            self.position
                .iter()
                .chain(self.orientation.iter())
                .chain(self.velocity.iter())
                .chain(self.angular_rate.iter())
                .copied(),
        )
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        so3::exp(&self.orientation)
    }

    fn check_chart(&self) -> Result<()> {
        let s = self.orientation.norm();
        if !(s < CHART_LIMIT) {
            return Err(Error::ChartViolation(s));
        }
        Ok(())
    }
}

/// Four motor speeds, rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorSpeeds(Vector4<f64>);

impl MotorSpeeds {
    pub fn new(w: [f64; 4]) -> Result<Self> {
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "motor speeds must be non-negative: {w:?}"
            )));
        }
        Ok(Self(Vector4::from(w)))
    }

    pub fn hover(params: &QuadrotorParameters) -> Self {
        Self(Vector4::from_element(params.hover_speed()))
    }

    pub fn as_vector(&self) -> &Vector4<f64> {
        &self.0
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.0.as_slice())
    }
}

fn motor_vector(u: &[f64]) -> Result<Vector4<f64>> {
    if u.len() != CONTROL_DIM {
        return Err(Error::Dimension(format!(
            "quadrotor control has 4 entries, got {}",
            u.len()
        )));
    }
    Ok(Vector4::new(u[0], u[1], u[2], u[3]))
}

/// Total world-frame force: gravity, collective thrust along body z, and
/// quadratic drag opposing velocity.
pub fn force_world(
    state: &QuadrotorState,
    w: &Vector4<f64>,
    params: &QuadrotorParameters,
) -> Vector3<f64> {
    let body_z = state.rotation().column(2).into_owned();
    let thrust: f64 = w.iter().map(|wi| params.thrust_coeff * wi * wi).sum();
    let gravity = Vector3::new(0.0, 0.0, -params.mass * params.gravity);
    let drag = -params.drag_coeff * state.velocity.norm() * state.velocity;
    gravity + body_z * thrust + drag
}

/// Body torque from the mixing matrix. Gyroscopic and aerodynamic moments are not modelled.
pub fn torque_body(
    w: &Vector4<f64>,
    _angular_rate: &Vector3<f64>,
    params: &QuadrotorParameters,
) -> Vector3<f64> {
    let thrusts = w.map(|wi| params.thrust_coeff * wi * wi);
    params.mixing_matrix() * thrusts
}

/// The quadrotor dynamics model.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrotor {
    params: QuadrotorParameters,
}

impl Quadrotor {
    pub fn new(params: QuadrotorParameters) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &QuadrotorParameters {
        &self.params
    }

    pub fn state_derivative(
        &self,
        state: &QuadrotorState,
        w: &Vector4<f64>,
    ) -> Result<QuadrotorState> {
        state.check_chart()?;
        let p = &self.params;
        let inertia = p.inertia_matrix();
        let omega = state.angular_rate;
        let force = force_world(state, w, p);
        let torque = torque_body(w, &omega, p);
        let iw = inertia * omega;
        let omega_dot = Vector3::new(
            (torque.x - omega.cross(&iw).x) / p.inertia[0],
            (torque.y - omega.cross(&iw).y) / p.inertia[1],
            (torque.z - omega.cross(&iw).z) / p.inertia[2],
        );
        Ok(QuadrotorState {
            position: state.velocity,
            orientation: so3::right_jacobian_inverse(&state.orientation) * omega,
            velocity: force / p.mass,
            angular_rate: omega_dot,
        })
    }
}

impl Dynamics for Quadrotor {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn control_dim(&self) -> usize {
        CONTROL_DIM
    }

    fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> Result<DVector<f64>> {
        let state = QuadrotorState::from_slice(x.as_slice())?;
        let w = motor_vector(u.as_slice())?;
        Ok(self.state_derivative(&state, &w)?.to_vector())
    }

    fn jacobians(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        _t: f64,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let state = QuadrotorState::from_slice(x.as_slice())?;
        state.check_chart()?;
        let w = motor_vector(u.as_slice())?;
        let p = &self.params;
        let theta = state.orientation;
        let omega = state.angular_rate;
        let v = state.velocity;
        let r = state.rotation();
        let e3 = Vector3::z();
        let thrust: f64 = w.iter().map(|wi| p.thrust_coeff * wi * wi).sum();
        let inertia = p.inertia_matrix();
        let inertia_inv = Matrix3::from_diagonal(&Vector3::from(p.inertia).map(|i| 1.0 / i));

        let mut f = DMatrix::zeros(STATE_DIM, STATE_DIM);
        let mut g = DMatrix::zeros(STATE_DIM, CONTROL_DIM);

        // ṗ = v
        f.fixed_view_mut::<3, 3>(0, 6)
            .copy_from(&Matrix3::identity());

        // θ̇ = Jr⁻¹(θ) ω
        f.fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&so3::right_jacobian_inverse_times_derivative(
                &theta, &omega,
            ));
        f.fixed_view_mut::<3, 3>(3, 9)
            .copy_from(&so3::right_jacobian_inverse(&theta));

        // v̇ = F / m
        let d_bodyz = -r * so3::hat(&e3) * so3::right_jacobian(&theta);
        f.fixed_view_mut::<3, 3>(6, 3)
            .copy_from(&(d_bodyz * (thrust / p.mass)));
        let speed = v.norm();
        let d_drag = if speed > 0.0 {
            -p.drag_coeff * (Matrix3::identity() * speed + v * v.transpose() / speed)
        } else {
            Matrix3::zeros()
        };
        f.fixed_view_mut::<3, 3>(6, 6).copy_from(&(d_drag / p.mass));
        let body_z = r.column(2).into_owned();
        for i in 0..CONTROL_DIM {
            let dthrust = 2.0 * p.thrust_coeff * w[i];
            g.fixed_view_mut::<3, 1>(6, i)
                .copy_from(&(body_z * (dthrust / p.mass)));
        }

        // ω̇ = I⁻¹ (τ − ω × Iω)
        let d_gyro = -so3::hat(&omega) * inertia + so3::hat(&(inertia * omega));
        f.fixed_view_mut::<3, 3>(9, 9)
            .copy_from(&(inertia_inv * d_gyro));
        let mix = p.mixing_matrix();
        for i in 0..CONTROL_DIM {
            let dthrust = 2.0 * p.thrust_coeff * w[i];
            let col = inertia_inv * mix.column(i) * dthrust;
            g.fixed_view_mut::<3, 1>(9, i).copy_from(&col);
        }

        Ok((f, g))
    }
}
