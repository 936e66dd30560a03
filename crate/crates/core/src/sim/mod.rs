//! Ground-truth generation, synthetic measurements and error metrics.

mod metrics;
mod rk4;
mod synth;

pub use metrics::{attitude_rmse, motor_speed_error, position_rmse, MotorSpeedError};
pub use rk4::{integrate_rk4, GroundTruth};
pub use synth::{synth_measurements, synth_poses, PixelObservation};

use std::f64::consts::PI;

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Quadrotor, QuadrotorParameters, QuadrotorState, CONTROL_DIM};
use crate::error::{Error, Result};
use crate::measurement::{forward_mount, CameraRig};

/// Largest admissible relative motor-speed modulation.
pub const MAX_AMPLITUDE: f64 = 0.05;

/// Named open-loop motor-speed profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlProfile {
    Hover,
    /// `w_i(t) = w_hover·(1 + a_i·sin(2π·f_i·t + φ_i))`
    SmoothSine {
        amplitudes: [f64; 4],
        frequencies_hz: [f64; 4],
        phases_rad: [f64; 4],
    },
    /// Roll torque at `f`, pitch torque at `2f`, plus a small collective
    /// term, which traces a lissajous-like lateral path.
    FigureEightish {
        amplitude: f64,
        frequency_hz: f64,
    },
}

impl ControlProfile {
    pub fn validate(&self) -> Result<()> {
        let amp_ok = |a: f64| a.is_finite() && a.abs() <= MAX_AMPLITUDE;
        match self {
            Self::Hover => Ok(()),
            Self::SmoothSine {
                amplitudes,
                frequencies_hz,
                phases_rad,
            } => {
                if let Some(a) = amplitudes.iter().find(|a| !amp_ok(**a)) {
                    return Err(Error::Scenario(format!(
                        "amplitude {a} outside [-{MAX_AMPLITUDE}, {MAX_AMPLITUDE}]"
                    )));
                }
                if frequencies_hz
                    .iter()
                    .chain(phases_rad)
                    .any(|v| !v.is_finite())
                {
                    return Err(Error::Scenario(
                        "profile frequencies and phases must be finite".into(),
                    ));
                }
                Ok(())
            }
            Self::FigureEightish {
                amplitude,
                frequency_hz,
            } => {
                if !amp_ok(*amplitude) {
                    return Err(Error::Scenario(format!(
                        "amplitude {amplitude} outside [-{MAX_AMPLITUDE}, {MAX_AMPLITUDE}]"
                    )));
                }
                if !frequency_hz.is_finite() {
                    return Err(Error::Scenario("profile frequency must be finite".into()));
                }
                Ok(())
            }
        }
    }

    /// Motor speeds at time `t` for a given hover speed.
    pub fn speeds(&self, hover: f64, t: f64) -> DVector<f64> {
        match self {
            Self::Hover => DVector::from_element(CONTROL_DIM, hover),
            Self::SmoothSine {
                amplitudes,
                frequencies_hz,
                phases_rad,
            } => DVector::from_fn(CONTROL_DIM, |i, _| {
                hover
                    * (1.0
                        + amplitudes[i] * (2.0 * PI * frequencies_hz[i] * t + phases_rad[i]).sin())
            }),
            Self::FigureEightish {
                amplitude,
                frequency_hz,
            } => {
                let w = 2.0 * PI * frequency_hz;
                let roll = (w * t).sin();
                let pitch = 0.5 * (2.0 * w * t).sin();
                let collective = 0.25 * (w * t).cos();
                // Mixing rows: roll (+,+,−,−), pitch (−,+,+,−).
                let pattern = [roll - pitch, roll + pitch, -roll + pitch, -roll - pitch];
                DVector::from_fn(CONTROL_DIM, |i, _| {
                    hover * (1.0 + amplitude * (0.5 * pattern[i] + collective).clamp(-1.0, 1.0))
                })
            }
        }
    }
}

/// Camera, image and noise settings for a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub rate_hz: f64,
    pub pixel_sigma: f64,
    /// Camera origin in the body frame (forward-looking mount), m.
    pub lever_arm: [f64; 3],
    /// Rate of the coarse pose observations used for initialization.
    #[serde(default = "default_pose_rate")]
    pub pose_rate_hz: f64,
    #[serde(default = "default_pose_sigma_position")]
    pub pose_sigma_position: f64,
    #[serde(default = "default_pose_sigma_orientation")]
    pub pose_sigma_orientation: f64,
}

fn default_pose_rate() -> f64 {
    10.0
}

fn default_pose_sigma_position() -> f64 {
    0.05
}

fn default_pose_sigma_orientation() -> f64 {
    0.02
}

impl CameraConfig {
    pub fn desk() -> Self {
        Self {
            fx: 320.0,
            fy: 320.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
            rate_hz: 20.0,
            pixel_sigma: 1.0,
            lever_arm: [0.1, 0.0, 0.0],
            pose_rate_hz: default_pose_rate(),
            pose_sigma_position: default_pose_sigma_position(),
            pose_sigma_orientation: default_pose_sigma_orientation(),
        }
    }

    pub fn rig(&self) -> Result<CameraRig> {
        CameraRig::new(
            [self.fx, self.fy, self.cx, self.cy],
            forward_mount(),
            Vector3::from(self.lever_arm),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.rig()?;
        let positive = [
            ("camera.rate_hz", self.rate_hz),
            ("camera.pose_rate_hz", self.pose_rate_hz),
            ("camera.pose_sigma_position", self.pose_sigma_position),
            ("camera.pose_sigma_orientation", self.pose_sigma_orientation),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Scenario(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.pixel_sigma.is_finite() && self.pixel_sigma >= 0.0) {
            return Err(Error::Scenario(format!(
                "camera.pixel_sigma must be non-negative, got {}",
                self.pixel_sigma
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Scenario("camera image size must be positive".into()));
        }
        Ok(())
    }

    /// Inside the image rectangle.
    pub fn in_image(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }
}

const DESK_AMPLITUDES: [f64; 4] = [0.045, 0.05, 0.045, 0.04];
const DESK_FREQUENCY: f64 = 0.5;

/// A complete, self-describing simulation setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub params: QuadrotorParameters,
    pub x0: QuadrotorState,
    pub control_profile: ControlProfile,
    pub duration_s: f64,
    pub step_s: f64,
    pub landmarks: Vec<Vector3<f64>>,
    pub camera: CameraConfig,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.control_profile.validate()?;
        self.camera.validate()?;
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::Scenario(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            )));
        }
        if !(self.step_s > 0.0 && self.step_s <= self.duration_s) {
            return Err(Error::Scenario(format!(
                "step_s must be positive and at most duration_s, got {}",
                self.step_s
            )));
        }
        if self.landmarks.is_empty() {
            return Err(Error::Scenario("landmarks must not be empty".into()));
        }
        if self
            .landmarks
            .iter()
            .any(|l| l.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Scenario("landmarks must be finite".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn model(&self) -> Result<Quadrotor> {
        Quadrotor::new(self.params)
    }

    /// Integrates the scenario's control profile from `x0`.
    pub fn ground_truth(&self) -> Result<GroundTruth> {
        self.validate()?;
        let model = self.model()?;
        let hover = self.params.hover_speed();
        let profile = self.control_profile.clone();
        integrate_rk4(
            &model,
            &self.x0.to_vector(),
            |t| profile.speeds(hover, t),
            self.step_s,
            self.duration_s,
            true,
        )
    }

    /// Hover at 1.5 m with a handful of landmarks ahead of the camera.
    pub fn hover() -> Self {
        let mut x0 = QuadrotorState::default();
        x0.position.z = 1.5;
        let landmarks = (0..12)
            .map(|k| {
                let k = k as f64;
                Vector3::new(
                    4.0 + 0.5 * (k % 3.0),
                    -2.0 + 0.4 * k,
                    0.5 + 0.25 * (k % 4.0),
                )
            })
            .collect();
        Self {
            params: QuadrotorParameters::default(),
            x0,
            control_profile: ControlProfile::Hover,
            duration_s: 2.0,
            step_s: 1e-3,
            landmarks,
            camera: CameraConfig::desk(),
            seed: 1,
        }
    }

    /// The default 5 s desk scenario.
    ///
    /// All motors share one frequency, and the initial body rates and
    /// velocity are chosen so that the resulting rates and velocities
    /// oscillate about zero instead of drifting; otherwise the mean body
    /// rate of a sine-driven torque tumbles the vehicle within a second. Landmarks are drawn
    /// uniformly in a 10×10×4 m box centred on the flight.
    pub fn desk() -> Self {
        let params = QuadrotorParameters::default();
        let profile = ControlProfile::SmoothSine {
            amplitudes: DESK_AMPLITUDES,
            frequencies_hz: [DESK_FREQUENCY; 4],
            phases_rad: [0.0; 4],
        };
        let mut x0 = QuadrotorState::default();
        x0.position.z = 1.5;
        // Linearized torque is α·sin(Ωt); ω(0) = −α/Ω makes ω(t) = −(α/Ω)·cos(Ωt).
        let omega = 2.0 * PI * DESK_FREQUENCY;
        let thrust = params.thrust_coeff * params.hover_speed().powi(2);
        let torque =
            params.mixing_matrix() * nalgebra::Vector4::from(DESK_AMPLITUDES) * (2.0 * thrust);
        let alpha = params
            .inertia_matrix()
            .try_inverse()
            .expect("inertia is positive")
            * torque;
        x0.angular_rate = -alpha / omega;
        let mut scenario = Self {
            params,
            x0,
            control_profile: profile,
            duration_s: 5.0,
            step_s: 1e-3,
            landmarks: vec![Vector3::zeros()],
            camera: CameraConfig::desk(),
            seed: 2024,
        };
        // Average over two full periods; a few passes settle the coupling
        // between rate and velocity corrections.
        for _ in 0..4 {
            let gt = scenario.ground_truth().expect("desk profile integrates");
            scenario.x0.angular_rate -= mean_over(&gt, 9, 4.0);
            let gt = scenario.ground_truth().expect("desk profile integrates");
            scenario.x0.velocity -= mean_over(&gt, 6, 4.0);
        }
        let gt = scenario.ground_truth().expect("desk profile integrates");
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for x in gt.states() {
            let p = Vector3::new(x[0], x[1], x[2]);
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
        let centre = 0.5 * (lo + hi);
        let half = Vector3::new(5.0, 5.0, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        scenario.landmarks = (0..40)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
                .component_mul(&half)
                    + centre
            })
            .collect();
        scenario.x0 = round_state(&scenario.x0);
        scenario.landmarks = scenario.landmarks.iter().map(round_vec).collect();
        scenario
    }
}

/// Mean of state rows `first..first + 3` over samples with `t < until`.
fn mean_over(gt: &GroundTruth, first: usize, until: f64) -> Vector3<f64> {
    let mut acc = Vector3::zeros();
    let mut count = 0usize;
    for (_, x) in gt
        .times()
        .iter()
        .zip(gt.states())
        .filter(|(t, _)| **t < until)
    {
        acc += Vector3::new(x[first], x[first + 1], x[first + 2]);
        count += 1;
    }
    acc / count as f64
}

// Keeps the bundled JSON short without changing the flight noticeably.
fn round_vec(v: &Vector3<f64>) -> Vector3<f64> {
    v.map(|c| (c * 1e6).round() / 1e6)
}

fn round_state(s: &QuadrotorState) -> QuadrotorState {
    QuadrotorState {
        position: round_vec(&s.position),
        orientation: round_vec(&s.orientation),
        velocity: round_vec(&s.velocity),
        angular_rate: round_vec(&s.angular_rate),
    }
}
