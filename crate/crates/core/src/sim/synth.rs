//! Synthetic camera and pose observations from ground truth.

use nalgebra::{DVector, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{GroundTruth, Scenario};
use crate::error::{Error, Result};
use crate::estimator::PoseObservation;
use crate::measurement::{
    project_landmark, CameraRig, MeasurementModel, MeasurementRecord, MIN_DEPTH,
};

// Separate streams keep pixel noise independent of the pose settings.
const PIXEL_STREAM: u64 = 0;
const POSE_STREAM: u64 = 1;

/// One noisy pixel observation of a known landmark.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelObservation {
    pub time: f64,
    pub landmark_index: usize,
    pub landmark: Vector3<f64>,
    pub pixel: Vector2<f64>,
    pub sigma: f64,
}

impl PixelObservation {
    /// Measurement record with covariance `σ²·I₂`.
    pub fn to_record(&self, rig: CameraRig) -> Result<MeasurementRecord> {
        MeasurementRecord::isotropic(
            self.time,
            DVector::from_column_slice(self.pixel.as_slice()),
            self.sigma,
            MeasurementModel::LandmarkProjection {
                landmark: self.landmark,
                rig,
            },
        )
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn ticks(t0: f64, tf: f64, rate: f64) -> impl Iterator<Item = f64> {
    (0..)
        .map(move |k| t0 + k as f64 / rate)
        .take_while(move |t| *t <= tf)
}

fn noise(sigma: f64) -> Result<Normal<f64>> {
    Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// Projects every landmark at each camera tick and keeps those in front of
/// the camera and inside the image, adding Gaussian pixel noise.
pub fn synth_measurements(
    truth: &GroundTruth,
    scenario: &Scenario,
) -> Result<Vec<PixelObservation>> {
    let cam = &scenario.camera;
    let rig = cam.rig()?;
    let dist = noise(cam.pixel_sigma)?;
    let mut rng = rng(scenario.seed, PIXEL_STREAM);
    let mut out = Vec::new();
    for t in ticks(truth.t0(), truth.tf(), cam.rate_hz) {
        let x = truth.state_at(t)?;
        let p = Vector3::new(x[0], x[1], x[2]);
        let th = Vector3::new(x[3], x[4], x[5]);
        for (i, lm) in scenario.landmarks.iter().enumerate() {
            if rig.to_camera(&p, &th, lm).z <= MIN_DEPTH {
                continue;
            }
            let pixel = project_landmark(&p, &th, lm, &rig)?;
            if !cam.in_image(pixel.x, pixel.y) {
                continue;
            }
            let noisy = pixel + Vector2::new(dist.sample(&mut rng), dist.sample(&mut rng));
            out.push(PixelObservation {
                time: t,
                landmark_index: i,
                landmark: *lm,
                pixel: noisy,
                sigma: cam.pixel_sigma,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::Scenario("no landmark is ever visible".into()));
    }
    Ok(out)
}

/// Coarse noisy poses standing in for visual odometry; used only to
/// initialize the estimator.
pub fn synth_poses(truth: &GroundTruth, scenario: &Scenario) -> Result<Vec<PoseObservation>> {
    let cam = &scenario.camera;
    let pos = noise(cam.pose_sigma_position)?;
    let rot = noise(cam.pose_sigma_orientation)?;
    let mut rng = rng(scenario.seed, POSE_STREAM);
    let mut times: Vec<f64> = ticks(truth.t0(), truth.tf(), cam.pose_rate_hz).collect();
    if times.last() != Some(&truth.tf()) {
        times.push(truth.tf());
    }
    times
        .into_iter()
        .map(|t| {
            let x = truth.state_at(t)?;
            let mut draw = |d: &Normal<f64>| {
                Vector3::new(d.sample(&mut rng), d.sample(&mut rng), d.sample(&mut rng))
            };
            let position = Vector3::new(x[0], x[1], x[2]) + draw(&pos);
            let orientation = Vector3::new(x[3], x[4], x[5]) + draw(&rot);
            Ok(PoseObservation {
                time: t,
                position,
                orientation,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::QuadrotorParameters;
    use crate::estimator::EstimationProblem;
    use crate::trajectory::Trajectory;
    use crate::{ChebyshevGrid, Quadrotor};

    #[test]
    fn noiseless_pixels_have_zero_residual() {
        let mut s = Scenario::hover();
        s.camera.pixel_sigma = 0.0;
        let gt = s.ground_truth().unwrap();
        let obs = synth_measurements(&gt, &s).unwrap();
        assert!(!obs.is_empty());
        let rig = s.camera.rig().unwrap();
        for o in &obs {
            let x = gt.state_at(o.time).unwrap();
            let p = Vector3::new(x[0], x[1], x[2]);
            let th = Vector3::new(x[3], x[4], x[5]);
            assert_eq!(
                project_landmark(&p, &th, &o.landmark, &rig).unwrap(),
                o.pixel
            );
        }
    }

    #[test]
    fn records_of_hover_truth_are_consistent() {
        let s = Scenario::hover();
        let gt = s.ground_truth().unwrap();
        let rig = s.camera.rig().unwrap();
        let records: Vec<_> = synth_measurements(&gt, &s)
            .unwrap()
            .iter()
            .map(|o| o.to_record(rig).unwrap())
            .collect();
        let grid = ChebyshevGrid::new(8, 0.0, s.duration_s).unwrap();
        let x = Trajectory::constant(grid.clone(), &s.x0.to_vector()).unwrap();
        let u = Trajectory::constant(
            grid.clone(),
            &DVector::from_element(4, s.params.hover_speed()),
        )
        .unwrap();
        let problem = EstimationProblem::new(
            grid,
            Quadrotor::new(QuadrotorParameters::default()).unwrap(),
            nalgebra::DMatrix::identity(12, 12),
            records.clone(),
        )
        .unwrap();
        // Whitened residuals are unit-variance noise.
        let e1 = problem.cost(&x, &u).unwrap().measurement;
        let dof = 2.0 * records.len() as f64;
        assert!((e1 / dof - 1.0).abs() < 0.2, "{}", e1 / dof);
    }

    #[test]
    fn deterministic_under_seed() {
        let s = Scenario::hover();
        let gt = s.ground_truth().unwrap();
        assert_eq!(
            synth_measurements(&gt, &s).unwrap(),
            synth_measurements(&gt, &s).unwrap()
        );
        assert_eq!(synth_poses(&gt, &s).unwrap(), synth_poses(&gt, &s).unwrap());
        let mut other = s.clone();
        other.seed += 1;
        assert_ne!(
            synth_measurements(&gt, &s).unwrap(),
            synth_measurements(&gt, &other).unwrap()
        );
    }

    #[test]
    fn pixel_noise_has_requested_spread() {
        let mut s = Scenario::hover();
        s.duration_s = 10.0;
        s.camera.rate_hz = 100.0;
        s.camera.pixel_sigma = 2.0;
        let gt = s.ground_truth().unwrap();
        let obs = synth_measurements(&gt, &s).unwrap();
        let rig = s.camera.rig().unwrap();
        let mut sq = 0.0;
        let mut n = 0;
        for o in &obs {
            let x = gt.state_at(o.time).unwrap();
            let clean = project_landmark(
                &Vector3::new(x[0], x[1], x[2]),
                &Vector3::new(x[3], x[4], x[5]),
                &o.landmark,
                &rig,
            )
            .unwrap();
            let d = o.pixel - clean;
            sq += d.norm_squared();
            n += 2;
        }
        assert!(n >= 10_000, "{n}");
        let sd = (sq / n as f64).sqrt();
        assert!((sd / 2.0 - 1.0).abs() < 0.03, "{sd}");
    }

    #[test]
    fn invisible_landmarks_are_an_error() {
        let mut s = Scenario::hover();
        // Behind the camera.
        s.landmarks = vec![Vector3::new(-5.0, 0.0, 1.5)];
        let gt = s.ground_truth().unwrap();
        assert!(matches!(
            synth_measurements(&gt, &s),
            Err(Error::Scenario(_))
        ));
    }

    #[test]
    fn poses_span_the_interval() {
        let s = Scenario::hover();
        let gt = s.ground_truth().unwrap();
        let poses = synth_poses(&gt, &s).unwrap();
        assert_eq!(poses[0].time, 0.0);
        assert_eq!(poses.last().unwrap().time, s.duration_s);
    }
}
