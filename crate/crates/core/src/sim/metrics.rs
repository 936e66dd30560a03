//! Error metrics of an estimate against ground truth.

use std::f64::consts::PI;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3;

const RAD_S_TO_RPM: f64 = 60.0 / (2.0 * PI);

/// Mean per-motor error in RPM and percent of the true speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotorSpeedError {
    pub rpm: Vec<f64>,
    pub percent: Vec<f64>,
}

fn check_pairs(truth: &[DVector<f64>], estimate: &[DVector<f64>]) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::Empty);
    }
    if truth.len() != estimate.len() {
        return Err(Error::Dimension(format!(
            "{} truth samples against {} estimates",
            truth.len(),
            estimate.len()
        )));
    }
    Ok(())
}

/// Per-motor mean `|w − ŵ|` (in RPM) and mean `|w − ŵ|/w·100` over paired samples.
pub fn motor_speed_error(
    truth: &[DVector<f64>],
    estimate: &[DVector<f64>],
) -> Result<MotorSpeedError> {
    check_pairs(truth, estimate)?;
    let p = truth[0].len();
    let mut rpm = vec![0.0; p];
    let mut percent = vec![0.0; p];
    for (w, w_hat) in truth.iter().zip(estimate) {
        if w.len() != p || w_hat.len() != p {
            return Err(Error::Dimension(
                "motor count differs between samples".into(),
            ));
        }
        for i in 0..p {
            let err = (w[i] - w_hat[i]).abs();
            rpm[i] += err * RAD_S_TO_RPM;
            percent[i] += 100.0 * err / w[i];
        }
    }
    let n = truth.len() as f64;
    Ok(MotorSpeedError {
        rpm: rpm.into_iter().map(|v| v / n).collect(),
        percent: percent.into_iter().map(|v| v / n).collect(),
    })
}

fn block(x: &DVector<f64>, first: usize) -> Vector3<f64> {
    Vector3::new(x[first], x[first + 1], x[first + 2])
}

/// Root-mean-square position error, m.
pub fn position_rmse(truth: &[DVector<f64>], estimate: &[DVector<f64>]) -> Result<f64> {
    check_pairs(truth, estimate)?;
    let sum: f64 = truth
        .iter()
        .zip(estimate)
        .map(|(x, y)| (block(x, 0) - block(y, 0)).norm_squared())
        .sum();
    Ok((sum / truth.len() as f64).sqrt())
}

/// Root-mean-square geodesic attitude error, rad.
pub fn attitude_rmse(truth: &[DVector<f64>], estimate: &[DVector<f64>]) -> Result<f64> {
    check_pairs(truth, estimate)?;
    let sum: f64 = truth
        .iter()
        .zip(estimate)
        .map(|(x, y)| {
            let r = so3::exp(&block(x, 3)).transpose() * so3::exp(&block(y, 3));
            so3::log(&r).norm_squared()
        })
        .sum();
    Ok((sum / truth.len() as f64).sqrt())
}
