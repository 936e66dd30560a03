//! Rotation-vector (exponential coordinate) helpers for SO(3).

use nalgebra::{Matrix3, Rotation3, Vector3};

/// Below this angle the closed forms lose digits to cancellation and the
/// Taylor series are used instead.
const SERIES_THRESHOLD: f64 = 1e-2;

pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn exp(theta: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::new(*theta).into_inner()
}

/// Rotation vector of a rotation matrix, accurate near both zero and π.
pub fn log(r: &Matrix3<f64>) -> Vector3<f64> {
    let a = 0.5
        * Vector3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        );
    let sin = a.norm();
    let cos = 0.5 * (r.trace() - 1.0);
    let angle = sin.atan2(cos);
    if cos > -0.9 {
        // angle / sin θ, with the series where sin θ ≈ θ
        let ratio = if angle < 1e-6 {
            1.0 + angle * angle / 6.0
        } else {
            angle / sin
        };
        return a * ratio;
    }
    // Near π the antisymmetric part vanishes; recover the axis from the symmetric part.
    let b = 0.5 * (r + r.transpose()) - Matrix3::identity() * cos;
    let k = (0..3)
        .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
        .unwrap_or(0);
    let mut axis = b.column(k).into_owned() / b[(k, k)].max(f64::MIN_POSITIVE).sqrt();
    axis.normalize_mut();
    if axis.dot(&a) < 0.0 {
        axis = -axis;
    }
    axis * angle
}

/// Right Jacobian `Jr(θ)`: `exp(θ + δ) ≈ exp(θ)·exp(Jr(θ)·δ)`.
pub fn right_jacobian(theta: &Vector3<f64>) -> Matrix3<f64> {
    let s = theta.norm();
    let k = hat(theta);
    let (a, b) = if s < SERIES_THRESHOLD {
        let s2 = s * s;
        (
            0.5 - s2 / 24.0 + s2 * s2 / 720.0,
            1.0 / 6.0 - s2 / 120.0 + s2 * s2 / 5040.0,
        )
    } else {
        ((1.0 - s.cos()) / (s * s), (s - s.sin()) / (s * s * s))
    };
    Matrix3::identity() - a * k + b * k * k
}

/// Coefficient of `[θ]ײ` in `Jr⁻¹`, and its derivative divided by `‖θ‖`.
fn inverse_coefficients(s: f64) -> (f64, f64) {
    if s < SERIES_THRESHOLD {
        let s2 = s * s;
        let c = 1.0 / 12.0 + s2 / 720.0 + s2 * s2 / 30240.0 + s2 * s2 * s2 / 1_209_600.0;
        let dc_over_s = 1.0 / 360.0 + s2 / 7560.0 + s2 * s2 / 201_600.0;
        (c, dc_over_s)
    } else {
        let half = 0.5 * s;
        let cot = half.cos() / half.sin();
        let csc2 = 1.0 / (half.sin() * half.sin());
        let c = 1.0 / (s * s) - cot / (2.0 * s);
        let dc = -2.0 / (s * s * s) + cot / (2.0 * s * s) + csc2 / (4.0 * s);
        (c, dc / s)
    }
}

/// Inverse right Jacobian: `θ̇ = Jr⁻¹(θ)·ω` for body angular rate `ω`.
pub fn right_jacobian_inverse(theta: &Vector3<f64>) -> Matrix3<f64> {
    let k = hat(theta);
    let (c, _) = inverse_coefficients(theta.norm());
    Matrix3::identity() + 0.5 * k + c * k * k
}

/// `∂(Jr⁻¹(θ)·ω)/∂θ`.
pub fn right_jacobian_inverse_times_derivative(
    theta: &Vector3<f64>,
    omega: &Vector3<f64>,
) -> Matrix3<f64> {
    let (c, dc_over_s) = inverse_coefficients(theta.norm());
    // θ×(θ×ω) = θ(θ·ω) − ω(θ·θ)
    let double_cross = theta * theta.dot(omega) - omega * theta.dot(theta);
    let d_double_cross = Matrix3::identity() * theta.dot(omega) + theta * omega.transpose()
        - 2.0 * omega * theta.transpose();
    -0.5 * hat(omega) + c * d_double_cross + dc_over_s * double_cross * theta.transpose()
}
