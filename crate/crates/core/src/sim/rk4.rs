//! Fixed-step classical Runge–Kutta integration.

use nalgebra::DVector;

use crate::dynamics::{Dynamics, CHART_LIMIT};
use crate::error::{Error, Result};

/// Densely sampled reference trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
    controls: Vec<DVector<f64>>,
    rates: Vec<DVector<f64>>,
}

impl GroundTruth {
    /// Builds from samples; `rates` are `ẋ` at each sample and are used for
    /// cubic Hermite interpolation between samples.
    pub fn new(
        times: Vec<f64>,
        states: Vec<DVector<f64>>,
        controls: Vec<DVector<f64>>,
        rates: Vec<DVector<f64>>,
    ) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Empty);
        }
        if states.len() != times.len()
            || controls.len() != times.len()
            || rates.len() != times.len()
        {
            return Err(Error::Dimension(
                "ground truth columns differ in length".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "ground truth times must increase strictly".into(),
            ));
        }
        Ok(Self {
            times,
            states,
            controls,
            rates,
        })
    }

    /// Recomputes `ẋ` from a model, e.g. after loading states from disk.
    pub fn from_samples<D: Dynamics>(
        model: &D,
        times: Vec<f64>,
        states: Vec<DVector<f64>>,
        controls: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let rates = times
            .iter()
            .zip(states.iter().zip(&controls))
            .map(|(t, (x, u))| model.derivative(x, u, *t))
            .collect::<Result<Vec<_>>>()?;
        Self::new(times, states, controls, rates)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn controls(&self) -> &[DVector<f64>] {
        &self.controls
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn tf(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    fn bracket(&self, t: f64) -> Result<(usize, f64)> {
        if !(t >= self.t0() && t <= self.tf()) {
            return Err(Error::OutOfInterval {
                t,
                t0: self.t0(),
                tf: self.tf(),
            });
        }
        let k = self
            .times
            .partition_point(|&s| s <= t)
            .clamp(1, self.times.len() - 1);
        let s = (t - self.times[k - 1]) / (self.times[k] - self.times[k - 1]);
        Ok((k - 1, s))
    }

    /// State at `t` by cubic Hermite interpolation.
    pub fn state_at(&self, t: f64) -> Result<DVector<f64>> {
        let (k, s) = self.bracket(t)?;
        let h = self.times[k + 1] - self.times[k];
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(&self.states[k] * h00
            + &self.rates[k] * (h10 * h)
            + &self.states[k + 1] * h01
            + &self.rates[k + 1] * (h11 * h))
    }

    /// Control at `t` by linear interpolation.
    pub fn control_at(&self, t: f64) -> Result<DVector<f64>> {
        let (k, s) = self.bracket(t)?;
        Ok(&self.controls[k] * (1.0 - s) + &self.controls[k + 1] * s)
    }
}

/// Integrates `ẋ = f(x, u(t), t)` from `t = 0` with fixed step `step`,
/// shortening the final step to land exactly on `duration`.
///
/// When `check_chart` is set the first three entries after position
/// (indices 3..6) are treated as a rotation vector and must stay inside
/// the chart.
pub fn integrate_rk4<D, U>(
    model: &D,
    x0: &DVector<f64>,
    control: U,
    step: f64,
    duration: f64,
    check_chart: bool,
) -> Result<GroundTruth>
where
    D: Dynamics,
    U: Fn(f64) -> DVector<f64>,
{
    if !(step > 0.0 && step.is_finite() && duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "step ({step}) and duration ({duration}) must be positive"
        )));
    }
    if step > duration {
        return Err(Error::InvalidParameter(format!(
            "step {step} exceeds duration {duration}"
        )));
    }
    if x0.len() != model.state_dim() {
        return Err(Error::Dimension("initial state has wrong dimension".into()));
    }
    let steps = (duration / step - 1e-9).ceil() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    let mut rates = Vec::with_capacity(steps + 1);

    let mut x = x0.clone();
    let mut t = 0.0;
    for k in 0..=steps {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(t));
        }
        if check_chart {
            let angle = x.rows(3, 3).norm();
            if !(angle < CHART_LIMIT) {
                return Err(Error::ChartViolation(angle));
            }
        }
        let u = control(t);
        let k1 = model.derivative(&x, &u, t)?;
        times.push(t);
        states.push(x.clone());
        controls.push(u.clone());
        rates.push(k1.clone());
        if k == steps {
            break;
        }
        let next = if k + 1 == steps {
            duration
        } else {
            (k + 1) as f64 * step
        };
        let h = next - t;
        let um = control(t + 0.5 * h);
        let k2 = model.derivative(&(&x + &k1 * (0.5 * h)), &um, t + 0.5 * h)?;
        let k3 = model.derivative(&(&x + &k2 * (0.5 * h)), &um, t + 0.5 * h)?;
        let k4 = model.derivative(&(&x + &k3 * h), &control(next), next)?;
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t = next;
    }
    GroundTruth::new(times, states, controls, rates)
}
