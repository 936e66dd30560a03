//! Browser demo: least-squares fits, interpolation and convergence of
//! Chebyshev interpolants. Every export returns a JSON string so the page
//! can stay plain JavaScript.

use chebtraj::cheb::ChebyshevGrid;
use chebtraj::fit::{demo_function, fit_least_squares, DemoSamples};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const DENSE: usize = 400;

/// Test functions on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Demo,
    Runge,
    Abs,
}

impl Target {
    pub fn parse(name: &str) -> Result<Self, String> {
        match name {
            "demo" => Ok(Self::Demo),
            "runge" => Ok(Self::Runge),
            "abs" => Ok(Self::Abs),
            other => Err(format!(
                "unknown function {other:?}; expected demo, runge or abs"
            )),
        }
    }

    pub fn value(self, x: f64) -> f64 {
        match self {
            Self::Demo => demo_function(x),
            Self::Runge => 1.0 / (1.0 + 25.0 * x * x),
            Self::Abs => x.abs(),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Self::Demo => 2.0 * ((2.0 * x).cos() - (2.0 * x).sin()) * demo_function(x),
            Self::Runge => -50.0 * x / (1.0 + 25.0 * x * x).powi(2),
            Self::Abs => x.signum(),
        }
    }
}

fn dense_grid() -> Vec<f64> {
    (0..=DENSE)
        .map(|k| -1.0 + 2.0 * k as f64 / DENSE as f64)
        .collect()
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

fn error_json(message: impl std::fmt::Display) -> String {
    to_json(&serde_json::json!({ "error": message.to_string() }))
}

#[derive(Serialize)]
pub struct FitView {
    pub samples: Vec<(f64, f64)>,
    pub nodes: Vec<(f64, f64)>,
    pub x: Vec<f64>,
    pub fit: Vec<f64>,
    pub truth: Vec<f64>,
    pub rms_residual: f64,
    pub max_deviation: f64,
}

pub fn fit_view(degree: usize, count: usize, sigma: f64, seed: u64) -> Result<FitView, String> {
    let samples = DemoSamples { count, sigma, seed }
        .generate()
        .map_err(|e| e.to_string())?;
    let fit = fit_least_squares(&samples, degree, -1.0, 1.0).map_err(|e| e.to_string())?;
    let x = dense_grid();
    let values = x
        .iter()
        .map(|t| fit.eval(*t))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let truth: Vec<f64> = x.iter().map(|t| demo_function(*t)).collect();
    let max_deviation = values
        .iter()
        .zip(&truth)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(FitView {
        nodes: fit
            .grid()
            .nodes()
            .iter()
            .copied()
            .zip(fit.node_values().iter().copied())
            .collect(),
        samples,
        x,
        fit: values,
        truth,
        rms_residual: fit.rms_residual(),
        max_deviation,
    })
}

#[derive(Serialize)]
pub struct InterpolationView {
    pub nodes: Vec<(f64, f64)>,
    pub x: Vec<f64>,
    pub interpolant: Vec<f64>,
    pub truth: Vec<f64>,
    pub max_error: f64,
}

pub fn interpolation_view(target: Target, degree: usize) -> Result<InterpolationView, String> {
    let grid = ChebyshevGrid::new(degree, -1.0, 1.0).map_err(|e| e.to_string())?;
    let values: Vec<f64> = grid.nodes().iter().map(|t| target.value(*t)).collect();
    let x = dense_grid();
    let interpolant = x
        .iter()
        .map(|t| grid.weights(*t).map(|w| w.interpolate(&values)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let truth: Vec<f64> = x.iter().map(|t| target.value(*t)).collect();
    let max_error = interpolant
        .iter()
        .zip(&truth)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(InterpolationView {
        nodes: grid.nodes().iter().copied().zip(values).collect(),
        x,
        interpolant,
        truth,
        max_error,
    })
}

#[derive(Serialize)]
pub struct ConvergenceView {
    pub degrees: Vec<usize>,
    /// Max interpolation error on a dense grid.
    pub value_error: Vec<f64>,
    /// Max error of the differentiation matrix applied to node samples.
    pub derivative_error: Vec<f64>,
}

pub fn convergence_view(target: Target, max_degree: usize) -> Result<ConvergenceView, String> {
    if !(4..=256).contains(&max_degree) {
        return Err(format!("max degree {max_degree} outside [4, 256]"));
    }
    let mut view = ConvergenceView {
        degrees: Vec::new(),
        value_error: Vec::new(),
        derivative_error: Vec::new(),
    };
    for degree in (2..=max_degree).step_by(2) {
        let grid = ChebyshevGrid::new(degree, -1.0, 1.0).map_err(|e| e.to_string())?;
        let derivative = grid.differentiation_matrix().apply(
            &grid
                .nodes()
                .iter()
                .map(|t| target.value(*t))
                .collect::<Vec<_>>(),
        );
        let derivative_error = grid
            .nodes()
            .iter()
            .zip(&derivative)
            .filter(|(t, _)| target != Target::Abs || t.abs() > 1e-12)
            .map(|(t, d)| (d - target.derivative(*t)).abs())
            .fold(0.0, f64::max);
        view.degrees.push(degree);
        view.value_error
            .push(interpolation_view(target, degree)?.max_error);
        view.derivative_error.push(derivative_error);
    }
    Ok(view)
}

/// Least-squares fit of a degree-`degree` interpolant to `count` noisy
/// samples of `exp(sin 2x + cos 2x)`.
#[wasm_bindgen]
pub fn fit_demo(degree: usize, count: usize, sigma: f64, seed: u32) -> String {
    fit_view(degree, count, sigma, seed as u64).map_or_else(error_json, |v| to_json(&v))
}

/// Interpolant of `function` ("demo", "runge" or "abs") through the CGL nodes.
#[wasm_bindgen]
pub fn interpolate(function: &str, degree: usize) -> String {
    Target::parse(function)
        .and_then(|t| interpolation_view(t, degree))
        .map_or_else(error_json, |v| to_json(&v))
}

/// Interpolation and differentiation error for every even degree up to `max_degree`.
#[wasm_bindgen]
pub fn convergence(function: &str, max_degree: usize) -> String {
    Target::parse(function)
        .and_then(|t| convergence_view(t, max_degree))
        .map_or_else(error_json, |v| to_json(&v))
}
