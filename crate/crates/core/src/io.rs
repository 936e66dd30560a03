//! CSV and JSON artifacts.
//!
//! Times are written with nine decimals; other values use the shortest
//! representation that parses back to the same `f64`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DVector, Vector2, Vector3};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::estimator::PoseObservation;
use crate::sim::{GroundTruth, PixelObservation};

pub const STATE_COLUMNS: [&str; 12] = [
    "px", "py", "pz", "rx", "ry", "rz", "vx", "vy", "vz", "wx", "wy", "wz",
];
pub const MOTOR_COLUMNS: [&str; 4] = ["m1", "m2", "m3", "m4"];
const MEASUREMENT_COLUMNS: [&str; 8] = ["t", "landmark", "lx", "ly", "lz", "u", "v", "sigma_px"];
const POSE_COLUMNS: [&str; 7] = ["t", "px", "py", "pz", "rx", "ry", "rz"];

pub fn time(t: f64) -> String {
    format!("{t:.9}")
}

fn format_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(
        path,
    )?)))
}

/// Reads a headed CSV, checks the header and parses every field as `f64`.
fn read_table(path: &Path, expected: &[&str]) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|e| format_error(path, e.to_string()))?;
    let mut reader = csv::Reader::from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != expected {
        return Err(format_error(
            path,
            format!("expected columns {expected:?}, found {header:?}"),
        ));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let row = record
            .iter()
            .zip(expected)
            .map(|(field, name)| {
                field.trim().parse::<f64>().map_err(|_| {
                    format_error(
                        path,
                        format!("line {line}, column {name}: cannot parse {field:?}"),
                    )
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != expected.len() {
            return Err(format_error(
                path,
                format!("line {line}: expected {} fields", expected.len()),
            ));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(format_error(path, "no data rows"));
    }
    Ok(rows)
}

fn sample_row(t: f64, x: &DVector<f64>, u: &DVector<f64>) -> Vec<String> {
    std::iter::once(time(t))
        .chain(x.iter().chain(u.iter()).map(|v| v.to_string()))
        .collect()
}

fn trajectory_header() -> Vec<&'static str> {
    std::iter::once("t")
        .chain(STATE_COLUMNS)
        .chain(MOTOR_COLUMNS)
        .collect()
}

/// Writes time-stamped state and motor-speed samples.
pub fn write_samples<'a>(
    path: &Path,
    rows: impl IntoIterator<Item = (f64, &'a DVector<f64>, &'a DVector<f64>)>,
) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(trajectory_header())?;
    for (t, x, u) in rows {
        w.write_record(sample_row(t, x, u))?;
    }
    w.flush()?;
    Ok(())
}

/// Times, states and controls, one entry per row.
pub type Samples = (Vec<f64>, Vec<DVector<f64>>, Vec<DVector<f64>>);

/// Reads samples written by [`write_samples`].
pub fn read_samples(path: &Path) -> Result<Samples> {
    let rows = read_table(path, &trajectory_header())?;
    let mut times = Vec::with_capacity(rows.len());
    let mut states = Vec::with_capacity(rows.len());
    let mut controls = Vec::with_capacity(rows.len());
    for row in rows {
        times.push(row[0]);
        states.push(DVector::from_column_slice(&row[1..13]));
        controls.push(DVector::from_column_slice(&row[13..17]));
    }
    Ok((times, states, controls))
}

pub fn write_ground_truth(path: &Path, truth: &GroundTruth) -> Result<()> {
    write_samples(
        path,
        truth
            .times()
            .iter()
            .zip(truth.states().iter().zip(truth.controls()))
            .map(|(t, (x, u))| (*t, x, u)),
    )
}

/// Reads ground truth and recomputes `ẋ` with `model`.
pub fn read_ground_truth<D: Dynamics>(path: &Path, model: &D) -> Result<GroundTruth> {
    let (times, states, controls) = read_samples(path)?;
    GroundTruth::from_samples(model, times, states, controls)
}

pub fn write_measurements(path: &Path, observations: &[PixelObservation]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(MEASUREMENT_COLUMNS)?;
    for o in observations {
        w.write_record([
            time(o.time),
            o.landmark_index.to_string(),
            o.landmark.x.to_string(),
            o.landmark.y.to_string(),
            o.landmark.z.to_string(),
            o.pixel.x.to_string(),
            o.pixel.y.to_string(),
            o.sigma.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_measurements(path: &Path) -> Result<Vec<PixelObservation>> {
    read_table(path, &MEASUREMENT_COLUMNS)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            if r[1] < 0.0 || r[1].fract() != 0.0 {
                return Err(format_error(
                    path,
                    format!("line {}: landmark index must be a whole number", i + 2),
                ));
            }
            Ok(PixelObservation {
                time: r[0],
                landmark_index: r[1] as usize,
                landmark: Vector3::new(r[2], r[3], r[4]),
                pixel: Vector2::new(r[5], r[6]),
                sigma: r[7],
            })
        })
        .collect()
}

pub fn write_poses(path: &Path, poses: &[PoseObservation]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(POSE_COLUMNS)?;
    for p in poses {
        let mut row = vec![time(p.time)];
        row.extend(
            p.position
                .iter()
                .chain(p.orientation.iter())
                .map(|v| v.to_string()),
        );
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_poses(path: &Path) -> Result<Vec<PoseObservation>> {
    Ok(read_table(path, &POSE_COLUMNS)?
        .into_iter()
        .map(|r| PoseObservation {
            time: r[0],
            position: Vector3::new(r[1], r[2], r[3]),
            orientation: Vector3::new(r[4], r[5], r[6]),
        })
        .collect())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| format_error(path, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| format_error(path, e.to_string()))
}
