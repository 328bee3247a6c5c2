//! Flat-file formats: sampled paths as CSV and rough lifts as JSON.
//!
//! Floats are written with 17 significant digits so that files round-trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::paths::SampledPath;
use crate::rough::RoughPath;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text with header `t,x1,...,xd`.
pub fn path_to_csv(path: &SampledPath) -> String {
    let mut out = String::from("t");
    for k in 1..=path.dim() {
        let _ = write!(out, ",x{k}");
    }
    out.push('\n');
    for i in 0..path.len() {
        out.push_str(&fmt_f64(path.times()[i]));
        for v in path.value(i) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Parses CSV text whose first column is time; a non-numeric first line is a header.
pub fn path_from_csv(text: &str) -> Result<SampledPath> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(row) if row.len() >= 2 => {
                times.push(row[0]);
                values.push(row[1..].to_vec());
            }
            Ok(_) => return Err(Error::Parse(format!("line {}: need a time and at least one value", line_no + 1))),
            Err(_) if times.is_empty() && values.is_empty() => continue,
            Err(e) => return Err(Error::Parse(format!("line {}: {e}", line_no + 1))),
        }
    }
    SampledPath::new(times, values)
}

pub fn write_path_csv(file: &Path, path: &SampledPath) -> Result<()> {
    std::fs::write(file, path_to_csv(path))?;
    Ok(())
}

pub fn read_path_csv(file: &Path) -> Result<SampledPath> {
    path_from_csv(&std::fs::read_to_string(file)?)
}

/// Serialized rough path: first level on its grid and the second level of every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftFile {
    pub times: Vec<f64>,
    pub dim: usize,
    /// Row-major `len × dim`.
    pub first: Vec<f64>,
    /// Row-major `(len - 1) × dim × dim`.
    pub second: Vec<f64>,
    pub geometric: bool,
    pub p: f64,
}

impl LiftFile {
    pub fn from_rough(rp: &RoughPath) -> Self {
        LiftFile {
            times: rp.times().to_vec(),
            dim: rp.dim(),
            first: rp.first_level().data().to_vec(),
            second: rp.second_steps(),
            geometric: rp.is_geometric(),
            p: rp.p(),
        }
    }

    pub fn to_rough(&self) -> Result<RoughPath> {
        let first = SampledPath::from_flat(self.times.clone(), self.dim, self.first.clone())?;
        RoughPath::from_steps(first, self.second.clone(), self.geometric, self.p)
    }
}

pub fn write_lift_json(file: &Path, rp: &RoughPath) -> Result<()> {
    std::fs::write(file, serde_json::to_string(&LiftFile::from_rough(rp))?)?;
    Ok(())
}

pub fn read_lift_json(file: &Path) -> Result<RoughPath> {
    let lift: LiftFile = serde_json::from_str(&std::fs::read_to_string(file)?)?;
    lift.to_rough()
}
