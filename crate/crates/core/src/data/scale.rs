use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ScaleMode {
    /// `(x - mean) / std`, population std.
    Standard,
    /// `(x - min) / (max - min)`.
    #[default]
    Minmax,
}

impl fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleMode::Standard => "standard",
            ScaleMode::Minmax => "minmax",
        })
    }
}

impl FromStr for ScaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(ScaleMode::Standard),
            "minmax" => Ok(ScaleMode::Minmax),
            other => Err(Error::Invalid(alloc::format!(
                "unknown scaling mode `{other}` (expected standard or minmax)"
            ))),
        }
    }
}

/// Statistics of one column on the data the scaler was fitted on. All four
/// are kept whichever mode is active.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalerParams {
    pub mode: ScaleMode,
    /// One entry per column, target included (conventionally last).
    pub columns: Vec<ColumnStats>,
}

impl ScalerParams {
    fn offset_and_spread(&self, column: usize) -> (f64, f64) {
        let c = &self.columns[column];
        match self.mode {
            ScaleMode::Standard => (c.mean, c.std),
            ScaleMode::Minmax => (c.min, c.max - c.min),
        }
    }

    pub fn scale_value(&self, column: usize, v: f64) -> f64 {
        let (o, s) = self.offset_and_spread(column);
        (v - o) / s
    }

    pub fn unscale_value(&self, column: usize, v: f64) -> f64 {
        let (o, s) = self.offset_and_spread(column);
        v * s + o
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

/// Fits per-column statistics on row-major `rows`.
pub fn fit_scaler(names: &[&str], rows: &[Vec<f64>], mode: ScaleMode) -> Result<ScalerParams> {
    if rows.is_empty() {
        return Err(Error::Empty("scaler fit data"));
    }
    let n = rows.len() as f64;
    let mut columns = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let col = || rows.iter().map(move |r| r[j]);
        if rows.iter().any(|r| r.len() != names.len()) {
            return Err(Error::Invalid(alloc::format!(
                "rows must have {} columns",
                names.len()
            )));
        }
        let mean = col().sum::<f64>() / n;
        let std = libm::sqrt(col().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n);
        let min = col().fold(f64::INFINITY, f64::min);
        let max = col().fold(f64::NEG_INFINITY, f64::max);
        let degenerate = match mode {
            ScaleMode::Standard if std <= 0.0 => Some("zero standard deviation"),
            ScaleMode::Minmax if max <= min => Some("zero range"),
            _ => None,
        };
        if let Some(reason) = degenerate {
            return Err(Error::DegenerateColumn {
                column: String::from(*name),
                reason,
            });
        }
        columns.push(ColumnStats {
            name: String::from(*name),
            mean,
            std,
            min,
            max,
        });
    }
    Ok(ScalerParams { mode, columns })
}

/// Scales every row. Row width must match the fitted column count.
pub fn apply_scaler(rows: &[Vec<f64>], params: &ScalerParams) -> Result<Vec<Vec<f64>>> {
    rows.iter()
        .map(|r| {
            if r.len() != params.columns.len() {
                return Err(Error::Shape {
                    op: "apply_scaler",
                    left: alloc::vec![r.len()],
                    right: alloc::vec![params.columns.len()],
                });
            }
            Ok(r.iter()
                .enumerate()
                .map(|(j, &v)| params.scale_value(j, v))
                .collect())
        })
        .collect()
}

/// Maps scaled values of one column back to original units.
pub fn inverse_scale(values: &[f64], params: &ScalerParams, column: usize) -> Result<Vec<f64>> {
    if column >= params.columns.len() {
        return Err(Error::Invalid(alloc::format!(
            "column {column} out of range for a {}-column scaler",
            params.columns.len()
        )));
    }
    Ok(values
        .iter()
        .map(|&v| params.unscale_value(column, v))
        .collect())
}
