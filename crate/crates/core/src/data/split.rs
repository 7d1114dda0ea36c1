use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::{feature_names, RawRecord, ScalerParams, FEATURE_COUNT};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

/// Model-ready data: `x` is `[n, 1, f]`, `y` is `[n]`, both scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorDataset {
    pub x: Tensor,
    pub y: Tensor,
    pub feature_names: Vec<String>,
    pub scaler: ScalerParams,
}

impl TensorDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn features(&self) -> usize {
        self.feature_names.len()
    }

    /// Rows `idx` in the given order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        Ok(Self {
            x: self.x.gather_rows(idx)?,
            y: self.y.gather_rows(idx)?,
            feature_names: self.feature_names.clone(),
            scaler: self.scaler.clone(),
        })
    }

    /// Targets in original units.
    pub fn y_original(&self) -> Vec<f64> {
        let col = self.features();
        self.y
            .data()
            .iter()
            .map(|&v| self.scaler.unscale_value(col, v))
            .collect()
    }
}

/// Scales complete records with `scaler` (features then target) and shapes
/// them for the models.
pub fn build_dataset(records: &[RawRecord], scaler: &ScalerParams) -> Result<TensorDataset> {
    if scaler.columns.len() != FEATURE_COUNT + 1 {
        return Err(Error::Invalid(alloc::format!(
            "scaler has {} columns, expected {} features plus the target",
            scaler.columns.len(),
            FEATURE_COUNT
        )));
    }
    let rows: Vec<Vec<f64>> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.values().ok_or_else(|| {
                Error::Invalid(alloc::format!("record {i} ({}) has missing values", r.date))
            })
        })
        .collect::<Result<_>>()?;
    let scaled = super::apply_scaler(&rows, scaler)?;
    let n = scaled.len();
    let mut x = Vec::with_capacity(n * FEATURE_COUNT);
    let mut y = Vec::with_capacity(n);
    for r in scaled {
        x.extend_from_slice(&r[..FEATURE_COUNT]);
        y.push(r[FEATURE_COUNT]);
    }
    Ok(TensorDataset {
        x: reshape_3d(&Tensor::new(alloc::vec![n, FEATURE_COUNT], x)?)?,
        y: Tensor::new(alloc::vec![n], y)?,
        feature_names: feature_names(),
        scaler: scaler.clone(),
    })
}

/// `[n, f]` to `[n, 1, f]`; the data buffer is untouched.
pub fn reshape_3d(x: &Tensor) -> Result<Tensor> {
    if x.rank() != 2 {
        return Err(Error::Invalid(alloc::format!(
            "expected [n, f], got {:?}",
            x.shape()
        )));
    }
    x.reshape(alloc::vec![x.shape()[0], 1, x.shape()[1]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SplitMode {
    /// The last rows form the test set.
    #[default]
    Chronological,
    Shuffled,
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::Chronological => "chronological",
            SplitMode::Shuffled => "shuffled",
        })
    }
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chronological" => Ok(SplitMode::Chronological),
            "shuffled" => Ok(SplitMode::Shuffled),
            other => Err(Error::Invalid(alloc::format!(
                "unknown split mode `{other}` (expected chronological or shuffled)"
            ))),
        }
    }
}

/// Returns `(train, test)` row indices, each ascending. The test set has
/// `ceil(n * test_fraction)` rows.
pub fn train_test_split(
    n: usize,
    test_fraction: f64,
    seed: u64,
    mode: SplitMode,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Invalid(alloc::format!(
            "test fraction {test_fraction} must lie strictly between 0 and 1"
        )));
    }
    // The epsilon keeps 10 * 0.3 = 3.0000000000000004 from rounding up to 4.
    let n_test = (libm::ceil(n as f64 * test_fraction - 1e-9) as usize).min(n);
    match mode {
        SplitMode::Chronological => Ok(((0..n - n_test).collect(), (n - n_test..n).collect())),
        SplitMode::Shuffled => {
            let mut idx: Vec<usize> = (0..n).collect();
            SeededRng::new(seed).shuffle(&mut idx);
            let mut test = idx.split_off(n - n_test);
            idx.sort_unstable();
            test.sort_unstable();
            Ok((idx, test))
        }
    }
}
