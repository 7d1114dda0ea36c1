use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use super::{Feature, RawRecord, TARGET_NAME};
use crate::error::{Error, Result};

pub const ZSCORE_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CleanMode {
    /// Every feature and the target must be present.
    #[default]
    Training,
    /// The target may be missing.
    Forecast,
}

/// Row accounting for one cleaning run. Indices refer to positions in the
/// input handed to [`clean`].
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CleaningReport {
    pub rows_in: usize,
    pub dropped_missing: Vec<usize>,
    /// `(row, target value)` outside the box-plot fences.
    pub dropped_boxplot: Vec<(usize, f64)>,
    pub dropped_zscore: Vec<ZScoreFlag>,
    pub rows_out: usize,
    /// Columns with zero spread, which the z-score filter cannot judge.
    pub skipped_columns: Vec<String>,
    pub warnings: Vec<String>,
}

impl CleaningReport {
    /// Distinct input rows removed by any stage.
    pub fn dropped_rows(&self) -> BTreeSet<usize> {
        let mut rows: BTreeSet<usize> = self.dropped_missing.iter().copied().collect();
        rows.extend(self.dropped_boxplot.iter().map(|&(r, _)| r));
        rows.extend(self.dropped_zscore.iter().map(|f| f.row));
        rows
    }

    pub fn balances(&self) -> bool {
        self.rows_out + self.dropped_rows().len() == self.rows_in
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ZScoreFlag {
    pub row: usize,
    pub column: String,
    pub z: f64,
}

/// Removes rows with a missing feature, or a missing target in training mode.
pub fn drop_missing(records: &[RawRecord], mode: CleanMode) -> (Vec<RawRecord>, CleaningReport) {
    let mut report = CleaningReport {
        rows_in: records.len(),
        ..CleaningReport::default()
    };
    let mut kept = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let ok = r.features.iter().all(Option::is_some)
            && (mode == CleanMode::Forecast || r.target.is_some());
        if ok {
            kept.push(r.clone());
        } else {
            report.dropped_missing.push(i);
        }
    }
    report.rows_out = kept.len();
    if kept.is_empty() && !records.is_empty() {
        report
            .warnings
            .push(String::from("every row had a missing value; nothing left"));
    }
    (kept, report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoxplotBounds {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    /// `q1 - 1.5 IQR`
    pub lower: f64,
    /// `q3 + 1.5 IQR`
    pub upper: f64,
}

impl BoxplotBounds {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

/// Quartiles by linear interpolation between order statistics at
/// `h = (n - 1) p` (the R-7 / NumPy default), and the 1.5 IQR fences.
pub fn boxplot_bounds(values: &[f64]) -> Result<BoxplotBounds> {
    if values.len() < 4 {
        return Err(Error::Invalid(alloc::format!(
            "box-plot bounds need at least 4 values, got {}",
            values.len()
        )));
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = (sorted.len() - 1) as f64 * p;
        let lo = libm::floor(h) as usize;
        let hi = (lo + 1).min(sorted.len() - 1);
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let (q1, median, q3) = (q(0.25), q(0.5), q(0.75));
    let iqr = q3 - q1;
    Ok(BoxplotBounds {
        q1,
        median,
        q3,
        lower: q1 - 1.5 * iqr,
        upper: q3 + 1.5 * iqr,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZScoreResult {
    /// Row indices that survive, ascending.
    pub keep: Vec<usize>,
    pub flagged: Vec<ZScoreFlag>,
    /// Names of columns skipped for having zero spread.
    pub skipped: Vec<String>,
}

/// Single-pass z-score filter over named columns of equal length.
///
/// Each column's mean and population standard deviation are computed once on
/// the full input; a row is dropped if any `|z| > threshold`.
pub fn zscore_outliers(columns: &[(&str, &[f64])], threshold: f64) -> ZScoreResult {
    let n = columns.first().map_or(0, |(_, c)| c.len());
    let mut out = ZScoreResult::default();
    let mut drop = alloc::vec![false; n];
    for &(name, col) in columns {
        debug_assert_eq!(col.len(), n);
        if n == 0 {
            break;
        }
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = libm::sqrt(var);
        // Rounding leaves a residue of a few ulps on constant columns.
        if std <= 1e-12 * libm::fabs(mean).max(1.0) {
            out.skipped.push(String::from(name));
            continue;
        }
        for (row, v) in col.iter().enumerate() {
            let z = (v - mean) / std;
            if libm::fabs(z) > threshold {
                drop[row] = true;
                out.flagged.push(ZScoreFlag {
                    row,
                    column: String::from(name),
                    z,
                });
            }
        }
    }
    out.keep = (0..n).filter(|&i| !drop[i]).collect();
    out
}

/// The full training-mode pipeline: missing rows, then box-plot fences on the
/// target, then z-scores on every numeric column.
///
/// The two filters repeat until neither removes a row, so running `clean` on
/// its own output changes nothing.
pub fn clean(records: &[RawRecord], threshold: f64) -> (Vec<RawRecord>, CleaningReport) {
    let (complete, mut report) = drop_missing(records, CleanMode::Training);
    // Original index of every surviving row.
    let mut origin: Vec<usize> = (0..records.len())
        .filter(|i| report.dropped_missing.binary_search(i).is_err())
        .collect();
    let mut rows = complete;
    let mut skipped = BTreeSet::new();

    loop {
        let mut removed = false;

        if rows.len() >= 4 {
            let targets: Vec<f64> = rows.iter().map(|r| r.target.unwrap_or(0.0)).collect();
            if let Ok(b) = boxplot_bounds(&targets) {
                let mut keep = Vec::with_capacity(rows.len());
                for (k, &t) in targets.iter().enumerate() {
                    if b.contains(t) {
                        keep.push(k);
                    } else {
                        report.dropped_boxplot.push((origin[k], t));
                    }
                }
                if keep.len() < rows.len() {
                    removed = true;
                    (rows, origin) = select(&rows, &origin, &keep);
                }
            }
        }

        let columns: Vec<Vec<f64>> = (0..=Feature::ALL.len())
            .map(|j| {
                rows.iter()
                    .map(|r| r.values().map_or(f64::NAN, |v| v[j]))
                    .collect()
            })
            .collect();
        let mut named: Vec<(&str, &[f64])> = Feature::ALL
            .iter()
            .zip(&columns)
            .map(|(f, c)| (f.name(), c.as_slice()))
            .collect();
        named.push((TARGET_NAME, &columns[Feature::ALL.len()]));
        let z = zscore_outliers(&named, threshold);
        skipped.extend(z.skipped);
        if z.keep.len() < rows.len() {
            removed = true;
            report
                .dropped_zscore
                .extend(z.flagged.into_iter().map(|f| ZScoreFlag {
                    row: origin[f.row],
                    ..f
                }));
            (rows, origin) = select(&rows, &origin, &z.keep);
        }

        if !removed {
            break;
        }
    }

    report.skipped_columns = skipped.into_iter().collect();
    report.rows_out = rows.len();
    (rows, report)
}

fn select(rows: &[RawRecord], origin: &[usize], keep: &[usize]) -> (Vec<RawRecord>, Vec<usize>) {
    (
        keep.iter().map(|&k| rows[k].clone()).collect(),
        keep.iter().map(|&k| origin[k]).collect(),
    )
}
