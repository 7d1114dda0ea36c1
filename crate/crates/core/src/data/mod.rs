//! Monthly records and everything between raw rows and model-ready tensors:
//! cleaning, scaling, reshaping, splitting and a synthetic generator.

mod clean;
mod scale;
mod split;
mod synth;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use clean::{
    boxplot_bounds, clean, drop_missing, zscore_outliers, BoxplotBounds, CleanMode, CleaningReport,
    ZScoreFlag, ZScoreResult, ZSCORE_THRESHOLD,
};
pub use scale::{apply_scaler, fit_scaler, inverse_scale, ColumnStats, ScaleMode, ScalerParams};
pub use split::{build_dataset, reshape_3d, train_test_split, SplitMode, TensorDataset};
pub use synth::generate_synthetic;

use crate::error::{Error, Result};

/// Number of explanatory columns.
pub const FEATURE_COUNT: usize = 9;

pub const TARGET_NAME: &str = "gasoline_consumption_ml_day";

/// Explanatory columns, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    GasolinePriceUsd,
    FreeGasolinePriceUsd,
    InflationRatePct,
    CommodityPriceIndexPct,
    PopulationGrowthRatePct,
    PopulationTotal,
    RoadDistanceKm,
    GdpPerCapitaUsd,
    VehiclesCount,
}

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::GasolinePriceUsd,
        Feature::FreeGasolinePriceUsd,
        Feature::InflationRatePct,
        Feature::CommodityPriceIndexPct,
        Feature::PopulationGrowthRatePct,
        Feature::PopulationTotal,
        Feature::RoadDistanceKm,
        Feature::GdpPerCapitaUsd,
        Feature::VehiclesCount,
    ];

    /// Canonical CSV column name.
    pub fn name(self) -> &'static str {
        match self {
            Feature::GasolinePriceUsd => "gasoline_price_usd",
            Feature::FreeGasolinePriceUsd => "free_gasoline_price_usd",
            Feature::InflationRatePct => "inflation_rate_pct",
            Feature::CommodityPriceIndexPct => "commodity_price_index_pct",
            Feature::PopulationGrowthRatePct => "population_growth_rate_pct",
            Feature::PopulationTotal => "population_total",
            Feature::RoadDistanceKm => "road_distance_km",
            Feature::GdpPerCapitaUsd => "gdp_per_capita_usd",
            Feature::VehiclesCount => "vehicles_count",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Feature column names in storage order.
pub fn feature_names() -> Vec<String> {
    Feature::ALL
        .iter()
        .map(|f| String::from(f.name()))
        .collect()
}

/// Every CSV column: `date`, the nine features, then the target.
pub fn csv_columns() -> Vec<&'static str> {
    let mut cols = alloc::vec!["date"];
    cols.extend(Feature::ALL.iter().map(|f| f.name()));
    cols.push(TARGET_NAME);
    cols
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    /// `1..=12`
    pub month: u8,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::Invalid(alloc::format!("month {month} out of range")));
        }
        Ok(Self { year, month })
    }

    /// The month `n` months later.
    pub fn plus_months(self, n: u32) -> Self {
        let idx = self.year as i64 * 12 + (self.month as i64 - 1) + n as i64;
        Self {
            year: idx.div_euclid(12) as i32,
            month: (idx.rem_euclid(12) + 1) as u8,
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = Error;

    /// Accepts `YYYY-MM` only.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(alloc::format!("date `{s}` is not YYYY-MM"));
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 || !y.bytes().chain(m.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        Self::new(y.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)
    }
}

/// One month of observations. `None` marks a missing or unparseable cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub date: YearMonth,
    pub features: [Option<f64>; FEATURE_COUNT],
    pub target: Option<f64>,
}

impl RawRecord {
    pub fn feature(&self, f: Feature) -> Option<f64> {
        self.features[f.index()]
    }

    pub fn is_complete(&self) -> bool {
        self.target.is_some() && self.features.iter().all(Option::is_some)
    }

    /// Features then target, when all are present.
    pub fn values(&self) -> Option<Vec<f64>> {
        let mut out: Vec<f64> = self.features.iter().copied().collect::<Option<_>>()?;
        out.push(self.target?);
        Some(out)
    }
}

/// Calendar-year means of every feature (and of the target where present),
/// in year order. Used as the history for trend extrapolation.
pub fn annual_means(records: &[RawRecord]) -> Vec<AnnualRow> {
    let mut rows: Vec<AnnualRow> = Vec::new();
    let mut counts: Vec<([usize; FEATURE_COUNT], usize)> = Vec::new();
    let mut sorted: Vec<&RawRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.date);
    for r in sorted {
        if rows.last().map(|a| a.year) != Some(r.date.year) {
            rows.push(AnnualRow {
                year: r.date.year,
                features: [0.0; FEATURE_COUNT],
                target: None,
            });
            counts.push(([0; FEATURE_COUNT], 0));
        }
        let (row, (fc, tc)) = (rows.last_mut().unwrap(), counts.last_mut().unwrap());
        for (j, v) in r.features.iter().enumerate() {
            if let Some(v) = v {
                row.features[j] += v;
                fc[j] += 1;
            }
        }
        if let Some(t) = r.target {
            *row.target.get_or_insert(0.0) += t;
            *tc += 1;
        }
    }
    for (row, (fc, tc)) in rows.iter_mut().zip(&counts) {
        for (v, &c) in row.features.iter_mut().zip(fc) {
            *v = if c == 0 { f64::NAN } else { *v / c as f64 };
        }
        if let Some(t) = row.target.as_mut() {
            *t /= *tc as f64;
        }
    }
    rows
}

/// Yearly aggregate of [`RawRecord`]s. A feature with no observations in
/// that year is NaN.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnnualRow {
    pub year: i32,
    pub features: [f64; FEATURE_COUNT],
    pub target: Option<f64>,
}

/// One row of the published annual comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub year: i32,
    pub actual: Option<f64>,
    pub ann: f64,
    pub regression: f64,
    pub hybrid: f64,
}

/// The bundled annual reference series, 2007 to 2031; actual consumption is
/// only known through 2021.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSeries {
    pub rows: Vec<ReferenceRow>,
}

impl ReferenceSeries {
    pub fn actuals(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.actual).collect()
    }

    pub fn get(&self, year: i32) -> Option<&ReferenceRow> {
        self.rows.iter().find(|r| r.year == year)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn year_month_parse_and_format() {
        let ym: YearMonth = "2007-03".parse().unwrap();
        assert_eq!(
            ym,
            YearMonth {
                year: 2007,
                month: 3
            }
        );
        assert_eq!(alloc::format!("{ym}"), "2007-03");
        assert_eq!(
            ym.plus_months(10),
            YearMonth {
                year: 2008,
                month: 1
            }
        );
        for bad in ["2007-13", "2007-3", "07-03", "2007/03", "abcd-01", ""] {
            assert!(bad.parse::<YearMonth>().is_err(), "{bad}");
        }
    }

    #[test]
    fn feature_names_round_trip() {
        for f in Feature::ALL {
            assert_eq!(Feature::from_name(f.name()), Some(f));
        }
        assert_eq!(csv_columns().len(), 11);
        assert_eq!(csv_columns()[10], TARGET_NAME);
    }

    #[test]
    fn annual_means_average_per_year() {
        let rec = |y, m, v: f64, t| RawRecord {
            date: YearMonth::new(y, m).unwrap(),
            features: [Some(v); FEATURE_COUNT],
            target: t,
        };
        let rows = annual_means(&[
            rec(2008, 1, 5.0, None),
            rec(2007, 1, 1.0, Some(10.0)),
            rec(2007, 2, 3.0, Some(20.0)),
        ]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].year, 2007);
        assert_eq!(rows[0].features[0], 2.0);
        assert_eq!(rows[0].target, Some(15.0));
        assert_eq!(rows[1].target, None);
    }
}
