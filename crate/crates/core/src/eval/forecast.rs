use alloc::string::String;
use alloc::vec::Vec;

use crate::data::ScalerParams;
use crate::error::{Error, Result};
use crate::models::Predictor;
use crate::tensor::Tensor;

/// Least-squares line `y = a + b x`; returns `(a, b)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::Shape {
            op: "fit_line",
            left: alloc::vec![xs.len()],
            right: alloc::vec![ys.len()],
        });
    }
    if xs.len() < 2 {
        return Err(Error::Invalid(alloc::format!(
            "a trend needs at least two points, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Invalid("trend x values are all equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

/// Extends every column of `history` (`(year, values)` rows) by its own
/// least-squares line over all history years, for the `horizon` years after
/// the last one.
pub fn extrapolate_features(
    history: &[(i32, Vec<f64>)],
    horizon: usize,
) -> Result<Vec<(i32, Vec<f64>)>> {
    if history.len() < 2 {
        return Err(Error::Invalid(alloc::format!(
            "trend extrapolation needs at least two years of history, got {}",
            history.len()
        )));
    }
    let width = history[0].1.len();
    if history.iter().any(|(_, v)| v.len() != width) {
        return Err(Error::Invalid("history rows differ in width".into()));
    }
    let years: Vec<f64> = history.iter().map(|(y, _)| *y as f64).collect();
    let lines: Vec<(f64, f64)> = (0..width)
        .map(|j| {
            let col: Vec<f64> = history.iter().map(|(_, v)| v[j]).collect();
            fit_line(&years, &col)
        })
        .collect::<Result<_>>()?;
    let last = history.iter().map(|(y, _)| *y).max().unwrap_or(0);
    Ok((1..=horizon as i32)
        .map(|k| {
            let year = last + k;
            let row = lines.iter().map(|(a, b)| a + b * year as f64).collect();
            (year, row)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PathSource {
    LinearTrend,
    Override,
}

/// Future feature values, one source per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastScenario {
    pub years: Vec<i32>,
    pub feature_names: Vec<String>,
    /// `values[year][feature]`; `None` is a gap.
    pub values: Vec<Vec<Option<f64>>>,
    pub sources: Vec<PathSource>,
}

impl ForecastScenario {
    /// Every feature follows its linear trend over `history`.
    pub fn linear_trend(
        feature_names: Vec<String>,
        history: &[(i32, Vec<f64>)],
        horizon: usize,
    ) -> Result<Self> {
        if history.first().map(|(_, v)| v.len()) != Some(feature_names.len()) {
            return Err(Error::Invalid(
                "history width does not match the feature names".into(),
            ));
        }
        let future = extrapolate_features(history, horizon)?;
        Ok(Self {
            years: future.iter().map(|(y, _)| *y).collect(),
            values: future
                .into_iter()
                .map(|(_, v)| v.into_iter().map(Some).collect())
                .collect(),
            sources: alloc::vec![PathSource::LinearTrend; feature_names.len()],
            feature_names,
        })
    }

    /// Replaces one feature's path. Years absent from `path` become gaps.
    pub fn set_override(&mut self, feature: usize, path: &[(i32, f64)]) -> Result<()> {
        if feature >= self.feature_names.len() {
            return Err(Error::Invalid(alloc::format!(
                "feature {feature} out of range"
            )));
        }
        self.sources[feature] = PathSource::Override;
        for (year, row) in self.years.iter().zip(&mut self.values) {
            row[feature] = path.iter().find(|(y, _)| y == year).map(|&(_, v)| v);
        }
        Ok(())
    }

    /// `(feature, year)` pairs without a value.
    pub fn gaps(&self) -> Vec<(String, i32)> {
        let mut out = Vec::new();
        for (year, row) in self.years.iter().zip(&self.values) {
            for (name, v) in self.feature_names.iter().zip(row) {
                if v.is_none() {
                    out.push((name.clone(), *year));
                }
            }
        }
        out
    }
}

/// Predicts each scenario year: features are scaled with `scaler`, run
/// through the model as single-step samples, and the prediction is mapped
/// back through the target column (the scaler's last). Sorted by year.
pub fn recursive_forecast(
    model: &dyn Predictor,
    scenario: &ForecastScenario,
    scaler: &ScalerParams,
) -> Result<Vec<(i32, f64)>> {
    let gaps = scenario.gaps();
    if !gaps.is_empty() {
        return Err(Error::ScenarioGap { missing: gaps });
    }
    let f = scenario.feature_names.len();
    if scaler.columns.len() != f + 1 {
        return Err(Error::Invalid(alloc::format!(
            "scaler has {} columns, scenario has {f} features plus the target",
            scaler.columns.len()
        )));
    }
    let mut order: Vec<usize> = (0..scenario.years.len()).collect();
    order.sort_by_key(|&i| scenario.years[i]);
    if order.is_empty() {
        return Ok(Vec::new());
    }
    let mut x = Vec::with_capacity(order.len() * f);
    for &i in &order {
        for (j, v) in scenario.values[i].iter().enumerate() {
            x.push(scaler.scale_value(j, v.unwrap_or(f64::NAN)));
        }
    }
    let pred = model.predict(&Tensor::new(alloc::vec![order.len(), 1, f], x)?)?;
    Ok(order
        .iter()
        .zip(pred)
        .map(|(&i, p)| (scenario.years[i], scaler.unscale_value(f, p)))
        .collect())
}

pub const DAYS_PER_YEAR: f64 = 365.0;

/// Emission factor in kg CO₂ per liter. There is no built-in default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmissionsConfig {
    factor: f64,
    pub days_per_year: f64,
}

impl EmissionsConfig {
    pub fn new(factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::Invalid(alloc::format!(
                "emission factor must be positive (kg CO2 per liter), got {factor}"
            )));
        }
        Ok(Self {
            factor,
            days_per_year: DAYS_PER_YEAR,
        })
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }
}

/// `(year, ML/day)` to `(year, tonnes CO₂/year)`:
/// `ML/day · 1e6 L · factor kg/L · days / 1000`.
pub fn emissions(consumption: &[(i32, f64)], config: &EmissionsConfig) -> Vec<(i32, f64)> {
    consumption
        .iter()
        .map(|&(year, ml)| {
            (
                year,
                ml * 1e6 * config.factor * config.days_per_year / 1000.0,
            )
        })
        .collect()
}
