//! Accuracy metrics, perturbation sensitivity, trend-based forecasting and
//! the emissions converter.

mod forecast;
mod sensitivity;

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use forecast::{
    emissions, extrapolate_features, fit_line, recursive_forecast, EmissionsConfig,
    ForecastScenario, PathSource, DAYS_PER_YEAR,
};
pub use sensitivity::{
    reporting_groups, sensitivity, FeatureInfluence, GroupWeight, SensitivityGroup,
    SensitivityReport, DEFAULT_PERTURBATION,
};

use crate::data::TensorDataset;
use crate::error::{Error, Result};
use crate::models::Predictor;

fn check_lengths(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::Shape {
            op: "metric",
            left: alloc::vec![actual.len()],
            right: alloc::vec![predicted.len()],
        });
    }
    if actual.is_empty() {
        return Err(Error::Empty("metric input"));
    }
    Ok(())
}

pub fn mse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual, predicted)?;
    let sse: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    Ok(sse / actual.len() as f64)
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    Ok(libm::sqrt(mse(actual, predicted)?))
}

/// Mean absolute error.
pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual, predicted)?;
    let sae: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| libm::fabs(a - p))
        .sum();
    Ok(sae / actual.len() as f64)
}

/// `1 - SSE / SS_y`. Undefined when `actual` is constant.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_lengths(actual, predicted)?;
    if actual.len() < 2 {
        return Err(Error::Invalid("R² needs at least two observations".into()));
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_y: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_y == 0.0 {
        return Err(Error::ConstantActual);
    }
    let sse: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    Ok(1.0 - sse / ss_y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MetricSpace {
    /// The scaled target the model is trained on.
    #[default]
    Scaled,
    /// Million liters per day.
    OriginalUnits,
}

impl fmt::Display for MetricSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricSpace::Scaled => "scaled",
            MetricSpace::OriginalUnits => "original_units",
        })
    }
}

impl FromStr for MetricSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scaled" => Ok(MetricSpace::Scaled),
            "original_units" | "original" => Ok(MetricSpace::OriginalUnits),
            other => Err(Error::Invalid(alloc::format!(
                "unknown metric space `{other}` (expected scaled or original_units)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub r_squared: f64,
    pub n: usize,
    pub space: MetricSpace,
}

impl MetricsReport {
    pub fn compute(actual: &[f64], predicted: &[f64], space: MetricSpace) -> Result<Self> {
        let mse = mse(actual, predicted)?;
        Ok(Self {
            mae: mae(actual, predicted)?,
            mse,
            rmse: libm::sqrt(mse),
            r_squared: r_squared(actual, predicted)?,
            n: actual.len(),
            space,
        })
    }
}

/// Predicts `data` once and scores it in the requested space.
pub fn evaluate(
    model: &dyn Predictor,
    data: &TensorDataset,
    space: MetricSpace,
) -> Result<MetricsReport> {
    let target = data.features();
    if data.scaler.columns.len() != target + 1 {
        return Err(Error::Invalid(alloc::format!(
            "scaler has {} columns but the dataset has {} features plus a target",
            data.scaler.columns.len(),
            target
        )));
    }
    let pred = model.predict(&data.x)?;
    match space {
        MetricSpace::Scaled => MetricsReport::compute(data.y.data(), &pred, space),
        MetricSpace::OriginalUnits => {
            let pred: Vec<f64> = pred
                .iter()
                .map(|&v| data.scaler.unscale_value(target, v))
                .collect();
            MetricsReport::compute(&data.y_original(), &pred, space)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_dataset, csv_columns, fit_scaler, generate_synthetic, ScaleMode};
    use crate::models::{linreg_fit, Model};
    use crate::rng::SeededRng;
    use crate::tensor::Tensor;
    use proptest::prelude::*;

    #[test]
    fn r_squared_cases() {
        let y = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        assert_eq!(r_squared(&y, &[2.5; 4]).unwrap(), 0.0);
        // SSE = 0.01 + 0.01 + 0.04 + 0.04 = 0.10, SS_y = 5.
        let r = r_squared(&y, &[1.1, 1.9, 3.2, 3.8]).unwrap();
        assert!((r - 0.98).abs() < 1e-12);
        assert_eq!(r_squared(&[2.0; 3], &[2.0; 3]), Err(Error::ConstantActual));
        assert!(r_squared(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn published_mse_to_rmse_pairs() {
        for (m, want, tol) in [
            (0.000108, 0.0104, 5e-4),
            (0.000264, 0.0164, 5e-4),
            (0.000078, 0.00884, 5e-5),
        ] {
            let got = libm::sqrt(m);
            assert!((got - want).abs() <= tol, "{m}: {got}");
        }
    }

    #[test]
    fn perfect_predictions_and_mismatch() {
        let y = [0.3, 0.1, 0.9];
        let r = MetricsReport::compute(&y, &y, MetricSpace::Scaled).unwrap();
        assert_eq!((r.mae, r.mse, r.rmse, r.r_squared), (0.0, 0.0, 0.0, 1.0));
        assert!(mse(&y, &y[..2]).is_err());
        assert!(mae(&[], &[]).is_err());
    }

    #[test]
    fn memorizing_stub_and_exact_ols() {
        let recs = generate_synthetic(3, 48).unwrap();
        let rows: Vec<Vec<f64>> = recs.iter().map(|r| r.values().unwrap()).collect();
        let scaler = fit_scaler(&csv_columns()[1..], &rows, ScaleMode::Minmax).unwrap();
        let ds = build_dataset(&recs, &scaler).unwrap();
        let y = ds.y.data().to_vec();
        let stub = move |_: &Tensor| -> Result<Vec<f64>> { Ok(y.clone()) };
        for space in [MetricSpace::Scaled, MetricSpace::OriginalUnits] {
            let r = evaluate(&stub, &ds, space).unwrap();
            assert_eq!((r.r_squared, r.rmse, r.n), (1.0, 0.0, 48));
        }

        // Replace the target with an exact linear function of the features.
        let mut exact = ds.clone();
        let w: Vec<f64> = (0..9).map(|j| 0.1 * (j as f64 - 4.0)).collect();
        let ys: Vec<f64> =
            ds.x.data()
                .chunks(9)
                .map(|r| 0.2 + r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())
                .collect();
        exact.y = Tensor::from_vec(ys).unwrap();
        let flat = exact.x.reshape(alloc::vec![48, 9]).unwrap();
        let model = Model::Linreg(linreg_fit(&flat, &exact.y).unwrap());
        let r = evaluate(&model, &exact, MetricSpace::Scaled).unwrap();
        assert!((r.r_squared - 1.0).abs() < 1e-10, "{r:?}");

        let mut broken = ds;
        broken.scaler.columns.pop();
        assert!(evaluate(&model, &broken, MetricSpace::Scaled).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn metric_identities(seed in any::<u64>(), n in 1usize..40) {
            let mut rng = SeededRng::new(seed);
            let a: Vec<f64> = (0..n).map(|_| rng.normal() * 3.0).collect();
            let p: Vec<f64> = (0..n).map(|_| rng.normal() * 3.0).collect();
            let (m, r, e) = (mse(&a, &p).unwrap(), rmse(&a, &p).unwrap(), mae(&a, &p).unwrap());
            prop_assert!((r * r - m).abs() <= 1e-12 * m.max(1.0));
            prop_assert!(e <= r * (1.0 + 1e-12));
            if n >= 2 {
                prop_assert!(r_squared(&a, &p).unwrap() <= 1.0);
                prop_assert_eq!(r_squared(&a, &a).unwrap(), 1.0);
                let mean = a.iter().sum::<f64>() / n as f64;
                let r0 = r_squared(&a, &alloc::vec![mean; n]).unwrap();
                prop_assert!(r0.abs() < 1e-12);
            }
        }
    }
}
