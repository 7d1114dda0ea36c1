use alloc::string::String;
use alloc::vec::Vec;

use crate::data::Feature;
use crate::error::{Error, Result};
use crate::models::Predictor;
use crate::tensor::Tensor;

/// Shift applied to each feature, as a fraction of its observed range.
pub const DEFAULT_PERTURBATION: f64 = 0.10;

/// A reporting row that sums the weights of one or more feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityGroup {
    pub name: String,
    pub columns: Vec<usize>,
}

/// Eight reporting rows over the nine feature columns; the two population
/// columns share one row.
pub fn reporting_groups() -> Vec<SensitivityGroup> {
    use Feature::*;
    let g = |name: &str, fs: &[Feature]| SensitivityGroup {
        name: String::from(name),
        columns: fs.iter().map(|f| f.index()).collect(),
    };
    alloc::vec![
        g("gasoline_price", &[GasolinePriceUsd]),
        g("free_gasoline_price", &[FreeGasolinePriceUsd]),
        g("inflation_rate", &[InflationRatePct]),
        g("commodity_price_index", &[CommodityPriceIndexPct]),
        g("population", &[PopulationGrowthRatePct, PopulationTotal]),
        g("road_distance", &[RoadDistanceKm]),
        g("gdp_per_capita", &[GdpPerCapitaUsd]),
        g("vehicles", &[VehiclesCount]),
    ]
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureInfluence {
    pub name: String,
    /// Mean absolute output change, averaged over both shift directions.
    pub influence: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroupWeight {
    pub name: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SensitivityReport {
    pub perturbation: f64,
    pub features: Vec<FeatureInfluence>,
    pub groups: Vec<GroupWeight>,
    /// Features with zero observed range; their weight is zero.
    pub skipped: Vec<String>,
}

impl SensitivityReport {
    pub fn total_weight(&self) -> f64 {
        self.features.iter().map(|f| f.weight).sum()
    }
}

/// One-at-a-time perturbation sensitivity.
///
/// For feature `j` with observed range `r_j` (over every sample and time
/// step of `x: [n, T, f]`), every sample's column `j` is shifted by
/// `±perturbation · r_j`. The influence is the mean absolute prediction
/// change, averaged over the two directions. Weights are influences divided
/// by their sum, and each group's weight is the sum of its columns' weights.
pub fn sensitivity(
    model: &dyn Predictor,
    x: &Tensor,
    names: &[String],
    perturbation: f64,
    groups: &[SensitivityGroup],
) -> Result<SensitivityReport> {
    let f = x.last_dim();
    if x.rank() < 2 || x.is_empty() {
        return Err(Error::Empty("sensitivity input"));
    }
    if names.len() != f {
        return Err(Error::Invalid(alloc::format!(
            "{} feature names for {f} columns",
            names.len()
        )));
    }
    if !(perturbation > 0.0 && perturbation.is_finite()) {
        return Err(Error::Invalid(alloc::format!(
            "perturbation must be positive, got {perturbation}"
        )));
    }
    if let Some(c) = groups.iter().flat_map(|g| &g.columns).find(|&&c| c >= f) {
        return Err(Error::Invalid(alloc::format!(
            "group column {c} out of range"
        )));
    }

    let base = model.predict(x)?;
    let n = base.len() as f64;
    let mut influence = alloc::vec![0.0; f];
    let mut skipped = Vec::new();
    for j in 0..f {
        let col = x.data().iter().skip(j).step_by(f);
        let lo = col.clone().fold(f64::INFINITY, |a, &b| a.min(b));
        let hi = col.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        if hi <= lo {
            skipped.push(names[j].clone());
            continue;
        }
        let delta = perturbation * (hi - lo);
        let mut total = 0.0;
        for sign in [1.0, -1.0] {
            let mut shifted = x.clone();
            for v in shifted.data_mut().iter_mut().skip(j).step_by(f) {
                *v += sign * delta;
            }
            let out = model.predict(&shifted)?;
            total += out
                .iter()
                .zip(&base)
                .map(|(a, b)| libm::fabs(a - b))
                .sum::<f64>()
                / n;
        }
        influence[j] = total / 2.0;
    }

    let sum: f64 = influence.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(Error::Invalid(
            "model output does not respond to any feature; weights are undefined".into(),
        ));
    }
    let features: Vec<FeatureInfluence> = names
        .iter()
        .zip(&influence)
        .map(|(name, &inf)| FeatureInfluence {
            name: name.clone(),
            influence: inf,
            weight: inf / sum,
        })
        .collect();
    let groups = groups
        .iter()
        .map(|g| GroupWeight {
            name: g.name.clone(),
            weight: g.columns.iter().map(|&c| features[c].weight).sum(),
        })
        .collect();
    Ok(SensitivityReport {
        perturbation,
        features,
        groups,
        skipped,
    })
}
