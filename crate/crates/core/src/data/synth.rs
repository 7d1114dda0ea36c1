//! Deterministic stand-in for the monthly consumption dataset.
//!
//! Month `t = 0, 1, ...` starts at 2007-01. With `N` a fresh standard normal
//! draw (taken in the order listed) and `P = 2π`:
//!
//! ```text
//! price  = max(0.02, price·(1 + 0.015N) + 0.0002)       price_0 = 0.09
//! free   = 0.65 + 0.2 sin(P t/60) + 0.03N
//! infl   = 22 + 10 sin(P t/96 + 1) + 1.5N
//! comm   = 18 + 8 sin(P t/72) + 0.1 infl + N
//! growth = 1.35 - 0.002 t + 0.02N                       (% per year)
//! pop    = pop·(1 + growth/1200)                        pop_0 = 70.5e6
//! road   = 170000 + 350 t + 60N
//! gdp    = 5200 + 1400 sin(P t/120) + 8 t + 90N
//! veh    = veh·(1 + 0.005 + 0.001N)                     veh_0 = 8e6
//!
//! base   = 40 + 4.2 (veh/1e6)^0.8 - 15 tanh(price/0.1) + 0.0015 gdp
//!          - 0.08 infl + 2.5 sin(P (t mod 12)/12)
//! level  = base at t = 0, else 0.55 level + 0.45 base
//! y      = level + 0.6N
//! ```
//!
//! `level` is an exponentially smoothed lag of `base`, so the target depends
//! on the recent past as well as the current month. Population and vehicle
//! counts are rounded to whole numbers, everything else to four decimals.
//! With seed 42 and 180 months the target median is about 66.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use libm::{exp, log, round, sin, tanh};

use super::{Feature, RawRecord, YearMonth, FEATURE_COUNT};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

fn round4(v: f64) -> f64 {
    round(v * 1e4) / 1e4
}

pub fn generate_synthetic(seed: u64, n_months: usize) -> Result<Vec<RawRecord>> {
    if n_months < 12 {
        return Err(Error::Invalid(alloc::format!(
            "n_months must be at least 12 (one full year), got {n_months}"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let start = YearMonth {
        year: 2007,
        month: 1,
    };
    let (mut price, mut pop, mut veh) = (0.09, 70.5e6, 8.0e6);
    let mut level: Option<f64> = None;
    let mut out = Vec::with_capacity(n_months);

    for t in 0..n_months {
        let tf = t as f64;
        price = (price * (1.0 + 0.015 * rng.normal()) + 0.0002).max(0.02);
        let free = 0.65 + 0.2 * sin(TAU * tf / 60.0) + 0.03 * rng.normal();
        let infl = 22.0 + 10.0 * sin(TAU * tf / 96.0 + 1.0) + 1.5 * rng.normal();
        let comm = 18.0 + 8.0 * sin(TAU * tf / 72.0) + 0.1 * infl + rng.normal();
        let growth = 1.35 - 0.002 * tf + 0.02 * rng.normal();
        pop *= 1.0 + growth / 1200.0;
        let road = 170_000.0 + 350.0 * tf + 60.0 * rng.normal();
        let gdp = 5200.0 + 1400.0 * sin(TAU * tf / 120.0) + 8.0 * tf + 90.0 * rng.normal();
        veh *= 1.0 + 0.005 + 0.001 * rng.normal();

        let base = 40.0 + 4.2 * exp(0.8 * log(veh / 1e6)) - 15.0 * tanh(price / 0.1) + 0.0015 * gdp
            - 0.08 * infl
            + 2.5 * sin(TAU * (t % 12) as f64 / 12.0);
        let lv = match level {
            None => base,
            Some(prev) => 0.55 * prev + 0.45 * base,
        };
        level = Some(lv);
        let y = lv + 0.6 * rng.normal();

        let mut features = [None; FEATURE_COUNT];
        let mut set = |f: Feature, v: f64| features[f.index()] = Some(v);
        set(Feature::GasolinePriceUsd, round4(price));
        set(Feature::FreeGasolinePriceUsd, round4(free));
        set(Feature::InflationRatePct, round4(infl));
        set(Feature::CommodityPriceIndexPct, round4(comm));
        set(Feature::PopulationGrowthRatePct, round4(growth));
        set(Feature::PopulationTotal, round(pop));
        set(Feature::RoadDistanceKm, round4(road));
        set(Feature::GdpPerCapitaUsd, round4(gdp));
        set(Feature::VehiclesCount, round(veh));
        out.push(RawRecord {
            date: start.plus_months(t as u32),
            features,
            target: Some(round4(y)),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::boxplot_bounds;

    #[test]
    fn deterministic_and_complete() {
        let a = generate_synthetic(42, 180).unwrap();
        assert_eq!(a, generate_synthetic(42, 180).unwrap());
        assert_ne!(a, generate_synthetic(43, 180).unwrap());
        assert!(a.iter().all(RawRecord::is_complete));
        assert_eq!(
            a[0].date,
            YearMonth {
                year: 2007,
                month: 1
            }
        );
        assert_eq!(
            a[179].date,
            YearMonth {
                year: 2021,
                month: 12
            }
        );
        // A prefix of a longer run is the shorter run.
        assert_eq!(generate_synthetic(42, 24).unwrap(), a[..24]);
    }

    #[test]
    fn median_in_calibrated_band() {
        let y: Vec<f64> = generate_synthetic(42, 180)
            .unwrap()
            .iter()
            .map(|r| r.target.unwrap())
            .collect();
        let b = boxplot_bounds(&y).unwrap();
        assert!((60.0..=72.0).contains(&b.median), "median {}", b.median);
    }

    #[test]
    fn rejects_short_runs() {
        let err = generate_synthetic(1, 5).unwrap_err();
        assert!(alloc::format!("{err}").contains("at least 12"));
    }
}
