//! Central finite-difference gradient checking.
//!
//! The analytic side comes from [`Tape::backward`]; the numeric side only
//! re-evaluates the forward pass with one entry nudged by `±h`, so the two
//! routes share nothing but the forward kernels.

use alloc::vec::Vec;

use crate::error::Result;
use crate::rng::SeededRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct GradCheck {
    /// Finite-difference step.
    pub h: f64,
    /// Denominator floor for the relative error, so gradients that are
    /// numerically zero are compared absolutely.
    pub floor: f64,
    /// Check at most this many entries per input (sampled with `seed`);
    /// `None` checks every entry.
    pub max_entries: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            h: 1e-5,
            floor: 1e-6,
            max_entries: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// `(input, flat index, analytic, numeric)` of the worst entry.
    pub worst: Option<(usize, usize, f64, f64)>,
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    libm::fabs(analytic - numeric) / libm::fabs(analytic).max(libm::fabs(numeric)).max(floor)
}

/// Compares the tape gradient of the scalar `f(inputs)` against central
/// differences for every input tensor.
pub fn check<F>(inputs: &[Tensor], f: F, cfg: &GradCheck) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| grads.get_or_zeros(v, t))
        .collect();

    let eval = |probe: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = probe.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).data()[0])
    };

    let mut rng = SeededRng::new(cfg.seed);
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        checked: 0,
    };
    let mut probe: Vec<Tensor> = inputs.to_vec();
    for (which, input) in inputs.iter().enumerate() {
        let mut entries: Vec<usize> = (0..input.len()).collect();
        if let Some(max) = cfg.max_entries {
            if entries.len() > max {
                rng.shuffle(&mut entries);
                entries.truncate(max);
            }
        }
        for idx in entries {
            let orig = input.data()[idx];
            probe[which].data_mut()[idx] = orig + cfg.h;
            let plus = eval(&probe)?;
            probe[which].data_mut()[idx] = orig - cfg.h;
            let minus = eval(&probe)?;
            probe[which].data_mut()[idx] = orig;

            let numeric = (plus - minus) / (2.0 * cfg.h);
            let a = analytic[which].data()[idx];
            let err = relative_error(a, numeric, cfg.floor);
            report.checked += 1;
            if err > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = report.max_rel_err.max(err);
                report.worst = Some((which, idx, a, numeric));
            }
        }
    }
    Ok(report)
}
