use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::flatten_batch;
use crate::error::{Error, Result};
use crate::layers::Layer;
use crate::rng::SeededRng;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Condition number of the standardized Gram matrix above which a ridge of
/// [`RIDGE`] is added to the diagonal.
const RIDGE_THRESHOLD: f64 = 1e8;
/// Beyond this the design is treated as rank-deficient.
const SINGULAR_THRESHOLD: f64 = 1e13;
const RIDGE: f64 = 1e-10;

/// `y = x · coefficients + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRegressionModel {
    /// `[f]`
    pub coefficients: Tensor,
    /// `[1]`
    pub intercept: Tensor,
}

impl LinearRegressionModel {
    pub fn init(features: usize, rng: &mut SeededRng) -> Self {
        Self {
            coefficients: rng.glorot(&[features], features, 1),
            intercept: Tensor::zeros(vec![1]),
        }
    }

    pub fn features(&self) -> usize {
        self.coefficients.len()
    }

    pub fn intercept_value(&self) -> f64 {
        self.intercept.data()[0]
    }
}

impl Layer for LinearRegressionModel {
    fn param_names(&self) -> Vec<String> {
        crate::layers::names(&["coefficients", "intercept"])
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.coefficients, &self.intercept]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.coefficients, &mut self.intercept]
    }

    fn apply(&self, tape: &mut Tape, p: &[Var], x: Var) -> Result<Var> {
        let f = self.features();
        let n = tape.value(x).shape().first().copied().unwrap_or(0);
        let flat = flatten_batch(tape, x, f, "linreg_forward")?;
        let w = tape.reshape(p[0], vec![f, 1])?;
        let y = tape.matmul(flat, w)?;
        let y = tape.add(y, p[1])?;
        tape.reshape(y, vec![n])
    }
}

/// Ordinary least squares with an intercept.
///
/// Columns are centered and scaled to unit variance before solving the normal
/// equations, which keeps the Gram matrix well conditioned when raw columns
/// differ by orders of magnitude (population vs. percentages). The fit is
/// mapped back to original units afterwards.
///
/// `x` is `[n, f]` (or `[n, 1, f]`) and `y` is `[n]` with `n > f`.
pub fn linreg_fit(x: &Tensor, y: &Tensor) -> Result<LinearRegressionModel> {
    let n = x.shape().first().copied().unwrap_or(0);
    let f = x.len().checked_div(n).unwrap_or(0);
    if y.len() != n {
        return Err(Error::Shape {
            op: "linreg_fit",
            left: x.shape().to_vec(),
            right: y.shape().to_vec(),
        });
    }
    if f == 0 || n <= f {
        return Err(Error::Invalid(alloc::format!(
            "least squares needs more samples than features (n = {n}, f = {f})"
        )));
    }
    let xd = x.data();
    let yd = y.data();
    let nf = n as f64;

    let mut mean = vec![0.0; f];
    for row in xd.chunks(f) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / nf;
        }
    }
    let mut scale = vec![0.0; f];
    for row in xd.chunks(f) {
        for j in 0..f {
            scale[j] += (row[j] - mean[j]) * (row[j] - mean[j]) / nf;
        }
    }
    for s in scale.iter_mut() {
        *s = libm::sqrt(*s);
    }
    if scale.contains(&0.0) {
        // A constant column duplicates the intercept.
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let y_mean = yd.iter().sum::<f64>() / nf;

    // Gram = ZᵀZ / n and rhs = Zᵀ(y - ȳ) / n for standardized Z.
    let mut gram = vec![0.0; f * f];
    let mut rhs = vec![0.0; f];
    let mut z = vec![0.0; f];
    for (row, &yi) in xd.chunks(f).zip(yd) {
        for j in 0..f {
            z[j] = (row[j] - mean[j]) / scale[j];
        }
        for a in 0..f {
            rhs[a] += z[a] * (yi - y_mean) / nf;
            for b in 0..f {
                gram[a * f + b] += z[a] * z[b] / nf;
            }
        }
    }

    let eig = symmetric_eigenvalues(&gram, f);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if min <= 0.0 { f64::INFINITY } else { max / min };
    if condition > SINGULAR_THRESHOLD {
        return Err(Error::Singular { condition });
    }
    if condition > RIDGE_THRESHOLD {
        for j in 0..f {
            gram[j * f + j] += RIDGE;
        }
    }
    let beta_std = cholesky_solve(&gram, &rhs, f).ok_or(Error::Singular { condition })?;

    let coefficients: Vec<f64> = beta_std.iter().zip(&scale).map(|(b, s)| b / s).collect();
    let intercept = y_mean
        - coefficients
            .iter()
            .zip(&mean)
            .map(|(b, m)| b * m)
            .sum::<f64>();
    Ok(LinearRegressionModel {
        coefficients: Tensor::new(vec![f], coefficients)?,
        intercept: Tensor::new(vec![1], vec![intercept])?,
    })
}

/// Solves `A x = b` for symmetric positive-definite `A` (`n × n`, row-major).
fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + i] = libm::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i * n + i];
    }
    Some(x)
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
fn symmetric_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Model, Predictor};
    use proptest::prelude::*;

    /// Independent oracle: normal equations on the raw augmented design
    /// `[1 | X]`, solved by Gaussian elimination with partial pivoting.
    #[allow(clippy::needless_range_loop)]
    fn gauss_oracle(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        let p = x[0].len() + 1;
        let mut a = vec![vec![0.0; p + 1]; p];
        for (row, &yi) in x.iter().zip(y) {
            let aug: Vec<f64> = core::iter::once(1.0).chain(row.iter().copied()).collect();
            for i in 0..p {
                for j in 0..p {
                    a[i][j] += aug[i] * aug[j];
                }
                a[i][p] += aug[i] * yi;
            }
        }
        for col in 0..p {
            let piv = (col..p)
                .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
                .unwrap();
            a.swap(col, piv);
            for r in 0..p {
                if r != col {
                    let k = a[r][col] / a[col][col];
                    for c in col..=p {
                        a[r][c] -= k * a[col][c];
                    }
                }
            }
        }
        (0..p).map(|i| a[i][p] / a[i][i]).collect()
    }

    fn design(rows: &[Vec<f64>]) -> Tensor {
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        Tensor::from_rows(&refs).unwrap()
    }

    #[test]
    fn noiseless_line() {
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.5 - 1.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        let m = linreg_fit(&design(&xs), &Tensor::from_vec(ys).unwrap()).unwrap();
        assert!((m.coefficients.data()[0] - 2.0).abs() < 1e-10);
        assert!((m.intercept_value() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_target() {
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let m = linreg_fit(&design(&xs), &Tensor::full(vec![6], 4.5)).unwrap();
        assert!(m.coefficients.data().iter().all(|c| c.abs() < 1e-12));
        assert!((m.intercept_value() - 4.5).abs() < 1e-12);
    }

    #[test]
    fn random_system_matches_gauss_oracle() {
        let mut rng = SeededRng::new(10);
        let xs: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..3).map(|_| rng.uniform(-2.0, 2.0)).collect())
            .collect();
        let ys: Vec<f64> = (0..10).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let m = linreg_fit(&design(&xs), &Tensor::from_vec(ys.clone()).unwrap()).unwrap();
        let want = gauss_oracle(&xs, &ys);
        assert!((m.intercept_value() - want[0]).abs() < 1e-8);
        for (c, w) in m.coefficients.data().iter().zip(&want[1..]) {
            assert!((c - w).abs() < 1e-8);
        }
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let err = linreg_fit(&design(&xs), &Tensor::zeros(vec![6])).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }), "{err:?}");
        assert!(alloc::format!("{err}").contains("condition number"));

        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 3.0]).collect();
        assert!(matches!(
            linreg_fit(&design(&xs), &Tensor::zeros(vec![6])),
            Err(Error::Singular { .. })
        ));
        let xs: Vec<Vec<f64>> = (0..2).map(|i| vec![i as f64, 1.0 - i as f64]).collect();
        assert!(matches!(
            linreg_fit(&design(&xs), &Tensor::zeros(vec![2])),
            Err(Error::Invalid(_))
        ));
    }

    #[test]
    fn badly_scaled_columns_still_fit() {
        let mut rng = SeededRng::new(3);
        let xs: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                vec![
                    7.0e7 + 1.0e5 * i as f64 + rng.uniform(0.0, 1e4),
                    rng.uniform(30.0, 50.0),
                ]
            })
            .collect();
        let ys: Vec<f64> = xs.iter().map(|r| 3e-7 * r[0] - 0.4 * r[1] + 12.0).collect();
        let m = linreg_fit(&design(&xs), &Tensor::from_vec(ys.clone()).unwrap()).unwrap();
        let pred = Model::Linreg(m)
            .predict(&design(&xs).reshape(vec![40, 1, 2]).unwrap())
            .unwrap();
        for (p, y) in pred.iter().zip(&ys) {
            assert!((p - y).abs() < 1e-8);
        }
    }

    #[test]
    fn eigenvalues_of_known_matrix() {
        let mut e = symmetric_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2);
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn residuals_are_orthogonal_to_columns(seed in any::<u64>(), n in 8usize..30, f in 1usize..5) {
            let mut rng = SeededRng::new(seed);
            let xs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..f).map(|_| rng.uniform(-3.0, 3.0)).collect())
                .collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let m = linreg_fit(&design(&xs), &Tensor::from_vec(ys.clone()).unwrap()).unwrap();
            let resid: Vec<f64> = xs
                .iter()
                .zip(&ys)
                .map(|(r, y)| {
                    y - m.intercept_value()
                        - r.iter().zip(m.coefficients.data()).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            prop_assert!(resid.iter().sum::<f64>().abs() < 1e-8);
            for j in 0..f {
                let dot: f64 = xs.iter().zip(&resid).map(|(r, e)| r[j] * e).sum();
                prop_assert!(dot.abs() < 1e-8, "column {} dot {}", j, dot);
            }
        }
    }
}
