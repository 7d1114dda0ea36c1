//! Dense row-major `f64` tensors.
//!
//! A [`Tensor`] is an immutable-by-convention value: shape plus flat data.
//! Differentiable computation happens on a [`Tape`](crate::tape::Tape), which
//! stores tensors as node values; the plain functions here are the
//! gradient-free kernels the tape is built from.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, rejecting length mismatches and NaN/Inf entries.
    pub fn new(shape: impl Into<Vec<usize>>, data: Vec<f64>) -> Result<Self> {
        let shape = shape.into();
        if numel(&shape) != data.len() {
            return Err(Error::DataLength {
                shape,
                len: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    /// Internal constructor for kernel outputs; only checks the length.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        let shape = shape.into();
        let n = numel(&shape);
        Self::from_parts(shape, vec![0.0; n])
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: f64) -> Self {
        let shape = shape.into();
        let n = numel(&shape);
        Self::from_parts(shape, vec![value; n])
    }

    pub fn scalar(value: f64) -> Self {
        Self::from_parts(vec![1], vec![value])
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::new(vec![n], data)
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Shape {
                    op: "from_rows",
                    left: vec![cols],
                    right: vec![r.len()],
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Size of the last axis (1 for rank-0 shapes).
    pub fn last_dim(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    /// Same data under a new shape.
    pub fn reshape(&self, shape: impl Into<Vec<usize>>) -> Result<Self> {
        let shape = shape.into();
        if numel(&shape) != self.data.len() {
            return Err(Error::Shape {
                op: "reshape",
                left: self.shape.clone(),
                right: shape,
            });
        }
        Ok(Self::from_parts(shape, self.data.clone()))
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[flat_index(&self.shape, index)]
    }

    pub fn transpose(&self) -> Result<Self> {
        if self.rank() != 2 {
            return Err(Error::Invalid(alloc::format!(
                "transpose expects rank 2, got {:?}",
                self.shape
            )));
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Ok(Self::from_parts(vec![n, m], out))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(
            self.shape.clone(),
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Largest absolute elementwise difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::Shape {
                op: "max_abs_diff",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max))
    }

    /// Rows `[start, end)` along the leading axis.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        let lead = self.shape.first().copied().unwrap_or(0);
        if start > end || end > lead {
            return Err(Error::Invalid(alloc::format!(
                "row range {start}..{end} outside leading dimension {lead}"
            )));
        }
        let stride = numel(&self.shape[1..]);
        let mut shape = self.shape.clone();
        shape[0] = end - start;
        Ok(Self::from_parts(
            shape,
            self.data[start * stride..end * stride].to_vec(),
        ))
    }

    /// Picks rows of the leading axis by index, in the given order.
    pub fn gather_rows(&self, rows: &[usize]) -> Result<Self> {
        let lead = self.shape.first().copied().unwrap_or(0);
        let stride = numel(&self.shape[1..]);
        let mut data = Vec::with_capacity(rows.len() * stride);
        for &r in rows {
            if r >= lead {
                return Err(Error::Invalid(alloc::format!(
                    "row {r} outside leading dimension {lead}"
                )));
            }
            data.extend_from_slice(&self.data[r * stride..(r + 1) * stride]);
        }
        let mut shape = self.shape.clone();
        if shape.is_empty() {
            shape.push(rows.len());
        } else {
            shape[0] = rows.len();
        }
        Ok(Self::from_parts(shape, data))
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn flat_index(shape: &[usize], index: &[usize]) -> usize {
    assert_eq!(shape.len(), index.len(), "index rank mismatch");
    let mut flat = 0;
    for (&dim, &i) in shape.iter().zip(index) {
        assert!(i < dim, "index {i} out of bounds for dimension {dim}");
        flat = flat * dim + i;
    }
    flat
}

/// `[.., k] x [k, n] -> [.., n]`; leading dimensions of `a` are treated as rows.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mismatch = || Error::Shape {
        op: "matmul",
        left: a.shape.clone(),
        right: b.shape.clone(),
    };
    if a.rank() < 2 || b.rank() != 2 {
        return Err(mismatch());
    }
    let k = a.last_dim();
    if b.shape[0] != k {
        return Err(mismatch());
    }
    let n = b.shape[1];
    let m = a.len() / k.max(1);
    let mut out = vec![0.0; m * n];
    gemm(&a.data, &b.data, &mut out, m, k, n);
    let mut shape = a.shape.clone();
    *shape.last_mut().unwrap() = n;
    Ok(Tensor::from_parts(shape, out))
}

/// `out += a[m,k] * b[k,n]`, all row-major.
pub(crate) fn gemm(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// `out += a[m,k] * b[n,k]^T`.
pub(crate) fn gemm_bt(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            out[i * n + j] += arow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `out += a[k,m]^T * b[k,n]`.
pub(crate) fn gemm_at(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for p in 0..k {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let av = a[p * m + i];
            if av == 0.0 {
                continue;
            }
            let row = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// Softmax over the last axis, stabilized by subtracting each slice's maximum.
pub fn softmax(x: &Tensor) -> Tensor {
    let d = x.last_dim();
    let mut out = x.data.clone();
    if d > 0 {
        for slice in out.chunks_mut(d) {
            let max = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in slice.iter_mut() {
                *v = libm::exp(*v - max);
                total += *v;
            }
            for v in slice.iter_mut() {
                *v /= total;
            }
        }
    }
    Tensor::from_parts(x.shape.clone(), out)
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + libm::exp(-v))
    } else {
        let e = libm::exp(v);
        e / (1.0 + e)
    }
}

pub fn tanh(v: f64) -> f64 {
    libm::tanh(v)
}

pub fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// Result shape of a trailing-dimension broadcast, or `None` when the shorter
/// shape is not a suffix of the longer one.
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if long.ends_with(short) {
        Some(long.to_vec())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan_and_bad_length() {
        assert!(matches!(
            Tensor::new(vec![2], vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(matches!(
            Tensor::new(vec![2, 2], vec![1.0]),
            Err(Error::DataLength { .. })
        ));
    }

    #[test]
    fn matmul_identity_and_dot() {
        let a = Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(matmul(&Tensor::eye(2), &a).unwrap(), a);
        let row = Tensor::from_rows(&[&[1.0, 2.0]]).unwrap();
        let col = Tensor::from_rows(&[&[3.0], &[4.0]]).unwrap();
        let p = matmul(&row, &col).unwrap();
        assert_eq!(p.shape(), &[1, 1]);
        assert_eq!(p.data(), &[11.0]);
    }

    #[test]
    fn matmul_mismatch_names_shapes() {
        let a = Tensor::zeros(vec![2, 3]);
        let b = Tensor::zeros(vec![2, 3]);
        let err = matmul(&a, &b).unwrap_err();
        assert_eq!(
            err,
            Error::Shape {
                op: "matmul",
                left: vec![2, 3],
                right: vec![2, 3]
            }
        );
        assert!(alloc::format!("{err}").contains("[2, 3]"));
    }

    #[test]
    fn softmax_values() {
        let s = softmax(&Tensor::from_vec(vec![0.0, 0.0]).unwrap());
        assert_eq!(s.data(), &[0.5, 0.5]);
        let s = softmax(&Tensor::from_vec(vec![1234.5]).unwrap());
        assert_eq!(s.data(), &[1.0]);
        // e^x / sum e^x evaluated independently
        let e: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|&v| libm::exp(v)).collect();
        let z: f64 = e.iter().sum();
        let s = softmax(&Tensor::from_vec(vec![1.0, 2.0, 3.0]).unwrap());
        for (got, want) in s.data().iter().zip([0.09003, 0.24473, 0.66524]) {
            assert!((got - want).abs() < 1e-5);
        }
        for (got, ei) in s.data().iter().zip(&e) {
            assert!((got - ei / z).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_large_inputs_stay_finite() {
        let s = softmax(&Tensor::from_vec(vec![1000.0, 1001.0, -1000.0]).unwrap());
        assert!(s.data().iter().all(|v| v.is_finite()));
        assert!((s.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn activations_at_zero() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(tanh(0.0), 0.0);
        assert_eq!(relu(-3.0), 0.0);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn broadcast_rules() {
        assert_eq!(broadcast_shape(&[4, 3], &[3]), Some(vec![4, 3]));
        assert_eq!(broadcast_shape(&[3], &[2, 4, 3]), Some(vec![2, 4, 3]));
        assert_eq!(broadcast_shape(&[4, 3], &[4]), None);
    }

    #[test]
    fn gather_and_slice_rows() {
        let t = Tensor::new(vec![3, 1, 2], (0..6).map(f64::from).collect()).unwrap();
        let g = t.gather_rows(&[2, 0]).unwrap();
        assert_eq!(g.shape(), &[2, 1, 2]);
        assert_eq!(g.data(), &[4.0, 5.0, 0.0, 1.0]);
        let s = t.slice_rows(1, 3).unwrap();
        assert_eq!(s.data(), &[2.0, 3.0, 4.0, 5.0]);
        assert!(t.gather_rows(&[3]).is_err());
    }
}
