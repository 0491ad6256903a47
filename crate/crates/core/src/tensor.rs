//! Dense 2-D numeric kernel.
//!
//! A row-major `f64` matrix with the handful of operations the neural
//! modules need, an analytic FLOP counter, and a central-difference
//! gradient oracle used by every gradient test in the crate. No views,
//! no broadcasting, no rank > 2.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 2-D array of 64-bit floats.
///
/// Invariant: `data.len() == rows * cols`, and entries stay finite under
/// every public operation applied to finite inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseArray {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseArray {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseArray {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut out = Self::zeros(n, n);
        for i in 0..n {
            out.data[i * n + i] = 1.0;
        }
        out
    }

    /// Build from a row-major buffer. Rejects length mismatches and
    /// non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "from_vec",
                lhs: format!("{rows}x{cols}"),
                rhs: format!("len {}", data.len()),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("from_vec: non-finite entry".into()));
        }
        Ok(DenseArray { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Input("from_rows: ragged rows".into()));
        }
        Self::from_vec(r, c, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> DenseArray {
        let mut out = DenseArray::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseArray {
        DenseArray {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> DenseArray {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &DenseArray) -> Result<DenseArray> {
        self.zip_with("add", other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseArray) -> Result<DenseArray> {
        self.zip_with("sub", other, |a, b| a - b)
    }

    pub fn mul_elem(&self, other: &DenseArray) -> Result<DenseArray> {
        self.zip_with("mul_elem", other, |a, b| a * b)
    }

    fn zip_with(
        &self,
        op: &'static str,
        other: &DenseArray,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<DenseArray> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape {
                op,
                lhs: self.shape_str(),
                rhs: other.shape_str(),
            });
        }
        Ok(DenseArray {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// In-place `self -= step * other`, used by gradient updates.
    pub fn sub_scaled_in_place(&mut self, other: &DenseArray, step: f64) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape {
                op: "sub_scaled",
                lhs: self.shape_str(),
                rhs: other.shape_str(),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a -= step * b;
        }
        Ok(())
    }

    /// Broadcast-add a 1xC row vector to every row.
    pub fn add_row_vector(&self, row: &DenseArray) -> Result<DenseArray> {
        if row.rows != 1 || row.cols != self.cols {
            return Err(Error::Shape {
                op: "add_row_vector",
                lhs: self.shape_str(),
                rhs: row.shape_str(),
            });
        }
        let mut out = self.clone();
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[i * self.cols + j] += row.data[j];
            }
        }
        Ok(out)
    }

    /// Sum over rows, producing a 1xC row vector.
    pub fn col_sums(&self) -> DenseArray {
        let mut out = DenseArray::zeros(1, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j] += self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Mean over rows, producing a 1xC row vector.
    pub fn mean_rows(&self) -> DenseArray {
        self.col_sums().scale(1.0 / self.rows as f64)
    }

    /// Horizontal concatenation of arrays with matching row counts.
    pub fn hstack(parts: &[&DenseArray]) -> Result<DenseArray> {
        let rows = parts.first().map_or(0, |p| p.rows);
        if parts.iter().any(|p| p.rows != rows) {
            return Err(Error::Input("hstack: row count mismatch".into()));
        }
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut out = DenseArray::zeros(rows, cols);
        for i in 0..rows {
            let mut at = 0;
            for p in parts {
                out.data[i * cols + at..i * cols + at + p.cols].copy_from_slice(p.row(i));
                at += p.cols;
            }
        }
        Ok(out)
    }

    /// Columns `[from, to)` as a new array.
    pub fn col_range(&self, from: usize, to: usize) -> Result<DenseArray> {
        if from > to || to > self.cols {
            return Err(Error::Input(format!(
                "col_range {from}..{to} out of bounds for {} cols",
                self.cols
            )));
        }
        let mut out = DenseArray::zeros(self.rows, to - from);
        for i in 0..self.rows {
            out.data[i * (to - from)..(i + 1) * (to - from)]
                .copy_from_slice(&self.row(i)[from..to]);
        }
        Ok(out)
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().copied()
    }
}

/// Analytic FLOP accumulator. Callers that want a count pass one in
/// explicitly; there is no global state.
#[derive(Debug, Default, Clone)]
pub struct FlopCounter {
    flops: u64,
}

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counting rule for an (m x k) * (k x n) product: 2*m*k*n.
    pub fn add_matmul(&mut self, m: usize, k: usize, n: usize) {
        self.flops += 2 * (m as u64) * (k as u64) * (n as u64);
    }

    /// Arbitrary scalar operations (tree split comparisons and the like).
    pub fn add_ops(&mut self, n: u64) {
        self.flops += n;
    }

    pub fn total(&self) -> u64 {
        self.flops
    }
}

/// Standard matrix product.
pub fn matmul(a: &DenseArray, b: &DenseArray) -> Result<DenseArray> {
    let mut scratch = FlopCounter::new();
    matmul_counted(a, b, &mut scratch)
}

/// Matrix product that charges 2*m*k*n to the supplied FLOP counter.
pub fn matmul_counted(a: &DenseArray, b: &DenseArray, flops: &mut FlopCounter) -> Result<DenseArray> {
    if a.cols != b.rows {
        return Err(Error::Shape {
            op: "matmul",
            lhs: a.shape_str(),
            rhs: b.shape_str(),
        });
    }
    flops.add_matmul(a.rows, a.cols, b.cols);
    let mut out = DenseArray::zeros(a.rows, b.cols);
    // i-k-j loop order keeps the inner traversal contiguous in both b and out.
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b.data[k * b.cols..(k + 1) * b.cols];
            let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    Ok(out)
}

/// Row-wise softmax with per-row max subtraction, so huge logits cannot
/// overflow. Each output row is nonnegative and sums to 1.
pub fn softmax_rows(a: &DenseArray) -> DenseArray {
    let mut out = a.clone();
    for i in 0..a.rows {
        let row = &mut out.data[i * a.cols..(i + 1) * a.cols];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Central-difference gradient of a scalar function at `x`:
/// `(f(x + eps*e_ij) - f(x - eps*e_ij)) / (2*eps)` entry-wise.
///
/// The oracle every analytic gradient in the crate is checked against.
pub fn finite_diff_grad<F>(mut f: F, x: &DenseArray, eps: f64) -> Result<DenseArray>
where
    F: FnMut(&DenseArray) -> Result<f64>,
{
    if eps <= 0.0 {
        return Err(Error::Input(format!("finite_diff_grad: eps must be > 0, got {eps}")));
    }
    let mut grad = DenseArray::zeros(x.rows, x.cols);
    let mut probe = x.clone();
    for i in 0..x.rows {
        for j in 0..x.cols {
            let orig = probe.get(i, j);
            probe.set(i, j, orig + eps);
            let up = f(&probe)?;
            probe.set(i, j, orig - eps);
            let down = f(&probe)?;
            probe.set(i, j, orig);
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NonFinite(format!(
                    "finite_diff_grad: f produced non-finite value at ({i},{j})"
                )));
            }
            grad.set(i, j, (up - down) / (2.0 * eps));
        }
    }
    Ok(grad)
}

/// Worst-case relative discrepancy between two same-shaped arrays,
/// `max |a-b| / max(|a|, |b|, 1e-4)`. The floor compares near-zero entries
/// on an absolute scale instead of amplifying finite-difference noise.
pub fn max_rel_discrepancy(a: &DenseArray, b: &DenseArray) -> f64 {
    assert_eq!((a.rows, a.cols), (b.rows, b.cols), "shape mismatch");
    a.data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-4))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matmul_identity_preserves_any_2x2() {
        let m = DenseArray::from_vec(2, 2, vec![3.5, -1.0, 0.25, 9.0]).unwrap();
        let out = matmul(&DenseArray::identity(2), &m).unwrap();
        assert_eq!(out, m);
    }

    #[test]
    fn matmul_hand_case() {
        let a = DenseArray::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = DenseArray::from_vec(2, 2, vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let out = matmul(&a, &b).unwrap();
        assert_eq!(out.as_slice(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn matmul_dimension_mismatch_names_both_shapes() {
        let a = DenseArray::zeros(2, 3);
        let b = DenseArray::zeros(2, 3);
        let err = matmul(&a, &b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3"), "got: {msg}");
    }

    #[test]
    fn matmul_counts_flops() {
        let a = DenseArray::zeros(1, 10);
        let b = DenseArray::zeros(10, 20);
        let mut c = FlopCounter::new();
        matmul_counted(&a, &b, &mut c).unwrap();
        assert_eq!(c.total(), 400);
    }

    #[test]
    fn softmax_symmetric_row() {
        let out = softmax_rows(&DenseArray::from_vec(1, 2, vec![0.0, 0.0]).unwrap());
        assert_eq!(out.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_direct_evaluation() {
        let out = softmax_rows(&DenseArray::from_vec(1, 2, vec![0.0, 3.0f64.ln()]).unwrap());
        assert!((out.get(0, 0) - 0.25).abs() < 1e-12);
        assert!((out.get(0, 1) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let out = softmax_rows(&DenseArray::from_vec(1, 2, vec![1000.0, 1000.0]).unwrap());
        assert_eq!(out.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn finite_diff_of_sum_of_squares() {
        let x = DenseArray::from_vec(1, 1, vec![3.0]).unwrap();
        let grad = finite_diff_grad(
            |a| Ok(a.iter().map(|v| v * v).sum()),
            &x,
            1e-5,
        )
        .unwrap();
        assert!((grad.get(0, 0) - 6.0).abs() < 1e-6);
    }

    #[test]
    fn finite_diff_of_linear_function_recovers_coefficients() {
        let coef = DenseArray::from_vec(2, 2, vec![1.5, -2.0, 0.5, 4.0]).unwrap();
        let x = DenseArray::zeros(2, 2);
        let grad = finite_diff_grad(
            |a| {
                Ok(a.iter()
                    .zip(coef.iter())
                    .map(|(v, c)| v * c)
                    .sum())
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(max_rel_discrepancy(&grad, &coef) < 1e-8);
    }

    #[test]
    fn finite_diff_of_constant_is_zero() {
        let x = DenseArray::from_vec(2, 3, vec![1.0; 6]).unwrap();
        let grad = finite_diff_grad(|_| Ok(7.25), &x, 1e-5).unwrap();
        assert!(grad.iter().all(|v| v == 0.0));
    }

    #[test]
    fn finite_diff_propagates_non_finite_values() {
        let x = DenseArray::from_vec(1, 1, vec![0.0]).unwrap();
        let err = finite_diff_grad(|a| Ok(a.get(0, 0).ln()), &x, 1e-5).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn hstack_and_col_range_round_trip() {
        let a = DenseArray::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = DenseArray::from_vec(2, 1, vec![9.0, 8.0]).unwrap();
        let cat = DenseArray::hstack(&[&a, &b]).unwrap();
        assert_eq!(cat.shape_str(), "2x3");
        assert_eq!(cat.col_range(0, 2).unwrap(), a);
        assert_eq!(cat.col_range(2, 3).unwrap(), b);
    }

    fn small_matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseArray> {
        proptest::collection::vec(-50.0f64..50.0, rows * cols)
            .prop_map(move |data| DenseArray::from_vec(rows, cols, data).unwrap())
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(a in small_matrix(3, 5)) {
            let out = softmax_rows(&a);
            for i in 0..out.rows() {
                let sum: f64 = out.row(i).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                prop_assert!(out.row(i).iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn matmul_is_associative(
            a in small_matrix(2, 3),
            b in small_matrix(3, 4),
            c in small_matrix(4, 2),
        ) {
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            let scale = left.iter().map(f64::abs).fold(1.0, f64::max);
            for (x, y) in left.iter().zip(right.iter()) {
                prop_assert!((x - y).abs() / scale < 1e-8);
            }
        }
    }
}
