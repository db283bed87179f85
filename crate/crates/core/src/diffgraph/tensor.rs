use serde::{Deserialize, Serialize};

use crate::error::{DfpError, Result};

/// Dense row-major tensor of doubles.
///
/// Scalars have an empty shape. Everything the rollout graph touches is
/// either a scalar, a vector `[n]`, or a matrix `[rows, cols]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(DfpError::ShapeMismatch {
                op: "tensor",
                detail: format!("shape {:?} needs {} values, got {}", shape, expected, values.len()),
            });
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            values: vec![0.0; n],
        }
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            values: vec![value; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            values: vec![value],
        }
    }

    pub fn vector(values: Vec<f64>) -> Self {
        Self {
            shape: vec![values.len()],
            values,
        }
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], values)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.values.len() == 1 && self.shape.iter().all(|&d| d == 1)
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> f64 {
        self.values[0]
    }

    pub fn rows(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => 1,
            _ => self.shape[0],
        }
    }

    pub fn cols(&self) -> usize {
        match self.shape.len() {
            0 => 1,
            1 => self.shape[0],
            _ => self.shape[1],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols() + c]
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        debug_assert_eq!(self.values.len(), other.values.len());
        Tensor {
            shape: self.shape.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    /// Gathers the listed rows of a matrix into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Tensor {
        let c = self.cols();
        let mut values = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Tensor {
            shape: vec![rows.len(), c],
            values,
        }
    }
}

/// `c = op(a) * op(b) (+ c if accumulate)` for row-major matrices.
///
/// `a` is `m x k` after the optional transpose, `b` is `k x n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    a: &[f64],
    a_transposed: bool,
    b: &[f64],
    b_transposed: bool,
    m: usize,
    k: usize,
    n: usize,
    c: &mut [f64],
    accumulate: bool,
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    if !(a_transposed && b_transposed) && (m < 64 || n < 64 || k < 64) {
        if !accumulate {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        direct_gemm(a, a_transposed, b, b_transposed, m, k, n, c);
        return;
    }
    // Strides for the logical (untransposed) view.
    let (rsa, csa) = if a_transposed { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_transposed { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the asserts above guarantee every strided access stays inside
    // the three slices, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c += op(a) * op(b)` by plain loops; at most one operand transposed.
#[allow(clippy::too_many_arguments)]
fn direct_gemm(a: &[f64], a_transposed: bool, b: &[f64], b_transposed: bool, m: usize, k: usize, n: usize, c: &mut [f64]) {
    match (a_transposed, b_transposed) {
        (false, false) => {
            for (a_row, c_row) in a.chunks_exact(k).zip(c.chunks_exact_mut(n)) {
                for (&av, b_row) in a_row.iter().zip(b.chunks_exact(n)) {
                    for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                        *cv += av * bv;
                    }
                }
            }
        }
        (false, true) => {
            // b is stored n x k.
            for (a_row, c_row) in a.chunks_exact(k).zip(c.chunks_exact_mut(n)) {
                for (cv, b_row) in c_row.iter_mut().zip(b.chunks_exact(k)) {
                    *cv += a_row.iter().zip(b_row).map(|(x, y)| x * y).sum::<f64>();
                }
            }
        }
        (true, false) => {
            // a is stored k x m.
            for (a_col, b_row) in a.chunks_exact(m).zip(b.chunks_exact(n)) {
                for (&av, c_row) in a_col.iter().zip(c.chunks_exact_mut(n)) {
                    for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                        *cv += av * bv;
                    }
                }
            }
        }
        (true, true) => unreachable!("handled by the packed kernel"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inconsistent_shape() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![], vec![1.0]).unwrap().is_scalar());
    }

    #[test]
    fn gemm_matches_naive_with_transposes() {
        let a: Vec<f64> = (0..6).map(|v| v as f64 + 0.5).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|v| (v as f64) * 0.25 - 1.0).collect(); // 3x4
        let mut c = vec![0.0; 8];
        gemm(&a, false, &b, false, 2, 3, 4, &mut c, false);
        for i in 0..2 {
            for j in 0..4 {
                let naive: f64 = (0..3).map(|p| a[i * 3 + p] * b[p * 4 + j]).sum();
                assert!((c[i * 4 + j] - naive).abs() < 1e-12);
            }
        }
        // a^T stored as 3x2, same product.
        let at: Vec<f64> = (0..6).map(|idx| a[(idx % 2) * 3 + idx / 2]).collect();
        let mut c2 = vec![1.0; 8];
        gemm(&at, true, &b, false, 2, 3, 4, &mut c2, true);
        for (x, y) in c2.iter().zip(&c) {
            assert!((x - (y + 1.0)).abs() < 1e-12);
        }
    }

    fn reference(a: &[f64], at: bool, b: &[f64], bt: bool, m: usize, k: usize, n: usize) -> Vec<f64> {
        let av = |i: usize, p: usize| if at { a[p * m + i] } else { a[i * k + p] };
        let bv = |p: usize, j: usize| if bt { b[j * k + p] } else { b[p * n + j] };
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                c[i * n + j] = (0..k).map(|p| av(i, p) * bv(p, j)).sum();
            }
        }
        c
    }

    #[test]
    fn both_kernels_agree_with_reference() {
        for (m, k, n) in [(5, 3, 2), (7, 70, 1), (70, 66, 65), (3, 100, 80)] {
            let a: Vec<f64> = (0..m * k).map(|v| ((v * 37 % 11) as f64) - 5.0).collect();
            let b: Vec<f64> = (0..k * n).map(|v| ((v * 13 % 7) as f64) * 0.5).collect();
            for (at, bt) in [(false, false), (false, true), (true, false), (true, true)] {
                let expected = reference(&a, at, &b, bt, m, k, n);
                let mut c = vec![2.0; m * n];
                gemm(&a, at, &b, bt, m, k, n, &mut c, true);
                for (x, y) in c.iter().zip(&expected) {
                    assert!((x - y - 2.0).abs() < 1e-9, "{m}x{k}x{n} {at} {bt}");
                }
            }
        }
    }
}
