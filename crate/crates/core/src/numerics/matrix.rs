use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

#[derive(Clone, Copy)]
enum Layout {
    Plain,
    Transposed,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            values: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Self { rows, cols, values }
    }

    /// Single-row matrix, used for bias vectors.
    pub fn row_vector(values: Vec<f64>) -> Self {
        Self {
            rows: 1,
            cols: values.len(),
            values,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Copies out the listed rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn hadamard_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same(other, "hadamard")?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a *= b;
        }
        Ok(())
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Self, scale: f64) -> Result<()> {
        self.check_same(other, "add_scaled")?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// Adds `bias` to every row.
    pub fn add_row_broadcast(&mut self, bias: &[f64]) -> Result<()> {
        if bias.len() != self.cols {
            return Err(Error::Shape(format!(
                "bias of length {} for {} columns",
                bias.len(),
                self.cols
            )));
        }
        for row in self.values.chunks_exact_mut(self.cols.max(1)) {
            for (v, b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
        Ok(())
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.values.chunks_exact(self.cols.max(1)) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }

    pub fn sum_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// `self · other`
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        gemm(self, Layout::Plain, other, Layout::Plain)
    }

    /// `self · otherᵀ`
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        gemm(self, Layout::Plain, other, Layout::Transposed)
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        gemm(self, Layout::Transposed, other, Layout::Plain)
    }

    fn check_same(&self, other: &Self, op: &str) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Shape(format!(
                "{op}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(())
    }
}

fn gemm(a: &DenseMatrix, la: Layout, b: &DenseMatrix, lb: Layout) -> Result<DenseMatrix> {
    let (m, k, rsa, csa) = match la {
        Layout::Plain => (a.rows, a.cols, a.cols as isize, 1),
        Layout::Transposed => (a.cols, a.rows, 1, a.cols as isize),
    };
    let (kb, n, rsb, csb) = match lb {
        Layout::Plain => (b.rows, b.cols, b.cols as isize, 1),
        Layout::Transposed => (b.cols, b.rows, 1, b.cols as isize),
    };
    if k != kb {
        return Err(Error::Shape(format!(
            "matmul inner dimensions {k} and {kb} differ"
        )));
    }
    let mut out = DenseMatrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return Ok(out);
    }
    // SAFETY: pointers and strides describe the owned buffers of `a`, `b` and
    // `out`, whose lengths were checked against the dimensions above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.values.as_ptr(),
            rsa,
            csa,
            b.values.as_ptr(),
            rsb,
            csb,
            0.0,
            out.values.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
        })
    }

    #[test]
    fn products_agree_with_naive_loops() {
        let a = DenseMatrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 * 0.5 - 2.0);
        let b = DenseMatrix::from_fn(4, 2, |i, j| (i as f64 - j as f64) * 0.25);
        let expected = naive(&a, &b);
        let close = |x: &DenseMatrix, y: &DenseMatrix| {
            x.as_slice()
                .iter()
                .zip(y.as_slice())
                .all(|(p, q)| (p - q).abs() < 1e-12)
        };
        assert!(close(&a.matmul(&b).unwrap(), &expected));
        assert!(close(&a.matmul_t(&b.transpose()).unwrap(), &expected));
        assert!(close(&a.transpose().t_matmul(&b).unwrap(), &expected));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DenseMatrix::new(2, 2, vec![0.0; 3]).is_err());
        let a = DenseMatrix::zeros(2, 3);
        assert!(a.matmul(&a).is_err());
        let mut b = DenseMatrix::zeros(2, 3);
        assert!(b.add_row_broadcast(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn broadcast_and_column_sums() {
        let mut m = DenseMatrix::zeros(2, 3);
        m.add_row_broadcast(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.column_sums(), vec![2.0, 4.0, 6.0]);
        assert_eq!(m.select_rows(&[1]).as_slice(), &[1.0, 2.0, 3.0]);
    }
}
