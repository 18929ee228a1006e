//! Dense row-major matrices.
//!
//! Node features, logits, diffused features and their gradients all share
//! this one carrier type; rows are nodes, columns are channels.

use rayon::prelude::*;

use crate::{Error, Real, Result};

/// Row work above which matrix products fan out over rayon.
const PAR_MIN_WORK: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    /// Wraps row-major `data`. Every entry must be finite.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::shape(format!("{rows}x{cols} matrix needs {} values, got {}", rows * cols, data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix data"));
        }
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::shape(format!("row {bad} has {} columns, expected {cols}", rows[bad].len())));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Builds a matrix from an `f64` row-major buffer, converting to `T`.
    pub fn from_f64(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
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
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub(crate) fn ensure_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!("{what}: {}x{} vs {}x{}", self.rows, self.cols, other.rows, other.cols)));
        }
        Ok(())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data
            .iter()
            .map(|v| {
                let x = v.as_f64();
                x * x
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Frobenius inner product `sum_ij a_ij * b_ij`.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.ensure_same_shape(other, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a.as_f64() * b.as_f64()).sum())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    /// `a * self + b * other`.
    pub fn lincomb(&self, a: T, other: &Self, b: T) -> Result<Self> {
        self.zip_map(other, "lincomb", |x, y| a * x + b * y)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_vec_unchecked(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    fn zip_map(&self, other: &Self, what: &str, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.ensure_same_shape(other, what)?;
        Ok(Self::from_vec_unchecked(
            self.rows,
            self.cols,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        ))
    }

    /// Largest absolute entrywise difference, as `f64`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.ensure_same_shape(other, "max_abs_diff")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a.as_f64() - b.as_f64()).abs()).fold(0.0, f64::max))
    }

    pub fn gather_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            if r >= self.rows {
                return Err(Error::NodeOutOfRange { id: r, num_nodes: self.rows });
            }
            data.extend_from_slice(self.row(r));
        }
        Ok(Self::from_vec_unchecked(rows.len(), self.cols, data))
    }

    pub fn column_sums(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.cols];
        for r in 0..self.rows {
            for (s, &v) in sums.iter_mut().zip(self.row(r)) {
                *s += v;
            }
        }
        sums
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::shape(format!("matmul: {}x{} * {}x{}", self.rows, self.cols, rhs.rows, rhs.cols)));
        }
        let (k, n) = (self.cols, rhs.cols);
        let mut out = Self::zeros(self.rows, n);
        let kernel = |(i, out_row): (usize, &mut [T])| {
            let a_row = &self.data[i * k..(i + 1) * k];
            for (p, &a) in a_row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let b_row = &rhs.data[p * n..(p + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        };
        if n > 0 {
            if self.rows * k * n >= PAR_MIN_WORK {
                out.data.par_chunks_mut(n).enumerate().for_each(kernel);
            } else {
                out.data.chunks_mut(n).enumerate().for_each(kernel);
            }
        }
        Ok(out)
    }

    /// `self^T * rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Self) -> Result<Self> {
        if self.rows != rhs.rows {
            return Err(Error::shape(format!("t_matmul: ({}x{})^T * {}x{}", self.rows, self.cols, rhs.rows, rhs.cols)));
        }
        let (m, n) = (self.cols, rhs.cols);
        let mut out = Self::zeros(m, n);
        for r in 0..self.rows {
            let a_row = self.row(r);
            let b_row = rhs.row(r);
            for (i, &a) in a_row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let o = &mut out.data[i * n..(i + 1) * n];
                for (o, &b) in o.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * rhs^T`.
    pub fn matmul_t(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.cols {
            return Err(Error::shape(format!("matmul_t: {}x{} * ({}x{})^T", self.rows, self.cols, rhs.rows, rhs.cols)));
        }
        let n = rhs.rows;
        let mut out = Self::zeros(self.rows, n);
        let kernel = |(i, out_row): (usize, &mut [T])| {
            let a_row = self.row(i);
            for (j, o) in out_row.iter_mut().enumerate() {
                let mut acc = T::zero();
                for (&a, &b) in a_row.iter().zip(rhs.row(j)) {
                    acc += a * b;
                }
                *o = acc;
            }
        };
        if n > 0 {
            if self.rows * self.cols * n >= PAR_MIN_WORK {
                out.data.par_chunks_mut(n).enumerate().for_each(kernel);
            } else {
                out.data.chunks_mut(n).enumerate().for_each(kernel);
            }
        }
        Ok(out)
    }

    /// Index of the largest entry per row; ties resolve to the lowest column.
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|r| {
                let row = self.row(r);
                let mut best = 0;
                for (c, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix::from_vec_unchecked(self.rows, self.cols, self.data.iter().map(|v| U::lit(v.as_f64())).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn rejects_bad_shape_and_nan() {
        assert!(matches!(Matrix::<f64>::new(2, 2, vec![0.0; 3]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(Matrix::new(1, 1, vec![f64::NAN]), Err(Error::NonFinite(_))));
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn products_agree_with_hand_values() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let b = m(&[&[1.0, 0.0, -1.0], &[2.0, 1.0, 0.0]]);
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab, m(&[&[5.0, 2.0, -1.0], &[11.0, 4.0, -3.0], &[17.0, 6.0, -5.0]]));
        // a^T a
        let ata = a.t_matmul(&a).unwrap();
        assert_eq!(ata, m(&[&[35.0, 44.0], &[44.0, 56.0]]));
        // a a^T
        let aat = a.matmul_t(&a).unwrap();
        assert_eq!(aat.get(0, 2), 17.0);
        assert_eq!(aat.get(2, 2), 61.0);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn argmax_ties_go_to_lowest_column() {
        let x = m(&[&[1.0, 1.0, 0.0], &[0.0, 2.0, 2.0], &[-1.0, -3.0, -0.5]]);
        assert_eq!(x.argmax_rows(), vec![0, 1, 2]);
    }

    #[test]
    fn gather_rows_keeps_order() {
        let x = m(&[&[0.0], &[1.0], &[2.0]]);
        assert_eq!(x.gather_rows(&[2, 0]).unwrap(), m(&[&[2.0], &[0.0]]));
        assert!(x.gather_rows(&[3]).is_err());
    }

    #[test]
    fn norms_and_sums() {
        let x = m(&[&[3.0, 0.0], &[0.0, 4.0]]);
        assert_eq!(x.frobenius_norm(), 5.0);
        assert_eq!(x.column_sums(), vec![3.0, 4.0]);
        assert_eq!(x.dot(&x).unwrap(), 25.0);
    }
}
