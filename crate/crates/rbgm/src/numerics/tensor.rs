use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense matrix carrier shared by every module. Vectors are `n x 1` tensors.
///
/// The public constructors take row-major data; internally the entries live
/// in a `nalgebra` matrix so factorizations and products come from one
/// well-tested backend.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbientTensor {
    m: DMatrix<f64>,
}

impl AmbientTensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            m: DMatrix::zeros(rows, cols),
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {rows}x{cols} tensor, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry".into()));
        }
        Ok(Self {
            m: DMatrix::from_row_slice(rows, cols, &data),
        })
    }

    /// Column vector (`n x 1`).
    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::from_row_major(n, 1, data)
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self {
            m: DMatrix::from_fn(rows, cols, f),
        }
    }

    pub(crate) fn from_na(m: DMatrix<f64>) -> Self {
        Self { m }
    }

    pub(crate) fn na_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.m
    }

    pub(crate) fn na(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn rows(&self) -> usize {
        self.m.nrows()
    }

    pub fn cols(&self) -> usize {
        self.m.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m.nrows(), self.m.ncols())
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[(i, j)] = v;
    }

    pub fn data_row_major(&self) -> Vec<f64> {
        let (r, c) = self.shape();
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn norm_squared(&self) -> f64 {
        self.m.norm_squared()
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Self) -> f64 {
        self.m.dot(&other.m)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_na(&self.m + &other.m)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_na(&self.m - &other.m)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::from_na(&self.m * k)
    }

    /// `self + k * other`.
    pub fn add_scaled(&self, k: f64, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(k, other);
        Self::from_na(out.m)
    }

    /// In-place `self += k * other`.
    pub fn axpy(&mut self, k: f64, other: &Self) {
        self.m.zip_apply(&other.m, |a, b| *a += k * b);
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn transpose(&self) -> Self {
        Self::from_na(self.m.transpose())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        Self::from_na(&self.m * &other.m)
    }

    /// `self^T * other` without materializing the transpose.
    pub fn tr_mul(&self, other: &Self) -> Self {
        Self::from_na(self.m.tr_mul(&other.m))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_na(self.m.map(f))
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_na(self.m.zip_map(&other.m, f))
    }

    /// Entry iterator; order is an implementation detail, use for reductions.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.m.iter()
    }

    pub fn is_finite_all(&self) -> bool {
        self.m.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

impl std::ops::Index<(usize, usize)> for AmbientTensor {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.m[idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_round_trip() {
        let t = AmbientTensor::from_row_major(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(t.shape(), (2, 3));
        assert_eq!(t.get(0, 1), 2.0);
        assert_eq!(t.get(1, 0), 4.0);
        assert_eq!(t.data_row_major(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        assert!(AmbientTensor::from_row_major(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn non_finite_is_an_error() {
        assert!(AmbientTensor::from_row_major(1, 2, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn arithmetic() {
        let a = AmbientTensor::from_vec(vec![1.0, 2.0]).unwrap();
        let b = AmbientTensor::from_vec(vec![3.0, -1.0]).unwrap();
        assert_eq!(a.add(&b).data_row_major(), vec![4.0, 1.0]);
        assert_eq!(a.sub(&b).data_row_major(), vec![-2.0, 3.0]);
        assert_eq!(a.add_scaled(2.0, &b).data_row_major(), vec![7.0, 0.0]);
        assert_eq!(a.dot(&b), 1.0);
        assert!((a.norm() - 5.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn products() {
        let a = AmbientTensor::from_row_major(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = AmbientTensor::from_row_major(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(a.matmul(&b).data_row_major(), vec![2.0, 1.0, 4.0, 3.0]);
        assert_eq!(
            a.tr_mul(&b).data_row_major(),
            a.transpose().matmul(&b).data_row_major()
        );
    }
}
