//! Dense complex linear algebra: matrices, states, and validated wrappers.
//!
//! Matrices are row-major `Vec<Complex64>` buffers.  [`HermitianOperator`]
//! and [`DensityMatrix`] are thin wrappers whose constructors enforce the
//! contracts the rest of the crate relies on (hermiticity, unit trace,
//! positivity).

mod eig;
mod ops;

pub use eig::{eig_hermitian, SpectralDecomposition};
pub use ops::{
    check_fuchs_van_de_graaf, commutator, fidelity, kron, kron_list, kron_with_cap,
    partial_trace, trace_distance, trace_norm, FuchsVanDeGraafReport,
};

use crate::error::{Error, Result};
use crate::tol;
use num_complex::Complex64;

pub type C64 = Complex64;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length must be rows*cols");
        ComplexMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        ComplexMatrix { rows, cols, data }
    }

    pub fn diagonal(entries: &[f64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in entries.iter().enumerate() {
            m.data[i * n + i] = C64::new(x, 0.0);
        }
        m
    }

    pub fn diagonal_complex(entries: &[C64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in entries.iter().enumerate() {
            m.data[i * n + i] = x;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn add(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        ComplexMatrix::new(self.rows, self.cols, data)
    }

    pub fn sub(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        ComplexMatrix::new(self.rows, self.cols, data)
    }

    pub fn scale(&self, s: C64) -> ComplexMatrix {
        ComplexMatrix::new(self.rows, self.cols, self.data.iter().map(|a| a * s).collect())
    }

    pub fn scale_re(&self, s: f64) -> ComplexMatrix {
        self.scale(C64::new(s, 0.0))
    }

    pub fn add_assign_scaled(&mut self, other: &ComplexMatrix, s: C64) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    /// Matrix product, ikj loop order for row-major locality.
    pub fn mul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            self.cols, other.rows,
            "inner dimensions must agree in mul"
        );
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![C64::new(0.0, 0.0); n * m];
        for i in 0..n {
            let arow = &self.data[i * k..(i + 1) * k];
            let orow = &mut out[i * m..(i + 1) * m];
            for (kk, &a) in arow.iter().enumerate() {
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let brow = &other.data[kk * m..(kk + 1) * m];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        ComplexMatrix::new(n, m, out)
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.get(i, j).conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest |A - B| entry; the workhorse of equality assertions in tests.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// max |A[i,j] - conj(A[j,i])| over all entries.
    pub fn hermitian_asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len());
        let mut out = vec![C64::new(0.0, 0.0); self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = C64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            out[i] = acc;
        }
        out
    }

    /// Real parts of the diagonal.
    pub fn diagonal_re(&self) -> Vec<f64> {
        assert!(self.is_square());
        (0..self.rows).map(|i| self.get(i, i).re).collect()
    }
}

/// Normalizable complex state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(pub Vec<C64>);

impl StateVector {
    pub fn new(data: Vec<C64>) -> Self {
        StateVector(data)
    }

    /// Computational basis vector |index> in dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[index] = C64::new(1.0, 0.0);
        StateVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> StateVector {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize the zero vector");
        StateVector(self.0.iter().map(|z| z / n).collect())
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// |self><self| as a matrix.
    pub fn outer(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut m = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = self.0[i] * self.0[j].conj();
            }
        }
        m
    }

    pub fn kron(&self, other: &StateVector) -> StateVector {
        let mut out = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.0 {
            for b in &other.0 {
                out.push(a * b);
            }
        }
        StateVector(out)
    }
}

/// Square matrix verified Hermitian at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    mat: ComplexMatrix,
}

impl HermitianOperator {
    /// Validates max |A[i,j] - conj(A[j,i])| <= HERMITICITY_REL * max|A|.
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::DimensionMismatch {
                left: mat.rows,
                right: mat.cols,
                context: "HermitianOperator::new",
            });
        }
        let scale = mat.max_abs_entry();
        let tolerance = tol::HERMITICITY_REL * scale.max(1.0e-300);
        let asymmetry = mat.hermitian_asymmetry();
        if scale > 0.0 && asymmetry > tolerance {
            return Err(Error::NotHermitian {
                asymmetry,
                tolerance,
            });
        }
        Ok(HermitianOperator { mat })
    }

    /// For callers whose construction is Hermitian by algebra.
    pub(crate) fn new_unchecked(mat: ComplexMatrix) -> Self {
        debug_assert!(mat.is_square());
        HermitianOperator { mat }
    }

    pub fn from_diagonal(entries: &[f64]) -> Self {
        HermitianOperator {
            mat: ComplexMatrix::diagonal(entries),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.mat
    }
}

impl std::ops::Deref for HermitianOperator {
    type Target = ComplexMatrix;
    fn deref(&self) -> &ComplexMatrix {
        &self.mat
    }
}

/// Trace-one positive-semidefinite Hermitian matrix.
///
/// `new` enforces |trace - 1| <= 1e-10 and min eigenvalue >= -1e-10.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
}

impl DensityMatrix {
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        let op = HermitianOperator::new(mat)?;
        let tr = op.trace();
        if (tr.re - 1.0).abs() > tol::DENSITY_TRACE || tr.im.abs() > tol::DENSITY_TRACE {
            return Err(Error::NotDensity {
                reason: "trace differs from 1",
                value: tr.re,
            });
        }
        let spec = eig_hermitian(&op, None)?;
        let min_eig = spec.eigenvalues[0];
        if min_eig < tol::DENSITY_EIG_FLOOR {
            return Err(Error::NotDensity {
                reason: "negative eigenvalue",
                value: min_eig,
            });
        }
        Ok(DensityMatrix { op })
    }

    /// For outputs of maps that preserve positivity and trace by algebra
    /// (channels, partial traces, convex mixtures of valid states).
    pub(crate) fn new_unchecked(mat: ComplexMatrix) -> Self {
        DensityMatrix {
            op: HermitianOperator::new_unchecked(mat),
        }
    }

    pub fn pure(state: &StateVector) -> Self {
        let psi = state.normalized();
        DensityMatrix::new_unchecked(psi.outer())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix::new_unchecked(ComplexMatrix::identity(dim).scale_re(1.0 / dim as f64))
    }

    /// Diagonal state from a probability vector.
    pub fn from_probabilities(p: &[f64]) -> Result<Self> {
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > tol::DENSITY_TRACE {
            return Err(Error::BadProbabilities {
                sum,
                tolerance: tol::DENSITY_TRACE,
            });
        }
        if let Some(&bad) = p.iter().find(|&&x| x < tol::DENSITY_EIG_FLOOR) {
            return Err(Error::NotDensity {
                reason: "negative probability",
                value: bad,
            });
        }
        Ok(DensityMatrix::new_unchecked(ComplexMatrix::diagonal(p)))
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.op.matrix()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.op.into_matrix()
    }
}

impl std::ops::Deref for DensityMatrix {
    type Target = ComplexMatrix;
    fn deref(&self) -> &ComplexMatrix {
        self.op.matrix()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn matmul_known_product() {
        let a = ComplexMatrix::new(2, 2, vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)]);
        let b = ComplexMatrix::new(2, 2, vec![c(0.0, 1.0), c(1.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
        let ab = a.mul(&b);
        assert_eq!(ab.get(0, 0), c(0.0, 1.0));
        assert_eq!(ab.get(0, 1), c(5.0, 0.0));
        assert_eq!(ab.get(1, 0), c(0.0, 3.0));
        assert_eq!(ab.get(1, 1), c(11.0, 0.0));
    }

    #[test]
    fn dagger_conjugates_and_transposes() {
        let a = ComplexMatrix::new(2, 2, vec![c(1.0, 2.0), c(3.0, 4.0), c(5.0, 6.0), c(7.0, 8.0)]);
        let ad = a.dagger();
        assert_eq!(ad.get(0, 1), c(5.0, -6.0));
        assert_eq!(ad.get(1, 0), c(3.0, -4.0));
    }

    #[test]
    fn hermitian_constructor_accepts_hermitian_rejects_other() {
        let h = ComplexMatrix::new(2, 2, vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        assert!(HermitianOperator::new(h).is_ok());
        let bad = ComplexMatrix::new(2, 2, vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(2.0, 0.0)]);
        match HermitianOperator::new(bad) {
            Err(crate::error::Error::NotHermitian { asymmetry, .. }) => {
                assert!((asymmetry - 2.0).abs() < 1e-15)
            }
            other => panic!("expected NotHermitian, got {other:?}"),
        }
    }

    #[test]
    fn zero_matrix_is_hermitian() {
        assert!(HermitianOperator::new(ComplexMatrix::zeros(3, 3)).is_ok());
    }

    #[test]
    fn density_constructor_enforces_trace_and_positivity() {
        assert!(DensityMatrix::new(ComplexMatrix::diagonal(&[0.5, 0.5])).is_ok());
        assert!(DensityMatrix::new(ComplexMatrix::diagonal(&[0.6, 0.5])).is_err());
        assert!(DensityMatrix::new(ComplexMatrix::diagonal(&[1.2, -0.2])).is_err());
    }

    #[test]
    fn pure_state_density_has_unit_trace() {
        let psi = StateVector::new(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        let rho = DensityMatrix::pure(&psi);
        assert!((rho.trace().re - 1.0).abs() < 1e-14);
        assert!((rho.get(0, 0).re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn state_inner_and_outer_agree() {
        let psi = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).normalized();
        let rho = psi.outer();
        // <psi|rho|psi> = 1 for normalized psi
        let v = rho.matvec(&psi.0);
        let overlap: C64 = psi.0.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        assert!((overlap.re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn from_probabilities_validates() {
        assert!(DensityMatrix::from_probabilities(&[0.25, 0.75]).is_ok());
        assert!(DensityMatrix::from_probabilities(&[0.5, 0.6]).is_err());
        assert!(DensityMatrix::from_probabilities(&[1.5, -0.5]).is_err());
    }
}
