//! Hermitian eigendecomposition.
//!
//! Complex Householder reduction to real symmetric tridiagonal form, implicit
//! QL iteration with Wilkinson-style shifts, eigenvector accumulation, and
//! degeneracy clustering.  Deterministic for identical input bits: no
//! randomness, fixed evaluation order.

use super::{C64, ComplexMatrix, HermitianOperator};
use crate::error::{Error, Result};
use crate::tol;

const MAX_QL_ITERS: usize = 50;

/// Eigensystem of a Hermitian operator.
///
/// Eigenvalues ascend; `eigenvectors` holds the corresponding orthonormal
/// columns; `groups` clusters indices whose adjacent eigenvalue gaps are
/// <= `tol_deg` (so the gap between consecutive groups exceeds `tol_deg`;
/// the spread inside a group stays <= `tol_deg` for well-separated clusters,
/// which is the regime the chain spectra live in).
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
    pub groups: Vec<std::ops::Range<usize>>,
    pub tol_deg: f64,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvector column `k`.
    pub fn eigenvector(&self, k: usize) -> Vec<C64> {
        let n = self.dim();
        (0..n).map(|i| self.eigenvectors.get(i, k)).collect()
    }

    /// lambda_max - lambda_min.
    pub fn spectral_range(&self) -> f64 {
        if self.eigenvalues.is_empty() {
            0.0
        } else {
            self.eigenvalues[self.dim() - 1] - self.eigenvalues[0]
        }
    }

    /// Orthogonal projector onto the eigenspace cluster `group`.
    pub fn projector(&self, group: usize) -> ComplexMatrix {
        let n = self.dim();
        let mut p = ComplexMatrix::zeros(n, n);
        for k in self.groups[group].clone() {
            for i in 0..n {
                let vi = self.eigenvectors.get(i, k);
                for j in 0..n {
                    let vj = self.eigenvectors.get(j, k).conj();
                    p.data[i * n + j] += vi * vj;
                }
            }
        }
        p
    }

    /// V diag(lambda) V^dag.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for k in 0..n {
            let lam = self.eigenvalues[k];
            for i in 0..n {
                let vi = self.eigenvectors.get(i, k) * lam;
                for j in 0..n {
                    out.data[i * n + j] += vi * self.eigenvectors.get(j, k).conj();
                }
            }
        }
        out
    }

    /// ||V^dag V - I||_max, for validation.
    pub fn orthonormality_residual(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in a..n {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..n {
                    acc += self.eigenvectors.get(i, a).conj() * self.eigenvectors.get(i, b);
                }
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((acc - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Apply f to each eigenvalue: V diag(f(lambda)) V^dag.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for k in 0..n {
            let w = f(self.eigenvalues[k]);
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vi = self.eigenvectors.get(i, k) * w;
                for j in 0..n {
                    out.data[i * n + j] += vi * self.eigenvectors.get(j, k).conj();
                }
            }
        }
        out
    }
}

/// Full eigendecomposition of a Hermitian operator.
///
/// `tol_deg` controls degeneracy clustering; `None` uses
/// `DEGENERACY_REL * spectral range`.
pub fn eig_hermitian(
    op: &HermitianOperator,
    tol_deg: Option<f64>,
) -> Result<SpectralDecomposition> {
    let n = op.dim();
    if n == 0 {
        return Err(Error::DimensionMismatch {
            left: 0,
            right: 0,
            context: "eig_hermitian on empty matrix",
        });
    }
    let mut a = op.matrix().clone();
    let mut q = ComplexMatrix::identity(n);
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n]; // e[i] couples d[i] and d[i+1]; e[n-1] = 0

    tridiagonalize(&mut a, &mut q, &mut d, &mut e);
    ql_implicit(&mut d, &mut e, &mut q)?;
    sort_ascending(&mut d, &mut q);

    let range = d[n - 1] - d[0];
    let tol_deg = tol_deg.unwrap_or(tol::DEGENERACY_REL * range);
    let groups = cluster(&d, tol_deg);

    Ok(SpectralDecomposition {
        eigenvalues: d,
        eigenvectors: q,
        groups,
        tol_deg,
    })
}

/// Householder reduction of Hermitian `a` to real tridiagonal (d, e), with
/// the accumulated unitary written into `q` (so a = q T q^dag on exit).
fn tridiagonalize(a: &mut ComplexMatrix, q: &mut ComplexMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = a.rows;
    let zero = C64::new(0.0, 0.0);
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];

    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1; // trailing window size
        // Column below the diagonal: x = a[k+1.., k]
        let mut tail_sq = 0.0f64;
        for i in k + 2..n {
            tail_sq += a.get(i, k).norm_sqr();
        }
        if tail_sq == 0.0 {
            continue; // already tridiagonal in this column
        }
        let x0 = a.get(k + 1, k);
        let xnorm = (x0.norm_sqr() + tail_sq).sqrt();
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let alpha = -phase * xnorm;

        // v = x - alpha e1; v[0] has no cancellation by the phase choice.
        v[0] = x0 - alpha;
        for i in 1..m {
            v[i] = a.get(k + 1 + i, k);
        }
        let vnorm_sq: f64 = v[..m].iter().map(|z| z.norm_sqr()).sum();
        let tau = 2.0 / vnorm_sq;

        // p = tau * B v on the trailing block B = a[k+1.., k+1..]
        for i in 0..m {
            let row = &a.data[(k + 1 + i) * n + (k + 1)..(k + 1 + i) * n + n];
            let mut acc = zero;
            for (bv, vv) in row.iter().zip(&v[..m]) {
                acc += bv * vv;
            }
            p[i] = acc * tau;
        }
        // K = (tau/2) v^dag p  (real for Hermitian B)
        let vdp: C64 = v[..m].iter().zip(&p[..m]).map(|(a, b)| a.conj() * b).sum();
        let kcoef = 0.5 * tau * vdp.re;
        // w = p - K v; B -= v w^dag + w v^dag
        for i in 0..m {
            p[i] -= v[i] * kcoef;
        }
        for i in 0..m {
            let vi = v[i];
            let wi = p[i];
            let row = &mut a.data[(k + 1 + i) * n + (k + 1)..(k + 1 + i) * n + n];
            for j in 0..m {
                row[j] -= vi * p[j].conj() + wi * v[j].conj();
            }
        }
        // Annihilated column/row
        a.set(k + 1, k, alpha);
        a.set(k, k + 1, alpha.conj());
        for i in k + 2..n {
            a.set(i, k, zero);
            a.set(k, i, zero);
        }
        // Q <- Q (I - tau v v^dag)
        for r in 0..n {
            let row = &mut q.data[r * n + (k + 1)..r * n + n];
            let mut s = zero;
            for (qv, vv) in row.iter().zip(&v[..m]) {
                s += qv * vv;
            }
            s *= tau;
            for (qv, vv) in row.iter_mut().zip(&v[..m]) {
                *qv -= s * vv.conj();
            }
        }
    }

    // Make the complex subdiagonal real with a diagonal phase similarity.
    let mut dphase = vec![C64::new(1.0, 0.0); n];
    for i in 0..n {
        d[i] = a.get(i, i).re;
    }
    for i in 1..n {
        let u = a.get(i, i - 1) * dphase[i - 1];
        if u.norm() > 0.0 {
            dphase[i] = u / u.norm();
            e[i - 1] = u.norm();
        } else {
            dphase[i] = C64::new(1.0, 0.0);
            e[i - 1] = 0.0;
        }
    }
    e[n - 1] = 0.0;
    for r in 0..n {
        for c in 0..n {
            let idx = r * n + c;
            q.data[idx] *= dphase[c];
        }
    }
}

/// Implicit-shift QL on the real tridiagonal (d, e), rotations accumulated
/// into the complex columns of `z`.  e[i] couples d[i] and d[i+1].
fn ql_implicit(d: &mut [f64], e: &mut [f64], z: &mut ComplexMatrix) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    // Negligibility needs an absolute floor at the matrix-norm noise level:
    // rotation dust (~eps * ||T||) sitting between near-degenerate tiny
    // diagonal entries never passes the purely relative test, and the sweep
    // stalls.  Snapping couplings below eps * ||T|| perturbs eigenvalues by
    // at most that, the usual backward-stability guarantee.
    let scale = d
        .iter()
        .zip(e.iter())
        .map(|(a, b)| a.abs() + b.abs())
        .fold(0.0f64, f64::max);
    let floor = scale * eps;
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            // Smallest m >= l with negligible e[m] splits the problem.
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd + floor {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_ITERS {
                return Err(Error::EigConvergence {
                    iterations: MAX_QL_ITERS,
                });
            }
            // Shift from the 2x2 at the l end.
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let denom = g + if g >= 0.0 { r } else { -r };
            g = d[m] - d[l] + e[l] / denom;
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // Deflate: eigenvalue found exactly.
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // Rotate eigenvector columns i and i+1.
                let nn = z.rows;
                for k in 0..nn {
                    let zi1 = z.data[k * nn + i + 1];
                    let zi = z.data[k * nn + i];
                    z.data[k * nn + i + 1] = zi * s + zi1 * c;
                    z.data[k * nn + i] = zi * c - zi1 * s;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

fn sort_ascending(d: &mut [f64], q: &mut ComplexMatrix) {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap().then(a.cmp(&b)));
    let sorted_d: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    d.copy_from_slice(&sorted_d);
    let old = q.clone();
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            q.data[r * n + new_col] = old.data[r * n + old_col];
        }
    }
}

/// Chain-cluster ascending eigenvalues: a new group starts when the gap to
/// the previous eigenvalue exceeds tol_deg.
fn cluster(d: &[f64], tol_deg: f64) -> Vec<std::ops::Range<usize>> {
    let n = d.len();
    let mut groups = Vec::new();
    let mut start = 0usize;
    for i in 1..n {
        if d[i] - d[i - 1] > tol_deg {
            groups.push(start..i);
            start = i;
        }
    }
    groups.push(start..n);
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;
    use crate::random::random_hermitian;
    use crate::rng::SplitMix64;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn check_decomposition(op: &HermitianOperator, spec: &SpectralDecomposition) {
        let fro = op.frobenius_norm().max(1e-300);
        let residual = spec.reconstruct().max_abs_diff(op.matrix());
        assert!(
            residual <= tol::SPECTRAL_RECONSTRUCTION_REL * fro,
            "reconstruction residual {residual:.3e} vs allowance {:.3e}",
            tol::SPECTRAL_RECONSTRUCTION_REL * fro
        );
        assert!(
            spec.orthonormality_residual() < 1e-10,
            "eigenvectors not orthonormal"
        );
        for w in spec.eigenvalues.windows(2) {
            assert!(w[0] <= w[1], "eigenvalues not ascending");
        }
    }

    #[test]
    fn diagonal_matrix_spectrum() {
        let op = HermitianOperator::from_diagonal(&[3.0, 1.0, 2.0]);
        let spec = eig_hermitian(&op, None).unwrap();
        assert_eq!(spec.eigenvalues, vec![1.0, 2.0, 3.0]);
        assert_eq!(spec.groups.len(), 3);
        check_decomposition(&op, &spec);
    }

    #[test]
    fn pauli_x_spectrum() {
        let op = HermitianOperator::new(ComplexMatrix::new(
            2,
            2,
            vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        ))
        .unwrap();
        let spec = eig_hermitian(&op, None).unwrap();
        assert!((spec.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((spec.eigenvalues[1] - 1.0).abs() < 1e-14);
        check_decomposition(&op, &spec);
    }

    #[test]
    fn pauli_y_spectrum_complex_entries() {
        let op = HermitianOperator::new(ComplexMatrix::new(
            2,
            2,
            vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)],
        ))
        .unwrap();
        let spec = eig_hermitian(&op, None).unwrap();
        assert!((spec.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((spec.eigenvalues[1] - 1.0).abs() < 1e-14);
        check_decomposition(&op, &spec);
    }

    #[test]
    fn two_by_two_matches_closed_form() {
        let mut rng = SplitMix64::new(31);
        for _ in 0..200 {
            let a = rng.uniform(-2.0, 2.0);
            let cdiag = rng.uniform(-2.0, 2.0);
            let b = c(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
            let op = HermitianOperator::new(ComplexMatrix::new(
                2,
                2,
                vec![c(a, 0.0), b, b.conj(), c(cdiag, 0.0)],
            ))
            .unwrap();
            let spec = eig_hermitian(&op, None).unwrap();
            let mid = 0.5 * (a + cdiag);
            let rad = (0.25 * (a - cdiag).powi(2) + b.norm_sqr()).sqrt();
            assert!((spec.eigenvalues[0] - (mid - rad)).abs() < 1e-12);
            assert!((spec.eigenvalues[1] - (mid + rad)).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_random_six_by_six_reconstructs() {
        let op = random_hermitian(6, &mut SplitMix64::new(2024));
        let spec = eig_hermitian(&op, None).unwrap();
        check_decomposition(&op, &spec);
    }

    #[test]
    fn random_sizes_reconstruct() {
        for (i, &n) in [1usize, 2, 3, 5, 8, 13, 21, 40, 64].iter().enumerate() {
            let op = random_hermitian(n, &mut SplitMix64::new(100 + i as u64));
            let spec = eig_hermitian(&op, None).unwrap();
            check_decomposition(&op, &spec);
        }
    }

    #[test]
    fn degenerate_spectrum_groups() {
        let op = HermitianOperator::new(ComplexMatrix::identity(4)).unwrap();
        let spec = eig_hermitian(&op, None).unwrap();
        assert_eq!(spec.groups.len(), 1);
        assert_eq!(spec.groups[0], 0..4);

        // sigma_z (x) I: eigenvalues (-1, -1, 1, 1)
        let sz = ComplexMatrix::diagonal(&[1.0, -1.0]);
        let op = HermitianOperator::new(kron(&sz, &ComplexMatrix::identity(2))).unwrap();
        let spec = eig_hermitian(&op, None).unwrap();
        assert_eq!(spec.eigenvalues, vec![-1.0, -1.0, 1.0, 1.0]);
        assert_eq!(spec.groups.len(), 2);
        check_decomposition(&op, &spec);
    }

    #[test]
    fn group_projectors_resolve_identity() {
        let op = random_hermitian(7, &mut SplitMix64::new(55));
        let spec = eig_hermitian(&op, None).unwrap();
        let n = op.dim();
        let mut sum = ComplexMatrix::zeros(n, n);
        for g in 0..spec.groups.len() {
            let p = spec.projector(g);
            // projector idempotence
            assert!(p.mul(&p).max_abs_diff(&p) < 1e-12);
            sum = sum.add(&p);
        }
        assert!(sum.max_abs_diff(&ComplexMatrix::identity(n)) < 1e-12);
    }

    #[test]
    fn explicit_tolerance_controls_grouping() {
        let op = HermitianOperator::from_diagonal(&[0.0, 1e-12, 1.0]);
        let spec = eig_hermitian(&op, Some(1e-10)).unwrap();
        assert_eq!(spec.groups.len(), 2);
        assert_eq!(spec.groups[0], 0..2);
        let spec = eig_hermitian(&op, Some(1e-14)).unwrap();
        assert_eq!(spec.groups.len(), 3);
    }

    #[test]
    fn map_eigenvalues_exponentiates() {
        let op = HermitianOperator::from_diagonal(&[0.0, 2.0f64.ln()]);
        let spec = eig_hermitian(&op, None).unwrap();
        let exp = spec.map_eigenvalues(f64::exp);
        assert!((exp.get(0, 0).re - 1.0).abs() < 1e-14);
        assert!((exp.get(1, 1).re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn moderately_large_matrix_stays_accurate() {
        let op = random_hermitian(160, &mut SplitMix64::new(777));
        let spec = eig_hermitian(&op, None).unwrap();
        check_decomposition(&op, &spec);
    }
}
