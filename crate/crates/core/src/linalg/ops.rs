//! Matrix operations on top of the eigensolver: tensor products, partial
//! trace, Schatten-1 distances, fidelity, and the Fuchs-van de Graaf
//! consistency check used to cross-validate the two distance measures.

use super::{eig_hermitian, C64, ComplexMatrix, DensityMatrix, HermitianOperator};
use crate::error::{Error, Result};
use crate::tol;

/// Kronecker product a (x) b.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ia in 0..a.rows {
        for ja in 0..a.cols {
            let av = a.get(ia, ja);
            if av.norm_sqr() == 0.0 {
                continue;
            }
            for ib in 0..b.rows {
                let r = ia * b.rows + ib;
                for jb in 0..b.cols {
                    out.data[r * cols + ja * b.cols + jb] = av * b.get(ib, jb);
                }
            }
        }
    }
    out
}

/// Kronecker product that refuses to build anything larger than `max_dim`
/// on either side.
pub fn kron_with_cap(a: &ComplexMatrix, b: &ComplexMatrix, max_dim: usize) -> Result<ComplexMatrix> {
    let rows = a.rows.checked_mul(b.rows);
    let cols = a.cols.checked_mul(b.cols);
    match (rows, cols) {
        (Some(r), Some(c)) if r <= max_dim && c <= max_dim => Ok(kron(a, b)),
        (Some(r), Some(c)) => Err(Error::SizeOverflow {
            required: r.max(c),
            cap: max_dim,
        }),
        _ => Err(Error::SizeOverflow {
            required: usize::MAX,
            cap: max_dim,
        }),
    }
}

/// Left-to-right Kronecker product of a factor list (empty list -> 1x1 one).
pub fn kron_list(factors: &[&ComplexMatrix]) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::identity(1);
    for f in factors {
        out = kron_with_cap(&out, f, tol::KRON_MAX_DIM)?;
    }
    Ok(out)
}

/// Partial trace of an operator on a tensor product with factor dimensions
/// `dims` (leftmost factor first, matching `kron` order), keeping the factors
/// listed in `keep` (strictly increasing).  Traced factors are summed out.
pub fn partial_trace(
    rho: &ComplexMatrix,
    dims: &[usize],
    keep: &[usize],
) -> Result<ComplexMatrix> {
    let total: usize = dims.iter().product();
    if !rho.is_square() || rho.rows != total {
        return Err(Error::DimensionMismatch {
            left: total,
            right: rho.rows,
            context: "partial_trace factor dimensions",
        });
    }
    for w in keep.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::Config(
                "partial_trace keep list must be strictly increasing".into(),
            ));
        }
    }
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Config(
            "partial_trace keep index out of range".into(),
        ));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    // Global stride of factor k in kron order (leftmost most significant).
    let mut stride = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        stride[k] = stride[k + 1] * dims[k + 1];
    }
    let dim_keep: usize = keep.iter().map(|&k| dims[k]).product();
    let dim_traced: usize = traced.iter().map(|&k| dims[k]).product();

    // base offsets for every multi-index over the kept / traced factors
    let offsets = |factors: &[usize], count: usize| -> Vec<usize> {
        let mut out = vec![0usize; count];
        for (flat, slot) in out.iter_mut().enumerate() {
            let mut rem = flat;
            let mut base = 0usize;
            for &f in factors.iter().rev() {
                base += (rem % dims[f]) * stride[f];
                rem /= dims[f];
            }
            *slot = base;
        }
        out
    };
    let keep_off = offsets(keep, dim_keep);
    let traced_off = offsets(&traced, dim_traced);

    let mut out = ComplexMatrix::zeros(dim_keep, dim_keep);
    for (a, &ka) in keep_off.iter().enumerate() {
        for (b, &kb) in keep_off.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &traced_off {
                acc += rho.get(ka + t, kb + t);
            }
            out.data[a * dim_keep + b] = acc;
        }
    }
    Ok(out)
}

/// Schatten-1 norm ||a||_1 (sum of singular values).  Hermitian inputs take
/// the eigenvalue path; general inputs go through a^dag a.
pub fn trace_norm(a: &ComplexMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            left: a.rows,
            right: a.cols,
            context: "trace_norm of non-square matrix",
        });
    }
    let scale = a.max_abs_entry();
    if scale == 0.0 {
        return Ok(0.0);
    }
    if a.hermitian_asymmetry() <= tol::HERMITICITY_REL * scale {
        // Symmetrize away rounding before the eigensolve.
        let sym = a.add(&a.dagger()).scale_re(0.5);
        let spec = eig_hermitian(&HermitianOperator::new_unchecked(sym), None)?;
        Ok(spec.eigenvalues.iter().map(|l| l.abs()).sum())
    } else {
        let gram = a.dagger().mul(a);
        let gram = gram.add(&gram.dagger()).scale_re(0.5);
        let spec = eig_hermitian(&HermitianOperator::new_unchecked(gram), None)?;
        Ok(spec.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum())
    }
}

/// Trace distance (1/2)||rho - sigma||_1, in [0, 1] for density matrices.
pub fn trace_distance(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    Ok(0.5 * trace_norm(&rho.sub(sigma))?)
}

/// Uhlmann fidelity F(rho, sigma) = Tr sqrt(sqrt(rho) sigma sqrt(rho)),
/// clamped to [0, 1] against eigenvalue rounding.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
            context: "fidelity of unequal dimensions",
        });
    }
    let spec = eig_hermitian(rho.operator(), None)?;
    let sqrt_rho = spec.map_eigenvalues(|l| l.max(0.0).sqrt());
    let inner = sqrt_rho.mul(sigma.matrix()).mul(&sqrt_rho);
    let inner = inner.add(&inner.dagger()).scale_re(0.5);
    let spec = eig_hermitian(&HermitianOperator::new_unchecked(inner), None)?;
    let f: f64 = spec.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Both sides of the Fuchs-van de Graaf sandwich for one state pair.
#[derive(Debug, Clone)]
pub struct FuchsVanDeGraafReport {
    pub trace_distance: f64,
    pub fidelity: f64,
    pub lower: f64,
    pub upper: f64,
    pub ok: bool,
}

/// Checks 1 - F <= D <= sqrt(1 - F^2) with slack for rounding; used as a
/// cross-validation oracle between the distance and fidelity code paths.
pub fn check_fuchs_van_de_graaf(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
) -> Result<FuchsVanDeGraafReport> {
    let d = trace_distance(rho.matrix(), sigma.matrix())?;
    let f = fidelity(rho, sigma)?;
    let lower = 1.0 - f;
    let upper = (1.0 - f * f).max(0.0).sqrt();
    let ok = d + tol::FUCHS_SLACK >= lower && d <= upper + tol::FUCHS_SLACK;
    Ok(FuchsVanDeGraafReport {
        trace_distance: d,
        fidelity: f,
        lower,
        upper,
        ok,
    })
}

/// [a, b] = ab - ba.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.mul(b).sub(&b.mul(a))
}
