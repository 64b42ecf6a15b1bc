//! Seeded random matrices and states.  Everything routes through SplitMix64
//! so a (seed, worker) pair fully determines the object produced.

use crate::linalg::{C64, ComplexMatrix, DensityMatrix, HermitianOperator, StateVector};
use crate::rng::SplitMix64;

/// Standard complex gaussian entry (real and imaginary parts N(0,1)).
fn gaussian_c(rng: &mut SplitMix64) -> C64 {
    C64::new(rng.next_normal(), rng.next_normal())
}

/// Gaussian matrix, then Hermitian part (G + G^dag)/2.
pub fn random_hermitian(n: usize, rng: &mut SplitMix64) -> HermitianOperator {
    let g = ComplexMatrix::from_fn(n, n, |_, _| gaussian_c(rng));
    let h = g.add(&g.dagger()).scale_re(0.5);
    HermitianOperator::new_unchecked(h)
}

/// Haar-distributed unitary: modified Gram-Schmidt on a gaussian matrix with
/// the R diagonal phase-fixed to be positive real.
pub fn random_unitary(n: usize, rng: &mut SplitMix64) -> ComplexMatrix {
    let mut cols: Vec<Vec<C64>> = (0..n)
        .map(|_| (0..n).map(|_| gaussian_c(rng)).collect())
        .collect();
    for k in 0..n {
        for j in 0..k {
            let proj: C64 = cols[j]
                .iter()
                .zip(&cols[k])
                .map(|(a, b)| a.conj() * b)
                .sum();
            for i in 0..n {
                let adj = proj * cols[j][i];
                cols[k][i] -= adj;
            }
        }
        let norm: f64 = cols[k].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut cols[k] {
            *z /= norm;
        }
    }
    ComplexMatrix::from_fn(n, n, |i, j| cols[j][i])
}

/// Gaussian vector, normalized.
pub fn random_pure_state(n: usize, rng: &mut SplitMix64) -> StateVector {
    StateVector::new((0..n).map(|_| gaussian_c(rng)).collect()).normalized()
}

/// Full-rank random density matrix G G^dag / Tr(G G^dag); positive by
/// construction.
pub fn random_density(n: usize, rng: &mut SplitMix64) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(n, n, |_, _| gaussian_c(rng));
    let w = g.mul(&g.dagger());
    let tr = w.trace().re;
    DensityMatrix::new_unchecked(w.scale_re(1.0 / tr))
}

/// Flat random probability vector (uniform on the simplex).
pub fn random_probabilities(n: usize, rng: &mut SplitMix64) -> Vec<f64> {
    rng.next_simplex(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_generator_is_hermitian() {
        let h = random_hermitian(9, &mut SplitMix64::new(1));
        assert!(h.hermitian_asymmetry() < 1e-15);
    }

    #[test]
    fn unitary_generator_is_unitary() {
        let u = random_unitary(8, &mut SplitMix64::new(2));
        let res = u.dagger().mul(&u).max_abs_diff(&ComplexMatrix::identity(8));
        assert!(res < 1e-12, "unitarity residual {res}");
    }

    #[test]
    fn density_generator_is_valid() {
        let rho = random_density(6, &mut SplitMix64::new(3));
        // revalidate through the checked constructor
        DensityMatrix::new(rho.matrix().clone()).unwrap();
    }

    #[test]
    fn pure_state_is_normalized() {
        let psi = random_pure_state(11, &mut SplitMix64::new(4));
        assert!((psi.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn generators_are_deterministic_in_the_seed() {
        let a = random_density(5, &mut SplitMix64::new(90));
        let b = random_density(5, &mut SplitMix64::new(90));
        assert_eq!(a.matrix(), b.matrix());
    }

    #[test]
    fn probability_vector_sums_to_one() {
        let p = random_probabilities(17, &mut SplitMix64::new(6));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
    }
}
