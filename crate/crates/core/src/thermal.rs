//! Gibbs states, inverse-temperature matching, and the two candidate thermal
//! targets of a chain window.
//!
//! Every Boltzmann weight is computed after shifting the spectrum so the
//! largest weight is exactly 1; this keeps both signs of beta overflow-free
//! out to |beta| ~ 1e6 and beyond.

use crate::combinatorics::KahanSum;
use crate::error::{Error, Result};
use crate::lattice::{reduce_rank_one_into, SectorSpectra, SpinChain};
use crate::linalg::{
    eig_hermitian, ComplexMatrix, DensityMatrix, HermitianOperator, SpectralDecomposition,
    StateVector,
};
use crate::tol;

/// Which state a window is asked to thermalize towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThermalKind {
    /// Gibbs state of the window's own Hamiltonian (interior terms only).
    ReducedHamiltonianGibbs,
    /// Window reduction of the whole chain's Gibbs state.
    ReducedGlobalGibbs,
}

/// A local thermal state together with how it was built.
#[derive(Debug, Clone)]
pub struct ThermalTarget {
    pub kind: ThermalKind,
    pub beta: f64,
    pub state: DensityMatrix,
}

/// Energy shift that makes the largest Boltzmann weight equal to 1.
fn boltzmann_shift(energies: &[f64], beta: f64) -> f64 {
    if beta >= 0.0 {
        energies.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Boltzmann distribution over the given energies.
pub fn gibbs_probabilities(energies: &[f64], beta: f64) -> Result<Vec<f64>> {
    if !beta.is_finite() {
        return Err(Error::NonFiniteBeta { beta });
    }
    if energies.is_empty() {
        return Err(Error::Config("empty spectrum".into()));
    }
    let shift = boltzmann_shift(energies, beta);
    let weights: Vec<f64> = energies.iter().map(|e| (-beta * (e - shift)).exp()).collect();
    let mut z = KahanSum::new();
    for w in &weights {
        z.add(*w);
    }
    let z = z.value();
    Ok(weights.into_iter().map(|w| w / z).collect())
}

/// Thermal expectation of the energy at inverse temperature `beta`.
pub fn mean_energy(energies: &[f64], beta: f64) -> Result<f64> {
    let probs = gibbs_probabilities(energies, beta)?;
    let mut acc = KahanSum::new();
    for (p, e) in probs.iter().zip(energies) {
        acc.add(p * e);
    }
    Ok(acc.value())
}

/// Invert the strictly decreasing map beta -> mean energy by bisection.  The
/// bracket starts at +-BETA_BRACKET and doubles until it straddles `target`;
/// convergence is declared on the energy residual.
pub fn beta_for_mean_energy(energies: &[f64], target: f64, energy_tol: f64) -> Result<f64> {
    let min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(target > min && target < max) {
        return Err(Error::EnergyOutOfRange { target, min, max });
    }
    let mut lo = -tol::BETA_BRACKET;
    let mut hi = tol::BETA_BRACKET;
    // E(beta) decreases, so the low end of the bracket holds the high energy.
    let mut guard = 0;
    while mean_energy(energies, lo)? < target {
        lo *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::BisectionFailed {
                iterations: guard,
                residual: mean_energy(energies, lo)? - target,
                tolerance: energy_tol,
            });
        }
    }
    guard = 0;
    while mean_energy(energies, hi)? > target {
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::BisectionFailed {
                iterations: guard,
                residual: mean_energy(energies, hi)? - target,
                tolerance: energy_tol,
            });
        }
    }
    let mut residual = f64::INFINITY;
    for _ in 0..tol::BETA_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        let e = mean_energy(energies, mid)?;
        residual = e - target;
        if residual.abs() <= energy_tol {
            return Ok(mid);
        }
        if e > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::BisectionFailed {
        iterations: tol::BETA_MAX_ITERS,
        residual,
        tolerance: energy_tol,
    })
}

/// <psi|H|psi> (real because H is Hermitian).
pub fn expected_energy(h: &HermitianOperator, psi: &StateVector) -> f64 {
    let hpsi = h.matvec(&psi.0);
    psi.0.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Inverse temperature whose Gibbs state carries the same mean energy as the
/// state vector `psi0`; negative when the state sits above the spectral
/// midpoint.
pub fn match_beta(h: &HermitianOperator, psi0: &StateVector, energy_tol: f64) -> Result<f64> {
    if psi0.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            left: psi0.dim(),
            right: h.dim(),
            context: "state vector vs hamiltonian dimension",
        });
    }
    let spec = eig_hermitian(h, None)?;
    beta_for_mean_energy(&spec.eigenvalues, expected_energy(h, psi0), energy_tol)
}

/// exp(-beta H)/Z through the spectral decomposition.
pub fn gibbs(h: &HermitianOperator, beta: f64) -> Result<DensityMatrix> {
    let spec = eig_hermitian(h, None)?;
    gibbs_from_spectrum(&spec, beta)
}

/// Gibbs state assembled from a precomputed decomposition.
pub fn gibbs_from_spectrum(spec: &SpectralDecomposition, beta: f64) -> Result<DensityMatrix> {
    if !beta.is_finite() {
        return Err(Error::NonFiniteBeta { beta });
    }
    let shift = boltzmann_shift(&spec.eigenvalues, beta);
    let mut z = KahanSum::new();
    for e in &spec.eigenvalues {
        z.add((-beta * (e - shift)).exp());
    }
    let z = z.value();
    DensityMatrix::new(spec.map_eigenvalues(|e| (-beta * (e - shift)).exp() / z))
}

/// beta -> +infinity limit of the Gibbs state: uniform on the lowest
/// degeneracy group.
pub fn ground_projector_state(spec: &SpectralDecomposition) -> Result<DensityMatrix> {
    projector_state(spec, 0)
}

/// beta -> -infinity limit: uniform on the highest degeneracy group.
pub fn ceiling_projector_state(spec: &SpectralDecomposition) -> Result<DensityMatrix> {
    projector_state(spec, spec.groups.len() - 1)
}

fn projector_state(spec: &SpectralDecomposition, g: usize) -> Result<DensityMatrix> {
    let members = spec.groups[g].len() as f64;
    DensityMatrix::new(spec.projector(g).scale_re(1.0 / members))
}

/// Gibbs state of the window's own (interior-term) Hamiltonian.
pub fn reduced_gibbs_target(
    chain: &SpinChain,
    anchor: usize,
    width: usize,
    beta: f64,
) -> Result<ThermalTarget> {
    let hr = chain.reduced_hamiltonian(anchor, width)?;
    Ok(ThermalTarget {
        kind: ThermalKind::ReducedHamiltonianGibbs,
        beta,
        state: gibbs(&hr, beta)?,
    })
}

/// Window reduction of the whole chain's Gibbs state, accumulated eigenvector
/// by eigenvector so the 2^L Gibbs matrix is never materialized.
pub fn reduced_global_gibbs_target(
    spectra: &SectorSpectra,
    anchor: usize,
    width: usize,
    beta: f64,
) -> Result<ThermalTarget> {
    let probs = gibbs_probabilities(&spectra.energies(), beta)?;
    let dim = 1usize << width;
    let mut acc = ComplexMatrix::zeros(dim, dim);
    for (r, p) in spectra.merged.iter().zip(&probs) {
        let psi = spectra.eigenvector_global(r.sector, r.index);
        reduce_rank_one_into(&mut acc, &psi, spectra.sites, anchor, width, *p)?;
    }
    Ok(ThermalTarget {
        kind: ThermalKind::ReducedGlobalGibbs,
        beta,
        state: DensityMatrix::new(acc)?,
    })
}

/// Build the requested thermal target for a chain window.
pub fn thermal_target(
    chain: &SpinChain,
    spectra: &SectorSpectra,
    anchor: usize,
    width: usize,
    beta: f64,
    kind: ThermalKind,
) -> Result<ThermalTarget> {
    match kind {
        ThermalKind::ReducedHamiltonianGibbs => reduced_gibbs_target(chain, anchor, width, beta),
        ThermalKind::ReducedGlobalGibbs => reduced_global_gibbs_target(spectra, anchor, width, beta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use crate::linalg::{commutator, partial_trace, trace_distance, C64};
    use crate::random::random_hermitian;
    use crate::rng::SplitMix64;

    /// Matrix exponential by scaling-and-squaring on a plain Taylor series;
    /// independent of the eigensolver.
    fn expm_taylor(a: &ComplexMatrix) -> ComplexMatrix {
        let squarings = (a.frobenius_norm().log2().ceil().max(0.0) as i32) + 1;
        let scaled = a.scale_re(0.5f64.powi(squarings));
        let mut term = ComplexMatrix::identity(a.rows);
        let mut sum = ComplexMatrix::identity(a.rows);
        for k in 1..30 {
            term = term.mul(&scaled).scale_re(1.0 / k as f64);
            sum = sum.add(&term);
        }
        for _ in 0..squarings {
            sum = sum.mul(&sum);
        }
        sum
    }

    #[test]
    fn infinite_temperature_is_maximally_mixed() {
        let h = random_hermitian(4, &mut SplitMix64::new(5));
        let tau = gibbs(&h, 0.0).unwrap();
        let uniform = ComplexMatrix::identity(4).scale_re(0.25);
        assert!(tau.matrix().max_abs_diff(&uniform) < 1e-12);
    }

    #[test]
    fn two_level_populations_follow_the_logistic_formula() {
        let h = HermitianOperator::from_diagonal(&[0.0, 1.0]);
        let tau = gibbs(&h, 3f64.ln()).unwrap();
        assert!((tau.get(0, 0).re - 0.75).abs() < 1e-15);
        assert!((tau.get(1, 1).re - 0.25).abs() < 1e-15);
        let p = gibbs_probabilities(&[0.0, 2.5], 1.3).unwrap();
        let expect = (-1.3 * 2.5f64).exp();
        assert!((p[1] / p[0] - expect).abs() < 1e-14);
        assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn deep_cold_limit_concentrates_on_the_ground_state() {
        let energies = [0.0, 0.5, 0.9, 1.3];
        let p = gibbs_probabilities(&energies, 50.0).unwrap();
        assert!(p[0] > 1.0 - 1e-8);
        // no overflow at extreme beta of either sign
        let cold = gibbs_probabilities(&energies, 1e6).unwrap();
        assert!((cold[0] - 1.0).abs() < 1e-15 && cold.iter().all(|x| x.is_finite()));
        let hot = gibbs_probabilities(&energies, -1e6).unwrap();
        assert!((hot[3] - 1.0).abs() < 1e-15 && hot.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn non_finite_beta_is_rejected_in_favor_of_projector_limits() {
        let h = HermitianOperator::from_diagonal(&[0.0, 0.0, 1.0, 2.0]);
        assert!(matches!(gibbs(&h, f64::INFINITY), Err(Error::NonFiniteBeta { .. })));
        assert!(matches!(gibbs(&h, f64::NAN), Err(Error::NonFiniteBeta { .. })));
        let spec = eig_hermitian(&h, None).unwrap();
        let ground = ground_projector_state(&spec).unwrap();
        let expected = ComplexMatrix::diagonal(&[0.5, 0.5, 0.0, 0.0]);
        assert!(ground.matrix().max_abs_diff(&expected) < 1e-14);
        let ceiling = ceiling_projector_state(&spec).unwrap();
        let expected = ComplexMatrix::diagonal(&[0.0, 0.0, 0.0, 1.0]);
        assert!(ceiling.matrix().max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn gibbs_commutes_with_its_hamiltonian() {
        let h = random_hermitian(5, &mut SplitMix64::new(9));
        let tau = gibbs(&h, 0.8).unwrap();
        let comm = commutator(tau.matrix(), &h);
        assert!(comm.max_abs_entry() < 1e-10);
    }

    #[test]
    fn gibbs_matches_an_independent_matrix_exponential() {
        let h = random_hermitian(4, &mut SplitMix64::new(21));
        let beta = 0.9;
        let tau = gibbs(&h, beta).unwrap();
        let exp = expm_taylor(&h.matrix().scale_re(-beta));
        let z = exp.trace().re;
        assert!(tau.matrix().max_abs_diff(&exp.scale_re(1.0 / z)) < 1e-10);
    }

    #[test]
    fn matched_beta_reproduces_the_maximally_mixed_energy() {
        let energies = [0.0, 0.3, 1.1, 2.4];
        let target = energies.iter().sum::<f64>() / 4.0;
        let beta = beta_for_mean_energy(&energies, target, 1e-10).unwrap();
        assert!(beta.abs() < 1e-6, "beta = {beta}");
    }

    #[test]
    fn matched_beta_inverts_the_two_level_logistic() {
        let energies = [0.0, 1.0];
        // mean energy = population of the excited level
        let target = 1.0 / (1.0 + std::f64::consts::E);
        let beta = beta_for_mean_energy(&energies, target, tol::BETA_TOL).unwrap();
        assert!((beta - 1.0).abs() < 1e-6, "beta = {beta}");
        // a 6-digit rounded target must agree with its own closed-form inverse
        let rounded = 0.268941;
        let beta = beta_for_mean_energy(&energies, rounded, tol::BETA_TOL).unwrap();
        let closed_form = ((1.0 - rounded) / rounded).ln();
        assert!((beta - closed_form).abs() < 1e-6);
        // states above the spectral midpoint report a negative temperature
        let hot_target = 1.0 - target;
        let beta = beta_for_mean_energy(&energies, hot_target, tol::BETA_TOL).unwrap();
        assert!((beta + 1.0).abs() < 1e-6, "beta = {beta}");
    }

    #[test]
    fn mean_energy_is_strictly_decreasing_in_beta() {
        let energies = [0.0, 0.4, 0.9, 2.0];
        let mut last = f64::INFINITY;
        for k in 0..40 {
            let beta = -3.0 + 6.0 * (k as f64) / 39.0;
            let e = mean_energy(&energies, beta).unwrap();
            assert!(e < last, "not decreasing at beta = {beta}");
            last = e;
        }
    }

    #[test]
    fn matched_beta_is_invariant_under_energy_shift() {
        let energies = [0.1, 0.5, 1.3, 2.2, 3.0];
        let target = 1.1;
        let beta = beta_for_mean_energy(&energies, target, tol::BETA_TOL).unwrap();
        let shifted: Vec<f64> = energies.iter().map(|e| e + 17.0).collect();
        let beta_shifted = beta_for_mean_energy(&shifted, target + 17.0, tol::BETA_TOL).unwrap();
        assert!((beta - beta_shifted).abs() < 1e-6);
    }

    #[test]
    fn matched_beta_rejects_out_of_range_targets() {
        let energies = [0.0, 1.0, 2.0];
        for bad in [2.0, 2.5, 0.0, -1.0] {
            assert!(matches!(
                beta_for_mean_energy(&energies, bad, 1e-8),
                Err(Error::EnergyOutOfRange { .. })
            ));
        }
    }

    #[test]
    fn match_beta_recovers_the_state_energy_on_an_operator() {
        let h = random_hermitian(6, &mut SplitMix64::new(33));
        let spec = eig_hermitian(&h, None).unwrap();
        // aim at the Gibbs energy of a known beta
        let target = mean_energy(&spec.eigenvalues, 1.4).unwrap();
        let mut amps = vec![C64::new(0.0, 0.0); 6];
        // build a state with that exact mean energy from two eigenvectors
        let (e0, e5) = (spec.eigenvalues[0], spec.eigenvalues[5]);
        let w = (target - e5) / (e0 - e5);
        for i in 0..6 {
            amps[i] = spec.eigenvectors.get(i, 0) * w.sqrt()
                + spec.eigenvectors.get(i, 5) * (1.0 - w).sqrt();
        }
        let psi = StateVector::new(amps);
        let beta = match_beta(&h, &psi, tol::BETA_TOL).unwrap();
        assert!((beta - 1.4).abs() < 1e-5, "beta = {beta}");
    }

    #[test]
    fn cold_populations_are_monotone_in_energy() {
        let energies = [0.0, 0.2, 0.7, 1.1, 2.9];
        let p = gibbs_probabilities(&energies, 1.7).unwrap();
        for k in 1..p.len() {
            assert!(p[k] <= p[k - 1]);
        }
    }

    #[test]
    fn both_target_kinds_coincide_without_crossing_terms() {
        // single-site terms only: the global Gibbs state factorizes, so its
        // window reduction equals the window's own Gibbs state
        let l = 4;
        let delta = 1.3;
        let hs = [0.4, -0.7, 0.9, 0.2];
        let dim = 1usize << l;
        let mut diag = vec![0.0; dim];
        for (s, d) in diag.iter_mut().enumerate() {
            for (i, h) in hs.iter().enumerate() {
                *d += delta * h * (1.0 - 2.0 * ((s >> i) & 1) as f64);
            }
        }
        let tau_v = gibbs(&HermitianOperator::from_diagonal(&diag), 0.6).unwrap();
        // window sites {1, 2} sit at kron slots {1, 2} of the 4-site chain
        let reduced = partial_trace(tau_v.matrix(), &[2, 2, 2, 2], &[1, 2]).unwrap();
        let mut win = vec![0.0; 4];
        for (s, d) in win.iter_mut().enumerate() {
            for i in 0..2 {
                *d += delta * hs[1 + i] * (1.0 - 2.0 * ((s >> i) & 1) as f64);
            }
        }
        let tau_r = gibbs(&HermitianOperator::from_diagonal(&win), 0.6).unwrap();
        assert!(reduced.max_abs_diff(tau_r.matrix()) < 1e-10);
    }

    #[test]
    fn full_window_of_an_open_chain_gives_identical_targets() {
        let chain = SpinChain::sample(4, 1.1, Boundary::Open, &mut SplitMix64::new(55)).unwrap();
        let spectra = chain.spectra().unwrap();
        let a = thermal_target(&chain, &spectra, 0, 4, 0.9, ThermalKind::ReducedHamiltonianGibbs)
            .unwrap();
        let b =
            thermal_target(&chain, &spectra, 0, 4, 0.9, ThermalKind::ReducedGlobalGibbs).unwrap();
        let dist = trace_distance(a.state.matrix(), b.state.matrix()).unwrap();
        assert!(dist < 1e-12, "dist = {dist}");
    }

    #[test]
    fn interacting_chain_targets_differ() {
        let chain =
            SpinChain::sample(6, 1.0, Boundary::Periodic, &mut SplitMix64::new(7)).unwrap();
        let spectra = chain.spectra().unwrap();
        let a = thermal_target(&chain, &spectra, 1, 3, 0.7, ThermalKind::ReducedHamiltonianGibbs)
            .unwrap();
        let b =
            thermal_target(&chain, &spectra, 1, 3, 0.7, ThermalKind::ReducedGlobalGibbs).unwrap();
        let dist = trace_distance(a.state.matrix(), b.state.matrix()).unwrap();
        assert!(dist > 1e-4, "boundary bonds should separate the kinds: {dist}");
    }
}
