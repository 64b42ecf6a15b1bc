//! Max-relative entropy, its smoothed variant, and the infinite-time-average
//! (dephased) equilibrium state feeding both.
//!
//! The unsmoothed divergence handles arbitrary pairs through the support of
//! sigma.  The smoothed one is restricted to commuting pairs, where clipping
//! the eigenvalue ratios and refilling the removed mass is provably optimal;
//! non-commuting inputs are rejected rather than approximated.

use crate::combinatorics::KahanSum;
use crate::error::{Error, Result};
use crate::lattice::{reduce_rank_one_into, EigRef, SectorSpectra, SpinChain};
use crate::linalg::{
    commutator, eig_hermitian, C64, ComplexMatrix, DensityMatrix, HermitianOperator, StateVector,
};
use crate::thermal::{thermal_target, ThermalKind};
use crate::tol;
use rayon::prelude::*;

/// A max-divergence value in bits, together with what achieved it.
#[derive(Debug, Clone)]
pub struct DmaxResult {
    /// log2 of the optimal 2^lambda dominating factor.
    pub value: f64,
    /// Smoothing radius used (0 for the unsmoothed divergence).
    pub epsilon: f64,
    /// The perturbed state achieving the smoothed value, when one exists.
    pub witness: Option<DensityMatrix>,
}

/// Where an equilibrium state came from, for run logs.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub realization: u64,
    pub initial_state: String,
}

/// Infinite-time average of |psi0><psi0| under the chain Hamiltonian, kept in
/// dephased form: one rank-one component per occupied degeneracy group.  The
/// full 2^L x 2^L matrix is only materialized on request.
#[derive(Debug, Clone)]
pub struct EquilibriumState {
    psi0: Vec<C64>,
    occupied: Vec<usize>,
    energy: f64,
    sites: usize,
    pub provenance: Option<Provenance>,
}

/// Dephase |psi0><psi0| across the energy degeneracy groups of the spectrum.
pub fn infinite_time_average(
    psi0: &StateVector,
    spectra: &SectorSpectra,
) -> Result<EquilibriumState> {
    if psi0.dim() != spectra.hilbert_dim() {
        return Err(Error::DimensionMismatch {
            left: psi0.dim(),
            right: spectra.hilbert_dim(),
            context: "initial state vs chain dimension",
        });
    }
    if (psi0.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "initial state must be normalized (norm {})",
            psi0.norm()
        )));
    }
    let mut occupied = Vec::new();
    let mut energy = KahanSum::new();
    for (g, range) in spectra.groups.iter().enumerate() {
        let mut group_weight = 0.0;
        for r in range.clone() {
            let EigRef { sector, index, energy: e } = spectra.merged[r];
            let sec = &spectra.sectors[sector];
            let mut amp = C64::new(0.0, 0.0);
            for (row, &s) in sec.basis.iter().enumerate() {
                amp += sec.spec.eigenvectors.get(row, index).conj() * psi0.0[s];
            }
            let w = amp.norm_sqr();
            group_weight += w;
            energy.add(w * e);
        }
        if group_weight > 0.0 {
            occupied.push(g);
        }
    }
    Ok(EquilibriumState {
        psi0: psi0.0.clone(),
        occupied,
        energy: energy.value(),
        sites: spectra.sites,
        provenance: None,
    })
}

impl EquilibriumState {
    /// Conserved mean energy <psi0|H|psi0>.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn with_provenance(mut self, realization: u64, initial_state: &str) -> Self {
        self.provenance = Some(Provenance {
            realization,
            initial_state: initial_state.to_string(),
        });
        self
    }

    /// Full 2^L x 2^L equilibrium matrix; small chains and tests only.
    pub fn dense(&self, spectra: &SectorSpectra) -> Result<DensityMatrix> {
        let dim = 1usize << self.sites;
        let bytes = dim * dim * std::mem::size_of::<C64>();
        if bytes > tol::DENSE_BUDGET_BYTES {
            return Err(Error::MemoryBudget {
                required_bytes: bytes,
                budget_bytes: tol::DENSE_BUDGET_BYTES,
            });
        }
        let mut rho = ComplexMatrix::zeros(dim, dim);
        for &g in &self.occupied {
            let comp = spectra.project_onto_group(g, &self.psi0);
            for i in 0..dim {
                if comp[i].norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..dim {
                    rho.data[i * dim + j] += comp[i] * comp[j].conj();
                }
            }
        }
        DensityMatrix::new(rho)
    }

    /// omega_R = Tr over everything outside [anchor, anchor+width), built one
    /// rank-one group component at a time; O(4^width + 2^L) working memory.
    pub fn reduce(
        &self,
        spectra: &SectorSpectra,
        anchor: usize,
        width: usize,
    ) -> Result<DensityMatrix> {
        let dim = 1usize << width;
        let mut acc = ComplexMatrix::zeros(dim, dim);
        for &g in &self.occupied {
            let comp = spectra.project_onto_group(g, &self.psi0);
            reduce_rank_one_into(&mut acc, &comp, self.sites, anchor, width, 1.0)?;
        }
        DensityMatrix::new(acc)
    }
}

/// Free-function form of [`EquilibriumState::reduce`].
pub fn reduce_equilibrium(
    eq: &EquilibriumState,
    spectra: &SectorSpectra,
    anchor: usize,
    width: usize,
) -> Result<DensityMatrix> {
    eq.reduce(spectra, anchor, width)
}

/// One application of the dephasing channel rho -> sum_g P_g rho P_g over the
/// spectrum's degeneracy groups.  Dense; small chains only.
pub fn dephase_matrix(spectra: &SectorSpectra, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let dim = spectra.hilbert_dim();
    if rho.rows != dim || rho.cols != dim {
        return Err(Error::DimensionMismatch {
            left: rho.rows,
            right: dim,
            context: "state vs chain dimension in dephasing",
        });
    }
    let mut out = ComplexMatrix::zeros(dim, dim);
    for range in &spectra.groups {
        let members: Vec<Vec<C64>> = range
            .clone()
            .map(|r| {
                let EigRef { sector, index, .. } = spectra.merged[r];
                spectra.eigenvector_global(sector, index)
            })
            .collect();
        // m[k][k'] = <v_k| rho |v_k'>
        for vk in &members {
            let rho_vk: Vec<C64> = {
                // rho |v_k'> reused across k, so compute <v_k| rho first
                let mut row = vec![C64::new(0.0, 0.0); dim];
                for i in 0..dim {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..dim {
                        acc += vk[j].conj() * rho.data[j * dim + i];
                    }
                    row[i] = acc;
                }
                row
            };
            for vkp in &members {
                let mut elem = C64::new(0.0, 0.0);
                for i in 0..dim {
                    elem += rho_vk[i] * vkp[i];
                }
                for i in 0..dim {
                    if vk[i].norm_sqr() == 0.0 && elem.norm_sqr() == 0.0 {
                        continue;
                    }
                    let left = vk[i] * elem;
                    for j in 0..dim {
                        out.data[i * dim + j] += left * vkp[j].conj();
                    }
                }
            }
        }
    }
    Ok(out)
}

/// D_max(rho || sigma) = log2 lambda_max(sigma^{-1/2} rho sigma^{-1/2}),
/// computed on sigma's support.  Sigma eigenvalues below the support
/// truncation threshold count as zero; rho may leak at most RHO_LEAKAGE
/// outside the retained support.
pub fn dmax(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<DmaxResult> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
            context: "rho vs sigma dimension",
        });
    }
    let spec = eig_hermitian(sigma.operator(), None)?;
    let d = spec.dim();
    let retained: Vec<usize> = (0..d)
        .filter(|&i| spec.eigenvalues[i] >= tol::SUPPORT_TRUNCATION)
        .collect();
    let mut leaked = 0.0;
    for i in 0..d {
        if spec.eigenvalues[i] < tol::SUPPORT_TRUNCATION {
            let v = spec.eigenvector(i);
            let rv = rho.matvec(&v);
            leaked += v.iter().zip(&rv).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        }
    }
    if leaked > tol::RHO_LEAKAGE {
        return Err(Error::SupportViolation {
            leaked_mass: leaked,
            tolerance: tol::RHO_LEAKAGE,
        });
    }
    let r = retained.len();
    let mut w = ComplexMatrix::zeros(d, r);
    for (col, &i) in retained.iter().enumerate() {
        let scale = 1.0 / spec.eigenvalues[i].sqrt();
        for row in 0..d {
            w.set(row, col, spec.eigenvectors.get(row, i) * scale);
        }
    }
    let m = w.dagger().mul(rho.matrix()).mul(&w);
    let mspec = eig_hermitian(&HermitianOperator::new(m)?, None)?;
    let top = *mspec.eigenvalues.last().unwrap();
    Ok(DmaxResult {
        value: top.log2(),
        epsilon: 0.0,
        witness: None,
    })
}

fn validate_distribution(v: &[f64]) -> Result<()> {
    let mut sum = KahanSum::new();
    for x in v {
        if !x.is_finite() || *x < -tol::PROB_SUM {
            return Err(Error::BadProbabilities {
                sum: *x,
                tolerance: tol::PROB_SUM,
            });
        }
        sum.add(*x);
    }
    let sum = sum.value();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadProbabilities {
            sum,
            tolerance: 1e-9,
        });
    }
    Ok(())
}

/// Classical D_max: max over sigma's support of log2(p_i / q_i).
pub fn dmax_diagonal(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
            context: "p vs q length",
        });
    }
    validate_distribution(p)?;
    validate_distribution(q)?;
    let mut leaked = 0.0;
    let mut top = f64::NEG_INFINITY;
    for (pi, qi) in p.iter().zip(q) {
        if *qi < tol::SUPPORT_TRUNCATION {
            leaked += pi.max(0.0);
        } else {
            top = top.max(pi / qi);
        }
    }
    if leaked > tol::RHO_LEAKAGE {
        return Err(Error::SupportViolation {
            leaked_mass: leaked,
            tolerance: tol::RHO_LEAKAGE,
        });
    }
    Ok(top.log2())
}

/// Smallest feasible lambda and the perturbed distribution achieving it.
///
/// Feasibility of lambda means the mass that must be clipped off above the
/// caps 2^lambda q_i fits in the half-ball budget eps/2; the removed mass is
/// refilled proportionally to the remaining headroom, which keeps the witness
/// normalized, under the caps, and within trace distance eps of p.
fn smooth_diagonal_core(p: &[f64], q: &[f64], epsilon: f64) -> Result<(f64, Vec<f64>)> {
    let budget = 0.5 * epsilon;
    let unremovable: f64 = p
        .iter()
        .zip(q)
        .filter(|(_, qi)| **qi < tol::SUPPORT_TRUNCATION)
        .map(|(pi, _)| pi.max(0.0))
        .sum();
    if unremovable > budget {
        return Err(Error::SmoothingInfeasible {
            unremovable,
            budget,
        });
    }
    let cap_at = |lambda: f64| -> Vec<f64> {
        let scale = 2f64.powf(lambda);
        q.iter()
            .map(|qi| {
                if *qi < tol::SUPPORT_TRUNCATION {
                    0.0
                } else {
                    scale * qi
                }
            })
            .collect()
    };
    let mass = |lambda: f64| -> f64 {
        let caps = cap_at(lambda);
        let mut m = KahanSum::new();
        for (pi, cap) in p.iter().zip(&caps) {
            m.add((pi - cap).max(0.0));
        }
        m.value()
    };
    // The unsmoothed value is always feasible once the support check passed;
    // lambda < 0 never is, because the caps would sum below 1.
    let mut hi = {
        let mut top = 0f64;
        for (pi, qi) in p.iter().zip(q) {
            if *qi >= tol::SUPPORT_TRUNCATION {
                top = top.max(pi / qi);
            }
        }
        top.log2().max(0.0)
    };
    let mut lo = 0.0;
    if mass(0.0) <= budget {
        hi = 0.0;
    }
    while hi - lo > tol::SMOOTH_LAMBDA {
        let mid = 0.5 * (lo + hi);
        if mass(mid) <= budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let lambda = hi;
    let caps = cap_at(lambda);
    let mut tilde: Vec<f64> = p.iter().zip(&caps).map(|(pi, c)| pi.min(*c).max(0.0)).collect();
    let mut kept = KahanSum::new();
    for t in &tilde {
        kept.add(*t);
    }
    let removed = 1.0 - kept.value();
    if removed > 0.0 {
        let headroom: Vec<f64> = tilde.iter().zip(&caps).map(|(t, c)| c - t).collect();
        let total: f64 = headroom.iter().sum();
        for (t, h) in tilde.iter_mut().zip(&headroom) {
            *t += removed * h / total;
        }
    }
    Ok((lambda, tilde))
}

/// Classical smooth D_max over the trace-norm ball of radius epsilon,
/// together with the achieving distribution.
pub fn dmax_smooth_diagonal(p: &[f64], q: &[f64], epsilon: f64) -> Result<(f64, Vec<f64>)> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::BadEpsilon { epsilon });
    }
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: q.len(),
            context: "p vs q length",
        });
    }
    validate_distribution(p)?;
    validate_distribution(q)?;
    if epsilon == 0.0 {
        return Ok((dmax_diagonal(p, q)?, p.to_vec()));
    }
    smooth_diagonal_core(p, q, epsilon)
}

/// Shared eigen-data for a commuting pair: an orthonormal basis (columns)
/// diagonalizing both states, rho's eigenvalues p (clamped at 0), and sigma's
/// eigenvalues q, aligned by column.  Rejects measurably non-commuting pairs.
pub(crate) fn commuting_spectra(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
) -> Result<(ComplexMatrix, Vec<f64>, Vec<f64>)> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
            context: "rho vs sigma dimension",
        });
    }
    let residual = commutator(rho.matrix(), sigma.matrix()).max_abs_entry();
    if residual > tol::COMMUTATION {
        return Err(Error::NonCommuting {
            residual,
            tolerance: tol::COMMUTATION,
        });
    }
    let sspec = eig_hermitian(sigma.operator(), None)?;
    let d = sspec.dim();
    let u = &sspec.eigenvectors;
    let rho_rot = u.dagger().mul(rho.matrix()).mul(u);
    // joint eigenbasis: rho restricted to each sigma eigenspace
    let mut basis = ComplexMatrix::zeros(d, d);
    let mut p = vec![0.0; d];
    let mut q = vec![0.0; d];
    let mut col = 0usize;
    for range in &sspec.groups {
        let glen = range.len();
        let mut block = ComplexMatrix::zeros(glen, glen);
        for (a, i) in range.clone().enumerate() {
            for (b, j) in range.clone().enumerate() {
                block.set(a, b, rho_rot.get(i, j));
            }
        }
        let bspec = eig_hermitian(&HermitianOperator::new(block)?, None)?;
        for k in 0..glen {
            p[col] = bspec.eigenvalues[k].max(0.0);
            q[col] = sspec.eigenvalues[range.start + k];
            for row in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for (a, i) in range.clone().enumerate() {
                    acc += u.get(row, i) * bspec.eigenvectors.get(a, k);
                }
                basis.set(row, col, acc);
            }
            col += 1;
        }
    }
    Ok((basis, p, q))
}

/// Smooth D_max for commuting pairs: block-diagonalize rho inside sigma's
/// eigenspaces, smooth the joint spectrum classically, and rebuild the
/// witness in the joint eigenbasis.
pub fn dmax_smooth(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
    epsilon: f64,
) -> Result<DmaxResult> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::BadEpsilon { epsilon });
    }
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
            context: "rho vs sigma dimension",
        });
    }
    if epsilon == 0.0 {
        let mut result = dmax(rho, sigma)?;
        result.witness = Some(rho.clone());
        return Ok(result);
    }
    let (basis, p, q) = commuting_spectra(rho, sigma)?;
    let (lambda, tilde) = smooth_diagonal_core(&p, &q, epsilon)?;
    let witness = basis
        .mul(&ComplexMatrix::diagonal(&tilde))
        .mul(&basis.dagger());
    Ok(DmaxResult {
        value: lambda,
        epsilon,
        witness: Some(DensityMatrix::new(witness)?),
    })
}

/// Smoothed divergence, in bits, of the target-eigenbasis pinching of
/// omega_R against the thermal target, at smoothing radius epsilon.
///
/// The smoothed divergence is defined here only for commuting pairs, and
/// omega_R generically fails to commute with the target.  Pinching repairs
/// that: it fixes the target and, being a channel fixing the target, never
/// increases the smoothed divergence, so 2^(returned value) still
/// lower-bounds the bath size any elastic channel needs.
pub fn pinched_smooth_floor(
    chain: &SpinChain,
    spectra: &SectorSpectra,
    eq: &EquilibriumState,
    beta: f64,
    width: usize,
    kind: ThermalKind,
    anchor: usize,
    epsilon: f64,
) -> Result<f64> {
    let omega_r = eq.reduce(spectra, anchor, width)?;
    let target = thermal_target(chain, spectra, anchor, width, beta, kind)?;
    let spec = eig_hermitian(target.state.operator(), None)?;
    let d = spec.dim();
    let mut p = Vec::with_capacity(d);
    for k in 0..d {
        let v = spec.eigenvector(k);
        let w = omega_r.matrix().matvec(&v);
        let diag: C64 = v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
        p.push(diag.re.max(0.0));
    }
    let total: f64 = p.iter().sum();
    for x in &mut p {
        *x /= total;
    }
    let q: Vec<f64> = spec.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    Ok(dmax_smooth_diagonal(&p, &q, epsilon)?.0)
}

/// D_max(omega_R || target) for each region size, left-anchored at `anchor`.
/// Failures are recorded per point rather than aborting the curve; points
/// come back sorted by width.
pub fn dmax_region_curve(
    chain: &SpinChain,
    spectra: &SectorSpectra,
    eq: &EquilibriumState,
    beta: f64,
    sizes: &[usize],
    kind: ThermalKind,
    anchor: usize,
) -> Vec<(usize, Result<DmaxResult>)> {
    let mut points: Vec<(usize, Result<DmaxResult>)> = sizes
        .par_iter()
        .map(|&width| {
            let point = (|| {
                if width == 0 || width >= chain.sites() {
                    return Err(Error::BadRegion {
                        anchor,
                        end: anchor + width,
                        l: chain.sites(),
                    });
                }
                let omega_r = eq.reduce(spectra, anchor, width)?;
                let target = thermal_target(chain, spectra, anchor, width, beta, kind)?;
                dmax(&omega_r, &target.state)
            })();
            (width, point)
        })
        .collect();
    points.sort_by_key(|(w, _)| *w);
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{neel_variant_state, Boundary};
    use crate::linalg::{partial_trace, trace_distance, trace_norm};
    use crate::random::{random_density, random_probabilities, random_unitary};
    use crate::rng::SplitMix64;
    use crate::thermal::{beta_for_mean_energy, expected_energy};

    fn chain_and_spectra(l: usize, delta: f64, seed: u64) -> (SpinChain, SectorSpectra) {
        let chain =
            SpinChain::sample(l, delta, Boundary::Periodic, &mut SplitMix64::new(seed)).unwrap();
        let spectra = chain.spectra().unwrap();
        (chain, spectra)
    }

    #[test]
    fn eigenvectors_are_stationary_under_time_averaging() {
        let (_, spectra) = chain_and_spectra(3, 0.9, 2);
        let psi = StateVector::new(spectra.eigenvector_global(1, 0));
        let eq = infinite_time_average(&psi, &spectra).unwrap();
        let omega = eq.dense(&spectra).unwrap();
        assert!(omega.matrix().max_abs_diff(&psi.outer()) < 1e-12);
    }

    #[test]
    fn superpositions_dephase_into_eigenvector_mixtures() {
        let (_, spectra) = chain_and_spectra(3, 0.9, 2);
        let v1 = spectra.eigenvector_global(1, 0);
        let v2 = spectra.eigenvector_global(2, 1);
        let amps: Vec<C64> = v1
            .iter()
            .zip(&v2)
            .map(|(a, b)| (a + b) * (0.5f64.sqrt()))
            .collect();
        let eq = infinite_time_average(&StateVector::new(amps), &spectra).unwrap();
        let omega = eq.dense(&spectra).unwrap();
        let mut expected = ComplexMatrix::zeros(8, 8);
        for v in [&v1, &v2] {
            for i in 0..8 {
                for j in 0..8 {
                    expected.data[i * 8 + j] += v[i] * v[j].conj() * 0.5;
                }
            }
        }
        assert!(omega.matrix().max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn dephasing_is_idempotent() {
        let (_, spectra) = chain_and_spectra(4, 1.2, 13);
        let psi = neel_variant_state(4).unwrap();
        let once = dephase_matrix(&spectra, &psi.outer()).unwrap();
        let twice = dephase_matrix(&spectra, &once).unwrap();
        let drift = trace_norm(&twice.sub(&once)).unwrap();
        assert!(drift < 1e-12, "drift = {drift}");
        // and the vector-based equilibrium agrees with the matrix channel
        let eq = infinite_time_average(&psi, &spectra).unwrap();
        assert!(eq.dense(&spectra).unwrap().matrix().max_abs_diff(&once) < 1e-12);
    }

    #[test]
    fn equilibrium_preserves_energy_and_commutes() {
        let (chain, spectra) = chain_and_spectra(4, 0.7, 29);
        let psi = neel_variant_state(4).unwrap();
        let eq = infinite_time_average(&psi, &spectra).unwrap();
        let h = chain.dense_hamiltonian().unwrap();
        let target = expected_energy(&h, &psi);
        assert!((eq.energy() - target).abs() < 1e-9);
        let omega = eq.dense(&spectra).unwrap();
        let trace_e = omega.matrix().mul(&h).trace().re;
        assert!((trace_e - target).abs() < 1e-9);
        let comm = commutator(omega.matrix(), &h);
        assert!(comm.frobenius_norm() < 1e-9 * h.frobenius_norm());
    }

    #[test]
    fn reduced_equilibrium_matches_the_dense_partial_trace() {
        let (_, spectra) = chain_and_spectra(6, 1.5, 37);
        let psi = neel_variant_state(6).unwrap();
        let eq = infinite_time_average(&psi, &spectra).unwrap();
        let omega = eq.dense(&spectra).unwrap();
        for (anchor, width) in [(0usize, 3usize), (2, 2), (1, 4)] {
            let reduced = eq.reduce(&spectra, anchor, width).unwrap();
            let keep: Vec<usize> = (6 - anchor - width..6 - anchor).collect();
            let oracle = partial_trace(omega.matrix(), &[2; 6], &keep).unwrap();
            assert!(
                reduced.matrix().max_abs_diff(&oracle) < 1e-11,
                "anchor {anchor} width {width}"
            );
            assert!((reduced.matrix().trace().re - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn full_window_reduction_returns_the_equilibrium_itself() {
        let (_, spectra) = chain_and_spectra(4, 0.8, 51);
        let psi = neel_variant_state(4).unwrap();
        let eq = infinite_time_average(&psi, &spectra).unwrap();
        let full = eq.reduce(&spectra, 0, 4).unwrap();
        let omega = eq.dense(&spectra).unwrap();
        assert!(full.matrix().max_abs_diff(omega.matrix()) < 1e-12);
    }

    #[test]
    fn dmax_of_a_state_with_itself_is_zero() {
        let rho = random_density(4, &mut SplitMix64::new(3));
        let result = dmax(&rho, &rho).unwrap();
        assert!(result.value.abs() < 1e-9, "value = {}", result.value);
    }

    #[test]
    fn pure_state_against_maximally_mixed_is_one_bit() {
        let rho = DensityMatrix::pure(&StateVector::basis(2, 0));
        let sigma = DensityMatrix::maximally_mixed(2);
        let result = dmax(&rho, &sigma).unwrap();
        assert!((result.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn commuting_pair_value_is_the_top_log_ratio() {
        let rho = DensityMatrix::from_probabilities(&[0.75, 0.25]).unwrap();
        let sigma = DensityMatrix::maximally_mixed(2);
        let result = dmax(&rho, &sigma).unwrap();
        assert!((result.value - 1.5f64.log2()).abs() < 1e-12);
        assert!((dmax_diagonal(&[0.75, 0.25], &[0.5, 0.5]).unwrap() - 1.5f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn support_violations_are_reported_with_the_leaked_mass() {
        let rho = DensityMatrix::maximally_mixed(2);
        let sigma = DensityMatrix::pure(&StateVector::basis(2, 0));
        match dmax(&rho, &sigma) {
            Err(Error::SupportViolation { leaked_mass, .. }) => {
                assert!((leaked_mass - 0.5).abs() < 1e-12);
            }
            other => panic!("expected support violation, got {other:?}"),
        }
        // matching supports are fine even when both are rank-deficient
        let pure = DensityMatrix::pure(&StateVector::basis(2, 0));
        let same = dmax(&pure, &pure).unwrap();
        assert!(same.value.abs() < 1e-9);
    }

    #[test]
    fn dmax_is_nonnegative_and_detects_difference() {
        let mut rng = SplitMix64::new(71);
        for _ in 0..20 {
            let rho = random_density(3, &mut rng);
            let sigma = random_density(3, &mut rng);
            let v = dmax(&rho, &sigma).unwrap().value;
            assert!(v > -1e-9);
            if trace_distance(rho.matrix(), sigma.matrix()).unwrap() > 0.01 {
                assert!(v > 1e-6);
            }
        }
    }

    #[test]
    fn dmax_never_grows_under_partial_trace() {
        let mut rng = SplitMix64::new(101);
        for round in 0..10 {
            let rho = random_density(4, &mut rng);
            let sigma = random_density(4, &mut rng);
            let whole = dmax(&rho, &sigma).unwrap().value;
            let rho_a = DensityMatrix::new(partial_trace(rho.matrix(), &[2, 2], &[0]).unwrap())
                .unwrap();
            let sigma_a = DensityMatrix::new(partial_trace(sigma.matrix(), &[2, 2], &[0]).unwrap())
                .unwrap();
            let part = dmax(&rho_a, &sigma_a).unwrap().value;
            assert!(part <= whole + 1e-9, "round {round}: {part} > {whole}");
        }
    }

    #[test]
    fn zero_smoothing_collapses_to_the_plain_divergence() {
        let p = [0.6, 0.3, 0.1];
        let q = [0.2, 0.5, 0.3];
        let (v, witness) = dmax_smooth_diagonal(&p, &q, 0.0).unwrap();
        assert!((v - dmax_diagonal(&p, &q).unwrap()).abs() < 1e-15);
        assert_eq!(witness, p.to_vec());
        let rho = DensityMatrix::from_probabilities(&p).unwrap();
        let sigma = DensityMatrix::from_probabilities(&q).unwrap();
        let result = dmax_smooth(&rho, &sigma, 0.0).unwrap();
        assert!((result.value - v).abs() < 1e-12);
    }

    #[test]
    fn smoothing_a_pure_state_against_maximally_mixed() {
        let rho = DensityMatrix::from_probabilities(&[1.0, 0.0]).unwrap();
        let sigma = DensityMatrix::maximally_mixed(2);
        let result = dmax_smooth(&rho, &sigma, 0.5).unwrap();
        assert!((result.value - 1.5f64.log2()).abs() < 1e-9);
        let witness = result.witness.unwrap();
        let expected = ComplexMatrix::diagonal(&[0.75, 0.25]);
        assert!(witness.matrix().max_abs_diff(&expected) < 1e-9);
    }

    #[test]
    fn smoothed_value_is_monotone_in_epsilon() {
        let mut rng = SplitMix64::new(43);
        for _ in 0..10 {
            let p = random_probabilities(3, &mut rng);
            let q = random_probabilities(3, &mut rng);
            let mut last = f64::INFINITY;
            for eps in [0.0, 0.05, 0.1, 0.2, 0.4, 0.8] {
                let (v, _) = dmax_smooth_diagonal(&p, &q, eps).unwrap();
                assert!(v <= last + 1e-12, "eps {eps}: {v} > {last}");
                last = v;
            }
        }
    }

    #[test]
    fn smooth_witness_stays_in_the_ball_and_under_the_cap() {
        let mut rng = SplitMix64::new(97);
        for _ in 0..10 {
            let p = random_probabilities(4, &mut rng);
            let q = random_probabilities(4, &mut rng);
            let u = random_unitary(4, &mut rng);
            let rotate = |d: &[f64]| {
                DensityMatrix::new(
                    u.mul(&ComplexMatrix::diagonal(d)).mul(&u.dagger()),
                )
                .unwrap()
            };
            let rho = rotate(&p);
            let sigma = rotate(&q);
            let eps = 0.3;
            let result = dmax_smooth(&rho, &sigma, eps).unwrap();
            let witness = result.witness.unwrap();
            let dist = trace_norm(&witness.matrix().sub(rho.matrix())).unwrap();
            assert!(dist <= eps + 1e-12, "ball violated: {dist}");
            // operator check: 2^lambda sigma - witness is positive
            let gap = sigma
                .matrix()
                .scale_re(2f64.powf(result.value))
                .sub(witness.matrix());
            let gap = gap.add(&gap.dagger()).scale_re(0.5);
            let spec = eig_hermitian(&HermitianOperator::new(gap).unwrap(), None).unwrap();
            assert!(spec.eigenvalues[0] > -1e-9, "cap violated: {}", spec.eigenvalues[0]);
            // and it never exceeds the unsmoothed value
            assert!(result.value <= dmax(&rho, &sigma).unwrap().value + 1e-9);
        }
    }

    #[test]
    fn smoothing_rejects_noncommuting_pairs() {
        let plus = StateVector::new(vec![
            C64::new(0.5f64.sqrt(), 0.0),
            C64::new(0.5f64.sqrt(), 0.0),
        ]);
        let rho = DensityMatrix::pure(&plus);
        let sigma = DensityMatrix::from_probabilities(&[0.7, 0.3]).unwrap();
        assert!(matches!(
            dmax_smooth(&rho, &sigma, 0.1),
            Err(Error::NonCommuting { .. })
        ));
    }

    #[test]
    fn smoothing_rejects_impossible_support_repairs() {
        // a third of the mass sits outside sigma's support; eps/2 = 0.1 < 1/3
        let p = [0.5, 1.0 / 6.0, 1.0 / 3.0];
        let q = [0.7, 0.3, 0.0];
        assert!(matches!(
            dmax_smooth_diagonal(&p, &q, 0.2),
            Err(Error::SmoothingInfeasible { .. })
        ));
        // but a large enough ball repairs the support
        let (v, witness) = dmax_smooth_diagonal(&p, &q, 0.7).unwrap();
        assert!(v.is_finite());
        assert!(witness[2].abs() < 1e-15);
        let moved: f64 = witness.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        assert!(moved <= 0.7 + 1e-12);
    }

    #[test]
    fn smooth_value_matches_a_grid_search() {
        // brute force: scan the qubit simplex for the best clipped state
        let p = [0.8, 0.2];
        let q = [0.6, 0.4];
        let eps = 0.2;
        let mut best = f64::INFINITY;
        let steps = 2000usize;
        for k in 0..=steps {
            let a = k as f64 / steps as f64;
            let cand = [a, 1.0 - a];
            let dist: f64 = cand.iter().zip(&p).map(|(x, y)| (x - y).abs()).sum();
            if dist <= eps {
                let v = (cand[0] / q[0]).max(cand[1] / q[1]).log2();
                best = best.min(v);
            }
        }
        let (v, _) = dmax_smooth_diagonal(&p, &q, eps).unwrap();
        assert!((v - best).abs() < 2e-3, "bisection {v} vs grid {best}");
    }

    #[test]
    fn pinched_floor_shrinks_with_radius_and_respects_data_processing() {
        let (chain, spectra) = chain_and_spectra(6, 3.0, 21);
        let psi = neel_variant_state(6).unwrap();
        let eq = infinite_time_average(&psi, &spectra).unwrap();
        let beta =
            beta_for_mean_energy(&spectra.energies(), eq.energy(), tol::BETA_TOL).unwrap();
        for kind in [ThermalKind::ReducedHamiltonianGibbs, ThermalKind::ReducedGlobalGibbs] {
            let floor = |radius: f64| {
                pinched_smooth_floor(&chain, &spectra, &eq, beta, 2, kind, 0, radius).unwrap()
            };
            let tight = floor(0.2);
            let wide = floor(0.6);
            assert!(tight >= wide, "larger ball must not raise the optimum");
            assert!(wide >= 0.0);
            // pinching is a channel fixing the target, smoothing only helps:
            // the floor sits below the raw divergence of the unpinched pair
            let omega_r = eq.reduce(&spectra, 0, 2).unwrap();
            let target = thermal_target(&chain, &spectra, 0, 2, beta, kind).unwrap();
            let raw = dmax(&omega_r, &target.state).unwrap().value;
            assert!(
                tight <= raw + 1e-12,
                "floor {tight} above the unpinched divergence {raw}"
            );
        }
    }

    #[test]
    fn region_curve_is_deterministic_and_complete() {
        let (chain, spectra) = chain_and_spectra(6, 2.0, 77);
        let psi = neel_variant_state(6).unwrap();
        let eq = infinite_time_average(&psi, &spectra).unwrap();
        let beta =
            beta_for_mean_energy(&spectra.energies(), eq.energy(), tol::BETA_TOL).unwrap();
        let sizes = [1usize, 2, 3, 4, 5];
        let run = |_: ()| {
            dmax_region_curve(
                &chain,
                &spectra,
                &eq,
                beta,
                &sizes,
                ThermalKind::ReducedHamiltonianGibbs,
                0,
            )
        };
        let a = run(());
        let b = run(());
        assert_eq!(a.len(), 5);
        for ((wa, ra), (wb, rb)) in a.iter().zip(&b) {
            assert_eq!(wa, wb);
            let (va, vb) = (ra.as_ref().unwrap().value, rb.as_ref().unwrap().value);
            assert_eq!(va, vb, "width {wa} differs between runs");
            assert!(va.is_finite() && va > -1e-9);
        }
        // oversized regions are recorded as failures, not panics
        let bad = dmax_region_curve(
            &chain,
            &spectra,
            &eq,
            beta,
            &[6],
            ThermalKind::ReducedHamiltonianGibbs,
            0,
        );
        assert!(bad[0].1.is_err());
    }
}
