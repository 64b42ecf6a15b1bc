//! Collision-model dynamics: elastic random unitary channels, the Poisson
//! series solving the piecewise-collision master equation, stochastic
//! trajectory sampling, and the bath-size scan built on top of them.
//!
//! A collision process applies unitaries U_k at independent Poisson rates
//! λ_k, each commuting with the total (noninteracting) Hamiltonian, so
//! dρ/dt = Σ_k λ_k (U_k ρ U_k† − ρ).  The solution is a Poisson-weighted
//! power series in the rate-mixed channel Λ = Σ_k (λ_k/λ̄) U_k·U_k†, which
//! is what `evolve_series` sums with a certified truncation.  The uniform
//! swap channel that spreads a region state over n identical bath copies is
//! a special case; its output is the position-averaged split state, and the
//! scan over n records when that output falls ε-close to thermal.

use crate::combinatorics::{compositions, count_compositions, KahanSum, LnFactorials};
use crate::entropy;
use crate::error::{Error, Result};
use crate::linalg::{
    commutator, eig_hermitian, kron_list, kron_with_cap, trace_norm, C64, ComplexMatrix,
    DensityMatrix, HermitianOperator,
};
use crate::optimality::{check_esc, iid_class_weight, split_class_weight};
use crate::rng::{derive_seed, SplitMix64};
use crate::tol;
use rayon::prelude::*;

/// Trajectories are accumulated in fixed-size chunks so the reduction order
/// is independent of the worker count.
const TRAJECTORY_CHUNK: usize = 256;
/// Subsystem counts a full permutation average is willing to enumerate (8!
/// terms at most).
const MAX_SYMMETRIZE_PARTIES: usize = 8;

/// Mixture of unitaries Σ_k p_k U_k ρ U_k† acting on one fixed dimension.
#[derive(Debug, Clone)]
pub struct RandomUnitaryChannel {
    pairs: Vec<(f64, ComplexMatrix)>,
    dim: usize,
}

impl RandomUnitaryChannel {
    pub fn new(pairs: Vec<(f64, ComplexMatrix)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Config("a random unitary channel needs at least one unitary".into()));
        }
        let dim = pairs[0].1.rows;
        let mut sum = KahanSum::new();
        for (w, u) in &pairs {
            if !u.is_square() || u.rows != dim {
                return Err(Error::DimensionMismatch {
                    left: u.rows,
                    right: dim,
                    context: "channel unitaries must share one square dimension",
                });
            }
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(Error::BadProbabilities {
                    sum: *w,
                    tolerance: tol::PROB_SUM,
                });
            }
            sum.add(*w);
            let residual = u.mul(&u.dagger()).sub(&ComplexMatrix::identity(dim)).max_abs_entry();
            if residual > tol::UNITARITY {
                return Err(Error::NotUnitary {
                    residual,
                    tolerance: tol::UNITARITY,
                });
            }
        }
        if (sum.value() - 1.0).abs() > tol::PROB_SUM {
            return Err(Error::BadProbabilities {
                sum: sum.value(),
                tolerance: tol::PROB_SUM,
            });
        }
        Ok(RandomUnitaryChannel { pairs, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(f64, ComplexMatrix)] {
        &self.pairs
    }

    pub fn apply_matrix(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for (w, u) in &self.pairs {
            let conj = u.mul(rho).mul(&u.dagger());
            out.add_assign_scaled(&conj, C64::new(*w, 0.0));
        }
        out
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                left: rho.dim(),
                right: self.dim,
                context: "state vs channel dimension",
            });
        }
        DensityMatrix::new(self.apply_matrix(rho.matrix()))
    }

    /// Channel applying `inner` first, then `self`.
    pub fn compose(&self, inner: &RandomUnitaryChannel) -> Result<RandomUnitaryChannel> {
        if self.dim != inner.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: inner.dim,
                context: "composed channel dimensions",
            });
        }
        let mut pairs = Vec::with_capacity(self.pairs.len() * inner.pairs.len());
        for (p, u) in &self.pairs {
            for (q, v) in &inner.pairs {
                pairs.push((p * q, u.mul(v)));
            }
        }
        RandomUnitaryChannel::new(pairs)
    }

    /// Convex combination w·self + (1-w)·other.
    pub fn mix(&self, other: &RandomUnitaryChannel, w: f64) -> Result<RandomUnitaryChannel> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
                context: "mixed channel dimensions",
            });
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Config(format!("mixing weight {w} outside [0, 1]")));
        }
        let mut pairs = Vec::with_capacity(self.pairs.len() + other.pairs.len());
        for (p, u) in &self.pairs {
            pairs.push((w * p, u.clone()));
        }
        for (p, u) in &other.pairs {
            pairs.push(((1.0 - w) * p, u.clone()));
        }
        RandomUnitaryChannel::new(pairs)
    }

    /// Largest Frobenius norm of [U_k, H] over the mixture; callers compare
    /// it against a tolerance scaled by ‖H‖_F.
    pub fn energy_preservation_residual(&self, h: &HermitianOperator) -> f64 {
        self.pairs
            .iter()
            .map(|(_, u)| commutator(u, h.matrix()).frobenius_norm())
            .fold(0.0, f64::max)
    }
}

fn product_dim(d: usize, parties: usize) -> Result<usize> {
    if d == 0 || parties == 0 {
        return Err(Error::Config("need at least one subsystem of dimension at least 1".into()));
    }
    let mut dim = 1usize;
    for _ in 0..parties {
        dim = dim.checked_mul(d).ok_or(Error::SizeOverflow {
            required: usize::MAX,
            cap: tol::KRON_MAX_DIM,
        })?;
    }
    if dim > tol::KRON_MAX_DIM {
        return Err(Error::SizeOverflow {
            required: dim,
            cap: tol::KRON_MAX_DIM,
        });
    }
    Ok(dim)
}

fn require_dense_budget(dim: usize, matrices: usize) -> Result<()> {
    let required = dim
        .checked_mul(dim)
        .and_then(|e| e.checked_mul(16))
        .and_then(|b| b.checked_mul(matrices))
        .unwrap_or(usize::MAX);
    if required > tol::DENSE_BUDGET_BYTES {
        return Err(Error::MemoryBudget {
            required_bytes: required,
            budget_bytes: tol::DENSE_BUDGET_BYTES,
        });
    }
    Ok(())
}

/// Noninteracting total Hamiltonian Σ_k 1⊗…⊗h⊗…⊗1 on `parties` copies.
pub fn total_hamiltonian(h_site: &HermitianOperator, parties: usize) -> Result<HermitianOperator> {
    let d = h_site.dim();
    let dim = product_dim(d, parties)?;
    require_dense_budget(dim, 3)?;
    let mut acc = ComplexMatrix::zeros(dim, dim);
    for k in 0..parties {
        let left = ComplexMatrix::identity(d.pow(k as u32));
        let right = ComplexMatrix::identity(d.pow((parties - 1 - k) as u32));
        let term = kron_list(&[&left, h_site.matrix(), &right])?;
        acc = acc.add(&term);
    }
    HermitianOperator::new(acc)
}

/// Basis-index relabeling of a subsystem permutation: subsystem k's content
/// moves to slot perm[k].  Slot 0 owns the most significant digit, matching
/// the Kronecker-product ordering used everywhere else.
fn permutation_index_map(d: usize, parties: usize, perm: &[usize]) -> Result<Vec<usize>> {
    if perm.len() != parties {
        return Err(Error::DimensionMismatch {
            left: perm.len(),
            right: parties,
            context: "permutation length vs subsystem count",
        });
    }
    let mut seen = vec![false; parties];
    for &p in perm {
        if p >= parties || seen[p] {
            return Err(Error::Config(format!("{perm:?} is not a permutation of the subsystems")));
        }
        seen[p] = true;
    }
    let dim = product_dim(d, parties)?;
    let mut place = vec![0usize; parties];
    let mut acc = 1usize;
    for k in (0..parties).rev() {
        place[k] = acc;
        acc *= d;
    }
    let mut map = Vec::with_capacity(dim);
    for col in 0..dim {
        let mut row = 0usize;
        for k in 0..parties {
            let digit = (col / place[k]) % d;
            row += digit * place[perm[k]];
        }
        map.push(row);
    }
    Ok(map)
}

/// Permutation unitary moving subsystem k to slot perm[k].
pub fn subsystem_permutation(d: usize, parties: usize, perm: &[usize]) -> Result<ComplexMatrix> {
    let map = permutation_index_map(d, parties, perm)?;
    require_dense_budget(map.len(), 1)?;
    let mut u = ComplexMatrix::zeros(map.len(), map.len());
    for (col, row) in map.iter().enumerate() {
        u.set(*row, col, C64::new(1.0, 0.0));
    }
    Ok(u)
}

/// Unitary exchanging subsystems a and b (identity when a = b).
pub fn swap_unitary(d: usize, parties: usize, a: usize, b: usize) -> Result<ComplexMatrix> {
    if a >= parties || b >= parties {
        return Err(Error::Config(format!(
            "swap touches subsystem {} but only {parties} exist",
            a.max(b)
        )));
    }
    let mut perm: Vec<usize> = (0..parties).collect();
    perm.swap(a, b);
    subsystem_permutation(d, parties, &perm)
}

/// Uniform mixture of the n swaps bringing slot 0 to every position (the
/// a = 0 term is the identity).
pub fn convex_split_channel(d: usize, n: usize) -> Result<RandomUnitaryChannel> {
    let dim = product_dim(d, n)?;
    require_dense_budget(dim, n + 1)?;
    let mut pairs = Vec::with_capacity(n);
    for m in 0..n {
        pairs.push((1.0 / n as f64, swap_unitary(d, n, 0, m)?));
    }
    RandomUnitaryChannel::new(pairs)
}

/// Position-averaged state (1/n) Σ_m σ^{⊗m} ⊗ ρ ⊗ σ^{⊗n-1-m}: exactly the
/// uniform-swap channel output on ρ ⊗ σ^{⊗n-1} because the bath factors are
/// identical.
pub fn split_state(rho: &DensityMatrix, sigma: &DensityMatrix, n: usize) -> Result<DensityMatrix> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.dim(),
            right: sigma.dim(),
            context: "rho vs sigma dimension",
        });
    }
    let dim = product_dim(rho.dim(), n)?;
    require_dense_budget(dim, 3)?;
    let mut acc = ComplexMatrix::zeros(dim, dim);
    for m in 0..n {
        let factors: Vec<&ComplexMatrix> = (0..n)
            .map(|j| if j == m { rho.matrix() } else { sigma.matrix() })
            .collect();
        let term = kron_list(&factors)?;
        acc.add_assign_scaled(&term, C64::new(1.0 / n as f64, 0.0));
    }
    // convex mixture of products of valid states: positivity and unit trace
    // hold by algebra, so skip the eigenvalue re-validation
    Ok(DensityMatrix::new_unchecked(acc))
}

/// k-fold Kronecker power.
pub fn kron_power(m: &ComplexMatrix, k: usize) -> Result<ComplexMatrix> {
    if k == 0 {
        return Err(Error::Config("kron power needs at least one factor".into()));
    }
    let mut out = m.clone();
    for _ in 1..k {
        out = kron_with_cap(&out, m, tol::KRON_MAX_DIM)?;
    }
    Ok(out)
}

fn heap_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut items: Vec<usize> = (0..n).collect();
    let mut out = vec![items.clone()];
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            out.push(items.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Average of P_π ρ P_π† over every permutation π of the subsystems.
/// Conjugation by a permutation is an index relabeling, so each term costs
/// O(dim²).
pub fn symmetrize_subsystems(rho: &ComplexMatrix, d: usize, parties: usize) -> Result<ComplexMatrix> {
    if parties > MAX_SYMMETRIZE_PARTIES {
        return Err(Error::Config(format!(
            "refusing to average over {parties}! subsystem permutations"
        )));
    }
    let dim = product_dim(d, parties)?;
    if rho.rows != dim || rho.cols != dim {
        return Err(Error::DimensionMismatch {
            left: rho.rows,
            right: dim,
            context: "state vs product dimension",
        });
    }
    let perms = heap_permutations(parties);
    let weight = C64::new(1.0 / perms.len() as f64, 0.0);
    let mut out = ComplexMatrix::zeros(dim, dim);
    for perm in &perms {
        let map = permutation_index_map(d, parties, perm)?;
        for i in 0..dim {
            for j in 0..dim {
                let v = out.get(map[i], map[j]) + rho.get(i, j) * weight;
                out.set(map[i], map[j], v);
            }
        }
    }
    Ok(out)
}

/// Projectors onto the degenerate eigenspaces of h, ascending in energy.
pub fn energy_subspace_projectors(h: &HermitianOperator) -> Result<Vec<ComplexMatrix>> {
    let spec = eig_hermitian(h, None)?;
    Ok((0..spec.groups.len()).map(|g| spec.projector(g)).collect())
}

/// Largest change of any subspace weight tr(P_g ρ) under the channel.
pub fn weight_conservation_residual(
    channel: &RandomUnitaryChannel,
    rho: &ComplexMatrix,
    projectors: &[ComplexMatrix],
) -> Result<f64> {
    if rho.rows != channel.dim() {
        return Err(Error::DimensionMismatch {
            left: rho.rows,
            right: channel.dim(),
            context: "state vs channel dimension",
        });
    }
    let out = channel.apply_matrix(rho);
    let mut worst: f64 = 0.0;
    for p in projectors {
        if p.rows != rho.rows {
            return Err(Error::DimensionMismatch {
                left: p.rows,
                right: rho.rows,
                context: "projector vs state dimension",
            });
        }
        let before = p.mul(rho).trace().re;
        let after = p.mul(&out).trace().re;
        worst = worst.max((after - before).abs());
    }
    Ok(worst)
}

/// A region-plus-bath system undergoing elastic collisions: `unitaries[k]`
/// fires at Poisson rate `rates[k]` and commutes with the total Hamiltonian.
#[derive(Debug, Clone)]
pub struct CollisionProcess {
    subsystem_dim: usize,
    parties: usize,
    h_site: HermitianOperator,
    h_total: HermitianOperator,
    unitaries: Vec<ComplexMatrix>,
    rates: Vec<f64>,
}

impl CollisionProcess {
    pub fn new(
        h_site: HermitianOperator,
        parties: usize,
        unitaries: Vec<ComplexMatrix>,
        rates: Vec<f64>,
    ) -> Result<Self> {
        if unitaries.len() != rates.len() {
            return Err(Error::DimensionMismatch {
                left: unitaries.len(),
                right: rates.len(),
                context: "unitary count vs rate count",
            });
        }
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config("collision rates must be finite and positive".into()));
        }
        let h_total = total_hamiltonian(&h_site, parties)?;
        let dim = h_total.dim();
        let h_norm = h_total.matrix().frobenius_norm();
        for (k, u) in unitaries.iter().enumerate() {
            if !u.is_square() || u.rows != dim {
                return Err(Error::DimensionMismatch {
                    left: u.rows,
                    right: dim,
                    context: "collision unitary vs product dimension",
                });
            }
            let residual = u.mul(&u.dagger()).sub(&ComplexMatrix::identity(dim)).max_abs_entry();
            if residual > tol::UNITARITY {
                return Err(Error::NotUnitary {
                    residual,
                    tolerance: tol::UNITARITY,
                });
            }
            let elastic = commutator(u, h_total.matrix()).frobenius_norm();
            let tolerance = tol::ENERGY_CONSERVE_REL * h_norm;
            if elastic > tolerance {
                return Err(Error::EnergyNotConserved {
                    index: k,
                    residual: elastic,
                    tolerance,
                });
            }
        }
        Ok(CollisionProcess {
            subsystem_dim: h_site.dim(),
            parties,
            h_site,
            h_total,
            unitaries,
            rates,
        })
    }

    pub fn subsystem_dim(&self) -> usize {
        self.subsystem_dim
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn dim(&self) -> usize {
        self.h_total.dim()
    }

    pub fn h_site(&self) -> &HermitianOperator {
        &self.h_site
    }

    pub fn h_total(&self) -> &HermitianOperator {
        &self.h_total
    }

    pub fn unitaries(&self) -> &[ComplexMatrix] {
        &self.unitaries
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn total_rate(&self) -> f64 {
        let mut acc = KahanSum::new();
        for r in &self.rates {
            acc.add(*r);
        }
        acc.value()
    }

    /// Rate-weighted mixture Λ = Σ_k (λ_k/λ̄) U_k · U_k†; the identity
    /// channel when no collisions are configured.
    pub fn mixing_channel(&self) -> Result<RandomUnitaryChannel> {
        if self.unitaries.is_empty() {
            return RandomUnitaryChannel::new(vec![(1.0, ComplexMatrix::identity(self.dim()))]);
        }
        let total = self.total_rate();
        let pairs = self
            .rates
            .iter()
            .zip(&self.unitaries)
            .map(|(r, u)| (r / total, u.clone()))
            .collect();
        RandomUnitaryChannel::new(pairs)
    }
}

/// Every pairwise swap among `parties` identical subsystems, each firing at
/// the same rate.  Its unique steady state (for generic inputs) is the full
/// permutation average.
pub fn all_pairs_swap_process(
    h_site: &HermitianOperator,
    parties: usize,
    rate: f64,
) -> Result<CollisionProcess> {
    if parties < 2 {
        return Err(Error::Config("pairwise swaps need at least two subsystems".into()));
    }
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::Config("swap rate must be finite and positive".into()));
    }
    let d = h_site.dim();
    let mut unitaries = Vec::new();
    let mut rates = Vec::new();
    for a in 0..parties {
        for b in (a + 1)..parties {
            unitaries.push(swap_unitary(d, parties, a, b)?);
            rates.push(rate);
        }
    }
    CollisionProcess::new(h_site.clone(), parties, unitaries, rates)
}

/// Poisson-series solution at one time, with its truncation certificate.
#[derive(Debug, Clone)]
pub struct SeriesSolution {
    pub state: DensityMatrix,
    /// Highest retained power of the mixing channel.
    pub truncation: usize,
    pub total_rate: f64,
    /// Poisson mass covered by the retained terms (the state is renormalized
    /// by it).
    pub retained_mass: f64,
    pub tail: f64,
    pub mixing: RandomUnitaryChannel,
}

/// Poisson weights e^{-x} x^m / m! up to the first index where the remaining
/// tail drops below tail_tol, evaluated in log space so large x cannot
/// overflow the factorial.
fn poisson_weights(x: f64, tail_tol: f64) -> Result<(Vec<f64>, f64)> {
    let lnx = x.ln();
    let mut lnfact = 0.0;
    let mut cum = KahanSum::new();
    let mut weights = Vec::new();
    let mut m = 0usize;
    loop {
        if m > 0 {
            lnfact += (m as f64).ln();
        }
        let p = (-x + m as f64 * lnx - lnfact).exp();
        cum.add(p);
        weights.push(p);
        if 1.0 - cum.value() <= tail_tol {
            return Ok((weights, cum.value()));
        }
        if m == tol::SERIES_CAP {
            return Err(Error::SeriesTruncation {
                required: m + 1,
                cap: tol::SERIES_CAP,
            });
        }
        m += 1;
    }
}

/// Solve the master equation at time t by summing Poisson-weighted powers of
/// the mixing channel, truncated once the neglected mass is below tail_tol
/// (default 1e-10) and renormalized.
pub fn evolve_series(
    process: &CollisionProcess,
    rho0: &DensityMatrix,
    t: f64,
    tail_tol: Option<f64>,
) -> Result<SeriesSolution> {
    if rho0.dim() != process.dim() {
        return Err(Error::DimensionMismatch {
            left: rho0.dim(),
            right: process.dim(),
            context: "initial state vs process dimension",
        });
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Config(format!("evolution time {t} must be finite and nonnegative")));
    }
    let tail_tol = tail_tol.unwrap_or(tol::SERIES_TAIL);
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::Config(format!("tail tolerance {tail_tol} outside (0, 1)")));
    }
    let total_rate = process.total_rate();
    let mixing = process.mixing_channel()?;
    let x = total_rate * t;
    if x == 0.0 {
        return Ok(SeriesSolution {
            state: rho0.clone(),
            truncation: 0,
            total_rate,
            retained_mass: 1.0,
            tail: 0.0,
            mixing,
        });
    }
    let (weights, retained) = poisson_weights(x, tail_tol)?;
    let mut cur = rho0.matrix().clone();
    let mut acc = cur.scale_re(weights[0]);
    for w in &weights[1..] {
        cur = mixing.apply_matrix(&cur);
        acc.add_assign_scaled(&cur, C64::new(*w, 0.0));
    }
    let state = DensityMatrix::new(acc.scale_re(1.0 / retained))?;
    Ok(SeriesSolution {
        state,
        truncation: weights.len() - 1,
        total_rate,
        retained_mass: retained,
        tail: (1.0 - retained).max(0.0),
        mixing,
    })
}

/// Classic fourth-order Runge–Kutta integration of the same master equation,
/// used as an independent cross-check on the series.
pub fn rk4_reference(process: &CollisionProcess, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if rho0.dim() != process.dim() {
        return Err(Error::DimensionMismatch {
            left: rho0.dim(),
            right: process.dim(),
            context: "initial state vs process dimension",
        });
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Config(format!("evolution time {t} must be finite and nonnegative")));
    }
    let total_rate = process.total_rate();
    if t == 0.0 || total_rate == 0.0 {
        return Ok(rho0.clone());
    }
    let dim = process.dim();
    let daggers: Vec<ComplexMatrix> = process.unitaries().iter().map(|u| u.dagger()).collect();
    let generator = |r: &ComplexMatrix| {
        let mut out = ComplexMatrix::zeros(dim, dim);
        for ((u, ud), rate) in process.unitaries().iter().zip(&daggers).zip(process.rates()) {
            let conj = u.mul(r).mul(ud);
            out.add_assign_scaled(&conj, C64::new(*rate, 0.0));
            out.add_assign_scaled(r, C64::new(-*rate, 0.0));
        }
        out
    };
    let dt_target = (0.01 / total_rate).min(t / 1000.0);
    let steps = (t / dt_target).ceil() as usize;
    let dt = t / steps as f64;
    let mut rho = rho0.matrix().clone();
    for _ in 0..steps {
        let k1 = generator(&rho);
        let mut probe = rho.clone();
        probe.add_assign_scaled(&k1, C64::new(0.5 * dt, 0.0));
        let k2 = generator(&probe);
        let mut probe = rho.clone();
        probe.add_assign_scaled(&k2, C64::new(0.5 * dt, 0.0));
        let k3 = generator(&probe);
        let mut probe = rho.clone();
        probe.add_assign_scaled(&k3, C64::new(dt, 0.0));
        let k4 = generator(&probe);
        rho.add_assign_scaled(&k1, C64::new(dt / 6.0, 0.0));
        rho.add_assign_scaled(&k2, C64::new(dt / 3.0, 0.0));
        rho.add_assign_scaled(&k3, C64::new(dt / 3.0, 0.0));
        rho.add_assign_scaled(&k4, C64::new(dt / 6.0, 0.0));
    }
    // integration noise can leave a whisker of asymmetry
    let rho = rho.add(&rho.dagger()).scale_re(0.5);
    DensityMatrix::new(rho)
}

/// How a stochastic trajectory picks collision times and which unitary
/// fires.  Both samplers realize the same jump process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectorySampler {
    /// One exponential clock at the total rate; the colliding unitary is
    /// drawn categorically with probability λ_k/λ̄.
    AggregateClock,
    /// Independent exponential clocks per unitary; the earliest fires.
    CompetingClocks,
}

impl TrajectorySampler {
    fn seed_tag(self) -> u64 {
        match self {
            TrajectorySampler::AggregateClock => 1,
            TrajectorySampler::CompetingClocks => 2,
        }
    }
}

/// Monte Carlo solution averaging `n_traj` collision histories, each seeded
/// independently from `seed` so the result is reproducible and independent
/// of the worker count.
pub fn evolve_trajectories(
    process: &CollisionProcess,
    rho0: &DensityMatrix,
    t: f64,
    n_traj: usize,
    seed: u64,
) -> Result<DensityMatrix> {
    evolve_trajectories_with(TrajectorySampler::AggregateClock, process, rho0, t, n_traj, seed)
}

pub fn evolve_trajectories_with(
    sampler: TrajectorySampler,
    process: &CollisionProcess,
    rho0: &DensityMatrix,
    t: f64,
    n_traj: usize,
    seed: u64,
) -> Result<DensityMatrix> {
    if rho0.dim() != process.dim() {
        return Err(Error::DimensionMismatch {
            left: rho0.dim(),
            right: process.dim(),
            context: "initial state vs process dimension",
        });
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Config(format!("evolution time {t} must be finite and nonnegative")));
    }
    if n_traj == 0 {
        return Err(Error::Config("trajectory average needs at least one trajectory".into()));
    }
    if process.unitaries().is_empty() || t == 0.0 {
        return Ok(rho0.clone());
    }
    let dim = process.dim();
    let total_rate = process.total_rate();
    let rates = process.rates();
    let unitaries = process.unitaries();
    let daggers: Vec<ComplexMatrix> = unitaries.iter().map(|u| u.dagger()).collect();
    let tag = sampler.seed_tag();
    let chunks: Vec<std::ops::Range<usize>> = (0..n_traj)
        .step_by(TRAJECTORY_CHUNK)
        .map(|s| s..(s + TRAJECTORY_CHUNK).min(n_traj))
        .collect();
    let partials: Vec<ComplexMatrix> = chunks
        .into_par_iter()
        .map(|chunk| {
            let mut local = ComplexMatrix::zeros(dim, dim);
            for idx in chunk {
                let mut rng = SplitMix64::new(derive_seed(seed, idx as u64, tag));
                let mut cur = rho0.matrix().clone();
                let mut time = 0.0;
                loop {
                    let (wait, k) = match sampler {
                        TrajectorySampler::AggregateClock => {
                            let wait = rng.next_exponential(total_rate);
                            let draw = rng.next_f64() * total_rate;
                            let mut acc = 0.0;
                            let mut k = rates.len() - 1;
                            for (j, r) in rates.iter().enumerate() {
                                acc += r;
                                if draw < acc {
                                    k = j;
                                    break;
                                }
                            }
                            (wait, k)
                        }
                        TrajectorySampler::CompetingClocks => {
                            let mut wait = f64::INFINITY;
                            let mut k = 0;
                            for (j, r) in rates.iter().enumerate() {
                                let w = rng.next_exponential(*r);
                                if w < wait {
                                    wait = w;
                                    k = j;
                                }
                            }
                            (wait, k)
                        }
                    };
                    time += wait;
                    if time > t {
                        break;
                    }
                    cur = unitaries[k].mul(&cur).mul(&daggers[k]);
                }
                local = local.add(&cur);
            }
            local
        })
        .collect();
    // chunk results land in index order, so the final fold is deterministic
    let mut sum = ComplexMatrix::zeros(dim, dim);
    for p in &partials {
        sum = sum.add(p);
    }
    DensityMatrix::new(sum.scale_re(1.0 / n_traj as f64))
}

/// Convergence evidence toward a proposed stationary state.
#[derive(Debug, Clone)]
pub struct SteadyStateCheck {
    /// How far the candidate is from being a fixed point of one collision.
    pub fixed_point_residual: f64,
    /// ‖ρ(t) − steady‖₁ from the series solution.
    pub distance: f64,
}

pub fn steady_state_check(
    process: &CollisionProcess,
    rho0: &DensityMatrix,
    steady: &DensityMatrix,
    t: f64,
) -> Result<SteadyStateCheck> {
    if steady.dim() != process.dim() {
        return Err(Error::DimensionMismatch {
            left: steady.dim(),
            right: process.dim(),
            context: "steady state vs process dimension",
        });
    }
    let mixing = process.mixing_channel()?;
    let fixed_point_residual = mixing.apply_matrix(steady.matrix()).max_abs_diff(steady.matrix());
    let solution = evolve_series(process, rho0, t, None)?;
    let distance = trace_norm(&solution.state.matrix().sub(steady.matrix()))?;
    Ok(SteadyStateCheck {
        fixed_point_residual,
        distance,
    })
}

/// Verdict on whether n bath copies suffice at accuracy ε for the uniform
/// swap channel.
#[derive(Debug, Clone)]
pub struct ThermalizeCheck {
    /// ‖split(ω, τ, n) − τ^{⊗n}‖₁.
    pub measured: f64,
    pub epsilon: f64,
    pub holds: bool,
}

pub fn epsilon_thermalize_check(
    omega: &DensityMatrix,
    tau: &DensityMatrix,
    n: usize,
    epsilon: f64,
) -> Result<ThermalizeCheck> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::BadEpsilon { epsilon });
    }
    let split = split_state(omega, tau, n)?;
    let target = kron_power(tau.matrix(), n)?;
    let measured = trace_norm(&split.matrix().sub(&target))?;
    Ok(ThermalizeCheck {
        measured,
        epsilon,
        holds: measured <= epsilon,
    })
}

/// Dense certification of the square-root bath bound.
#[derive(Debug, Clone)]
pub struct ConvexSplitCheck {
    pub measured: f64,
    /// √(2^{D_max} / n), the proved ceiling on the measured distance.
    pub bound: f64,
    pub dmax: f64,
    pub holds: bool,
}

/// Measure ‖split(ρ, σ, n) − σ^{⊗n}‖₁ and compare against √(2^{D_max}/n).
pub fn verify_convex_split(rho: &DensityMatrix, sigma: &DensityMatrix, n: usize) -> Result<ConvexSplitCheck> {
    let dmax = entropy::dmax(rho, sigma)?.value;
    let split = split_state(rho, sigma, n)?;
    let target = kron_power(sigma.matrix(), n)?;
    let measured = trace_norm(&split.matrix().sub(&target))?;
    let bound = (2f64.powf(dmax) / n as f64).sqrt();
    Ok(ConvexSplitCheck {
        measured,
        bound,
        dmax,
        holds: measured <= bound + tol::CONVEX_SPLIT_SLACK,
    })
}

/// ‖split − iid‖₁ for commuting (diagonal) populations, summed over level
/// compositions instead of the d^n product basis: inside one composition
/// class every diagonal entry of the difference is the same, so the class
/// totals carry the whole norm.  Caller guarantees facts covers n.
pub fn diagonal_split_distance(p: &[f64], q: &[f64], n: usize, facts: &LnFactorials) -> f64 {
    let mut acc = KahanSum::new();
    for tuple in compositions(n, p.len()) {
        let w_split = split_class_weight(p, q, &tuple, facts);
        let w_iid = iid_class_weight(q, &tuple, facts);
        acc.add((w_split - w_iid).abs());
    }
    acc.value()
}

/// One bath size in the scan: the full product-space distance (when it was
/// computable) and the single-copy reduced distance ‖ω − τ‖₁ / n.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub n: usize,
    pub global: Option<f64>,
    pub reduced: f64,
}

/// Scan record locating the smallest sufficient bath size, together with
/// the entropy-based two-sided bounds it must sit between.
#[derive(Debug, Clone)]
pub struct NEpsilonCertificate {
    pub epsilon: f64,
    pub dmax: f64,
    pub points: Vec<ScanPoint>,
    /// First n where the reduced (per-copy) distance drops to ε.
    pub n_epsilon: Option<usize>,
    /// First n where the full product-space distance drops to ε.
    pub n_epsilon_global: Option<usize>,
    /// 2^{D_max} / ε²: past this the square-root bound guarantees success.
    pub theorem_upper: f64,
    pub theorem_upper_count: Option<usize>,
    /// 2^{D_max^{2√ε}}: no elastic channel succeeds with fewer copies, valid
    /// when the subsystem spectrum is collision-free.
    pub corollary_lower: Option<f64>,
    pub esc_verified: bool,
    /// Without the spectrum condition the scan only upper-bounds the true
    /// optimum over elastic channels.
    pub upper_bound_only: bool,
    /// The scan ran out of bath sizes (or computable distances) before both
    /// readings crossed ε.
    pub exhausted: bool,
}

enum GlobalEngine {
    Diagonal { p: Vec<f64>, q: Vec<f64>, facts: LnFactorials },
    Dense,
}

/// Find the smallest bath size whose uniform-swap output is ε-close to the
/// thermal product, scanning n = 1..=n_max.  Commuting pairs use the exact
/// composition-class engine at any n; non-commuting pairs fall back to dense
/// products while the memory budget lasts.  Requires ω inside τ's support
/// (otherwise the max-relative entropy, and with it both bounds, is
/// infinite).
pub fn find_n_epsilon(
    omega: &DensityMatrix,
    tau: &DensityMatrix,
    h_site: &HermitianOperator,
    epsilon: f64,
    n_max: usize,
) -> Result<NEpsilonCertificate> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::BadEpsilon { epsilon });
    }
    if n_max == 0 {
        return Err(Error::Config("bath-size scan needs n_max at least 1".into()));
    }
    if h_site.dim() != omega.dim() {
        return Err(Error::DimensionMismatch {
            left: h_site.dim(),
            right: omega.dim(),
            context: "subsystem Hamiltonian vs state dimension",
        });
    }
    let dmax = entropy::dmax(omega, tau)?.value;
    let theorem_upper = 2f64.powf(dmax) / (epsilon * epsilon);
    let theorem_upper_count = if theorem_upper.is_finite() && theorem_upper < 1e15 {
        Some(theorem_upper.ceil() as usize)
    } else {
        None
    };
    let eps_smooth = 2.0 * epsilon.sqrt();
    let corollary_lower = if eps_smooth < 1.0 {
        match entropy::dmax_smooth(omega, tau, eps_smooth) {
            Ok(r) => Some(2f64.powf(r.value)),
            Err(Error::NonCommuting { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let site_spec = eig_hermitian(h_site, None)?;
    let esc_verified = check_esc(&site_spec.eigenvalues, n_max, tol::ESC_ENERGY)?.satisfied();
    let d1 = trace_norm(&omega.matrix().sub(tau.matrix()))?;
    let d = omega.dim();
    let mut engine = match entropy::commuting_spectra(omega, tau) {
        Ok((_, p, q)) => GlobalEngine::Diagonal {
            p,
            q,
            facts: LnFactorials::up_to(n_max),
        },
        Err(Error::NonCommuting { .. }) => GlobalEngine::Dense,
        Err(e) => return Err(e),
    };
    let mut points = Vec::new();
    let mut n_epsilon = None;
    let mut n_epsilon_global = None;
    for n in 1..=n_max {
        let global = match &mut engine {
            GlobalEngine::Diagonal { p, q, facts } => {
                let affordable = count_compositions(n as u64, d as u64)
                    .is_some_and(|c| c <= tol::ESC_PAIR_BUDGET);
                affordable.then(|| diagonal_split_distance(p, q, n, facts))
            }
            GlobalEngine::Dense => {
                let affordable = product_dim(d, n)
                    .and_then(|dim| require_dense_budget(dim, 3).map(|()| dim))
                    .is_ok();
                if affordable {
                    let split = split_state(omega, tau, n)?;
                    let target = kron_power(tau.matrix(), n)?;
                    Some(trace_norm(&split.matrix().sub(&target))?)
                } else {
                    None
                }
            }
        };
        let reduced = d1 / n as f64;
        if n_epsilon.is_none() && reduced <= epsilon {
            n_epsilon = Some(n);
        }
        if n_epsilon_global.is_none() && global.is_some_and(|g| g <= epsilon) {
            n_epsilon_global = Some(n);
        }
        points.push(ScanPoint { n, global, reduced });
        if n_epsilon.is_some() && n_epsilon_global.is_some() {
            break;
        }
    }
    Ok(NEpsilonCertificate {
        epsilon,
        dmax,
        points,
        n_epsilon,
        n_epsilon_global,
        theorem_upper,
        theorem_upper_count,
        corollary_lower,
        esc_verified,
        upper_bound_only: !esc_verified,
        exhausted: n_epsilon.is_none() || n_epsilon_global.is_none(),
    })
}
