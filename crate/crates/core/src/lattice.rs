//! Disordered Heisenberg chains and their magnetization-sector spectra.
//!
//! Basis convention: computational state `s` has bit `i` = 1 when site `i`
//! points down, so sigma^z at site i has eigenvalue 1 - 2*bit.  Site 0 is the
//! least significant bit.  A periodic chain couples (i, i+1 mod L) for every
//! i, which at L = 2 lists the single bond twice; the doubled bond is kept as
//! part of the model definition (spectrum {-6, 2, 2, 2} at zero field).  An
//! open chain drops the wraparound bond.
//!
//! The Hamiltonian conserves total magnetization, so all dense work happens
//! inside popcount sectors of dimension C(L, w); nothing of size 4^L is ever
//! materialized.

use crate::combinatorics::binomial_u128;
use crate::error::{Error, Result};
use crate::linalg::{
    eig_hermitian, C64, ComplexMatrix, HermitianOperator, SpectralDecomposition, StateVector,
};
use crate::rng::{derive_seed, SplitMix64};
use crate::tol;
use rayon::prelude::*;

pub const MIN_SITES: usize = 2;
pub const MAX_SITES: usize = 14;
/// The Neel-variant state flips the last spin of the pattern, which only
/// produces three distinct magnetization footprints from three sites up.
pub const MIN_NEEL_SITES: usize = 3;

/// Whether site L-1 couples back to site 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    Periodic,
    Open,
}

/// Ensemble-level description of a disordered chain; every realization is
/// reproducible from (seed, index) alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSpec {
    pub sites: usize,
    pub delta: f64,
    pub boundary: Boundary,
    pub seed: u64,
}

impl ChainSpec {
    /// Draw the disorder fields of realization `index`.
    pub fn realize(&self, index: u64) -> Result<SpinChain> {
        let mut rng = SplitMix64::new(derive_seed(self.seed, index, 0));
        SpinChain::sample(self.sites, self.delta, self.boundary, &mut rng)
    }
}

/// One disorder realization: XXX couplings of unit strength plus site fields
/// `delta * h[i] * sigma^z_i` with h[i] in [-1, 1].
#[derive(Debug, Clone)]
pub struct SpinChain {
    sites: usize,
    delta: f64,
    boundary: Boundary,
    fields: Vec<f64>,
}

impl SpinChain {
    pub fn new(sites: usize, delta: f64, boundary: Boundary, fields: Vec<f64>) -> Result<Self> {
        if !(MIN_SITES..=MAX_SITES).contains(&sites) {
            return Err(Error::BadChainLength {
                l: sites,
                min: MIN_SITES,
                max: MAX_SITES,
            });
        }
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::BadDisorderStrength { delta });
        }
        if fields.len() != sites {
            return Err(Error::DimensionMismatch {
                left: fields.len(),
                right: sites,
                context: "disorder field count vs chain length",
            });
        }
        if fields.iter().any(|h| !h.is_finite() || h.abs() > 1.0) {
            return Err(Error::Config("disorder fields must lie in [-1, 1]".into()));
        }
        Ok(Self {
            sites,
            delta,
            boundary,
            fields,
        })
    }

    /// Draw the site fields uniformly from [-1, 1].
    pub fn sample(
        sites: usize,
        delta: f64,
        boundary: Boundary,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        let fields = (0..sites).map(|_| rng.uniform(-1.0, 1.0)).collect();
        Self::new(sites, delta, boundary, fields)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn hilbert_dim(&self) -> usize {
        1 << self.sites
    }

    fn bonds(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let count = match self.boundary {
            Boundary::Periodic => self.sites,
            Boundary::Open => self.sites - 1,
        };
        (0..count).map(move |i| (i, (i + 1) % self.sites))
    }

    /// Diagonal part (zz couplings + fields) of basis state `s`.
    pub fn diagonal_energy(&self, s: usize) -> f64 {
        let z = |i: usize| 1.0 - 2.0 * ((s >> i) & 1) as f64;
        let mut e = 0.0;
        for (i, j) in self.bonds() {
            e += z(i) * z(j);
        }
        for i in 0..self.sites {
            e += self.delta * self.fields[i] * z(i);
        }
        e
    }

    /// Basis states with `w` down spins, ascending.
    pub fn sector_basis(&self, w: usize) -> Vec<usize> {
        (0..self.hilbert_dim())
            .filter(|s| (s.count_ones() as usize) == w)
            .collect()
    }

    /// Dense Hamiltonian block on the w-down-spin sector.
    pub fn sector_hamiltonian(&self, w: usize) -> (Vec<usize>, HermitianOperator) {
        let basis = self.sector_basis(w);
        let dim = basis.len();
        let mut index = vec![usize::MAX; self.hilbert_dim()];
        for (a, &s) in basis.iter().enumerate() {
            index[s] = a;
        }
        let mut h = ComplexMatrix::zeros(dim, dim);
        for (a, &s) in basis.iter().enumerate() {
            h.data[a * dim + a] = C64::new(self.diagonal_energy(s), 0.0);
            for (i, j) in self.bonds() {
                if ((s >> i) ^ (s >> j)) & 1 == 1 {
                    // antiparallel neighbors: xx + yy hops with amplitude 2
                    let b = index[s ^ (1 << i) ^ (1 << j)];
                    h.data[a * dim + b] += C64::new(2.0, 0.0);
                }
            }
        }
        (basis, HermitianOperator::new_unchecked(h))
    }

    /// Full 2^L Hamiltonian as one dense matrix; only for small chains.
    pub fn dense_hamiltonian(&self) -> Result<HermitianOperator> {
        let dim = self.hilbert_dim();
        let bytes = dim * dim * std::mem::size_of::<C64>();
        if bytes > tol::DENSE_BUDGET_BYTES {
            return Err(Error::MemoryBudget {
                required_bytes: bytes,
                budget_bytes: tol::DENSE_BUDGET_BYTES,
            });
        }
        let mut h = ComplexMatrix::zeros(dim, dim);
        for s in 0..dim {
            h.data[s * dim + s] = C64::new(self.diagonal_energy(s), 0.0);
            for (i, j) in self.bonds() {
                if ((s >> i) ^ (s >> j)) & 1 == 1 {
                    let t = s ^ (1 << i) ^ (1 << j);
                    h.data[s * dim + t] += C64::new(2.0, 0.0);
                }
            }
        }
        Ok(HermitianOperator::new_unchecked(h))
    }

    /// Hamiltonian of the window [anchor, anchor+width) keeping only terms
    /// supported entirely inside it: the width-1 interior bonds plus the
    /// window's field terms.  Boundary bonds are never included, so the
    /// result depends only on the fields inside the window.
    pub fn reduced_hamiltonian(&self, anchor: usize, width: usize) -> Result<HermitianOperator> {
        if width == 0 || anchor + width > self.sites {
            return Err(Error::BadRegion {
                anchor,
                end: anchor + width,
                l: self.sites,
            });
        }
        let dim = 1usize << width;
        let mut h = ComplexMatrix::zeros(dim, dim);
        for s in 0..dim {
            let z = |i: usize| 1.0 - 2.0 * ((s >> i) & 1) as f64;
            let mut e = 0.0;
            for i in 0..width - 1 {
                e += z(i) * z(i + 1);
            }
            for i in 0..width {
                e += self.delta * self.fields[anchor + i] * z(i);
            }
            h.data[s * dim + s] = C64::new(e, 0.0);
            for i in 0..width - 1 {
                if ((s >> i) ^ (s >> (i + 1))) & 1 == 1 {
                    let t = s ^ (1 << i) ^ (1 << (i + 1));
                    h.data[s * dim + t] += C64::new(2.0, 0.0);
                }
            }
        }
        Ok(HermitianOperator::new_unchecked(h))
    }

    /// Eigendecompose every magnetization sector (in parallel; the result is
    /// independent of worker count) and merge the spectra.
    pub fn spectra(&self) -> Result<SectorSpectra> {
        let l = self.sites;
        let dims: Vec<usize> = (0..=l)
            .map(|w| binomial_u128(l as u64, w as u64).unwrap() as usize)
            .collect();
        let stored: usize = dims.iter().map(|d| d * d).sum::<usize>();
        let max_dim = *dims.iter().max().unwrap();
        let bytes = (stored + 2 * max_dim * max_dim) * std::mem::size_of::<C64>();
        if bytes > tol::DENSE_BUDGET_BYTES {
            return Err(Error::MemoryBudget {
                required_bytes: bytes,
                budget_bytes: tol::DENSE_BUDGET_BYTES,
            });
        }

        let sectors: Result<Vec<SectorEig>> = (0..=l)
            .into_par_iter()
            .map(|w| {
                let (basis, h) = self.sector_hamiltonian(w);
                // per-sector clustering is redone globally below; disable here
                let spec = eig_hermitian(&h, Some(0.0))?;
                Ok(SectorEig {
                    weight: w,
                    basis,
                    spec,
                })
            })
            .collect();
        let sectors = sectors?;

        let mut merged: Vec<EigRef> = Vec::with_capacity(1 << l);
        for (si, sec) in sectors.iter().enumerate() {
            for (k, &e) in sec.spec.eigenvalues.iter().enumerate() {
                merged.push(EigRef {
                    sector: si,
                    index: k,
                    energy: e,
                });
            }
        }
        merged.sort_by(|a, b| {
            a.energy
                .partial_cmp(&b.energy)
                .unwrap()
                .then(a.sector.cmp(&b.sector))
                .then(a.index.cmp(&b.index))
        });
        let range = merged.last().unwrap().energy - merged.first().unwrap().energy;
        let tol_deg = tol::DEGENERACY_REL * range;
        let mut groups = Vec::new();
        let mut start = 0usize;
        for i in 1..merged.len() {
            if merged[i].energy - merged[i - 1].energy > tol_deg {
                groups.push(start..i);
                start = i;
            }
        }
        groups.push(start..merged.len());

        Ok(SectorSpectra {
            sites: l,
            sectors,
            merged,
            groups,
            tol_deg,
        })
    }
}

/// Eigensystem of one magnetization sector.
#[derive(Debug, Clone)]
pub struct SectorEig {
    pub weight: usize,
    pub basis: Vec<usize>,
    pub spec: SpectralDecomposition,
}

/// Position of one eigenpair in the merged spectrum.
#[derive(Debug, Clone, Copy)]
pub struct EigRef {
    pub sector: usize,
    pub index: usize,
    pub energy: f64,
}

/// All sector eigensystems plus the merged, globally sorted spectrum with
/// cross-sector degeneracy groups.
#[derive(Debug, Clone)]
pub struct SectorSpectra {
    pub sites: usize,
    pub sectors: Vec<SectorEig>,
    pub merged: Vec<EigRef>,
    pub groups: Vec<std::ops::Range<usize>>,
    pub tol_deg: f64,
}

impl SectorSpectra {
    pub fn hilbert_dim(&self) -> usize {
        1 << self.sites
    }

    /// All eigenvalues ascending.
    pub fn energies(&self) -> Vec<f64> {
        self.merged.iter().map(|r| r.energy).collect()
    }

    /// Sector eigenvector (sector array index, column k) embedded in the full
    /// 2^L space.
    pub fn eigenvector_global(&self, sector: usize, k: usize) -> Vec<C64> {
        let sec = &self.sectors[sector];
        let mut out = vec![C64::new(0.0, 0.0); self.hilbert_dim()];
        for (row, &s) in sec.basis.iter().enumerate() {
            out[s] = sec.spec.eigenvectors.get(row, k);
        }
        out
    }

    /// Component of `psi` (full 2^L amplitudes) in degeneracy group `g`:
    /// sum over the group's eigenvectors of v <v, psi>.
    pub fn project_onto_group(&self, g: usize, psi: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.hilbert_dim()];
        for r in self.groups[g].clone() {
            let EigRef { sector, index, .. } = self.merged[r];
            let sec = &self.sectors[sector];
            let mut amp = C64::new(0.0, 0.0);
            for (row, &s) in sec.basis.iter().enumerate() {
                amp += sec.spec.eigenvectors.get(row, index).conj() * psi[s];
            }
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            for (row, &s) in sec.basis.iter().enumerate() {
                out[s] += sec.spec.eigenvectors.get(row, index) * amp;
            }
        }
        out
    }
}

/// Partial trace of |psi><psi| onto the `width` contiguous sites starting at
/// `anchor` (no wrap across the ring seam), accumulated into `out` with the
/// given weight.  `out` must be 2^width square.
pub fn reduce_rank_one_into(
    out: &mut ComplexMatrix,
    psi: &[C64],
    sites: usize,
    anchor: usize,
    width: usize,
    weight: f64,
) -> Result<()> {
    if width == 0 || anchor + width > sites {
        return Err(Error::BadRegion {
            anchor,
            end: anchor + width,
            l: sites,
        });
    }
    let dim = 1usize << sites;
    if psi.len() != dim {
        return Err(Error::DimensionMismatch {
            left: psi.len(),
            right: dim,
            context: "state length vs chain dimension",
        });
    }
    let dr = 1usize << width;
    if out.rows != dr || out.cols != dr {
        return Err(Error::DimensionMismatch {
            left: out.rows,
            right: dr,
            context: "window accumulator dimension",
        });
    }
    let de = 1usize << (sites - width);
    let low_mask = (1usize << anchor) - 1;
    let win_mask = dr - 1;
    // Reshape psi into A[r][e]: r = window bits, e = environment bits.
    let mut a = vec![C64::new(0.0, 0.0); dr * de];
    for (s, &amp) in psi.iter().enumerate() {
        let r = (s >> anchor) & win_mask;
        let e = (s & low_mask) | ((s >> (anchor + width)) << anchor);
        a[r * de + e] = amp;
    }
    for r in 0..dr {
        for rp in 0..dr {
            let mut acc = C64::new(0.0, 0.0);
            for e in 0..de {
                acc += a[r * de + e] * a[rp * de + e].conj();
            }
            out.data[r * dr + rp] += acc * weight;
        }
    }
    Ok(())
}

/// Partial trace of |psi><psi| onto a window, as a fresh matrix.
pub fn reduce_rank_one(
    psi: &[C64],
    sites: usize,
    anchor: usize,
    width: usize,
) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::zeros(1 << width, 1 << width);
    reduce_rank_one_into(&mut out, psi, sites, anchor, width, 1.0)?;
    Ok(out)
}

/// Superposition of the Neel pattern (site 0 up), its global flip, and the
/// pattern with the last spin flipped, normalized.  Spreads the state over
/// three magnetization sectors: {0, 0, +-2} for even L, {+1, -1, -1} for odd.
pub fn neel_variant_state(sites: usize) -> Result<StateVector> {
    if !(MIN_NEEL_SITES..=MAX_SITES).contains(&sites) {
        return Err(Error::BadChainLength {
            l: sites,
            min: MIN_NEEL_SITES,
            max: MAX_SITES,
        });
    }
    let dim = 1usize << sites;
    let neel: usize = (0..sites).filter(|i| i % 2 == 1).map(|i| 1 << i).sum();
    let flipped = !neel & (dim - 1);
    let last_flip = neel ^ (1 << (sites - 1));
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    let w = C64::new(1.0 / 3.0f64.sqrt(), 0.0);
    amps[neel] += w;
    amps[flipped] += w;
    amps[last_flip] += w;
    Ok(StateVector::new(amps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, partial_trace};
    use crate::random::random_pure_state;

    /// Independent dense construction through explicit Pauli tensor products.
    fn kron_oracle(chain: &SpinChain) -> ComplexMatrix {
        let l = chain.sites();
        let c = |re: f64, im: f64| C64::new(re, im);
        let sx = ComplexMatrix::new(2, 2, vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]);
        let sy = ComplexMatrix::new(2, 2, vec![c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]);
        let sz = ComplexMatrix::diagonal(&[1.0, -1.0]);
        let site_op = |op: &ComplexMatrix, i: usize| -> ComplexMatrix {
            // site i is bit i, so it sits at kron slot l-1-i
            let mut out = ComplexMatrix::identity(1);
            for f in 0..l {
                let factor = if l - 1 - f == i {
                    op.clone()
                } else {
                    ComplexMatrix::identity(2)
                };
                out = kron(&out, &factor);
            }
            out
        };
        let bond_count = match chain.boundary() {
            Boundary::Periodic => l,
            Boundary::Open => l - 1,
        };
        let dim = 1 << l;
        let mut h = ComplexMatrix::zeros(dim, dim);
        for i in 0..bond_count {
            let j = (i + 1) % l;
            for op in [&sx, &sy, &sz] {
                h = h.add(&site_op(op, i).mul(&site_op(op, j)));
            }
        }
        for i in 0..l {
            h = h.add(&site_op(&sz, i).scale_re(chain.delta() * chain.fields()[i]));
        }
        h
    }

    #[test]
    fn two_site_ring_has_doubled_bond_spectrum() {
        let chain = SpinChain::new(2, 0.0, Boundary::Periodic, vec![0.0, 0.0]).unwrap();
        let spec = chain.spectra().unwrap();
        let e = spec.energies();
        let expected = [-6.0, 2.0, 2.0, 2.0];
        for (got, want) in e.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{e:?}");
        }
    }

    #[test]
    fn two_site_open_chain_has_single_bond_spectrum() {
        // one Heisenberg bond: singlet -3, triplet +1
        let chain = SpinChain::new(2, 0.0, Boundary::Open, vec![0.0, 0.0]).unwrap();
        let e = chain.spectra().unwrap().energies();
        let expected = [-3.0, 1.0, 1.0, 1.0];
        for (got, want) in e.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{e:?}");
        }
    }

    #[test]
    fn three_site_ring_matches_total_spin_algebra() {
        // All three bonds of the triangle appear once; H = 2 S_tot^2 - 9/2
        // gives -3 (x4) and +3 (x4).
        let chain = SpinChain::new(3, 0.0, Boundary::Periodic, vec![0.0; 3]).unwrap();
        let e = chain.spectra().unwrap().energies();
        for k in 0..4 {
            assert!((e[k] + 3.0).abs() < 1e-12, "{e:?}");
            assert!((e[k + 4] - 3.0).abs() < 1e-12, "{e:?}");
        }
    }

    #[test]
    fn dense_hamiltonian_matches_pauli_kron_oracle() {
        let mut rng = SplitMix64::new(17);
        for boundary in [Boundary::Periodic, Boundary::Open] {
            for l in 2..=5 {
                let chain = SpinChain::sample(l, 0.8, boundary, &mut rng).unwrap();
                let dense = chain.dense_hamiltonian().unwrap();
                let oracle = kron_oracle(&chain);
                assert!(
                    dense.matrix().max_abs_diff(&oracle) < 1e-12,
                    "mismatch at l = {l}, {boundary:?}"
                );
            }
        }
    }

    #[test]
    fn sector_blocks_tile_the_dense_hamiltonian() {
        let chain = SpinChain::sample(4, 1.3, Boundary::Periodic, &mut SplitMix64::new(3)).unwrap();
        let dense = chain.dense_hamiltonian().unwrap();
        let dim = chain.hilbert_dim();
        let mut rebuilt = ComplexMatrix::zeros(dim, dim);
        let mut covered = 0usize;
        for w in 0..=chain.sites() {
            let (basis, block) = chain.sector_hamiltonian(w);
            covered += basis.len();
            for (a, &s) in basis.iter().enumerate() {
                for (b, &t) in basis.iter().enumerate() {
                    rebuilt.set(s, t, block.get(a, b));
                }
            }
        }
        assert_eq!(covered, dim);
        assert!(rebuilt.max_abs_diff(dense.matrix()) < 1e-13);
    }

    #[test]
    fn merged_spectrum_matches_dense_eigenvalues() {
        let chain = SpinChain::sample(5, 0.4, Boundary::Periodic, &mut SplitMix64::new(11)).unwrap();
        let merged = chain.spectra().unwrap().energies();
        let dense = chain.dense_hamiltonian().unwrap();
        let full = eig_hermitian(&dense, None).unwrap();
        assert_eq!(merged.len(), full.eigenvalues.len());
        for (a, b) in merged.iter().zip(&full.eigenvalues) {
            assert!((a - b).abs() < 1e-10, "sector vs dense spectrum");
        }
    }

    #[test]
    fn sector_dimensions_are_binomials() {
        let chain = SpinChain::new(6, 0.0, Boundary::Periodic, vec![0.0; 6]).unwrap();
        let dims: Vec<usize> = (0..=6).map(|w| chain.sector_basis(w).len()).collect();
        assert_eq!(dims, vec![1, 6, 15, 20, 15, 6, 1]);
    }

    #[test]
    fn single_site_window_is_a_field_term() {
        let chain =
            SpinChain::new(4, 2.0, Boundary::Periodic, vec![0.3, 0.5, -0.2, 0.9]).unwrap();
        let h = chain.reduced_hamiltonian(1, 1).unwrap();
        // 2.0 * 0.5 * sigma^z
        let expected = ComplexMatrix::diagonal(&[1.0, -1.0]);
        assert_eq!(h.matrix(), &expected);
    }

    #[test]
    fn two_site_window_is_one_bond_plus_two_fields() {
        let (f1, f2) = (0.7 * 0.5, 0.7 * (-0.4));
        let chain =
            SpinChain::new(5, 0.7, Boundary::Periodic, vec![0.1, 0.5, -0.4, 0.8, 0.0]).unwrap();
        let h = chain.reduced_hamiltonian(1, 2).unwrap();
        assert_eq!(h.rows, 4);
        let mut expected = ComplexMatrix::diagonal(&[
            1.0 + f1 + f2,
            -1.0 - f1 + f2,
            -1.0 + f1 - f2,
            1.0 - f1 - f2,
        ]);
        expected.set(1, 2, C64::new(2.0, 0.0));
        expected.set(2, 1, C64::new(2.0, 0.0));
        assert!(h.matrix().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn full_window_of_open_chain_is_the_whole_hamiltonian() {
        let chain = SpinChain::sample(5, 1.7, Boundary::Open, &mut SplitMix64::new(41)).unwrap();
        let reduced = chain.reduced_hamiltonian(0, 5).unwrap();
        let dense = chain.dense_hamiltonian().unwrap();
        assert_eq!(reduced.matrix(), dense.matrix());
    }

    #[test]
    fn window_hamiltonian_ignores_outside_fields() {
        let inside = [0.25, -0.75];
        let a = SpinChain::new(
            6,
            3.0,
            Boundary::Periodic,
            vec![0.9, inside[0], inside[1], 0.1, -0.3, 0.6],
        )
        .unwrap();
        let b = SpinChain::new(
            6,
            3.0,
            Boundary::Periodic,
            vec![-0.2, inside[0], inside[1], 0.8, 0.0, -1.0],
        )
        .unwrap();
        let ha = a.reduced_hamiltonian(1, 2).unwrap();
        let hb = b.reduced_hamiltonian(1, 2).unwrap();
        assert_eq!(ha.matrix(), hb.matrix());
    }

    #[test]
    fn window_hamiltonian_rejects_bad_regions() {
        let chain = SpinChain::new(4, 0.0, Boundary::Periodic, vec![0.0; 4]).unwrap();
        assert!(matches!(
            chain.reduced_hamiltonian(3, 2),
            Err(Error::BadRegion { .. })
        ));
        assert!(matches!(
            chain.reduced_hamiltonian(0, 0),
            Err(Error::BadRegion { .. })
        ));
    }

    #[test]
    fn window_reduction_matches_partial_trace() {
        let l = 4;
        let psi = random_pure_state(1 << l, &mut SplitMix64::new(23));
        let rho = psi.outer();
        for (anchor, width) in [(0usize, 2usize), (1, 2), (2, 2), (0, 1), (3, 1), (1, 3)] {
            let red = reduce_rank_one(&psi.0, l, anchor, width).unwrap();
            // window sites [anchor, anchor+width) sit at kron slots
            // [l-anchor-width, l-anchor)
            let keep: Vec<usize> = (l - anchor - width..l - anchor).collect();
            let oracle = partial_trace(&rho, &[2, 2, 2, 2], &keep).unwrap();
            assert!(
                red.max_abs_diff(&oracle) < 1e-13,
                "anchor {anchor} width {width}"
            );
        }
    }

    #[test]
    fn window_reduction_rejects_bad_regions() {
        let psi = vec![C64::new(0.5, 0.0); 16];
        assert!(matches!(
            reduce_rank_one(&psi, 4, 3, 2),
            Err(Error::BadRegion { .. })
        ));
        assert!(matches!(
            reduce_rank_one(&psi, 4, 0, 0),
            Err(Error::BadRegion { .. })
        ));
    }

    #[test]
    fn group_projection_reassembles_the_state() {
        let chain = SpinChain::sample(4, 0.9, Boundary::Periodic, &mut SplitMix64::new(31)).unwrap();
        let spectra = chain.spectra().unwrap();
        let psi = neel_variant_state(4).unwrap();
        let mut back = vec![C64::new(0.0, 0.0); 16];
        let mut weight = 0.0;
        for g in 0..spectra.groups.len() {
            let comp = spectra.project_onto_group(g, &psi.0);
            weight += comp.iter().map(|z| z.norm_sqr()).sum::<f64>();
            for (b, c) in back.iter_mut().zip(&comp) {
                *b += c;
            }
        }
        // group components resolve the identity on the state
        for (orig, got) in psi.0.iter().zip(&back) {
            assert!((orig - got).norm() < 1e-12);
        }
        assert!((weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn neel_variant_amplitudes() {
        let psi = neel_variant_state(4).unwrap();
        let w = 1.0 / 3.0f64.sqrt();
        // pattern 1010 (sites 1 and 3 down) = 10, flip = 5, last flip = 2
        for s in [10usize, 5, 2] {
            assert!((psi.0[s].re - w).abs() < 1e-15, "state {s}");
        }
        assert!((psi.norm() - 1.0).abs() < 1e-15);
        let others: f64 = (0..16)
            .filter(|s| ![10usize, 5, 2].contains(s))
            .map(|s| psi.0[s].norm())
            .sum();
        assert_eq!(others, 0.0);
    }

    #[test]
    fn neel_variant_magnetization_footprint() {
        // odd length: pattern carries M = +1, the other two branches M = -1
        let psi = neel_variant_state(5).unwrap();
        let m_of = |s: usize| 5.0 - 2.0 * (s.count_ones() as f64);
        let weight_at = |m: f64| -> f64 {
            psi.0
                .iter()
                .enumerate()
                .filter(|(s, _)| m_of(*s) == m)
                .map(|(_, z)| z.norm_sqr())
                .sum()
        };
        assert!(weight_at(1.0) >= 0.3);
        assert!(weight_at(-1.0) >= 0.3);
        let mean_m: f64 = psi
            .0
            .iter()
            .enumerate()
            .map(|(s, z)| m_of(s) * z.norm_sqr())
            .sum();
        assert!((-1.0..=1.0).contains(&mean_m));
        assert!(matches!(
            neel_variant_state(2),
            Err(Error::BadChainLength { min: 3, .. })
        ));
    }

    #[test]
    fn chain_validation_rejects_bad_input() {
        assert!(matches!(
            SpinChain::new(1, 0.0, Boundary::Periodic, vec![0.0]),
            Err(Error::BadChainLength { .. })
        ));
        assert!(matches!(
            SpinChain::new(15, 0.0, Boundary::Periodic, vec![0.0; 15]),
            Err(Error::BadChainLength { .. })
        ));
        assert!(matches!(
            SpinChain::new(4, -1.0, Boundary::Periodic, vec![0.0; 4]),
            Err(Error::BadDisorderStrength { .. })
        ));
        assert!(SpinChain::new(4, 1.0, Boundary::Periodic, vec![0.0; 3]).is_err());
        assert!(SpinChain::new(4, 1.0, Boundary::Periodic, vec![0.0, 0.0, 0.0, 1.5]).is_err());
    }

    #[test]
    fn realizations_are_reproducible_per_index() {
        let spec = ChainSpec {
            sites: 8,
            delta: 2.0,
            boundary: Boundary::Periodic,
            seed: 77,
        };
        let a = spec.realize(4).unwrap();
        let b = spec.realize(4).unwrap();
        assert_eq!(a.fields(), b.fields());
        assert!(a.fields().iter().all(|h| h.abs() <= 1.0));
        let c = spec.realize(5).unwrap();
        assert_ne!(a.fields(), c.fields());
        let other_seed = ChainSpec { seed: 78, ..spec };
        assert_ne!(a.fields(), other_seed.realize(4).unwrap().fields());
    }
}
