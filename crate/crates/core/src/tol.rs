//! Numerical tolerances used across the crate.
//!
//! Each constant documents the contract it enforces; functions take these as
//! defaults so tests and callers agree on one set of numbers.

/// Hermiticity: max |A[i,j] - conj(A[j,i])| allowed, relative to max |A[i,j]|.
pub const HERMITICITY_REL: f64 = 1e-12;

/// Density matrices: |trace - 1| allowed.
pub const DENSITY_TRACE: f64 = 1e-10;

/// Density matrices: smallest eigenvalue may dip this far below zero.
pub const DENSITY_EIG_FLOOR: f64 = -1e-10;

/// Spectral decompositions: ||V L V^dag - A||_F allowed, relative to ||A||_F.
pub const SPECTRAL_RECONSTRUCTION_REL: f64 = 1e-10;

/// Default degeneracy clustering width, relative to the spectral range.
pub const DEGENERACY_REL: f64 = 1e-10;

/// Max-divergence support handling: sigma eigenvalues below this are zero.
pub const SUPPORT_TRUNCATION: f64 = 1e-10;

/// Max-divergence support handling: rho mass allowed outside sigma's support.
pub const RHO_LEAKAGE: f64 = 1e-9;

/// Smooth max-divergence: max |[rho, sigma]| entry allowed before the pair
/// is rejected as non-commuting.
pub const COMMUTATION: f64 = 1e-9;

/// Smooth max-divergence: bisection width at which lambda is converged.
pub const SMOOTH_LAMBDA: f64 = 1e-9;
/// Max off-diagonal magnitude allowed when an operation requires its inputs
/// diagonal in a given eigenbasis.
pub const DIAGONALITY: f64 = 1e-10;
/// Slack when comparing the uniform-swap channel's distance against the
/// fixed-weight optimum or against sampled competitor channels.
pub const OPTIMALITY_SLACK: f64 = 1e-9;

/// Energy conservation: ||[U, H]||_F allowed, relative to ||H||_F.
pub const ENERGY_CONSERVE_REL: f64 = 1e-9;

/// Random-unitary channels: ||U U^dag - I||_F allowed per unitary.
pub const UNITARITY: f64 = 1e-10;

/// Random-unitary channels: |sum p_k - 1| allowed.
pub const PROB_SUM: f64 = 1e-12;

/// Kronecker products: largest result dimension constructed by default.
pub const KRON_MAX_DIM: usize = 1 << 16;

/// Dense-operator memory budget (bytes) for chain spectra.  Sized so the
/// 14-site chain fits: all magnetization-sector eigenbases together hold
/// C(28, 14) complex entries (~642 MB) and the largest single sector adds
/// a comparable transient during its eigensolve.
pub const DENSE_BUDGET_BYTES: usize = 1536 << 20;

/// Poisson series: default neglected tail mass.
pub const SERIES_TAIL: f64 = 1e-10;

/// Poisson series: default cap on the truncation order.
pub const SERIES_CAP: usize = 10_000;

/// Convex-split verification: slack added to the analytic bound.
pub const CONVEX_SPLIT_SLACK: f64 = 1e-9;

/// Inverse-temperature matching: initial bracket half-width.
pub const BETA_BRACKET: f64 = 64.0;

/// Inverse-temperature matching: |E(beta) - target| convergence tolerance.
pub const BETA_TOL: f64 = 1e-8;

/// Inverse-temperature matching: iteration cap.
pub const BETA_MAX_ITERS: usize = 200;

/// Fuchs-van de Graaf check: slack on both inequalities.
pub const FUCHS_SLACK: f64 = 1e-9;

/// Energy subspace condition: default total-energy collision tolerance.
pub const ESC_ENERGY: f64 = 1e-9;

/// Energy subspace condition: cap on enumerated composition pairs.
pub const ESC_PAIR_BUDGET: u128 = 10_000_000;

/// Ensemble runner: abort when more than this percentage of items fail.
pub const FAILURE_LIMIT_PERCENT: u8 = 20;
