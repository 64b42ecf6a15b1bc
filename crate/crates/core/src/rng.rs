//! Deterministic random number generation.
//!
//! All stochastic sampling in this crate flows through [`SplitMix64`] so that
//! every result is reproducible from a single `u64` seed.  The integer and
//! uniform-float streams are bit-exact across platforms (pure integer
//! arithmetic plus one multiply by 2^-53).  Gaussian variates are produced by
//! Box–Muller on those uniforms.
//!
//! Parallel work derives one child seed per task index through
//! [`derive_seed`]; results are therefore independent of how tasks are
//! scheduled across workers.

/// splitmix64 finalizer: the standard mixing constants.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for task `(a, b)` under `master`.
///
/// Used by every parallel loop in the crate: the derived stream depends only
/// on the indices, never on worker count or scheduling order.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    mix64(master ^ mix64(a ^ mix64(b)))
}

/// Sequential splitmix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    /// Cached second Box–Muller variate.
    spare_normal: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 {
            state: seed,
            spare_normal: None,
        }
    }

    /// Child generator for task `index`; see [`derive_seed`].
    pub fn derive(&self, index: u64) -> Self {
        SplitMix64::new(derive_seed(self.state, index, 0))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform on [0, 1) with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on [lo, hi).
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n).
    #[inline]
    pub fn next_below(&mut self, n: u64) -> u64 {
        // Multiply-shift reduction; the ~2^-64 modulo bias is irrelevant at
        // the sample counts used here and keeps the stream platform-exact.
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal variate (Box–Muller, pairs cached).
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u in (0, 1] so the log is finite.
        let u = 1.0 - self.next_f64();
        let v = self.next_f64();
        let r = (-2.0 * u.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * v;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Exponential variate with the given rate.
    pub fn next_exponential(&mut self, rate: f64) -> f64 {
        let u = 1.0 - self.next_f64();
        -u.ln() / rate
    }

    /// Uniform point on the probability simplex of dimension `k`
    /// (flat Dirichlet), via normalized exponentials.
    pub fn next_simplex(&mut self, k: usize) -> Vec<f64> {
        let mut w: Vec<f64> = (0..k).map(|_| self.next_exponential(1.0)).collect();
        let total: f64 = w.iter().sum();
        for x in &mut w {
            *x /= total;
        }
        w
    }
}
