//! Log-space combinatorics and compensated summation.
//!
//! Type-class weights over n-fold product states involve multinomials far
//! beyond f64 range (n in the thousands), so everything multiplicative lives
//! in natural-log space and only differences of comparable magnitude are
//! exponentiated.

/// Compensated (Kahan) accumulator; keeps absolute error near one ulp of the
/// running sum regardless of term count.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Table of ln(k!) for k = 0..=n_max, built by compensated summation of ln k.
#[derive(Debug, Clone)]
pub struct LnFactorials {
    table: Vec<f64>,
}

impl LnFactorials {
    pub fn up_to(n_max: usize) -> Self {
        let mut table = Vec::with_capacity(n_max + 1);
        let mut acc = KahanSum::new();
        table.push(0.0);
        for k in 1..=n_max {
            acc.add((k as f64).ln());
            table.push(acc.value());
        }
        Self { table }
    }

    pub fn ln_factorial(&self, k: usize) -> f64 {
        self.table[k]
    }

    /// ln C(n, k).
    pub fn ln_binomial(&self, n: usize, k: usize) -> f64 {
        assert!(k <= n, "binomial with k > n");
        self.table[n] - self.table[k] - self.table[n - k]
    }

    /// ln of the multinomial coefficient n! / prod(parts!); parts must sum
    /// to n.
    pub fn ln_multinomial(&self, n: usize, parts: &[usize]) -> f64 {
        debug_assert_eq!(parts.iter().sum::<usize>(), n);
        let mut out = self.table[n];
        for &p in parts {
            out -= self.table[p];
        }
        out
    }

    pub fn capacity(&self) -> usize {
        self.table.len() - 1
    }
}

/// Exact C(n, k) in u128, None iff the result overflows.
pub fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k) as usize;
    if k == 0 {
        return Some(1);
    }
    // Pascal recurrence restricted to columns 0..=k.  With k <= n/2 every
    // intermediate entry is bounded by the final C(n, k), so checked_add
    // fails exactly when the result itself does not fit.
    let mut row = vec![0u128; k + 1];
    row[0] = 1;
    for m in 1..=n {
        let hi = k.min(m as usize);
        for j in (1..=hi).rev() {
            row[j] = row[j].checked_add(row[j - 1])?;
        }
    }
    Some(row[k])
}

/// Number of weak compositions of n into d parts, C(n + d - 1, d - 1).
pub fn count_compositions(n: u64, d: u64) -> Option<u128> {
    if d == 0 {
        return Some(if n == 0 { 1 } else { 0 });
    }
    binomial_u128(n + d - 1, d - 1)
}

/// Iterator over all weak compositions (n_1, ..., n_d) of n, lexicographic
/// descending from (n, 0, ..., 0) to (0, ..., 0, n).
pub struct Compositions {
    current: Vec<usize>,
    started: bool,
    done: bool,
}

pub fn compositions(n: usize, d: usize) -> Compositions {
    let mut current = vec![0usize; d];
    let done = d == 0 && n > 0;
    if d > 0 {
        current[0] = n;
    }
    Compositions {
        current,
        started: false,
        done,
    }
}

impl Iterator for Compositions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(self.current.clone());
        }
        let d = self.current.len();
        // Rightmost movable unit among the first d-1 slots.
        let Some(i) = (0..d.saturating_sub(1)).rev().find(|&i| self.current[i] > 0) else {
            self.done = true;
            return None;
        };
        self.current[i] -= 1;
        let moved: usize = 1 + self.current[i + 1..].iter().sum::<usize>();
        self.current[i + 1..].iter_mut().for_each(|x| *x = 0);
        self.current[i + 1] = moved;
        Some(self.current.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_factorial_matches_direct_product() {
        let t = LnFactorials::up_to(20);
        let mut fact = 1.0f64;
        for k in 1..=20 {
            fact *= k as f64;
            assert!((t.ln_factorial(k) - fact.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn multinomial_small_case() {
        let t = LnFactorials::up_to(10);
        // 4! / (2! 1! 1!) = 12
        assert!((t.ln_multinomial(4, &[2, 1, 1]).exp() - 12.0).abs() < 1e-10);
    }

    #[test]
    fn binomial_exact_values() {
        assert_eq!(binomial_u128(10, 3), Some(120));
        assert_eq!(binomial_u128(0, 0), Some(1));
        assert_eq!(binomial_u128(5, 9), Some(0));
        assert_eq!(
            binomial_u128(128, 64),
            Some(23951146041928082866135587776380551750)
        );
        assert_eq!(binomial_u128(1000, 500), None); // overflows u128
    }

    #[test]
    fn composition_enumeration_is_complete_and_distinct() {
        let all: Vec<Vec<usize>> = compositions(5, 3).collect();
        assert_eq!(all.len() as u128, count_compositions(5, 3).unwrap());
        for c in &all {
            assert_eq!(c.iter().sum::<usize>(), 5);
        }
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), all.len());
    }

    #[test]
    fn composition_order_starts_and_ends_correctly() {
        let all: Vec<Vec<usize>> = compositions(2, 3).collect();
        assert_eq!(all.first().unwrap(), &vec![2, 0, 0]);
        assert_eq!(all.last().unwrap(), &vec![0, 0, 2]);
        assert_eq!(all.len(), 6);
    }

    #[test]
    fn single_part_and_empty_edge_cases() {
        let all: Vec<Vec<usize>> = compositions(4, 1).collect();
        assert_eq!(all, vec![vec![4]]);
        let none: Vec<Vec<usize>> = compositions(3, 0).collect();
        assert!(none.is_empty());
        let empty: Vec<Vec<usize>> = compositions(0, 0).collect();
        assert_eq!(empty, vec![Vec::<usize>::new()]);
    }

    #[test]
    fn kahan_survives_magnitude_spread() {
        let mut k = KahanSum::new();
        k.add(1e16);
        for _ in 0..10_000 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.value(), 10_000.0);
    }

    #[test]
    fn ln_binomial_consistent_with_exact() {
        let t = LnFactorials::up_to(60);
        for n in [10usize, 30, 60] {
            for k in [0usize, 1, n / 2, n] {
                let exact = binomial_u128(n as u64, k as u64).unwrap() as f64;
                assert!((t.ln_binomial(n, k) - exact.ln()).abs() < 1e-9 * exact.ln().abs().max(1.0));
            }
        }
    }
}
