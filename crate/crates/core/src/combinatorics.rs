//! Exact combinatorics: binomial coefficients, lexicographic combinations,
//! bounded compositions and hypergeometric allocation weights.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact `C(n, k)` via the multiplicative formula.
pub fn binomial(n: u64, k: u64) -> Result<BigUint> {
    if k > n {
        return Err(Error::Domain(format!("C({n}, {k}) requires k <= n")));
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) after each step.
        acc *= n - i;
        acc /= i + 1;
    }
    Ok(acc)
}

/// `C(n, k)` as `u64` when it fits.
pub fn binomial_u64(n: u64, k: u64) -> Option<u64> {
    binomial(n, k).ok()?.to_u64()
}

/// Lexicographic iterator over the `k`-subsets of `0..n`.
#[derive(Debug, Clone)]
pub struct Combinations {
    n: usize,
    current: Vec<usize>,
    done: bool,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Self {
        Self { n, current: (0..k).collect(), done: k > n }
    }

    /// Starts at the combination of lexicographic rank `rank`.
    pub fn starting_at(n: usize, k: usize, rank: u64) -> Self {
        match unrank_combination(n, k, rank) {
            Some(current) => Self { n, current, done: false },
            None => Self { n, current: Vec::new(), done: true },
        }
    }

    /// Advances `current` in place; returns false once exhausted.
    fn advance(&mut self) -> bool {
        let k = self.current.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.current[i] < self.n - k + i {
                self.current[i] += 1;
                for j in i + 1..k {
                    self.current[j] = self.current[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }

    /// Visits up to `limit` combinations, stopping early at exhaustion.
    pub fn for_each_n(&mut self, limit: u64, mut f: impl FnMut(&[usize])) {
        let mut visited = 0;
        while !self.done && visited < limit {
            f(&self.current);
            visited += 1;
            if !self.advance() {
                self.done = true;
            }
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        if !self.advance() {
            self.done = true;
        }
        Some(out)
    }
}

/// The `rank`-th `k`-subset of `0..n` in lexicographic order.
pub fn unrank_combination(n: usize, k: usize, mut rank: u64) -> Option<Vec<usize>> {
    if k > n {
        return None;
    }
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for slot in 0..k {
        let remaining = k - slot - 1;
        loop {
            if next >= n {
                return None;
            }
            // Number of combinations whose element at `slot` is `next`.
            let count = binomial_u64((n - next - 1) as u64, remaining as u64)?;
            if rank < count {
                out.push(next);
                next += 1;
                break;
            }
            rank -= count;
            next += 1;
        }
    }
    if rank == 0 { Some(out) } else { None }
}

/// All `(f_1..f_L)` with `0 <= f_l <= caps[l]` and `sum f_l = total`, in
/// lexicographic order.
pub fn compositions(caps: &[usize], total: usize) -> Vec<Vec<usize>> {
    fn go(caps: &[usize], rest: &[usize], total: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        match caps.split_first() {
            None => {
                if total == 0 {
                    out.push(cur.clone());
                }
            }
            Some((&cap, tail)) => {
                let tail_cap: usize = rest[1..].iter().sum();
                let lo = total.saturating_sub(tail_cap);
                for f in lo..=cap.min(total) {
                    cur.push(f);
                    go(tail, &rest[1..], total - f, cur, out);
                    cur.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    if total <= caps.iter().sum() {
        go(caps, caps, total, &mut Vec::with_capacity(caps.len()), &mut out);
    }
    out
}

/// Probability that a uniform `sum(alloc)`-subset of `sum(caps)` neurons has
/// `alloc[l]` members in layer `l`: `prod C(N_l, f_l) / C(N, f)`.
pub fn hypergeometric_weight(caps: &[usize], alloc: &[usize]) -> Result<f64> {
    if caps.len() != alloc.len() {
        return Err(Error::Shape(format!(
            "allocation has {} layers, expected {}",
            alloc.len(),
            caps.len()
        )));
    }
    let mut num = BigUint::one();
    for (&n, &f) in caps.iter().zip(alloc) {
        num *= binomial(n as u64, f as u64)?;
    }
    let n: usize = caps.iter().sum();
    let f: usize = alloc.iter().sum();
    let den = binomial(n as u64, f as u64)?;
    if num.is_zero() {
        return Ok(0.0);
    }
    let ratio = BigRational::new(num.into(), den.into());
    ratio
        .to_f64()
        .ok_or_else(|| Error::Domain("hypergeometric weight not representable".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Pascal-triangle oracle, independent of the multiplicative formula.
    fn pascal(n: usize, k: usize) -> BigUint {
        let mut row = vec![BigUint::one()];
        for _ in 0..n {
            let mut next = vec![BigUint::one(); row.len() + 1];
            for i in 1..row.len() {
                next[i] = &row[i - 1] + &row[i];
            }
            row = next;
        }
        row[k].clone()
    }

    #[test]
    fn small_binomials() {
        assert_eq!(binomial(4, 2).unwrap(), BigUint::from(6u32));
        assert_eq!(binomial(48, 5).unwrap(), BigUint::from(1_712_304u32));
        assert_eq!(binomial(0, 0).unwrap(), BigUint::one());
        assert!(matches!(binomial(3, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn matches_pascal() {
        for n in 0..60 {
            for k in 0..=n {
                assert_eq!(binomial(n as u64, k as u64).unwrap(), pascal(n, k), "C({n},{k})");
            }
        }
        assert_eq!(binomial(150, 50).unwrap(), pascal(150, 50));
    }

    #[test]
    fn combinations_are_lexicographic_and_complete() {
        let all: Vec<_> = Combinations::new(5, 3).collect();
        assert_eq!(all.len(), 10);
        assert_eq!(all[0], vec![0, 1, 2]);
        assert_eq!(all[9], vec![2, 3, 4]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(Combinations::new(4, 0).collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
        assert_eq!(Combinations::new(2, 3).count(), 0);
    }

    #[test]
    fn unrank_agrees_with_iteration() {
        for (n, k) in [(6, 2), (7, 3), (5, 5), (5, 0), (9, 4)] {
            for (rank, c) in Combinations::new(n, k).enumerate() {
                assert_eq!(unrank_combination(n, k, rank as u64).unwrap(), c);
                let mut it = Combinations::starting_at(n, k, rank as u64);
                assert_eq!(it.next().unwrap(), c);
            }
            let total = binomial_u64(n as u64, k as u64).unwrap();
            assert!(unrank_combination(n, k, total).is_none());
        }
    }

    #[test]
    fn for_each_n_stops_at_limit() {
        let mut it = Combinations::starting_at(6, 2, 3);
        let mut seen = Vec::new();
        it.for_each_n(4, |c| seen.push(c.to_vec()));
        let expected: Vec<_> = Combinations::new(6, 2).skip(3).take(4).collect();
        assert_eq!(seen, expected);
    }

    #[test]
    fn compositions_enumerate_bounded_splits() {
        assert_eq!(compositions(&[2, 2], 1), vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(compositions(&[1, 3], 4), vec![vec![1, 3]]);
        assert!(compositions(&[1, 1], 3).is_empty());
        assert_eq!(compositions(&[4], 2), vec![vec![2]]);
        let c = compositions(&[3, 2, 4], 4);
        assert!(c.iter().all(|a| a.iter().sum::<usize>() == 4 && a[0] <= 3 && a[1] <= 2 && a[2] <= 4));
        // Brute-force count.
        let mut brute = 0;
        for a in 0..=3 {
            for b in 0..=2 {
                for d in 0..=4 {
                    if a + b + d == 4 {
                        brute += 1;
                    }
                }
            }
        }
        assert_eq!(c.len(), brute);
    }

    #[test]
    fn hypergeometric_weights_sum_to_one() {
        let caps = [3, 2, 4];
        for total in 0..=9 {
            let s: f64 = compositions(&caps, total)
                .iter()
                .map(|a| hypergeometric_weight(&caps, a).unwrap())
                .sum();
            assert!((s - 1.0).abs() < 1e-12, "total {total}: {s}");
        }
        assert_eq!(hypergeometric_weight(&[2, 2], &[1, 0]).unwrap(), 0.5);
    }
}
