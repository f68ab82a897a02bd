//! Factoradic permutation unranking and the compact bit-string encoding.
//!
//! Bit-string index `k` of a `q`-qubit register encodes the `k`-th
//! lexicographic permutation of `0..V` whenever `k < V!`. The remaining
//! `2^q - V!` indices are the tail: they encode nothing.

use std::fmt;

use crate::error::{Error, Result};

/// Largest order whose factorial fits in a `u64`.
pub const MAX_ORDER: usize = 20;

/// A bijection on `0..n`, stored as the image of each position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    /// Validates that `mapping` is a bijection on `0..mapping.len()`.
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let n = mapping.len();
        let mut seen = vec![false; n];
        for &x in &mapping {
            if x >= n {
                return Err(Error::InvalidPermutation(format!(
                    "image {x} out of range for length {n}"
                )));
            }
            if std::mem::replace(&mut seen[x], true) {
                return Err(Error::InvalidPermutation(format!("image {x} repeated")));
            }
        }
        Ok(Permutation(mapping))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &x) in self.0.iter().enumerate() {
            inv[x] = i;
        }
        Permutation(inv)
    }

    /// Advances to the lexicographic successor in place. Returns `false`
    /// (leaving the permutation untouched) when already at the last one.
    pub fn advance(&mut self) -> bool {
        next_lexicographic(&mut self.0)
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        f.write_str("]")
    }
}

fn next_lexicographic(items: &mut [usize]) -> bool {
    let n = items.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && items[i - 1] >= items[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while items[j] <= items[i - 1] {
        j -= 1;
    }
    items.swap(i - 1, j);
    items[i..].reverse();
    true
}

pub fn factorial(n: usize) -> Result<u64> {
    if n > MAX_ORDER {
        return Err(Error::FactorialOverflow { n });
    }
    Ok((1..=n as u64).product())
}

/// Smallest `q` with `2^q >= V!`.
pub fn qubit_count(vertices: usize) -> Result<u32> {
    let f = factorial(vertices)?;
    // ceil(log2(f)) for f >= 1
    Ok(if f <= 1 { 0 } else { 64 - (f - 1).leading_zeros() })
}

/// Unranks `k` into the `k`-th permutation of `0..n` in lexicographic order.
pub fn kth_permutation(n: usize, k: u64) -> Result<Permutation> {
    let total = factorial(n)?;
    if k >= total {
        return Err(Error::InfeasibleIndex { index: k, n });
    }
    let mut items: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n);
    let mut rest = k;
    let mut f = total;
    for size in (1..=n).rev() {
        f /= size as u64;
        let digit = (rest / f) as usize;
        rest %= f;
        out.push(items.remove(digit));
    }
    Ok(Permutation(out))
}

/// `true` iff `k` indexes a permutation of `vertices` items.
pub fn is_feasible(k: u64, vertices: usize) -> bool {
    match factorial(vertices) {
        Ok(f) => k < f,
        // every u64 is below V! once V > 20
        Err(_) => true,
    }
}

/// Size of the infeasible tail of the compact encoding for a given `V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailStats {
    pub vertices: usize,
    pub feasible: u64,
    pub qubits: u32,
    pub state_size: u64,
    pub tail_count: u64,
    pub tail_over_feasible: f64,
}

pub fn tail_stats(vertices: usize) -> Result<TailStats> {
    if vertices < 2 {
        return Err(Error::InvalidArgument(format!(
            "tail statistics need V >= 2, got {vertices}"
        )));
    }
    let feasible = factorial(vertices)?;
    let qubits = qubit_count(vertices)?;
    let state_size = 1u64 << qubits;
    let tail_count = state_size - feasible;
    Ok(TailStats {
        vertices,
        feasible,
        qubits,
        state_size,
        tail_count,
        tail_over_feasible: tail_count as f64 / feasible as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    /// Independent lexicographic enumeration by recursive selection.
    fn enumerate_lex(n: usize) -> Vec<Vec<usize>> {
        fn rec(prefix: &mut Vec<usize>, left: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if left.is_empty() {
                out.push(prefix.clone());
                return;
            }
            for idx in 0..left.len() {
                let x = left.remove(idx);
                prefix.push(x);
                rec(prefix, left, out);
                prefix.pop();
                left.insert(idx, x);
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut (0..n).collect(), &mut out);
        out
    }

    #[test]
    fn factorial_values() {
        assert_eq!(factorial(0).unwrap(), 1);
        assert_eq!(factorial(10).unwrap(), 3_628_800);
        assert_eq!(factorial(12).unwrap(), 479_001_600);
        assert_eq!(factorial(20).unwrap(), 2_432_902_008_176_640_000);
        assert!(matches!(factorial(21), Err(Error::FactorialOverflow { n: 21 })));
    }

    #[test]
    fn qubit_counts() {
        assert_eq!(qubit_count(2).unwrap(), 1);
        assert_eq!(qubit_count(3).unwrap(), 3);
        assert_eq!(qubit_count(4).unwrap(), 5);
        assert_eq!(qubit_count(8).unwrap(), 16);
        assert_eq!(qubit_count(10).unwrap(), 22);
        assert_eq!(qubit_count(12).unwrap(), 29);
        for v in 2..=MAX_ORDER {
            let q = qubit_count(v).unwrap();
            let f = factorial(v).unwrap() as u128;
            assert!(1u128 << (q - 1) < f && f <= 1u128 << q, "V={v}");
        }
    }

    #[test]
    fn unranking_matches_enumeration() {
        for n in 0..=6 {
            let expected = enumerate_lex(n);
            for (k, perm) in expected.iter().enumerate() {
                assert_eq!(kth_permutation(n, k as u64).unwrap().as_slice(), &perm[..]);
            }
        }
        assert_eq!(kth_permutation(3, 5).unwrap().as_slice(), &[2, 1, 0]);
        assert_eq!(kth_permutation(4, 0).unwrap().as_slice(), &[0, 1, 2, 3]);
        let last = kth_permutation(10, factorial(10).unwrap() - 1).unwrap();
        assert_eq!(last.as_slice(), &[9, 8, 7, 6, 5, 4, 3, 2, 1, 0]);
        assert!(matches!(
            kth_permutation(3, 6),
            Err(Error::InfeasibleIndex { index: 6, n: 3 })
        ));
    }

    #[test]
    fn unranking_is_bijective() {
        for n in 1..=7 {
            let total = factorial(n).unwrap();
            let set: HashSet<_> = (0..total).map(|k| kth_permutation(n, k).unwrap()).collect();
            assert_eq!(set.len() as u64, total);
        }
    }

    #[test]
    fn advance_walks_lexicographic_order() {
        let mut p = Permutation::identity(5);
        let mut k = 0u64;
        loop {
            assert_eq!(p, kth_permutation(5, k).unwrap());
            k += 1;
            if !p.advance() {
                break;
            }
        }
        assert_eq!(k, 120);
    }

    #[test]
    fn feasibility() {
        assert!(is_feasible(0, 3));
        assert!(!is_feasible(40320, 8));
        assert!(is_feasible(40319, 8));
        let q = qubit_count(10).unwrap();
        let feasible = (0..1u64 << q).filter(|&k| is_feasible(k, 10)).count();
        assert_eq!(feasible, 3_628_800);
    }

    #[test]
    fn tail_table_rows() {
        let t = tail_stats(2).unwrap();
        assert_eq!((t.tail_count, t.tail_over_feasible), (0, 0.0));
        let t = tail_stats(8).unwrap();
        assert_eq!((t.qubits, t.state_size, t.tail_count), (16, 65536, 25216));
        assert!((t.tail_over_feasible - 0.6254).abs() < 1e-4);
        let t = tail_stats(10).unwrap();
        assert_eq!((t.qubits, t.state_size, t.tail_count), (22, 4_194_304, 565_504));
        assert!((t.tail_over_feasible - 0.1558).abs() < 1e-4);
        let t = tail_stats(12).unwrap();
        assert_eq!((t.qubits, t.state_size, t.tail_count), (29, 536_870_912, 57_869_312));
        // 4! = 24 needs 5 qubits, leaving 8 tail strings
        let t = tail_stats(4).unwrap();
        assert_eq!((t.feasible, t.qubits, t.tail_count), (24, 5, 8));
        assert!(tail_stats(1).is_err());
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::new(vec![2, 0, 1]).is_ok());
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3]).is_err());
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        assert_eq!(p.inverse().as_slice(), &[1, 2, 0]);
    }

    proptest! {
        #[test]
        fn unranking_preserves_order(n in 1usize..=9, a in any::<u64>(), b in any::<u64>()) {
            let total = factorial(n).unwrap();
            let (a, b) = (a % total, b % total);
            let (pa, pb) = (kth_permutation(n, a).unwrap(), kth_permutation(n, b).unwrap());
            prop_assert_eq!(a.cmp(&b), pa.cmp(&pb));
        }
    }
}
