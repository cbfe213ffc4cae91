//! Exact Catalan combinatorics: numbers, m-fold convolutions, the capacity
//! `M(B,u)`, and ranking bijections for binary trees and merge patterns.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision nonnegative integer used for all exact counts.
pub type BigCount = BigUint;

/// Largest `U` accepted by [`mfold_convolution_bruteforce`].
pub const BRUTEFORCE_MAX_U: u64 = 24;

/// Default multiplicative slack applied to the asymptotic envelopes of `M(B,u)`.
pub const DEFAULT_C_SLACK: f64 = 2.0;

/// `binom(n, k)`, zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigCount {
    if k > n {
        return BigCount::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigCount::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `binom(n, k)` over signed arguments, zero outside `0 <= k <= n`.
pub fn binomial_i(n: i64, k: i64) -> BigCount {
    if n < 0 || k < 0 || k > n {
        BigCount::zero()
    } else {
        binomial(n as u64, k as u64)
    }
}

/// The x-th Catalan number `binom(2x, x) / (x + 1)`.
pub fn catalan_number(x: u64) -> BigCount {
    binomial(2 * x, x) / (x + 1)
}

/// Closed form of the m-fold Catalan convolution,
/// `sum_{i_1+..+i_m=U, i_j>=1} prod C_{i_j-1} = m/(2U-m) * binom(2U-m, U)`.
pub fn mfold_convolution(m: u64, u: u64) -> Result<BigCount> {
    if m == 0 || u == 0 {
        return Err(Error::Range(format!(
            "mfold_convolution needs m, U >= 1 (got m={m}, U={u})"
        )));
    }
    if m > u {
        return Err(Error::Range(format!(
            "mfold_convolution needs m <= U (got m={m}, U={u})"
        )));
    }
    Ok(mfold(m, u))
}

/// Total version of the convolution: 0 when `m > U`, and `mfold(0, 0) = 1`.
pub fn mfold(m: u64, u: u64) -> BigCount {
    if m > u {
        return BigCount::zero();
    }
    if m == u {
        return BigCount::one();
    }
    let t = 2 * u - m;
    binomial(t, u) * m / t
}

/// Enumerates every composition of `U` into `m` positive parts.
pub fn mfold_convolution_bruteforce(m: u64, u: u64) -> Result<BigCount> {
    if m == 0 || m > u {
        return Err(Error::Range(format!(
            "bruteforce needs 1 <= m <= U (got m={m}, U={u})"
        )));
    }
    if u > BRUTEFORCE_MAX_U {
        return Err(Error::Range(format!(
            "bruteforce budget is U <= {BRUTEFORCE_MAX_U}"
        )));
    }
    let cat: Vec<BigCount> = (0..u).map(catalan_number).collect();
    // table[j][s]: sum over compositions of s into j parts
    let mut prev = vec![BigCount::zero(); (u + 1) as usize];
    prev[0] = BigCount::one();
    for _ in 0..m {
        let mut next = vec![BigCount::zero(); (u + 1) as usize];
        for (s, val) in prev.iter().enumerate() {
            if val.is_zero() {
                continue;
            }
            for part in 1..=(u as usize - s) {
                next[s + part] += val * &cat[part - 1];
            }
        }
        prev = next;
    }
    Ok(prev[u as usize].clone())
}

/// `M(B,u)`: weighted count of u-subsets of `[B]`, each weighted by the
/// product of `C_{gap-1}` over its `u+1` gaps.
pub fn capacity_m(b: u64, u: u64) -> Result<BigCount> {
    if u > b {
        return Err(Error::Range(format!(
            "capacity_M needs u <= B (got B={b}, u={u})"
        )));
    }
    Ok(mfold(u + 1, b + 1))
}

/// Same quantity computed by direct enumeration of all u-subsets (small B only).
pub fn capacity_m_enumerated(b: u64, u: u64) -> BigCount {
    fn rec(pos: u64, left: u64, b: u64, cat: &[BigCount], acc: &BigCount, out: &mut BigCount) {
        if left == 0 {
            *out += acc * &cat[(b + 1 - pos - 1) as usize];
            return;
        }
        for next in (pos + 1)..=(b + 1 - left) {
            let w = acc * &cat[(next - pos - 1) as usize];
            rec(next, left - 1, b, cat, &w, out);
        }
    }
    let cat: Vec<BigCount> = (0..=b + 1).map(catalan_number).collect();
    let mut out = BigCount::zero();
    rec(0, u, b, &cat, &BigCount::one(), &mut out);
    out
}

/// Largest `B` checked by [`identity_mismatches`] against subset enumeration.
pub const ENUMERATION_MAX_B: u64 = 16;
/// Largest `n` whose onebit label counts are summed against `C_n`.
pub const LABEL_SUM_MAX_N: u64 = 12;

/// Counts failures of the exact identities: the closed m-fold convolution
/// against composition enumeration for `1 <= m <= U <= max_u`, `M(B,u)`
/// against subset enumeration for `B <= 16`, and label-count sums against
/// `C_n` for `n <= 12`.
pub fn identity_mismatches(max_u: u64) -> Result<u64> {
    let mut bad = 0;
    for u in 1..=max_u {
        for m in 1..=u {
            bad += u64::from(mfold_convolution(m, u)? != mfold_convolution_bruteforce(m, u)?);
        }
    }
    for b in 0..=ENUMERATION_MAX_B {
        for u in 0..=b {
            bad += u64::from(capacity_m(b, u)? != capacity_m_enumerated(b, u));
        }
    }
    for n in 1..=LABEL_SUM_MAX_N {
        bad += u64::from(crate::onebit::total_count(n) != catalan_number(n));
    }
    Ok(bad)
}

/// Base-2 logarithm of a big integer, accurate to f64 precision.
pub fn log2_big(x: &BigCount) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().unwrap() as f64).log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap();
    (top as f64).log2() + shift as f64
}

/// Envelopes `(lo, hi)` for `log2 M(B,u)` with multiplicative slack `c_slack`.
///
/// `lo` is `-inf` when the lower-bound branch does not apply
/// (`u^3 > B^2` or `B < 2`).
pub fn log2_bounds_m(b: u64, u: u64, c_slack: f64) -> Result<(f64, f64)> {
    if u > b {
        return Err(Error::Range(format!(
            "log2_bounds_M needs u <= B (got B={b}, u={u})"
        )));
    }
    if b == 0 {
        return Ok((0.0, 0.0));
    }
    let bf = b as f64;
    let uf = u as f64;
    let slack = c_slack.log2();
    let lower_ok = b >= 2 && (u as u128).pow(3) <= (b as u128).pow(2);
    if u == 0 {
        let base = 2.0 * bf - 0.5 * std::f64::consts::PI.log2() - 1.5 * bf.log2();
        let lo = if lower_ok {
            base - slack
        } else {
            f64::NEG_INFINITY
        };
        return Ok((lo, base + slack));
    }
    let t = 2.0 * bf - uf;
    let base = (2.0 * uf).log2() - 0.5 * (std::f64::consts::PI / 2.0).log2() - 1.5 * t.log2() + t;
    let log2e = std::f64::consts::LOG2_E;
    let hi = base - uf * uf / (4.0 * bf) * log2e + slack;
    let lo = if lower_ok {
        base - uf * uf / (4.0 * bf - 2.0 * uf) * log2e - slack
    } else {
        f64::NEG_INFINITY
    };
    Ok((lo, hi))
}

/// `d * log2 M(B,u) + log2 Z` in bits.
pub fn entropy_budget(d: u64, u: u64, b: u64, z: &BigCount) -> Result<f64> {
    let m = capacity_m(b, u)?;
    Ok(d as f64 * log2_big(&m) + log2_big(z))
}

/// Binary tree over in-order positions `1..=n`; child index 0 means absent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TreeShape {
    pub n: usize,
    pub root: usize,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl TreeShape {
    pub fn empty(n: usize) -> Self {
        TreeShape {
            n,
            root: 0,
            left: vec![0; n + 1],
            right: vec![0; n + 1],
        }
    }

    /// Checks the shape invariants: n nodes, single root, in-order = 1..n.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.left.len() != n + 1 || self.right.len() != n + 1 {
            return Err(Error::Format("child arrays have wrong length".into()));
        }
        if n == 0 {
            return if self.root == 0 {
                Ok(())
            } else {
                Err(Error::Format("root of empty tree".into()))
            };
        }
        let mut parents = vec![0usize; n + 1];
        for v in 1..=n {
            for c in [self.left[v], self.right[v]] {
                if c > n {
                    return Err(Error::Format("child index out of range".into()));
                }
                if c != 0 {
                    parents[c] += 1;
                }
            }
        }
        if self.root == 0 || self.root > n || parents[self.root] != 0 {
            return Err(Error::Format("bad root".into()));
        }
        if (1..=n).any(|v| v != self.root && parents[v] != 1) {
            return Err(Error::Format("node without unique parent".into()));
        }
        if self.inorder() != (1..=n).collect::<Vec<_>>() {
            return Err(Error::Format("in-order traversal is not 1..n".into()));
        }
        Ok(())
    }

    /// In-order listing of node indices.
    pub fn inorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n);
        let mut stack = Vec::new();
        let mut cur = self.root;
        let mut guard = 0usize;
        while cur != 0 || !stack.is_empty() {
            while cur != 0 {
                stack.push(cur);
                cur = self.left[cur];
                guard += 1;
                if guard > 2 * self.n + 2 {
                    return out;
                }
            }
            let v = stack.pop().unwrap();
            out.push(v);
            cur = self.right[v];
        }
        out
    }

    /// Balanced-parenthesis word: `T = "(" T_left ")" T_right`, true = open.
    pub fn to_parens(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(2 * self.n);
        // Pending items: Some(v) = emit subtree v, None = emit a close.
        let mut stack: Vec<(usize, bool)> = vec![(self.root, false)];
        while let Some((v, is_close)) = stack.pop() {
            if is_close {
                out.push(false);
                continue;
            }
            if v == 0 {
                continue;
            }
            out.push(true);
            stack.push((self.right[v], false));
            stack.push((v, true));
            stack.push((self.left[v], false));
        }
        out
    }

    /// Inverse of [`TreeShape::to_parens`].
    pub fn from_parens(word: &[bool]) -> Result<Self> {
        if !word.len().is_multiple_of(2) {
            return Err(Error::Format("odd-length parenthesis word".into()));
        }
        let n = word.len() / 2;
        let mut matching = vec![0usize; word.len()];
        let mut stack = Vec::new();
        for (i, &b) in word.iter().enumerate() {
            if b {
                stack.push(i);
            } else {
                let o = stack
                    .pop()
                    .ok_or_else(|| Error::Format("unbalanced word".into()))?;
                matching[o] = i;
            }
        }
        if !stack.is_empty() {
            return Err(Error::Format("unbalanced word".into()));
        }
        let mut close_rank = vec![0usize; word.len()];
        let mut c = 0;
        for (i, &b) in word.iter().enumerate() {
            if !b {
                c += 1;
                close_rank[i] = c;
            }
        }
        let node_at = |p: usize| close_rank[matching[p]];
        let mut t = TreeShape::empty(n);
        if n == 0 {
            return Ok(t);
        }
        t.root = node_at(0);
        for p in 0..word.len() {
            if !word[p] {
                continue;
            }
            let v = node_at(p);
            if word[p + 1] {
                t.left[v] = node_at(p + 1);
            }
            let c = matching[p];
            if c + 1 < word.len() && word[c + 1] {
                t.right[v] = node_at(c + 1);
            }
        }
        Ok(t)
    }
}

/// Number of ways to finish a parenthesis word with `rem` symbols left at excess `e`.
fn completions(rem: u64, e: u64) -> BigCount {
    if e > rem || !(rem - e).is_multiple_of(2) {
        return BigCount::zero();
    }
    let closes = (rem + e) / 2;
    let opens = rem - closes;
    // ballot: binom(rem, opens) - binom(rem, opens - 1)
    let a = binomial(rem, opens);
    if opens == 0 {
        return a;
    }
    a - binomial(rem, opens - 1)
}

/// Tree with lexicographic rank `z` (1-based, open < close) among n-node shapes.
pub fn tree_unrank(n: usize, z: &BigCount) -> Result<TreeShape> {
    let total = catalan_number(n as u64);
    if z.is_zero() || *z > total {
        return Err(Error::Range(format!("tree rank must be in [1, C_{n}]")));
    }
    let len = 2 * n as u64;
    let mut z = z - 1u32;
    let mut word = Vec::with_capacity(len as usize);
    let mut e = 0u64;
    for pos in 0..len {
        let rem = len - pos - 1;
        let c_open = completions(rem, e + 1);
        if z < c_open {
            word.push(true);
            e += 1;
        } else {
            z -= c_open;
            word.push(false);
            e -= 1;
        }
    }
    TreeShape::from_parens(&word)
}

/// Inverse of [`tree_unrank`].
pub fn tree_rank(t: &TreeShape) -> Result<BigCount> {
    t.validate()?;
    let word = t.to_parens();
    let len = word.len() as u64;
    let mut z = BigCount::zero();
    let mut e = 0u64;
    for (pos, &b) in word.iter().enumerate() {
        let rem = len - pos as u64 - 1;
        if b {
            e += 1;
        } else {
            z += completions(rem, e + 1);
            e -= 1;
        }
    }
    Ok(z + 1u32)
}

/// Merge pattern with `a` zeros and `b` ones of colex rank `k` (1-based).
pub fn interleave_unrank(a: u64, b: u64, k: &BigCount) -> Result<Vec<bool>> {
    let total = binomial(a + b, a);
    if k.is_zero() || *k > total {
        return Err(Error::Range(format!(
            "interleave rank must be in [1, binom({}, {a})]",
            a + b
        )));
    }
    let mut k = k - 1u32;
    let (mut za, mut ob) = (a, b);
    let mut out = vec![false; (a + b) as usize];
    for pos in (0..(a + b) as usize).rev() {
        let zero_last = if za == 0 {
            BigCount::zero()
        } else {
            binomial(za - 1 + ob, ob)
        };
        if k < zero_last {
            za -= 1;
        } else {
            k -= zero_last;
            out[pos] = true;
            ob -= 1;
        }
    }
    Ok(out)
}

/// Inverse of [`interleave_unrank`].
pub fn interleave_rank(bits: &[bool]) -> BigCount {
    let mut za = bits.iter().filter(|&&b| !b).count() as u64;
    let mut ob = bits.len() as u64 - za;
    let mut k = BigCount::zero();
    for &b in bits.iter().rev() {
        if b {
            if za > 0 {
                k += binomial(za - 1 + ob, ob);
            }
            ob -= 1;
        } else {
            za -= 1;
        }
    }
    k + 1u32
}

/// Incrementally maintained `binom(n, k)` for walks over neighbouring
/// arguments; unit steps cost one small multiply and divide.
#[derive(Clone, Debug)]
pub struct BinomCursor {
    n: i64,
    k: i64,
    val: BigCount,
}

impl BinomCursor {
    pub fn new(n: i64, k: i64) -> Self {
        BinomCursor {
            n,
            k,
            val: binomial_i(n, k),
        }
    }

    fn valid(n: i64, k: i64) -> bool {
        n >= 0 && k >= 0 && k <= n
    }

    pub fn value(&self) -> &BigCount {
        &self.val
    }

    /// Moves to `binom(n2, k2)`.
    pub fn go(&mut self, n2: i64, k2: i64) -> &BigCount {
        let far = (n2 - self.n).abs() + (k2 - self.k).abs() > 4;
        if far || !Self::valid(self.n, self.k) || !Self::valid(n2, k2) {
            *self = Self::new(n2, k2);
            return &self.val;
        }
        // each single step keeps 0 <= k <= n when k moves are ordered by direction
        while self.k > k2 {
            self.val *= self.k as u64;
            self.val /= (self.n - self.k + 1) as u64;
            self.k -= 1;
        }
        while self.n < n2 {
            self.val *= (self.n + 1) as u64;
            self.val /= (self.n + 1 - self.k) as u64;
            self.n += 1;
        }
        while self.k < k2 {
            if self.k + 1 > self.n {
                *self = Self::new(n2, k2);
                return &self.val;
            }
            self.val *= (self.n - self.k) as u64;
            self.val /= (self.k + 1) as u64;
            self.k += 1;
        }
        while self.n > n2 {
            if self.n - 1 < self.k {
                *self = Self::new(n2, k2);
                return &self.val;
            }
            self.val *= (self.n - self.k) as u64;
            self.val /= self.n as u64;
            self.n -= 1;
        }
        &self.val
    }
}

/// Incrementally maintained `mfold(m, U)`.
#[derive(Clone, Debug)]
pub struct MfoldCursor {
    c: BinomCursor,
}

impl Default for MfoldCursor {
    fn default() -> Self {
        MfoldCursor {
            c: BinomCursor::new(0, 0),
        }
    }
}

impl MfoldCursor {
    pub fn get(&mut self, m: i64, u: i64) -> BigCount {
        if m < 0 || u < 0 || m > u {
            return BigCount::zero();
        }
        if m == u {
            return BigCount::one();
        }
        let t = 2 * u - m;
        let b = self.c.go(t, u);
        b * (m as u64) / (t as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x: u64) -> BigCount {
        BigCount::from(x)
    }

    #[test]
    fn catalan_small_values() {
        assert_eq!(catalan_number(0), b(1));
        assert_eq!(catalan_number(3), b(5));
        assert_eq!(catalan_number(4), b(14));
    }

    #[test]
    fn mfold_examples() {
        assert_eq!(mfold_convolution(2, 3).unwrap(), b(2));
        assert_eq!(mfold_convolution(1, 1).unwrap(), b(1));
        assert_eq!(mfold_convolution(5, 5).unwrap(), b(1));
        assert!(mfold_convolution(4, 3).is_err());
        assert_eq!(mfold_convolution_bruteforce(2, 4).unwrap(), b(5));
        assert!(mfold_convolution_bruteforce(2, 25).is_err());
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity_m(2, 1).unwrap(), b(2));
        assert_eq!(capacity_m(3, 1).unwrap(), b(5));
        assert_eq!(capacity_m(1, 0).unwrap(), b(1));
        assert!(capacity_m(1, 2).is_err());
    }

    #[test]
    fn entropy_budget_examples() {
        assert!((entropy_budget(1, 1, 2, &b(1)).unwrap() - 1.0).abs() < 1e-12);
        assert!((entropy_budget(2, 1, 2, &b(1)).unwrap() - 2.0).abs() < 1e-12);
        assert!((entropy_budget(1, 0, 3, &b(1)).unwrap() - 5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn small_tree_shapes() {
        let t = tree_unrank(1, &b(1)).unwrap();
        assert_eq!(t.root, 1);
        let s1 = tree_unrank(2, &b(1)).unwrap();
        let s2 = tree_unrank(2, &b(2)).unwrap();
        assert_ne!(s1, s2);
        assert!(tree_unrank(3, &b(6)).is_err());
    }

    #[test]
    fn interleave_examples() {
        let x = interleave_unrank(1, 1, &b(1)).unwrap();
        let y = interleave_unrank(1, 1, &b(2)).unwrap();
        assert_ne!(x, y);
        assert_eq!(interleave_unrank(3, 0, &b(1)).unwrap(), vec![false; 3]);
        for k in 1..=20u64 {
            let bits = interleave_unrank(3, 3, &b(k)).unwrap();
            assert_eq!(interleave_rank(&bits), b(k));
        }
    }
}
