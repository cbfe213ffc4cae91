//! Hard-instance machinery for RMQ lower bounds: Catalan-weighted set
//! sampling, the predecessor-to-RMQ reduction with exact recovery,
//! window indicators with their prefix-free side encoding, and Monte-Carlo
//! estimators for the distributional lemmas.

use std::collections::{BTreeMap, HashMap};

use num_bigint::RandBigInt;
use num_integer::Roots;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{gamma_read, gamma_write, BitReader, BitVec, BitWriter};
use crate::cartesian::{build_cartesian, CartesianTree, RangeMinimum, SparseTable};
use crate::catalan::{
    binomial, capacity_m, catalan_number, identity_mismatches, interleave_rank, interleave_unrank,
    tree_rank, tree_unrank, BigCount,
};
use crate::error::{Error, Result};

mod dec {
    use super::BigCount;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigCount, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigCount, D::Error> {
        let s = String::deserialize(d)?;
        BigCount::parse_bytes(s.as_bytes(), 10)
            .ok_or_else(|| serde::de::Error::custom("expected a decimal integer string"))
    }
}

/// Gaps `s_{j+1} - s_j - 1` for `j = 0..=u`, with `s_0 = 0` and `s_{u+1} = B + 1`.
pub fn gaps(set: &[u64], b: u64) -> Vec<u64> {
    let mut prev = 0;
    let mut out = Vec::with_capacity(set.len() + 1);
    for &s in set.iter().chain(std::iter::once(&(b + 1))) {
        out.push(s - prev - 1);
        prev = s;
    }
    out
}

/// Unnormalized weight `∏ C_gap` of a set.
pub fn set_weight(set: &[u64], b: u64) -> BigCount {
    gaps(set, b).into_iter().map(catalan_number).product()
}

fn check_set(set: &[u64], b: u64, u: u64) -> Result<()> {
    if set.len() as u64 != u {
        return Err(Error::Format(format!(
            "set has {} elements, expected {u}",
            set.len()
        )));
    }
    if set.windows(2).any(|w| w[0] >= w[1])
        || set.first().is_some_and(|&s| s == 0)
        || set.last().is_some_and(|&s| s > b)
    {
        return Err(Error::Format(format!(
            "set must be strictly increasing inside [1, {b}]"
        )));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerKind {
    /// Sequential gap-by-gap draws against exact big-integer weights.
    Exact,
    /// Uniform forest of binary trees via the cycle lemma; tree sizes are the gaps.
    Forest,
}

/// Largest `B` for which [`SetSampler::new`] picks the exact sampler.
pub const EXACT_SAMPLER_MAX_B: u64 = 256;

/// Draws `u`-subsets of `[B]` with probability proportional to `∏ C_gap`.
#[derive(Clone, Debug)]
pub struct SetSampler {
    b: u64,
    u: u64,
    kind: SamplerKind,
    /// `cap[x][y] = M(x, y)` for the exact sampler.
    cap: Vec<Vec<BigCount>>,
    cat: Vec<BigCount>,
    steps: Vec<i8>,
}

impl SetSampler {
    pub fn new(b: u64, u: u64) -> Result<Self> {
        let kind = if b <= EXACT_SAMPLER_MAX_B {
            SamplerKind::Exact
        } else {
            SamplerKind::Forest
        };
        Self::with_kind(b, u, kind)
    }

    pub fn with_kind(b: u64, u: u64, kind: SamplerKind) -> Result<Self> {
        if u > b {
            return Err(Error::Range(format!("need u <= B (got B={b}, u={u})")));
        }
        let (cap, cat) = match kind {
            SamplerKind::Exact => {
                let cap = (0..=b)
                    .map(|x| {
                        (0..=u.min(x))
                            .map(|y| capacity_m(x, y).expect("y <= x"))
                            .collect()
                    })
                    .collect();
                (cap, (0..=b).map(catalan_number).collect())
            }
            SamplerKind::Forest => (Vec::new(), Vec::new()),
        };
        Ok(SetSampler {
            b,
            u,
            kind,
            cap,
            cat,
            steps: Vec::new(),
        })
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn sample<R: Rng>(&mut self, rng: &mut R) -> Vec<u64> {
        match self.kind {
            SamplerKind::Exact => self.sample_exact(rng),
            SamplerKind::Forest => self.sample_forest(rng),
        }
    }

    fn sample_exact<R: Rng>(&self, rng: &mut R) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.u as usize);
        let (mut rest, mut left, mut prev) = (self.b, self.u, 0u64);
        while left > 0 {
            let mut w = rng.gen_biguint_below(&self.cap[rest as usize][left as usize]);
            let mut g = 0;
            loop {
                let wt =
                    &self.cat[g as usize] * &self.cap[(rest - g - 1) as usize][(left - 1) as usize];
                if w < wt {
                    break;
                }
                w -= wt;
                g += 1;
            }
            prev += g + 1;
            out.push(prev);
            rest -= g + 1;
            left -= 1;
        }
        out
    }

    fn sample_forest<R: Rng>(&mut self, rng: &mut R) -> Vec<u64> {
        let internal = (self.b - self.u) as usize;
        let trees = self.u as usize + 1;
        let len = 2 * internal + trees;
        // uniform arrangement of `internal` ups among `len` steps, drawn left to
        // right; the rotation starting at the first global minimum of the prefix
        // sums is a valid forest code (cycle lemma)
        self.steps.clear();
        let mut ups_left = internal as u32;
        let (mut s, mut best, mut start) = (0i64, 0i64, 0usize);
        for rem in (2..=len as u32).rev() {
            let up = below(rng, rem) < ups_left;
            ups_left -= u32::from(up);
            let st = 2 * i8::from(up) - 1;
            self.steps.push(st);
            s += i64::from(st);
            if s < best {
                best = s;
                start = self.steps.len();
            }
        }
        self.steps.push(2 * ups_left as i8 - 1);
        let mut sizes = Vec::with_capacity(trees);
        let (mut level, mut ups) = (0i64, 0u64);
        let (tail, head) = self.steps.split_at(start);
        for &st in head.iter().chain(tail) {
            level += i64::from(st);
            ups += u64::from(st > 0);
            if level < -(sizes.len() as i64) {
                sizes.push(ups);
                ups = 0;
            }
        }
        debug_assert_eq!(sizes.len(), trees);
        sizes.rotate_left(rng.gen_range(0..trees));
        let mut out = Vec::with_capacity(self.u as usize);
        let mut prev = 0;
        for &g in &sizes[..trees - 1] {
            prev += g + 1;
            out.push(prev);
        }
        out
    }
}

/// Unbiased draw from `[0, n)` with a multiply-shift that divides only on the rare rejection path.
fn below<R: Rng>(rng: &mut R, n: u32) -> u32 {
    let mut m = u64::from(rng.next_u32()) * u64::from(n);
    if (m as u32) < n {
        let floor = n.wrapping_neg() % n;
        while (m as u32) < floor {
            m = u64::from(rng.next_u32()) * u64::from(n);
        }
    }
    (m >> 32) as u32
}

/// One draw from the weighted set distribution.
pub fn sample_set<R: Rng>(b: u64, u: u64, rng: &mut R) -> Result<Vec<u64>> {
    Ok(SetSampler::new(b, u)?.sample(rng))
}

/// Exact probability of every `u`-subset of `[B]` (small `B` only).
pub fn exact_distribution(b: u64, u: u64) -> Result<Vec<(Vec<u64>, f64)>> {
    let total = capacity_m(b, u)?;
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(from: u64, b: u64, left: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for s in from..=b + 1 - left {
            cur.push(s);
            rec(s + 1, b, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut sets = Vec::new();
    rec(1, b, u, &mut cur, &mut sets);
    for s in sets {
        let p = ratio(&set_weight(&s, b), &total);
        out.push((s, p));
    }
    Ok(out)
}

fn ratio(a: &BigCount, b: &BigCount) -> f64 {
    let shift = b.bits().saturating_sub(60);
    let (a, b) = (a >> shift, b >> shift);
    a.to_f64().unwrap_or(f64::INFINITY) / b.to_f64().unwrap_or(f64::INFINITY)
}

/// `d` independent weighted sets plus an auxiliary integer `z`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredZInstance {
    pub d: u64,
    #[serde(rename = "B")]
    pub b: u64,
    pub u: u64,
    #[serde(rename = "Z", with = "dec")]
    pub z_cap: BigCount,
    pub sets: Vec<Vec<u64>>,
    #[serde(with = "dec")]
    pub z: BigCount,
}

impl PredZInstance {
    /// `Z · ∏_i ∏_j C_gap`, the largest admissible `z`.
    pub fn z_bound(&self) -> BigCount {
        self.sets
            .iter()
            .fold(self.z_cap.clone(), |acc, s| acc * set_weight(s, self.b))
    }

    pub fn validate(&self) -> Result<()> {
        if self.sets.len() as u64 != self.d {
            return Err(Error::Format(format!(
                "expected {} sets, found {}",
                self.d,
                self.sets.len()
            )));
        }
        for s in &self.sets {
            check_set(s, self.b, self.u)?;
        }
        if self.z.is_zero() || self.z > self.z_bound() {
            return Err(Error::Range("z outside [1, Z·∏C]".into()));
        }
        Ok(())
    }
}

pub fn sample_instance<R: Rng>(
    d: u64,
    b: u64,
    u: u64,
    z_cap: &BigCount,
    rng: &mut R,
) -> Result<PredZInstance> {
    if z_cap.is_zero() {
        return Err(Error::Range("Z must be positive".into()));
    }
    let mut sampler = SetSampler::new(b, u)?;
    let sets: Vec<Vec<u64>> = (0..d).map(|_| sampler.sample(rng)).collect();
    let mut inst = PredZInstance {
        d,
        b,
        u,
        z_cap: z_cap.clone(),
        sets,
        z: BigCount::one(),
    };
    inst.z = rng.gen_biguint_below(&inst.z_bound()) + 1u32;
    Ok(inst)
}

/// Parameters `(d, B, u, Z)` that the reduction derives from `(n, r)`.
pub fn derive_params(n: u64, r: u64) -> Result<(u64, u64, u64, BigCount)> {
    if r == 0 {
        return Err(Error::Range("r must be positive".into()));
    }
    let d = 2 * r;
    let b = (n / d)
        .checked_sub(1)
        .filter(|&b| b >= 1)
        .ok_or_else(|| Error::Range(format!("n = {n} too small for r = {r}")))?;
    let u = b.sqrt();
    let z_cap = num_traits::pow(binomial(2 * u, u), r as usize);
    Ok((d, b, u, z_cap))
}

/// The RMQ input produced from a pred-z instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionLayout {
    pub n: u64,
    pub r: u64,
    pub d: u64,
    pub b: u64,
    pub u: u64,
    pub values: Vec<i64>,
}

impl ReductionLayout {
    /// Position of the pivot shared by sets `i` and `i + 1` (odd `i`).
    pub fn pivot(&self, i: u64) -> u64 {
        i * (self.b + 1)
    }
}

/// Digits of `z - 1` in mixed radix, least significant first: one
/// interleaving index per set pair, then one tree index per gap.
fn z_radices(inst_sets: &[Vec<u64>], b: u64, u: u64, r: u64) -> Vec<BigCount> {
    let mut rad = vec![binomial(2 * u, u); r as usize];
    for s in inst_sets {
        rad.extend(gaps(s, b).into_iter().map(catalan_number));
    }
    rad
}

/// Splits `z` into 1-based digits (`k_1..k_r`, then all gap tree indices).
pub fn decompose_z(inst: &PredZInstance, r: u64) -> Result<Vec<BigCount>> {
    let mut rest = &inst.z - 1u32;
    let mut out = Vec::new();
    for radix in z_radices(&inst.sets, inst.b, inst.u, r) {
        out.push((&rest % &radix) + 1u32);
        rest /= &radix;
    }
    if !rest.is_zero() {
        return Err(Error::Range("z exceeds its admissible range".into()));
    }
    Ok(out)
}

/// Inverse of [`decompose_z`].
pub fn compose_z(sets: &[Vec<u64>], b: u64, u: u64, r: u64, digits: &[BigCount]) -> BigCount {
    let rad = z_radices(sets, b, u, r);
    let mut z = BigCount::zero();
    for (dg, radix) in digits.iter().zip(rad.iter()).rev() {
        z = z * radix + (dg - 1u32);
    }
    z + 1u32
}

pub fn reduce_to_array(inst: &PredZInstance, n: u64, r: u64) -> Result<ReductionLayout> {
    let (d, b, u, z_cap) = derive_params(n, r)?;
    if (inst.d, inst.b, inst.u) != (d, b, u) || inst.z_cap != z_cap {
        return Err(Error::Range(format!("instance parameters do not match n = {n}, r = {r} (need d={d}, B={b}, u={u}, Z={z_cap})")));
    }
    inst.validate()?;
    let digits = decompose_z(inst, r)?;
    let (ks, tz) = digits.split_at(r as usize);
    let uu = u as usize;
    let gap_base = 2 * u as i64 + 2;
    let fill = gap_base + b as i64 + 1;
    let mut v: Vec<i64> = (0..n as i64).map(|p| fill + p).collect();
    let tree_digit = |i: usize, j: usize| &tz[i * (uu + 1) + j];
    let put_gap = |v: &mut Vec<i64>,
                   positions: &mut dyn Iterator<Item = u64>,
                   len: u64,
                   z: &BigCount|
     -> Result<()> {
        if len == 0 {
            return Ok(());
        }
        let keys = CartesianTree {
            shape: tree_unrank(len as usize, z)?,
        }
        .realize();
        for (p, key) in positions.zip(keys) {
            v[(p - 1) as usize] = gap_base + key;
        }
        Ok(())
    };
    for (q, kq) in ks.iter().enumerate().take(r as usize) {
        let i = 2 * q + 1;
        let p = i as u64 * (b + 1);
        let (left, right) = (&inst.sets[i - 1], &inst.sets[i]);
        let pattern = interleave_unrank(u, u, kq)?;
        let (mut a, mut c) = (0usize, 0usize);
        for (t, &is_right) in pattern.iter().enumerate() {
            let val = (2 * uu - t) as i64;
            if is_right {
                v[(p + right[c] - 1) as usize] = val;
                c += 1;
            } else {
                v[(p - left[a] - 1) as usize] = val;
                a += 1;
            }
        }
        v[(p - 1) as usize] = 2 * u as i64 + 1;
        let (lg, rg) = (ext_bounds(left, b), ext_bounds(right, b));
        for j in 0..=uu {
            let (lo, hi) = (lg[j], lg[j + 1]);
            put_gap(
                &mut v,
                &mut ((p - hi + 1)..=(p - lo - 1)),
                hi - lo - 1,
                tree_digit(i - 1, j),
            )?;
            let (lo, hi) = (rg[j], rg[j + 1]);
            put_gap(
                &mut v,
                &mut ((p + lo + 1)..=(p + hi - 1)),
                hi - lo - 1,
                tree_digit(i, j),
            )?;
        }
    }
    Ok(ReductionLayout {
        n,
        r,
        d,
        b,
        u,
        values: v,
    })
}

/// `[0, s_1, …, s_u, B + 1]`.
fn ext_bounds(set: &[u64], b: u64) -> Vec<u64> {
    let mut e = Vec::with_capacity(set.len() + 2);
    e.push(0);
    e.extend_from_slice(set);
    e.push(b + 1);
    e
}

/// Largest element of `S_i` that is `<= x` (0 if none), through one RMQ.
pub fn pred_via_rmq(
    layout: &ReductionLayout,
    rmq: &dyn RangeMinimum,
    i: u64,
    x: u64,
) -> Result<u64> {
    if i == 0 || i > layout.d || x == 0 || x > layout.b {
        return Err(Error::Range(format!(
            "pred({i}, {x}) outside [1, {}] x [1, {}]",
            layout.d, layout.b
        )));
    }
    if rmq.len() as u64 != layout.n {
        return Err(Error::Integrity(
            "structure size does not match the layout".into(),
        ));
    }
    Ok(if i % 2 == 1 {
        let p = layout.pivot(i);
        p - rmq.rmq((p - x) as usize, p as usize) as u64
    } else {
        let p = layout.pivot(i - 1);
        rmq.rmq(p as usize, (p + x) as usize) as u64 - p
    })
}

/// Direct predecessor on a sorted set.
pub fn pred_direct(set: &[u64], x: u64) -> u64 {
    set.iter()
        .copied()
        .take_while(|&s| s <= x)
        .last()
        .unwrap_or(0)
}

/// Reads every set back through predecessor queries.
pub fn recover_sets(layout: &ReductionLayout, rmq: &dyn RangeMinimum) -> Result<Vec<Vec<u64>>> {
    (1..=layout.d)
        .map(|i| {
            let mut s = Vec::new();
            for x in 1..=layout.b {
                if pred_via_rmq(layout, rmq, i, x)? == x {
                    s.push(x);
                }
            }
            if s.len() as u64 != layout.u {
                return Err(Error::Integrity(format!(
                    "set {i} recovered with {} elements, expected {}",
                    s.len(),
                    layout.u
                )));
            }
            Ok(s)
        })
        .collect()
}

/// Cartesian tree of `A[lo..=hi]` rebuilt from RMQ answers alone.
fn tree_from_rmq(rmq: &dyn RangeMinimum, lo: usize, hi: usize) -> CartesianTree {
    let mut depth = vec![0i64; hi - lo + 1];
    let mut stack = vec![(lo, hi, 0i64)];
    while let Some((a, b, dd)) = stack.pop() {
        let m = rmq.rmq(a, b);
        depth[m - lo] = dd;
        if m > a {
            stack.push((a, m - 1, dd + 1));
        }
        if m < b {
            stack.push((m + 1, b, dd + 1));
        }
    }
    build_cartesian(&depth)
}

/// Recovers `z` from RMQ answers: sets first, then each pair's interleaving
/// by cross-pivot comparisons, then every gap's Cartesian tree.
pub fn recover_z(layout: &ReductionLayout, rmq: &dyn RangeMinimum) -> Result<BigCount> {
    let sets = recover_sets(layout, rmq)?;
    let (b, u) = (layout.b, layout.u as usize);
    let mut digits = Vec::new();
    for q in 0..layout.r as usize {
        let i = 2 * q + 1;
        let p = i as u64 * (b + 1);
        let (left, right) = (&sets[i - 1], &sets[i]);
        let mut pattern = Vec::with_capacity(2 * u);
        let (mut a, mut c) = (0usize, 0usize);
        while a < u && c < u {
            let lpos = (p - left[a]) as usize;
            let w = rmq.rmq(lpos, (p + right[c]) as usize);
            // the larger of the two comes first in decreasing order
            if w == lpos {
                pattern.push(true);
                c += 1;
            } else {
                pattern.push(false);
                a += 1;
            }
        }
        pattern.extend(std::iter::repeat_n(false, u - a));
        pattern.extend(std::iter::repeat_n(true, u - c));
        digits.push(interleave_rank(&pattern));
    }
    for (idx, s) in sets.iter().enumerate() {
        let i = idx as u64 + 1;
        let e = ext_bounds(s, b);
        for j in 0..=u {
            let len = e[j + 1] - e[j] - 1;
            if len == 0 {
                digits.push(BigCount::one());
                continue;
            }
            let (lo, hi) = if i % 2 == 1 {
                let p = layout.pivot(i);
                (p - e[j + 1] + 1, p - e[j] - 1)
            } else {
                let p = layout.pivot(i - 1);
                (p + e[j] + 1, p + e[j + 1] - 1)
            };
            digits.push(tree_rank(
                &tree_from_rmq(rmq, lo as usize, hi as usize).shape,
            )?);
        }
    }
    Ok(compose_z(&sets, b, layout.u, layout.r, &digits))
}

/// Checks the layout's order constraints directly on the values: chains
/// decreasing away from each pivot and below every other entry of the pair's
/// range, and every digit of `z` realized.
pub fn check_layout(layout: &ReductionLayout, inst: &PredZInstance) -> Result<()> {
    let v = &layout.values;
    let b = layout.b;
    let at = |p: u64| v[(p - 1) as usize];
    for q in 0..layout.r {
        let i = 2 * q + 1;
        let p = layout.pivot(i);
        let (left, right) = (&inst.sets[(i - 1) as usize], &inst.sets[i as usize]);
        let lchain: Vec<i64> = std::iter::once(at(p))
            .chain(left.iter().map(|&s| at(p - s)))
            .collect();
        let rchain: Vec<i64> = std::iter::once(at(p))
            .chain(right.iter().map(|&s| at(p + s)))
            .collect();
        if lchain.windows(2).any(|w| w[0] <= w[1]) || rchain.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Integrity(format!(
                "chains around pivot {p} are not decreasing"
            )));
        }
        let mut on_chain: Vec<u64> = left
            .iter()
            .map(|&s| p - s)
            .chain(right.iter().map(|&s| p + s))
            .collect();
        on_chain.push(p);
        let cmax = on_chain.iter().map(|&x| at(x)).max().unwrap();
        for x in (p - b)..=(p + b) {
            if !on_chain.contains(&x) && at(x) <= cmax {
                return Err(Error::Integrity(format!(
                    "entry {x} is not above the chains of pivot {p}"
                )));
            }
        }
    }
    let sparse = SparseTable::build(v);
    if recover_z(layout, &sparse)? != inst.z {
        return Err(Error::Integrity("layout does not realize z".into()));
    }
    Ok(())
}

/// A block `[x, y]` of one set with granularity `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Block {
    pub x: u64,
    pub y: u64,
    pub m: u64,
}

/// Good iff `m²/2 <= y - x <= 2m²` (both ends inclusive).
pub fn is_good_block(x: u64, y: u64, m: u64) -> bool {
    let d = y.saturating_sub(x);
    2 * d >= m * m && d <= 2 * m * m
}

/// Picks `s_m, s_{2m}, …` of a set and pairs consecutive picks into blocks.
pub fn block_partition(set: &[u64], m: u64) -> Vec<(Block, bool)> {
    let picks: Vec<u64> = set
        .iter()
        .skip(m as usize - 1)
        .step_by(m as usize)
        .copied()
        .collect();
    picks
        .windows(2)
        .map(|w| {
            (
                Block {
                    x: w[0],
                    y: w[1],
                    m,
                },
                is_good_block(w[0], w[1], m),
            )
        })
        .collect()
}

/// Window indicators of one block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndicatorSeq {
    pub k: u64,
    /// Window length `⌊m²/k⌋`.
    pub l: u64,
    pub delta: u64,
    /// `bits[j-1] = E_j` for `j = 1..=K`, `K = ⌊U/L⌋`.
    pub bits: Vec<bool>,
}

impl IndicatorSeq {
    /// 1-based indices of the non-empty windows.
    pub fn nonempty(&self) -> Vec<u64> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| j as u64 + 1)
            .collect()
    }
}

/// `(L, K)` for a block and granularity `k`.
pub fn window_shape(block: Block, k: u64) -> Result<(u64, u64)> {
    if k == 0 || block.y < block.x {
        return Err(Error::Range("need k >= 1 and x <= y".into()));
    }
    let l = block.m * block.m / k;
    if l == 0 {
        return Err(Error::Range(format!(
            "window length m²/k is zero (m={}, k={k})",
            block.m
        )));
    }
    Ok((l, (block.y - block.x + 1) / l))
}

/// Window of a point: `j` with `q_{j-1} < s <= q_j`, `q_j = x - 1 + Δ + jL`.
fn window_of(s: u64, block: Block, l: u64, kk: u64, delta: u64) -> Option<u64> {
    let q0 = block.x - 1 + delta;
    if s <= q0 || s < block.x || s > block.y {
        return None;
    }
    let j = (s - q0).div_ceil(l);
    (j <= kk).then_some(j)
}

/// `E_j = 1` iff the block holds a point in `(q_{j-1}, q_j]`.
pub fn indicators(points: &[u64], block: Block, k: u64, delta: u64) -> Result<IndicatorSeq> {
    let (l, kk) = window_shape(block, k)?;
    if delta == 0 || delta > l {
        return Err(Error::Range(format!("offset must be in [1, {l}]")));
    }
    let mut bits = vec![false; kk as usize];
    for &s in points {
        if let Some(j) = window_of(s, block, l, kk, delta) {
            bits[(j - 1) as usize] = true;
        }
    }
    Ok(IndicatorSeq { k, l, delta, bits })
}

fn windows_hit(points: &[u64], block: Block, l: u64, kk: u64, delta: u64) -> Vec<u64> {
    let mut w: Vec<u64> = points
        .iter()
        .filter_map(|&s| window_of(s, block, l, kk, delta))
        .collect();
    w.dedup();
    w
}

/// Prefix-free side information that, with `sub`, determines the indicators:
/// `γ(K_ne + 1)`, then for each non-empty window with no point of `sub`
/// the pair `γ(i_a − i_{a−1})`, `γ(I_{i_a} − I_{i_a − 1})`.
pub fn ext_encode(points: &[u64], block: Block, k: u64, delta: u64, sub: &[u64]) -> Result<BitVec> {
    if sub.iter().any(|s| points.binary_search(s).is_err()) {
        return Err(Error::Range(
            "sub must be a subset of the block's points".into(),
        ));
    }
    let ind = indicators(points, block, k, delta)?;
    let ne = ind.nonempty();
    let known = windows_hit(sub, block, ind.l, ind.bits.len() as u64, delta);
    let mut w = BitWriter::new();
    gamma_write(&mut w, ne.len() as u64 + 1);
    let mut prev_a = 0usize;
    for (a, &win) in ne.iter().enumerate() {
        if known.binary_search(&win).is_err() {
            gamma_write(&mut w, (a + 1 - prev_a) as u64);
            let before = if a == 0 { 0 } else { ne[a - 1] };
            gamma_write(&mut w, win - before);
            prev_a = a + 1;
        }
    }
    Ok(w.finish())
}

pub fn ext_decode(
    bits: &BitVec,
    sub: &[u64],
    block: Block,
    k: u64,
    delta: u64,
) -> Result<IndicatorSeq> {
    let (l, kk) = window_shape(block, k)?;
    if delta == 0 || delta > l {
        return Err(Error::Range(format!("offset must be in [1, {l}]")));
    }
    let known = windows_hit(sub, block, l, kk, delta);
    let mut r = BitReader::new(bits);
    let k_ne = (gamma_read(&mut r)? - 1) as usize;
    let k_un = k_ne
        .checked_sub(known.len())
        .ok_or_else(|| Error::Format("fewer non-empty windows than known ones".into()))?;
    let mut ne: Vec<u64> = Vec::with_capacity(k_ne);
    let mut next_known = known.iter().copied();
    let mut take_known = |ne: &mut Vec<u64>| -> Result<()> {
        let w = next_known
            .next()
            .ok_or_else(|| Error::Format("ran out of known windows".into()))?;
        ne.push(w);
        Ok(())
    };
    for _ in 0..k_un {
        let step = gamma_read(&mut r)? as usize;
        let ia = ne.len() + step;
        if ia > k_ne {
            return Err(Error::Format("window index beyond K_ne".into()));
        }
        while ne.len() + 1 < ia {
            take_known(&mut ne)?;
        }
        let base = ne.last().copied().unwrap_or(0);
        ne.push(base + gamma_read(&mut r)?);
    }
    while ne.len() < k_ne {
        take_known(&mut ne)?;
    }
    if r.remaining() != 0 {
        return Err(Error::Format("trailing bits after ext code".into()));
    }
    if ne.windows(2).any(|w| w[0] >= w[1]) || ne.last().is_some_and(|&w| w > kk) {
        return Err(Error::Format(
            "decoded windows are not increasing inside [1, K]".into(),
        ));
    }
    let mut out = vec![false; kk as usize];
    for w in ne {
        out[(w - 1) as usize] = true;
    }
    Ok(IndicatorSeq {
        k,
        l,
        delta,
        bits: out,
    })
}

/// Wilson score interval at 95%.
pub fn wilson(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let den = 1.0 + z * z / n;
    let c = (p + z * z / (2.0 * n)) / den;
    let h = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / den;
    ((c - h).max(0.0), (c + h).min(1.0))
}

/// Mean with a normal-approximation 95% interval.
fn mean_ci(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let h = 1.959_963_984_540_054 * (var / n).sqrt();
    (mean, mean - h, mean + h)
}

/// Draws sets until the block `[s_c, s_{c+m}]` is good.
fn sample_good_block<R: Rng>(
    sampler: &mut SetSampler,
    setup: BlockSetup,
    rng: &mut R,
) -> Result<(Vec<u64>, Block)> {
    let BlockSetup { m, c, .. } = setup;
    for _ in 0..100_000 {
        let s = sampler.sample(rng);
        let (x, y) = (s[(c - 1) as usize], s[(c + m - 1) as usize]);
        if is_good_block(x, y, m) {
            let pts: Vec<u64> = s.iter().copied().filter(|&p| p >= x && p <= y).collect();
            return Ok((pts, Block { x, y, m }));
        }
    }
    Err(Error::Threshold(
        "no good block found in 100000 draws".into(),
    ))
}

/// Source of blocks: sets of `u` points in `[B]`, block `[s_c, s_{c+m}]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BlockSetup {
    #[serde(rename = "B")]
    pub b: u64,
    pub u: u64,
    pub m: u64,
    pub c: u64,
}

impl BlockSetup {
    pub fn new(b: u64, u: u64, m: u64, c: u64) -> Result<Self> {
        if m == 0 || c == 0 || c + m > u || u > b {
            return Err(Error::Range(format!(
                "need 1 <= c, c + m <= u <= B (B={b}, u={u}, m={m}, c={c})"
            )));
        }
        Ok(BlockSetup { b, u, m, c })
    }

    /// Block starting at the middle element, `c = u/2`.
    pub fn centered(b: u64, u: u64, m: u64) -> Result<Self> {
        Self::new(b, u, m, u / 2)
    }

    fn sampler(&self) -> Result<SetSampler> {
        SetSampler::new(self.b, self.u)
    }
}

/// Estimate of `Pr[m²/2 <= s_{c+m} − s_c <= 2m²]` with a Wilson interval.
pub fn est_good_block_prob<R: Rng>(
    setup: BlockSetup,
    trials: u64,
    rng: &mut R,
) -> Result<(f64, f64, f64)> {
    let BlockSetup { m, c, .. } = setup;
    let mut sampler = setup.sampler()?;
    let mut hits = 0;
    for _ in 0..trials {
        let s = sampler.sample(rng);
        if is_good_block(s[(c - 1) as usize], s[(c + m - 1) as usize], m) {
            hits += 1;
        }
    }
    let (lo, hi) = wilson(hits, trials);
    Ok((hits as f64 / trials.max(1) as f64, lo, hi))
}

/// Windows included in the joint plug-in entropy.
pub const ENTROPY_MAX_WINDOWS: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyEstimate {
    /// Plug-in entropy (bits) of `(K, E_1..E_min(K,24))` over good blocks.
    pub plugin: f64,
    /// Plug-in plus the Miller–Madow correction.
    pub miller_madow: f64,
    pub distinct_outcomes: usize,
    pub max_windows: usize,
    pub truncated: bool,
}

/// Joint entropy of the window indicators of a random good block and offset.
pub fn est_indicator_entropy<R: Rng>(
    setup: BlockSetup,
    k: u64,
    trials: u64,
    rng: &mut R,
) -> Result<EntropyEstimate> {
    let mut sampler = setup.sampler()?;
    let mut hist: HashMap<(usize, Vec<bool>), u64> = HashMap::new();
    let mut max_windows = 0;
    for _ in 0..trials {
        let (pts, block) = sample_good_block(&mut sampler, setup, rng)?;
        let (l, _) = window_shape(block, k)?;
        let ind = indicators(&pts, block, k, rng.gen_range(1..=l))?;
        max_windows = max_windows.max(ind.bits.len());
        let kk = ind.bits.len();
        let head = ind.bits[..kk.min(ENTROPY_MAX_WINDOWS)].to_vec();
        *hist.entry((kk, head)).or_insert(0) += 1;
    }
    let n = trials as f64;
    let plugin = -hist
        .values()
        .map(|&c| c as f64 / n)
        .map(|p| p * p.log2())
        .sum::<f64>();
    let mm = plugin + (hist.len() as f64 - 1.0) / (2.0 * n * std::f64::consts::LN_2);
    Ok(EntropyEstimate {
        plugin,
        miller_madow: mm,
        distinct_outcomes: hist.len(),
        max_windows,
        truncated: max_windows > ENTROPY_MAX_WINDOWS,
    })
}

/// Mean number of windows holding between `⌈l/2⌉` and `l` points, with CI.
pub fn est_small_intervals<R: Rng>(
    setup: BlockSetup,
    k: u64,
    l: u64,
    trials: u64,
    rng: &mut R,
) -> Result<(f64, f64, f64)> {
    let mut sampler = setup.sampler()?;
    let mut xs = Vec::with_capacity(trials as usize);
    for _ in 0..trials {
        let (pts, block) = sample_good_block(&mut sampler, setup, rng)?;
        let (wl, kk) = window_shape(block, k)?;
        let delta = rng.gen_range(1..=wl);
        let mut counts = vec![0u64; kk as usize];
        for &s in &pts {
            if let Some(j) = window_of(s, block, wl, kk, delta) {
                counts[(j - 1) as usize] += 1;
            }
        }
        xs.push(
            counts
                .iter()
                .filter(|&&cnt| 2 * cnt >= l && cnt <= l && cnt > 0)
                .count() as f64,
        );
    }
    Ok(mean_ci(&xs))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapPairEstimate {
    /// Mean number of consecutive non-empty window pairs separated by
    /// `t-1 ..< 2t` empty windows.
    pub pairs: f64,
    pub pairs_ci: (f64, f64),
    /// Mean number of non-empty windows.
    pub nonempty: f64,
    pub nonempty_ci: (f64, f64),
}

pub fn est_gap_pairs<R: Rng>(
    setup: BlockSetup,
    k: u64,
    t_gap: u64,
    trials: u64,
    rng: &mut R,
) -> Result<GapPairEstimate> {
    if t_gap == 0 {
        return Err(Error::Range("t_gap must be at least 1".into()));
    }
    let mut sampler = setup.sampler()?;
    let (mut pairs, mut ne) = (Vec::new(), Vec::new());
    for _ in 0..trials {
        let (pts, block) = sample_good_block(&mut sampler, setup, rng)?;
        let (l, _) = window_shape(block, k)?;
        let idx = indicators(&pts, block, k, rng.gen_range(1..=l))?.nonempty();
        let cnt = idx
            .windows(2)
            .filter(|w| (t_gap - 1..2 * t_gap).contains(&(w[1] - w[0] - 1)))
            .count();
        pairs.push(cnt as f64);
        ne.push(idx.len() as f64);
    }
    let (p, plo, phi) = mean_ci(&pairs);
    let (q, qlo, qhi) = mean_ci(&ne);
    Ok(GapPairEstimate {
        pairs: p,
        pairs_ci: (plo, phi),
        nonempty: q,
        nonempty_ci: (qlo, qhi),
    })
}

/// Total-variation distance between a sampler's empirical law and the exact one.
pub fn sampler_tv<R: Rng>(
    b: u64,
    u: u64,
    kind: SamplerKind,
    samples: u64,
    rng: &mut R,
) -> Result<f64> {
    let exact = exact_distribution(b, u)?;
    let index: HashMap<Vec<u64>, usize> = exact
        .iter()
        .enumerate()
        .map(|(i, (s, _))| (s.clone(), i))
        .collect();
    let mut counts = vec![0u64; exact.len()];
    let mut sampler = SetSampler::with_kind(b, u, kind)?;
    for _ in 0..samples {
        let s = sampler.sample(rng);
        let i = *index
            .get(&s)
            .ok_or_else(|| Error::Integrity(format!("sampler produced an invalid set {s:?}")))?;
        counts[i] += 1;
    }
    Ok(0.5
        * exact
            .iter()
            .zip(&counts)
            .map(|((_, p), &c)| (c as f64 / samples as f64 - p).abs())
            .sum::<f64>())
}

/// Lemma names accepted by [`verify_lemma`].
pub const LEMMAS: [&str; 8] = [
    "mfold",
    "marginal",
    "good-blocks",
    "entropy",
    "small-intervals",
    "gaps",
    "ext-roundtrip",
    "reduction",
];

/// Frozen thresholds (calibrated at seed 0).
pub mod thresholds {
    /// Largest total-variation distance accepted for the set samplers.
    pub const MARGINAL_TV: f64 = 0.02;
    pub const GOOD_BLOCK_PROB: f64 = 0.05;
    /// Entropy per `√k`.
    pub const ENTROPY_PER_SQRT_K: f64 = 0.15;
    /// Accepted range of `est(2l) / est(l)`.
    pub const SMALL_INTERVAL_RATIO: (f64, f64) = (1.3, 3.0);
    /// Accepted range of the non-empty mean at k=64 over `c·√64` fitted at k=16.
    pub const GAP_FIT_RATIO: (f64, f64) = (0.5, 2.0);
}

/// Machine-readable outcome of one verifier run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub lemma: String,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub threshold: f64,
    pub pass: bool,
    pub seed: u64,
    pub trials: u64,
    pub details: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

/// Default verifier parameters.
pub const VERIFY_B: u64 = 1 << 12;
pub const VERIFY_U: u64 = 64;
pub const VERIFY_M: u64 = 16;
pub const GOOD_BLOCK_M: u64 = 8;

/// Runs one named verifier; `trials` of `None` uses the lemma's default.
pub fn verify_lemma(lemma: &str, seed: u64, trials: Option<u64>) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut details = BTreeMap::new();
    let mut notes = Vec::new();
    let setup = BlockSetup::centered(VERIFY_B, VERIFY_U, VERIFY_M)?;
    let rep = |estimate: f64,
               lo: f64,
               hi: f64,
               threshold: f64,
               pass: bool,
               trials: u64,
               details,
               notes| VerifyReport {
        lemma: lemma.to_string(),
        estimate,
        ci_low: lo,
        ci_high: hi,
        threshold,
        pass,
        seed,
        trials,
        details,
        notes,
    };
    match lemma {
        "mfold" => {
            let bad = identity_mismatches(20)?;
            notes.push("exact identities: m-fold convolution, capacity M, label sums".into());
            let b = bad as f64;
            Ok(rep(b, b, b, 0.0, bad == 0, 0, details, notes))
        }
        "marginal" => {
            let samples = trials.unwrap_or(1_000_000);
            let mut worst: f64 = 0.0;
            for (b, u) in [(8, 2), (10, 3)] {
                for (kind, name) in [
                    (SamplerKind::Exact, "exact"),
                    (SamplerKind::Forest, "forest"),
                ] {
                    let tv = sampler_tv(b, u, kind, samples, &mut rng)?;
                    details.insert(format!("tv_{name}_B{b}_u{u}"), tv);
                    worst = worst.max(tv);
                }
            }
            let t = thresholds::MARGINAL_TV;
            Ok(rep(
                worst,
                worst,
                worst,
                t,
                worst <= t,
                samples,
                details,
                notes,
            ))
        }
        "good-blocks" => {
            let n = trials.unwrap_or(100_000);
            let (p, lo, hi) = est_good_block_prob(
                BlockSetup {
                    m: GOOD_BLOCK_M,
                    ..setup
                },
                n,
                &mut rng,
            )?;
            let t = thresholds::GOOD_BLOCK_PROB;
            Ok(rep(p, lo, hi, t, p >= t, n, details, notes))
        }
        "entropy" => {
            let n = trials.unwrap_or(100_000);
            let mut worst = f64::INFINITY;
            let mut prev = f64::NEG_INFINITY;
            let mut monotone = true;
            for k in [16u64, 64] {
                let e = est_indicator_entropy(setup, k, n, &mut rng)?;
                details.insert(format!("plugin_k{k}"), e.plugin);
                details.insert(format!("miller_madow_k{k}"), e.miller_madow);
                details.insert(format!("max_windows_k{k}"), e.max_windows as f64);
                if e.truncated {
                    notes.push(format!("k={k}: joint entropy truncated to the first {ENTROPY_MAX_WINDOWS} windows (a lower bound)"));
                }
                worst = worst.min(e.plugin / (k as f64).sqrt());
                monotone &= e.plugin > prev;
                prev = e.plugin;
            }
            details.insert("monotone".into(), f64::from(u8::from(monotone)));
            let t = thresholds::ENTROPY_PER_SQRT_K;
            notes.push("estimate = min over k of plug-in entropy / sqrt(k)".into());
            Ok(rep(
                worst,
                worst,
                worst,
                t,
                worst >= t && monotone,
                n,
                details,
                notes,
            ))
        }
        "small-intervals" => {
            let n = trials.unwrap_or(100_000);
            let (k, l) = (16u64, 1u64);
            let (a, alo, ahi) = est_small_intervals(setup, k, l, n, &mut rng)?;
            let (b2, blo, bhi) = est_small_intervals(setup, k, 2 * l, n, &mut rng)?;
            details.insert(format!("mean_l{l}"), a);
            details.insert(format!("mean_l{}", 2 * l), b2);
            let ratio = b2 / a;
            let (t0, t1) = thresholds::SMALL_INTERVAL_RATIO;
            notes.push(format!(
                "estimate = mean(l={}) / mean(l={l}) at k={k}; pass range [{t0}, {t1}]",
                2 * l
            ));
            Ok(rep(
                ratio,
                blo / ahi,
                bhi / alo.max(f64::MIN_POSITIVE),
                t0,
                (t0..=t1).contains(&ratio),
                n,
                details,
                notes,
            ))
        }
        "gaps" => {
            let n = trials.unwrap_or(100_000);
            let mut ne = Vec::new();
            for k in [16u64, 64] {
                let mut prev = f64::INFINITY;
                let mut decreasing = true;
                for t_gap in [1u64, 2, 4, 8] {
                    let g = est_gap_pairs(setup, k, t_gap, n / 4, &mut rng)?;
                    details.insert(format!("pairs_k{k}_t{t_gap}"), g.pairs);
                    decreasing &= g.pairs <= prev;
                    prev = g.pairs;
                    if t_gap == 1 {
                        details.insert(format!("nonempty_k{k}"), g.nonempty);
                        ne.push(g.nonempty);
                    }
                }
                details.insert(
                    format!("pairs_decreasing_k{k}"),
                    f64::from(u8::from(decreasing)),
                );
            }
            let c_fit = ne[0] / 4.0;
            let ratio = ne[1] / (c_fit * 8.0);
            details.insert("c_fit".into(), c_fit);
            let (t0, t1) = thresholds::GAP_FIT_RATIO;
            notes.push("estimate = nonempty(k=64) / (c·sqrt(64)) with c fitted at k=16".into());
            Ok(rep(
                ratio,
                ratio,
                ratio,
                t0,
                (t0..=t1).contains(&ratio),
                n,
                details,
                notes,
            ))
        }
        "ext-roundtrip" => {
            let n = trials.unwrap_or(10_000);
            let mut sampler = SetSampler::new(VERIFY_B, VERIFY_U)?;
            let mut bad = 0u64;
            let mut bits = 0f64;
            for _ in 0..n {
                let (pts, block) = sample_good_block(&mut sampler, setup, &mut rng)?;
                let k = [4u64, 16, 64][rng.gen_range(0..3)];
                let (l, _) = window_shape(block, k)?;
                let delta = rng.gen_range(1..=l);
                let keep = rng.gen_range(0.0..=1.0);
                let sub: Vec<u64> = pts.iter().copied().filter(|_| rng.gen_bool(keep)).collect();
                let code = ext_encode(&pts, block, k, delta, &sub)?;
                bits += code.len() as f64;
                let ok = ext_decode(&code, &sub, block, k, delta).ok()
                    == Some(indicators(&pts, block, k, delta)?);
                bad += u64::from(!ok);
            }
            details.insert("mean_code_bits".into(), bits / n as f64);
            let b = bad as f64;
            Ok(rep(b, b, b, 0.0, bad == 0, n, details, notes))
        }
        "reduction" => {
            let n = trials.unwrap_or(1_000);
            let (bad, checked) = reduction_selfcheck(n, &mut rng)?;
            details.insert("instances".into(), checked as f64);
            let b = bad as f64;
            Ok(rep(b, b, b, 0.0, bad == 0, n, details, notes))
        }
        other => Err(Error::Usage(format!(
            "unknown lemma '{other}'; expected one of {}",
            LEMMAS.join(", ")
        ))),
    }
}

/// Exhaustive check at `r = 1, n = 8` plus `trials` random instances with
/// `r <= 4`; returns `(failures, instances)`.
pub fn reduction_selfcheck<R: Rng>(trials: u64, rng: &mut R) -> Result<(u64, u64)> {
    let mut bad = 0;
    let mut count = 0;
    let mut check = |inst: &PredZInstance, n: u64, r: u64| -> Result<()> {
        count += 1;
        let layout = reduce_to_array(inst, n, r)?;
        let st = SparseTable::build(&layout.values);
        let mut ok = check_layout(&layout, inst).is_ok();
        for i in 1..=inst.d {
            for x in 1..=inst.b {
                ok &= pred_via_rmq(&layout, &st, i, x)?
                    == pred_direct(&inst.sets[(i - 1) as usize], x);
            }
        }
        ok &= recover_z(&layout, &st)? == inst.z;
        bad += u64::from(!ok);
        Ok(())
    };
    let (d, b, u, z_cap) = derive_params(8, 1)?;
    for s1 in 1..=b {
        for s2 in 1..=b {
            let mut inst = PredZInstance {
                d,
                b,
                u,
                z_cap: z_cap.clone(),
                sets: vec![vec![s1], vec![s2]],
                z: BigCount::one(),
            };
            let bound = inst.z_bound().to_u64().expect("small bound");
            for z in 1..=bound {
                inst.z = BigCount::from(z);
                check(&inst, 8, 1)?;
            }
        }
    }
    for _ in 0..trials {
        let r = rng.gen_range(1..=4u64);
        let n = rng.gen_range(4 * r..=4 * r + 120);
        let (d, b, u, z_cap) = derive_params(n, r)?;
        let inst = sample_instance(d, b, u, &z_cap, rng)?;
        check(&inst, n, r)?;
    }
    Ok((bad, count))
}
