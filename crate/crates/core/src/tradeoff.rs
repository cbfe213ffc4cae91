//! Blocked balanced-parentheses index and the DFUDS-based RMQ built on it.
//!
//! The parenthesis string is cut into blocks of `r_blk` symbols. Each block
//! carries a `b_br`-ary segment tree of fixed depth whose nodes hold, per
//! child, the number of closes before the child and the child's minimum
//! excess (both relative to the parent). Leaves are chunks of `leaf` symbols
//! that are scanned directly. Across blocks there are prefix close counts,
//! block minima with a sparse table, and a pioneer index for `findopen`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::bits::{match_all, read_u32, read_u64, BitVec};
use crate::cartesian::{
    check_range, dfuds_decode, dfuds_full_from_array, DfudsString, RangeMinimum,
};
use crate::catalan::{catalan_number, log2_big};
use crate::container::{read_header, write_header, Kind};
use crate::error::{Error, Result};
use crate::probe::{ProbeCounter, Region};
use crate::report::SpaceReport;

pub const REGION_PARENS: Region = 0;
pub const REGION_TREE: Region = 1;
pub const REGION_PREFIX: Region = 2;
pub const REGION_PREFIX_DIR: Region = 3;
pub const REGION_MINIMA: Region = 4;
pub const REGION_SPARSE: Region = 5;
pub const REGION_PIONEER: Region = 6;
pub const REGION_PIONEER_DIR: Region = 7;
pub const REGION_TARGET: Region = 8;

/// Entries per bucket of the two-level search structures.
pub const BUCKET: usize = 16;

/// Bits needed to hold every value in `0..=max`.
fn width_for(max: u64) -> usize {
    (64 - max.leading_zeros()) as usize
}

/// Fixed-width unsigned integers packed into a bit vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedInts {
    width: usize,
    len: usize,
    bits: BitVec,
}

impl PackedInts {
    pub fn from_values(values: &[u64]) -> Self {
        let max = values.iter().copied().max().unwrap_or(0);
        Self::with_width(values, width_for(max))
    }

    fn with_width(values: &[u64], width: usize) -> Self {
        let mut bits = BitVec::with_capacity(values.len() * width);
        for &v in values {
            bits.push_bits(v, width);
        }
        PackedInts {
            width,
            len: values.len(),
            bits,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn size_bits(&self) -> u64 {
        (self.width * self.len) as u64
    }

    #[inline]
    pub fn get(&self, i: usize, region: Region, probes: &mut ProbeCounter) -> u64 {
        debug_assert!(i < self.len);
        let pos = i * self.width;
        probes.touch_bits(region, pos as u64, self.width as u64);
        self.bits.get_bits(pos, self.width)
    }

    fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&(self.width as u32).to_le_bytes())?;
        w.write_all(&(self.len as u64).to_le_bytes())?;
        self.bits.write_to(w)
    }

    fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let width = read_u32(r)? as usize;
        let len = read_u64(r)? as usize;
        if width > 64 {
            return Err(Error::Format("packed field wider than 64 bits".into()));
        }
        let bits = BitVec::read_from(r)?;
        if bits.len()
            != width
                .checked_mul(len)
                .ok_or_else(|| Error::Format("packed array too large".into()))?
        {
            return Err(Error::Format("packed array length mismatch".into()));
        }
        Ok(PackedInts { width, len, bits })
    }
}

/// Sorted keys with a directory of every `BUCKET`-th key; searches are a
/// binary search over the directory followed by one inside a bucket.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BucketSearch {
    keys: PackedInts,
    dir: PackedInts,
    key_region: Region,
    dir_region: Region,
}

impl BucketSearch {
    /// `keys` must be non-decreasing.
    pub fn new(keys: &[u64], key_region: Region, dir_region: Region) -> Self {
        debug_assert!(keys.windows(2).all(|w| w[0] <= w[1]));
        let heads: Vec<u64> = keys.iter().step_by(BUCKET).copied().collect();
        let packed = PackedInts::from_values(keys);
        let dir = PackedInts::with_width(&heads, packed.width);
        BucketSearch {
            keys: packed,
            dir,
            key_region,
            dir_region,
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len
    }

    pub fn is_empty(&self) -> bool {
        self.keys.len == 0
    }

    pub fn key(&self, i: usize, probes: &mut ProbeCounter) -> u64 {
        self.keys.get(i, self.key_region, probes)
    }

    /// Smallest index whose key is `>= x` (`len()` if none).
    pub fn first_geq(&self, x: u64, probes: &mut ProbeCounter) -> usize {
        // first bucket head >= x
        let (mut lo, mut hi) = (0usize, self.dir.len);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.dir.get(mid, self.dir_region, probes) >= x {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        if lo == 0 {
            return 0;
        }
        let mut a = (lo - 1) * BUCKET + 1;
        let mut b = (lo * BUCKET).min(self.keys.len);
        while a < b {
            let mid = (a + b) / 2;
            if self.keys.get(mid, self.key_region, probes) >= x {
                b = mid;
            } else {
                a = mid + 1;
            }
        }
        a
    }

    pub fn size_bits(&self) -> (u64, u64) {
        (self.keys.size_bits(), self.dir.size_bits())
    }
}

/// Shape of the per-block segment trees.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParenParams {
    /// Branching factor, a power of two `>= 2`.
    pub b_br: usize,
    /// Symbols per scanned leaf chunk, a power of two.
    pub leaf: usize,
    /// Number of segment-tree levels below the block root.
    pub depth: usize,
}

impl ParenParams {
    pub fn r_blk(&self) -> usize {
        self.leaf * self.b_br.pow(self.depth as u32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b_br < 2 || !self.b_br.is_power_of_two() {
            return Err(Error::Usage(
                "branching factor must be a power of two >= 2".into(),
            ));
        }
        if self.leaf == 0 || !self.leaf.is_power_of_two() {
            return Err(Error::Usage("leaf size must be a power of two".into()));
        }
        let ok = (0..self.depth)
            .try_fold(self.leaf, |acc, _| acc.checked_mul(self.b_br))
            .is_some_and(|r| r <= 1 << 40);
        if !ok {
            return Err(Error::Usage("block length too large".into()));
        }
        Ok(())
    }

    /// Parameters for `n` array elements and trade-off level `t >= 1`:
    /// branching `2^⌈log2(⌈log2 n / t⌉)⌉`, leaves of `2^(5+t)` symbols and `t`
    /// levels, with levels dropped while a block would exceed the string.
    pub fn resolve(n: usize, t: usize) -> ParenParams {
        let t = t.max(1);
        let lg = (usize::BITS - n.max(2).saturating_sub(1).leading_zeros()) as usize;
        let b_br = lg.div_ceil(t).max(2).next_power_of_two();
        let leaf = 1usize << (5 + t).min(20);
        let len = 2 * n + 2;
        let mut p = ParenParams {
            b_br,
            leaf,
            depth: t,
        };
        while p.depth > 0 && p.r_blk() / p.b_br >= len {
            p.depth -= 1;
        }
        p
    }
}

/// Per-call view of one segment-tree node payload.
struct NodeView<'a> {
    tree: &'a BitVec,
    off: usize,
    wc: usize,
    wm: usize,
    b: usize,
}

impl NodeView<'_> {
    /// Closes inside the parent before child `j`.
    #[inline]
    fn c(&self, j: usize) -> i64 {
        if j == 0 {
            0
        } else {
            self.tree.get_bits(self.off + (j - 1) * self.wc, self.wc) as i64
        }
    }

    /// `base + 1 - min` of child `j`, where `base` is the excess before it.
    #[inline]
    fn m(&self, j: usize) -> i64 {
        self.tree
            .get_bits(self.off + (self.b - 1) * self.wc + j * self.wm, self.wm) as i64
    }
}

/// Candidate minimum during a range query: either a resolved position or a
/// fully covered unit whose argmin is found only if it wins.
enum Cand {
    Pos(usize),
    Unit {
        level: usize,
        unit: usize,
        start: usize,
        base: i64,
    },
}

/// A balanced parenthesis string ('(' = 1) with rank/select on closes,
/// leftmost ±1 range minimum over the excess, and `findopen`.
/// Positions are 1-based; `excess(0) = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BalancedParens {
    bits: BitVec,
    params: ParenParams,
    nb: usize,
    /// Unit size per level; `sizes[0] = r_blk`, `sizes[depth] = leaf`.
    sizes: Vec<usize>,
    level_off: Vec<usize>,
    wc: Vec<usize>,
    wm: Vec<usize>,
    tree: BitVec,
    prefix: BucketSearch,
    minima: PackedInts,
    sparse: PackedInts,
    sparse_rows: Vec<usize>,
    pioneers: BucketSearch,
    targets: PackedInts,
    closes: usize,
}

impl BalancedParens {
    pub fn new(bits: BitVec, params: ParenParams) -> Result<Self> {
        params.validate()?;
        let len = bits.len();
        if len == 0 || !len.is_multiple_of(2) {
            return Err(Error::Format(
                "parenthesis string must have positive even length".into(),
            ));
        }
        let opens = match_all(&bits)?;
        let r = params.r_blk();
        let b = params.b_br;
        let depth = params.depth;
        let nb = len.div_ceil(r);
        let sizes: Vec<usize> = (0..=depth).map(|l| r / b.pow(l as u32)).collect();

        let mut cl = vec![0usize; len + 1];
        for p in 1..=len {
            cl[p] = cl[p - 1] + usize::from(!bits.get(p - 1));
        }
        let ex = |p: usize| p as i64 - 2 * cl[p] as i64;

        // absolute minima of every unit, bottom-up
        let mut mins: Vec<Vec<i64>> = vec![Vec::new(); depth + 1];
        let leaf_units = nb * b.pow(depth as u32);
        mins[depth] = (0..leaf_units)
            .map(|u| {
                let s = u * params.leaf + 1;
                let e = ((u + 1) * params.leaf).min(len);
                (s..=e).map(ex).min().unwrap_or(i64::MAX)
            })
            .collect();
        for l in (0..depth).rev() {
            let child = &mins[l + 1];
            mins[l] = child.chunks(b).map(|c| *c.iter().min().unwrap()).collect();
        }

        let mut wc = vec![0usize; depth + 1];
        let mut wm = vec![0usize; depth + 1];
        let mut level_off = vec![0usize; depth + 2];
        for l in 1..=depth {
            wc[l] = width_for(((b - 1) * sizes[l]) as u64);
            wm[l] = width_for(sizes[l] as u64 + 1);
            let parents = len.div_ceil(sizes[l - 1]);
            level_off[l + 1] = level_off[l] + parents * ((b - 1) * wc[l] + b * wm[l]);
        }
        let mut tree = BitVec::with_capacity(level_off[depth + 1]);
        for l in 1..=depth {
            let s = sizes[l];
            let parents = len.div_ceil(sizes[l - 1]);
            for p in 0..parents {
                let ps = p * sizes[l - 1] + 1;
                for j in 1..b {
                    let cs = ps + j * s;
                    let v = if ps > len {
                        0
                    } else {
                        cl[(cs - 1).min(len)] - cl[ps - 1]
                    };
                    tree.push_bits(v as u64, wc[l]);
                }
                for j in 0..b {
                    let cs = ps + j * s;
                    let v = if cs > len {
                        0
                    } else {
                        ex(cs - 1) + 1 - mins[l][p * b + j]
                    };
                    tree.push_bits(v as u64, wm[l]);
                }
            }
        }

        let prefix_keys: Vec<u64> = (0..nb).map(|k| cl[k * r] as u64).collect();
        let prefix = BucketSearch::new(&prefix_keys, REGION_PREFIX, REGION_PREFIX_DIR);
        let block_min: Vec<u64> = (0..nb)
            .map(|k| {
                if depth == 0 {
                    let e = ((k + 1) * r).min(len);
                    (k * r + 1..=e).map(ex).min().unwrap() as u64
                } else {
                    mins[0][k] as u64
                }
            })
            .collect();
        let minima = PackedInts::with_width(&block_min, width_for(len as u64));

        // sparse table of leftmost argmin blocks, rows k >= 1
        let mut rows: Vec<Vec<u64>> = Vec::new();
        let mut prev: Vec<u64> = (0..nb as u64).collect();
        let mut k = 1;
        while (1usize << k) <= nb {
            let half = 1usize << (k - 1);
            let row: Vec<u64> = (0..=nb - (1 << k))
                .map(|i| {
                    let (x, y) = (prev[i], prev[i + half]);
                    if block_min[y as usize] < block_min[x as usize] {
                        y
                    } else {
                        x
                    }
                })
                .collect();
            rows.push(row.clone());
            prev = row;
            k += 1;
        }
        let mut sparse_rows = vec![0usize];
        let mut flat = Vec::new();
        for row in &rows {
            flat.extend_from_slice(row);
            sparse_rows.push(flat.len());
        }
        let sparse = PackedInts::with_width(&flat, width_for(nb.saturating_sub(1) as u64));

        // pioneers: last far close of every run sharing the same open block
        let far: Vec<(usize, usize)> = (1..=len)
            .filter(|&p| !bits.get(p - 1) && (opens[p] - 1) / r != (p - 1) / r)
            .map(|p| (p, (opens[p] - 1) / r))
            .collect();
        let mut pion = Vec::new();
        let mut targ = Vec::new();
        for (i, &(p, ob)) in far.iter().enumerate() {
            if i + 1 == far.len() || far[i + 1].1 != ob {
                pion.push(p as u64);
                targ.push(ob as u64);
            }
        }
        let pioneers = BucketSearch::new(&pion, REGION_PIONEER, REGION_PIONEER_DIR);
        let targets = PackedInts::with_width(&targ, width_for(nb.saturating_sub(1) as u64));

        Ok(BalancedParens {
            bits,
            params,
            nb,
            sizes,
            level_off,
            wc,
            wm,
            tree,
            prefix,
            minima,
            sparse,
            sparse_rows,
            pioneers,
            targets,
            closes: cl[len],
        })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &BitVec {
        &self.bits
    }

    pub fn params(&self) -> ParenParams {
        self.params
    }

    pub fn block_count(&self) -> usize {
        self.nb
    }

    pub fn pioneer_count(&self) -> usize {
        self.pioneers.len()
    }

    /// Auxiliary bits by component name (the string itself excluded).
    pub fn components(&self) -> BTreeMap<String, u64> {
        let mut c = BTreeMap::new();
        c.insert("segment_trees".into(), self.tree.len() as u64);
        let (k, d) = self.prefix.size_bits();
        c.insert("prefix_counts".into(), k);
        c.insert("prefix_directory".into(), d);
        c.insert("block_minima".into(), self.minima.size_bits());
        c.insert("block_sparse_table".into(), self.sparse.size_bits());
        let (k, d) = self.pioneers.size_bits();
        c.insert("pioneer_positions".into(), k);
        c.insert("pioneer_directory".into(), d);
        c.insert("pioneer_targets".into(), self.targets.size_bits());
        c
    }

    pub fn aux_bits(&self) -> u64 {
        self.components().values().sum()
    }

    #[inline]
    fn node(&self, level: usize, parent: usize, probes: &mut ProbeCounter) -> NodeView<'_> {
        let (wc, wm, b) = (self.wc[level], self.wm[level], self.params.b_br);
        let pay = (b - 1) * wc + b * wm;
        let off = self.level_off[level] + parent * pay;
        probes.touch_bits(REGION_TREE, off as u64, pay as u64);
        NodeView {
            tree: &self.tree,
            off,
            wc,
            wm,
            b,
        }
    }

    /// Visits positions `from..=to` with their excess, given the excess
    /// before `from`; stops early when `f` returns false.
    fn scan<F: FnMut(usize, i64) -> bool>(
        &self,
        from: usize,
        to: usize,
        mut e: i64,
        probes: &mut ProbeCounter,
        mut f: F,
    ) {
        let mut p = from;
        while p <= to {
            let len = (to - p + 1).min(64);
            probes.touch_bits(REGION_PARENS, (p - 1) as u64, len as u64);
            let w = self.bits.get_bits(p - 1, len);
            for k in 0..len {
                e += if (w >> k) & 1 == 1 { 1 } else { -1 };
                if !f(p + k, e) {
                    return;
                }
            }
            p += len;
        }
    }

    fn block_base(&self, blk: usize, probes: &mut ProbeCounter) -> i64 {
        let start = blk * self.params.r_blk();
        start as i64 - 2 * self.prefix.key(blk, probes) as i64
    }

    pub fn rank_close(&self, p: usize) -> Result<usize> {
        self.rank_close_probed(p, &mut ProbeCounter::disabled())
    }

    /// Closes among positions `1..=p`.
    pub fn rank_close_probed(&self, p: usize, probes: &mut ProbeCounter) -> Result<usize> {
        if p > self.len() {
            return Err(Error::Range(format!(
                "position {p} beyond length {}",
                self.len()
            )));
        }
        if p == 0 {
            return Ok(0);
        }
        let blk = (p - 1) / self.params.r_blk();
        let mut cnt = self.prefix.key(blk, probes) as usize;
        let mut unit = blk;
        for l in 1..=self.params.depth {
            let child = (p - 1) / self.sizes[l];
            let j = child % self.params.b_br;
            if j > 0 {
                cnt += self.node(l, unit, probes).c(j) as usize;
            }
            unit = child;
        }
        let start = unit * self.sizes[self.params.depth] + 1;
        self.scan(start, p, 0, probes, |q, _| {
            if q <= p && !self.bits.get(q - 1) {
                cnt += 1;
            }
            true
        });
        Ok(cnt)
    }

    pub fn select_close(&self, k: usize) -> Result<usize> {
        self.select_close_probed(k, &mut ProbeCounter::disabled())
    }

    /// Position of the `k`-th close (1-based).
    pub fn select_close_probed(&self, k: usize, probes: &mut ProbeCounter) -> Result<usize> {
        if k == 0 || k > self.closes {
            return Err(Error::Range(format!("close {k} does not exist")));
        }
        let blk = self.prefix.first_geq(k as u64, probes) - 1;
        let mut rem = (k - self.prefix.key(blk, probes) as usize) as i64;
        let b = self.params.b_br;
        let mut unit = blk;
        for l in 1..=self.params.depth {
            let node = self.node(l, unit, probes);
            let (mut lo, mut hi) = (0usize, b - 1);
            while lo < hi {
                let mid = (lo + hi).div_ceil(2);
                if node.c(mid) < rem {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            rem -= node.c(lo);
            unit = unit * b + lo;
        }
        let start = unit * self.sizes[self.params.depth] + 1;
        let end = (start + self.params.leaf - 1).min(self.len());
        let mut found = 0;
        self.scan(start, end, 0, probes, |q, _| {
            if !self.bits.get(q - 1) {
                rem -= 1;
                if rem == 0 {
                    found = q;
                    return false;
                }
            }
            true
        });
        debug_assert!(found > 0);
        Ok(found)
    }

    pub fn excess(&self, p: usize) -> Result<i64> {
        Ok(p as i64 - 2 * self.rank_close(p)? as i64)
    }

    fn excess_probed(&self, p: usize, probes: &mut ProbeCounter) -> Result<i64> {
        Ok(p as i64 - 2 * self.rank_close_probed(p, probes)? as i64)
    }

    /// Leftmost minimum of the excess over `lo..=hi` inside one unit.
    #[allow(clippy::too_many_arguments)]
    fn range_min(
        &self,
        level: usize,
        unit: usize,
        start: usize,
        base: i64,
        lo: usize,
        hi: usize,
        probes: &mut ProbeCounter,
    ) -> (i64, usize) {
        let end = (start + self.sizes[level] - 1).min(self.len());
        if level == self.params.depth {
            let mut best = (i64::MAX, 0usize);
            self.scan(start, hi.min(end), base, probes, |q, e| {
                if q >= lo && e < best.0 {
                    best = (e, q);
                }
                true
            });
            return best;
        }
        let node = self.node(level + 1, unit, probes);
        let s = self.sizes[level + 1];
        let jl = (lo.max(start) - start) / s;
        let jh = (hi.min(end) - start) / s;
        let mut best_v = i64::MAX;
        let mut best = Cand::Pos(0);
        for j in jl..=jh {
            let cs = start + j * s;
            let cb = base + (j * s) as i64 - 2 * node.c(j);
            let child = unit * self.params.b_br + j;
            if lo <= cs && cs + s - 1 <= hi {
                let v = cb + 1 - node.m(j);
                if v < best_v {
                    best_v = v;
                    best = Cand::Unit {
                        level: level + 1,
                        unit: child,
                        start: cs,
                        base: cb,
                    };
                }
            } else {
                let (v, q) = self.range_min(level + 1, child, cs, cb, lo, hi, probes);
                if v < best_v {
                    best_v = v;
                    best = Cand::Pos(q);
                }
            }
        }
        match best {
            Cand::Pos(q) => (best_v, q),
            Cand::Unit {
                level,
                unit,
                start,
                base,
            } => (
                best_v,
                self.argmin_in(level, unit, start, base, best_v, probes),
            ),
        }
    }

    /// First position of value `v` inside a unit whose minimum is `v`.
    fn argmin_in(
        &self,
        mut level: usize,
        mut unit: usize,
        mut start: usize,
        mut base: i64,
        v: i64,
        probes: &mut ProbeCounter,
    ) -> usize {
        let b = self.params.b_br;
        while level < self.params.depth {
            let node = self.node(level + 1, unit, probes);
            let s = self.sizes[level + 1];
            let j = (0..b)
                .find(|&j| base + (j * s) as i64 - 2 * node.c(j) + 1 - node.m(j) == v)
                .expect("unit minimum must be attained by a child");
            base += (j * s) as i64 - 2 * node.c(j);
            start += j * s;
            unit = unit * b + j;
            level += 1;
        }
        let end = (start + self.params.leaf - 1).min(self.len());
        let mut found = 0;
        self.scan(start, end, base, probes, |q, e| {
            if e == v {
                found = q;
                false
            } else {
                true
            }
        });
        found
    }

    /// Last position in `lo..=hi` inside a unit with excess `<= v`.
    #[allow(clippy::too_many_arguments)]
    fn last_leq(
        &self,
        level: usize,
        unit: usize,
        start: usize,
        base: i64,
        lo: usize,
        hi: usize,
        v: i64,
        probes: &mut ProbeCounter,
    ) -> Option<usize> {
        let end = (start + self.sizes[level] - 1).min(self.len());
        if level == self.params.depth {
            let mut found = None;
            self.scan(start, hi.min(end), base, probes, |q, e| {
                if q >= lo && e <= v {
                    found = Some(q);
                }
                true
            });
            return found;
        }
        let node = self.node(level + 1, unit, probes);
        let s = self.sizes[level + 1];
        let jl = (lo.max(start) - start) / s;
        let jh = (hi.min(end) - start) / s;
        for j in (jl..=jh).rev() {
            let cs = start + j * s;
            let cb = base + (j * s) as i64 - 2 * node.c(j);
            let child = unit * self.params.b_br + j;
            if lo <= cs && cs + s - 1 <= hi {
                if cb + 1 - node.m(j) <= v {
                    return Some(self.last_leq_in(level + 1, child, cs, cb, v, probes));
                }
            } else if let Some(q) = self.last_leq(level + 1, child, cs, cb, lo, hi, v, probes) {
                return Some(q);
            }
        }
        None
    }

    /// Last position with excess `<= v` inside a unit whose minimum is `<= v`.
    fn last_leq_in(
        &self,
        mut level: usize,
        mut unit: usize,
        mut start: usize,
        mut base: i64,
        v: i64,
        probes: &mut ProbeCounter,
    ) -> usize {
        let b = self.params.b_br;
        let len = self.len();
        while level < self.params.depth {
            let node = self.node(level + 1, unit, probes);
            let s = self.sizes[level + 1];
            let j = (0..b)
                .rev()
                .find(|&j| {
                    start + j * s <= len
                        && base + (j * s) as i64 - 2 * node.c(j) + 1 - node.m(j) <= v
                })
                .expect("unit minimum must be attained by a child");
            base += (j * s) as i64 - 2 * node.c(j);
            start += j * s;
            unit = unit * b + j;
            level += 1;
        }
        let end = (start + self.params.leaf - 1).min(len);
        let mut found = 0;
        self.scan(start, end, base, probes, |q, e| {
            if e <= v {
                found = q;
            }
            true
        });
        found
    }

    fn block_range_min(
        &self,
        blk: usize,
        lo: usize,
        hi: usize,
        probes: &mut ProbeCounter,
    ) -> (i64, usize) {
        let base = self.block_base(blk, probes);
        self.range_min(0, blk, blk * self.params.r_blk() + 1, base, lo, hi, probes)
    }

    pub fn pm1rmq(&self, x: usize, y: usize) -> Result<usize> {
        self.pm1rmq_probed(x, y, &mut ProbeCounter::disabled())
    }

    /// Leftmost position of the minimum excess over `x..=y`.
    pub fn pm1rmq_probed(&self, x: usize, y: usize, probes: &mut ProbeCounter) -> Result<usize> {
        if x == 0 || x > y || y > self.len() {
            return Err(Error::Range(format!("invalid excess range [{x}, {y}]")));
        }
        let r = self.params.r_blk();
        let (bx, by) = ((x - 1) / r, (y - 1) / r);
        if bx == by {
            return Ok(self.block_range_min(bx, x, y, probes).1);
        }
        let mut best = self.block_range_min(bx, x, (bx + 1) * r, probes);
        if by > bx + 1 {
            let m = self.block_argmin(bx + 1, by - 1, probes);
            let v = self.minima.get(m, REGION_MINIMA, probes) as i64;
            if v < best.0 {
                let base = self.block_base(m, probes);
                best = (v, self.argmin_in(0, m, m * r + 1, base, v, probes));
            }
        }
        let right = self.block_range_min(by, by * r + 1, y, probes);
        if right.0 < best.0 {
            best = right;
        }
        Ok(best.1)
    }

    fn block_argmin(&self, a: usize, b: usize, probes: &mut ProbeCounter) -> usize {
        if a == b {
            return a;
        }
        let k = (usize::BITS - 1 - (b - a + 1).leading_zeros()) as usize;
        let row = self.sparse_rows[k - 1];
        let x = self.sparse.get(row + a, REGION_SPARSE, probes) as usize;
        let y = self
            .sparse
            .get(row + b + 1 - (1 << k), REGION_SPARSE, probes) as usize;
        if self.minima.get(y, REGION_MINIMA, probes) < self.minima.get(x, REGION_MINIMA, probes) {
            y
        } else {
            x
        }
    }

    pub fn findopen(&self, c: usize) -> Result<usize> {
        self.findopen_probed(c, &mut ProbeCounter::disabled())
    }

    /// Matching open of the close at position `c`.
    pub fn findopen_probed(&self, c: usize, probes: &mut ProbeCounter) -> Result<usize> {
        if c == 0 || c > self.len() {
            return Err(Error::Range(format!("position {c} out of range")));
        }
        probes.touch_bits(REGION_PARENS, (c - 1) as u64, 1);
        if self.bits.get(c - 1) {
            return Err(Error::Range(format!("position {c} is not a close")));
        }
        let v = self.excess_probed(c, probes)?;
        let r = self.params.r_blk();
        let blk = (c - 1) / r;
        let bs = blk * r + 1;
        let base = self.block_base(blk, probes);
        if c > bs {
            if let Some(q) = self.last_leq(0, blk, bs, base, bs, c - 1, v, probes) {
                return Ok(q + 1);
            }
        }
        if base <= v {
            return Ok(bs);
        }
        let i = self.pioneers.first_geq(c as u64, probes);
        if i >= self.pioneers.len() {
            return Err(Error::Integrity(
                "pioneer index inconsistent with string".into(),
            ));
        }
        let tb = self.targets.get(i, REGION_TARGET, probes) as usize;
        let ts = tb * r + 1;
        let tbase = self.block_base(tb, probes);
        Ok(
            match self.last_leq(0, tb, ts, tbase, ts, (ts + r - 1).min(c - 1), v, probes) {
                Some(q) => q + 1,
                None => ts,
            },
        )
    }

    fn write_aux<W: Write>(&self, w: &mut W) -> Result<()> {
        self.tree.write_to(w)?;
        self.prefix.keys.write_to(w)?;
        self.prefix.dir.write_to(w)?;
        self.minima.write_to(w)?;
        self.sparse.write_to(w)?;
        self.pioneers.keys.write_to(w)?;
        self.pioneers.dir.write_to(w)?;
        self.targets.write_to(w)
    }

    /// Reads the auxiliary sections and checks them against a rebuild.
    fn read_aux<R: Read>(r: &mut R, bits: BitVec, params: ParenParams) -> Result<Self> {
        let tree = BitVec::read_from(r)?;
        let pk = PackedInts::read_from(r)?;
        let pd = PackedInts::read_from(r)?;
        let minima = PackedInts::read_from(r)?;
        let sparse = PackedInts::read_from(r)?;
        let vk = PackedInts::read_from(r)?;
        let vd = PackedInts::read_from(r)?;
        let targets = PackedInts::read_from(r)?;
        let built = BalancedParens::new(bits, params)?;
        let same = built.tree == tree
            && built.prefix.keys == pk
            && built.prefix.dir == pd
            && built.minima == minima
            && built.sparse == sparse
            && built.pioneers.keys == vk
            && built.pioneers.dir == vd
            && built.targets == targets;
        if !same {
            return Err(Error::Integrity(
                "auxiliary sections do not match the parenthesis string".into(),
            ));
        }
        Ok(built)
    }
}

/// RMQ through the DFUDS of the previous-smaller-or-equal tree plus a
/// [`BalancedParens`] index over the full `2n + 2` symbol string.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TradeoffRmq {
    n: usize,
    t: usize,
    bp: BalancedParens,
}

impl TradeoffRmq {
    pub fn build(values: &[i64], t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::Usage("trade-off level t must be at least 1".into()));
        }
        Self::build_with_params(values, t, ParenParams::resolve(values.len(), t))
    }

    pub fn build_with_params(values: &[i64], t: usize, params: ParenParams) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Range("array must be non-empty".into()));
        }
        let bp = BalancedParens::new(dfuds_full_from_array(values), params)?;
        Ok(TradeoffRmq {
            n: values.len(),
            t,
            bp,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Requested trade-off level.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn params(&self) -> ParenParams {
        self.bp.params
    }

    pub fn parens(&self) -> &BalancedParens {
        &self.bp
    }

    pub fn dfuds(&self) -> DfudsString {
        DfudsString {
            n: self.n,
            middle: self.bp.bits.slice(1, 2 * self.n),
        }
    }

    pub fn dfuds_bits(&self) -> u64 {
        2 * self.n as u64
    }

    pub fn total_bits(&self) -> u64 {
        self.dfuds_bits() + 2 + self.bp.aux_bits()
    }

    /// Everything beyond the `2n` DFUDS bits.
    pub fn redundancy_bits(&self) -> u64 {
        self.total_bits() - self.dfuds_bits()
    }

    pub fn space_report(&self) -> SpaceReport {
        let mut components: BTreeMap<String, f64> = self
            .bp
            .components()
            .into_iter()
            .map(|(k, v)| (k, v as f64))
            .collect();
        components.insert("sentinels".into(), 2.0);
        SpaceReport {
            n: self.n as u64,
            kind: Kind::Tradeoff.name().into(),
            total_bits: self.total_bits() as f64,
            dfuds_bits: Some(self.dfuds_bits()),
            redundancy_bits: self.redundancy_bits() as f64,
            benchmark_bits: log2_big(&catalan_number(self.n as u64)),
            components,
        }
    }

    /// Answers `RMQ(i, j)` by the select / ±1 RMQ / findopen / rank sequence.
    pub fn query_probed(&self, i: usize, j: usize, probes: &mut ProbeCounter) -> Result<usize> {
        check_range(self.n, i, j)?;
        if i == j {
            return Ok(i);
        }
        let x = self.bp.select_close_probed(i + 1, probes)?;
        let y = self.bp.select_close_probed(j, probes)?;
        let w = self.bp.pm1rmq_probed(x, y, probes)?;
        let o = self.bp.findopen_probed(w, probes)?;
        if self.bp.rank_close_probed(o, probes)? == i {
            Ok(i)
        } else {
            self.bp.rank_close_probed(w, probes)
        }
    }

    pub fn query(&self, i: usize, j: usize) -> Result<usize> {
        self.query_probed(i, j, &mut ProbeCounter::disabled())
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        write_header(w, Kind::Tradeoff, self.n as u64)?;
        let p = self.bp.params;
        w.write_all(&(p.depth as u32).to_le_bytes())?;
        w.write_all(&(p.r_blk() as u64).to_le_bytes())?;
        w.write_all(&(p.b_br as u32).to_le_bytes())?;
        self.dfuds().middle.write_to(w)?;
        self.bp.write_aux(w)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write_to(&mut v).expect("write to memory");
        v
    }

    pub(crate) fn read_body<R: Read>(r: &mut R, n: u64) -> Result<Self> {
        let depth = read_u32(r)? as usize;
        let r_blk = read_u64(r)? as usize;
        let b_br = read_u32(r)? as usize;
        if n == 0 || n > 1 << 36 {
            return Err(Error::Format("implausible n".into()));
        }
        if b_br < 2 || !b_br.is_power_of_two() || depth > 64 {
            return Err(Error::Format("invalid segment-tree parameters".into()));
        }
        let fan = (0..depth)
            .try_fold(1usize, |acc, _| acc.checked_mul(b_br))
            .unwrap_or(0);
        if fan == 0 || !r_blk.is_multiple_of(fan) {
            return Err(Error::Format(
                "block length inconsistent with branching".into(),
            ));
        }
        let params = ParenParams {
            b_br,
            leaf: r_blk / fan,
            depth,
        };
        params
            .validate()
            .map_err(|e| Error::Format(e.to_string()))?;
        let middle = BitVec::read_from(r)?;
        let ds = DfudsString {
            n: n as usize,
            middle,
        };
        dfuds_decode(&ds)?;
        let bp = BalancedParens::read_aux(r, ds.full(), params)?;
        Ok(TradeoffRmq {
            n: n as usize,
            t: depth.max(1),
            bp,
        })
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let (kind, n) = read_header(r)?;
        if kind != Kind::Tradeoff {
            return Err(Error::Format("not a tradeoff structure".into()));
        }
        Self::read_body(r, n)
    }
}

impl RangeMinimum for TradeoffRmq {
    fn len(&self) -> usize {
        self.n
    }

    fn rmq(&self, a: usize, b: usize) -> usize {
        self.query(a, b).expect("valid query")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::{excess_array, findopen_oracle};
    use crate::cartesian::rmq_scan;

    fn small() -> ParenParams {
        ParenParams {
            b_br: 2,
            leaf: 2,
            depth: 2,
        }
    }

    #[test]
    fn findopen_examples() {
        let bp = BalancedParens::new(BitVec::from_parens("(())"), small()).unwrap();
        assert_eq!(bp.findopen(4).unwrap(), 1);
        assert_eq!(bp.findopen(3).unwrap(), 2);
        let bp = BalancedParens::new(BitVec::from_parens("()()"), small()).unwrap();
        assert_eq!(bp.findopen(4).unwrap(), 3);
        assert!(bp.findopen(3).is_err());
    }

    #[test]
    fn operations_match_oracles_on_random_strings() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for params in [
            small(),
            ParenParams {
                b_br: 4,
                leaf: 1,
                depth: 2,
            },
            ParenParams {
                b_br: 2,
                leaf: 8,
                depth: 0,
            },
        ] {
            for _ in 0..40 {
                let half = rng.gen_range(1..60);
                // random balanced string via a random walk that never dips below zero
                let mut s = String::new();
                let (mut o, mut c) = (0, 0);
                while c < half {
                    if o < half && (o == c || rng.gen_bool(0.5)) {
                        s.push('(');
                        o += 1;
                    } else {
                        s.push(')');
                        c += 1;
                    }
                }
                let bits = BitVec::from_parens(&s);
                let e = excess_array(&bits);
                let bp = BalancedParens::new(bits.clone(), params).unwrap();
                assert!(bp.pioneer_count() + 3 <= 4 * bp.block_count() || bp.pioneer_count() == 0);
                let mut k = 0;
                for p in 1..=bits.len() {
                    if !bits.get(p - 1) {
                        k += 1;
                        assert_eq!(bp.select_close(k).unwrap(), p);
                        assert_eq!(bp.findopen(p).unwrap(), findopen_oracle(&bits, p).unwrap());
                    }
                    assert_eq!(bp.rank_close(p).unwrap(), k);
                }
                for x in 1..=bits.len() {
                    for y in x..=bits.len() {
                        let want = (x..=y).min_by_key(|&q| (e[q - 1], q)).unwrap();
                        assert_eq!(bp.pm1rmq(x, y).unwrap(), want);
                    }
                }
            }
        }
    }

    #[test]
    fn query_examples() {
        let a = [5, 3, 4, 1, 2];
        for t in 1..=3 {
            let ds = TradeoffRmq::build(&a, t).unwrap();
            assert_eq!(ds.query(1, 5).unwrap(), 4);
            assert_eq!(ds.query(2, 2).unwrap(), 2);
            assert!(ds.query(0, 1).is_err());
            assert!(ds.query(3, 2).is_err());
        }
        let one = TradeoffRmq::build(&[7], 1).unwrap();
        assert_eq!(one.dfuds_bits(), 2);
        assert_eq!(one.query(1, 1).unwrap(), 1);
    }

    #[test]
    fn exhaustive_small_arrays_with_ties() {
        for n in 1..=6usize {
            let total = n.pow(n as u32);
            for code in 0..total {
                let mut c = code;
                let a: Vec<i64> = (0..n)
                    .map(|_| {
                        let v = (c % n) as i64;
                        c /= n;
                        v
                    })
                    .collect();
                let ds = TradeoffRmq::build_with_params(&a, 1, small()).unwrap();
                for i in 1..=n {
                    for j in i..=n {
                        assert_eq!(
                            ds.query(i, j).unwrap(),
                            rmq_scan(&a, i, j).unwrap(),
                            "{a:?} {i} {j}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn serialization_round_trip_and_tamper() {
        let a: Vec<i64> = (0..300).map(|i| (i * 7919 % 113) as i64).collect();
        let ds = TradeoffRmq::build(&a, 2).unwrap();
        let bytes = ds.to_bytes();
        let back = TradeoffRmq::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back.bp, ds.bp);
        let mut bad = bytes.clone();
        let last = bad.len() - 1;
        bad[last] ^= 1;
        assert!(TradeoffRmq::read_from(&mut bad.as_slice()).is_err());
    }
}
