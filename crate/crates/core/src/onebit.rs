//! RMQ in `log2 C_n + 1` bits with logarithmic query time.
//!
//! The array is split by a complete binary decomposition (left half gets
//! the extra element). Every node `v` carries the label `(l, r)`: the
//! number of prefix minima and suffix minima of its range. A node is
//! stored as a packed value choosing the children labels, the relation of
//! the two halves, and the merge witness of the left suffix minima with
//! the right prefix minima. Packing uses exact counts of Cartesian trees
//! per label, so the total is within a fraction of a bit of `log2 C_n`.
//!
//! A node of size `s` with label `(l, r)` is decoded in three steps:
//! * the node table picks which side holds the minimum and one child label;
//! * a rest table picks how many minima of the other side survive (`k`);
//! * a pick table picks the remaining child label, and yields the witness.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, RwLock};

use num_traits::Zero;

use crate::cartesian::{check_range, rank_reduce, RangeMinimum};
use crate::catalan::{
    binomial, binomial_i, catalan_number, log2_big, mfold, BigCount, BinomCursor, MfoldCursor,
};
use crate::container::{read_header, write_header, Kind};
use crate::error::{Error, Result};
use crate::probe::ProbeCounter;
use crate::report::SpaceReport;
use crate::spillover::{
    rounded_size, rounding_exponent, subset_exponent, MemView, Size, SpillRep, Subs, SubsetCodec,
    Table, EXACT_LIMIT, E_DELTA, REGION_SPILL, R_INTERNAL,
};

/// Largest `n` built without an explicit override.
pub const DEFAULT_MAX_N: usize = 1 << 14;

/// Sizes of the left and right halves of a node of size `s`.
pub fn halves(s: u64) -> (u64, u64) {
    (s.div_ceil(2), s / 2)
}

/// Label of a node: counts of prefix minima (`l`) and suffix minima (`r`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeLabel {
    pub l: u64,
    pub r: u64,
}

/// Number of arrays (up to Cartesian equivalence) of size `s` whose root
/// label is `phi`.
pub fn count_n(s: u64, phi: NodeLabel) -> BigCount {
    if s == 0 || phi.l == 0 || phi.r == 0 {
        return BigCount::zero();
    }
    mfold(phi.l + phi.r - 2, s - 1)
}

/// Number of merge witnesses compatible with parent label `phi` and
/// children labels `left`, `right`.
pub fn merge_count(phi: NodeLabel, left: NodeLabel, right: NodeLabel) -> Result<BigCount> {
    if phi.l == left.l && phi.r > right.r && phi.r <= right.r + left.r {
        let k = phi.r - right.r;
        Ok(binomial(left.r - k + right.l - 1, right.l - 1))
    } else if phi.r == right.r && phi.l > left.l && phi.l <= left.l + right.l {
        let k = phi.l - left.l;
        let c = right.l - k;
        Ok(binomial(c + left.r - 1, c))
    } else {
        Err(Error::Range(format!(
            "label {phi:?} cannot arise from children {left:?} and {right:?}"
        )))
    }
}

/// Number of (right label, merge witness) completions given the left child
/// keeps `arm2` suffix minima and the parent has `arm` suffix minima, the
/// other half having size `cs`.
pub fn rest_count(cs: u64, arm: u64, arm2: u64) -> BigCount {
    let kmax = arm2.min(arm.saturating_sub(1)) as i64;
    if kmax <= 0 {
        return BigCount::zero();
    }
    let (cs, arm, arm2) = (cs as i64, arm as i64, arm2 as i64);
    let top = 2 * cs - arm + arm2 - 1;
    let hi = binomial_i(top, cs - arm + kmax);
    let lo = binomial_i(top, cs - arm);
    assert!(hi >= lo, "rest count underflow");
    hi - lo
}

/// Positions of the prefix minima of `vals[lo..=hi]` (1-based, strict).
pub fn prefix_minima(vals: &[u32], lo: usize, hi: usize) -> Vec<usize> {
    let mut out = vec![lo];
    for i in lo + 1..=hi {
        if vals[i - 1] < vals[*out.last().unwrap() - 1] {
            out.push(i);
        }
    }
    out
}

/// Positions of the suffix minima of `vals[lo..=hi]`, scanning leftward.
pub fn suffix_minima(vals: &[u32], lo: usize, hi: usize) -> Vec<usize> {
    let mut out = vec![hi];
    for i in (lo..hi).rev() {
        if vals[i - 1] < vals[*out.last().unwrap() - 1] {
            out.push(i);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Ctx {
    Root1,
    Root2 {
        m: u64,
    },
    Node {
        s: u64,
        l: u64,
        r: u64,
    },
    Rest {
        side: u8,
        s: u64,
        arm: u64,
        arm2: u64,
    },
    Pick {
        side: u8,
        s: u64,
        arm: u64,
        c: u64,
    },
}

impl Ctx {
    fn tag(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }
}

fn child_size(side: u8, s: u64) -> u64 {
    let (a, b) = halves(s);
    if side == 1 {
        b
    } else {
        a
    }
}

/// Input-independent packing model for arrays of size `n`.
#[derive(Debug)]
pub struct OneBitModel {
    n: u64,
    r: u128,
    e_r: u64,
    e_int: u64,
    exact_max_s: u64,
    subsets: SubsetCodec,
    e_node: RwLock<HashMap<u64, u64>>,
    sizes: RwLock<HashMap<Ctx, Size>>,
    tables: RwLock<HashMap<Ctx, Arc<Table>>>,
}

impl OneBitModel {
    pub fn new(n: u64, r: u128) -> Self {
        let mut exact_max_s = 0;
        while catalan_number(exact_max_s + 1) <= BigCount::from(EXACT_LIMIT) {
            exact_max_s += 1;
        }
        OneBitModel {
            n,
            r,
            e_r: rounding_exponent(r),
            e_int: rounding_exponent(R_INTERNAL),
            exact_max_s,
            subsets: SubsetCodec::new(),
            e_node: RwLock::new(HashMap::new()),
            sizes: RwLock::new(HashMap::new()),
            tables: RwLock::new(HashMap::new()),
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn r(&self) -> u128 {
        self.r
    }

    /// Number of cached decoding tables and their footprint in words.
    pub fn table_stats(&self) -> (usize, usize) {
        let t = self.tables.read().unwrap();
        (t.len(), t.values().map(|x| x.words()).sum())
    }

    fn ce(&self, s: u64) -> u64 {
        if s <= self.exact_max_s {
            0
        } else {
            self.e_r
        }
    }

    fn e_node(&self, s: u64) -> u64 {
        if s <= 1 {
            return 0;
        }
        if let Some(&e) = self.e_node.read().unwrap().get(&s) {
            return e;
        }
        let (a, b) = halves(s);
        let e = self.e_node(a)
            + self.ce(a)
            + self.e_node(b)
            + self.ce(b)
            + subset_exponent(s)
            + 3 * self.e_int
            + 3 * E_DELTA;
        self.e_node.write().unwrap().insert(s, e);
        e
    }

    fn exponent(&self, c: &Ctx) -> u64 {
        match *c {
            Ctx::Root1 => self.e_node(self.n) + self.ce(self.n) + 2 * E_DELTA + self.e_int,
            Ctx::Root2 { .. } => self.e_node(self.n) + self.ce(self.n) + E_DELTA,
            Ctx::Node { s, .. } => self.e_node(s),
            Ctx::Pick { side, s, .. } => {
                let cs = child_size(side, s);
                self.e_node(cs) + self.ce(cs) + subset_exponent(s) + self.e_int + E_DELTA
            }
            Ctx::Rest { side, s, .. } => {
                let cs = child_size(side, s);
                self.e_node(cs) + self.ce(cs) + subset_exponent(s) + 2 * self.e_int + 2 * E_DELTA
            }
        }
    }

    fn granularity(&self, c: &Ctx) -> u128 {
        match c {
            Ctx::Root1 | Ctx::Node { .. } => self.r,
            _ => R_INTERNAL,
        }
    }

    fn count(&self, c: &Ctx) -> BigCount {
        let n = self.n;
        match *c {
            Ctx::Root1 => catalan_number(n),
            Ctx::Root2 { m } => BigCount::from(m - 1) * mfold(m - 2, n - 1),
            Ctx::Node { s, l, r } => count_n(s, NodeLabel { l, r }),
            Ctx::Rest { side, s, arm, arm2 } => rest_count(child_size(side, s), arm, arm2),
            Ctx::Pick { side, s, arm, c } => {
                let cs = child_size(side, s);
                mfold(arm + c, cs + c)
            }
        }
    }

    fn size_with(&self, c: &Ctx, w: &BigCount) -> Size {
        if let Some(s) = self.sizes.read().unwrap().get(c) {
            return *s;
        }
        let s = rounded_size(w, self.exponent(c), self.granularity(c), EXACT_LIMIT);
        self.sizes.write().unwrap().insert(*c, s);
        s
    }

    fn size(&self, c: &Ctx) -> Size {
        if let Ctx::Node { s: 1, l, r } = *c {
            return if l == 1 && r == 1 {
                Size::ONE
            } else {
                Size { k: 0, m: 0 }
            };
        }
        if let Some(s) = self.sizes.read().unwrap().get(c) {
            return *s;
        }
        let w = self.count(c);
        self.size_with(c, &w)
    }

    fn node_size(&self, s: u64, l: u64, r: u64, w: &BigCount) -> Size {
        if s == 1 {
            return self.size(&Ctx::Node { s, l, r });
        }
        self.size_with(&Ctx::Node { s, l, r }, w)
    }

    /// Size of the whole structure.
    pub fn root_size(&self) -> Size {
        self.size(&Ctx::Root1)
    }

    fn table(&self, c: &Ctx) -> Arc<Table> {
        if let Some(t) = self.tables.read().unwrap().get(c) {
            return t.clone();
        }
        let items = self.items(c);
        let t = Arc::new(Table::build(self.size(c), items));
        self.tables.write().unwrap().insert(*c, t.clone());
        t
    }

    fn items(&self, c: &Ctx) -> Vec<(u64, Subs)> {
        let n = self.n as i64;
        let mut items = Vec::new();
        let mut mf = MfoldCursor::default();
        match *c {
            Ctx::Root1 => {
                for m in 2..=self.n + 1 {
                    let w = BigCount::from(m - 1) * mf.get(m as i64 - 2, n - 1);
                    if !w.is_zero() {
                        items.push((m, Subs::one(self.size_with(&Ctx::Root2 { m }, &w))));
                    }
                }
            }
            Ctx::Root2 { m } => {
                let w = mfold(m - 2, self.n - 1);
                for l in 1..m {
                    items.push((l, Subs::one(self.node_size(self.n, l, m - l, &w))));
                }
            }
            Ctx::Node { s, l, r } => {
                let (a, b) = halves(s);
                let mut rest = RestCursor::default();
                for rp in 1..=a {
                    let w1 = mf.get((l + rp) as i64 - 2, a as i64 - 1);
                    if w1.is_zero() {
                        continue;
                    }
                    let w2 = rest.get(b, r, rp);
                    if w2.is_zero() {
                        continue;
                    }
                    let s1 = self.node_size(a, l, rp, &w1);
                    let s2 = self.size_with(
                        &Ctx::Rest {
                            side: 1,
                            s,
                            arm: r,
                            arm2: rp,
                        },
                        &w2,
                    );
                    items.push((rp, Subs::two(s1, s2)));
                }
                let mut mf = MfoldCursor::default();
                let mut rest = RestCursor::default();
                for lpp in 1..=b {
                    let w1 = mf.get((lpp + r) as i64 - 2, b as i64 - 1);
                    if w1.is_zero() {
                        continue;
                    }
                    let w2 = rest.get(a, l, lpp);
                    if w2.is_zero() {
                        continue;
                    }
                    let s1 = self.node_size(b, lpp, r, &w1);
                    let s2 = self.size_with(
                        &Ctx::Rest {
                            side: 2,
                            s,
                            arm: l,
                            arm2: lpp,
                        },
                        &w2,
                    );
                    items.push((a + lpp, Subs::two(s1, s2)));
                }
            }
            Ctx::Rest { side, s, arm, arm2 } => {
                let cs = child_size(side, s) as i64;
                let kmax = arm2.min(arm.saturating_sub(1));
                for k in 1..=kmax {
                    let (ai, a2) = (arm as i64 - k as i64, arm2 as i64 - k as i64);
                    let w = mf.get(ai + a2, cs + a2);
                    if !w.is_zero() {
                        let sub = Ctx::Pick {
                            side,
                            s,
                            arm: arm - k,
                            c: arm2 - k,
                        };
                        items.push((k, Subs::one(self.size_with(&sub, &w))));
                    }
                }
            }
            Ctx::Pick { side, s, arm, c } => {
                let cs = child_size(side, s);
                let mut bc = BinomCursor::new(0, 0);
                for x in 1..=(cs + 1).saturating_sub(arm) {
                    let f = c + x - 1;
                    let j = if side == 1 { x - 1 } else { c };
                    let (nl, nr) = if side == 1 { (x, arm) } else { (arm, x) };
                    let w1 = mf.get((nl + nr) as i64 - 2, cs as i64 - 1);
                    if w1.is_zero() {
                        continue;
                    }
                    let w2 = bc.go(f as i64, j as i64).clone();
                    let s1 = self.node_size(cs, nl, nr, &w1);
                    let s2 = self.subsets.size_from(f, j, &w2);
                    items.push((x, Subs::two(s1, s2)));
                }
            }
        }
        items
    }
}

/// Incremental [`rest_count`] over increasing `arm2`.
#[derive(Default)]
struct RestCursor {
    hi: Option<BinomCursor>,
    lo: Option<BinomCursor>,
}

impl RestCursor {
    fn get(&mut self, cs: u64, arm: u64, arm2: u64) -> BigCount {
        let kmax = arm2.min(arm.saturating_sub(1)) as i64;
        if kmax <= 0 {
            return BigCount::zero();
        }
        let (csi, armi, arm2i) = (cs as i64, arm as i64, arm2 as i64);
        let top = 2 * csi - armi + arm2i - 1;
        let h = self
            .hi
            .get_or_insert_with(|| BinomCursor::new(top, csi - armi + kmax))
            .go(top, csi - armi + kmax)
            .clone();
        let l = self
            .lo
            .get_or_insert_with(|| BinomCursor::new(top, csi - armi))
            .go(top, csi - armi)
            .clone();
        h - l
    }
}

#[derive(Clone, Debug)]
struct NodeH<'a> {
    lo: usize,
    hi: usize,
    l: u64,
    r: u64,
    view: MemView<'a>,
    spill: u128,
}

impl NodeH<'_> {
    fn is_leaf(&self) -> bool {
        self.lo == self.hi
    }
}

/// Merge witness of a node: positions of the right prefix minima within
/// the decreasing-order merge with the left suffix minima.
#[derive(Clone, Debug)]
struct Witness<'a> {
    min_on_left: bool,
    f: u64,
    j: u64,
    view: MemView<'a>,
    spill: u128,
}

#[derive(Clone, Debug)]
struct Split<'a> {
    left: NodeH<'a>,
    right: NodeH<'a>,
    witness: Witness<'a>,
}

/// Range bounds of the straddling children and the ranks of the
/// candidate minima in their greedy sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Relocation {
    pub mid: usize,
    pub a_rank: u64,
    pub b_rank: u64,
}

/// The `log2 C_n + 1` bit RMQ structure.
#[derive(Debug, Clone)]
pub struct OneBitRmq {
    n: usize,
    rep: SpillRep,
    model: Arc<OneBitModel>,
}

impl OneBitRmq {
    /// Builds with `r = 8n`, refusing `n > DEFAULT_MAX_N`.
    pub fn build(values: &[i64]) -> Result<Self> {
        Self::build_with_limit(values, DEFAULT_MAX_N)
    }

    pub fn build_with_limit(values: &[i64], max_n: usize) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::Range("array must be non-empty".into()));
        }
        if n > max_n {
            return Err(Error::Usage(format!(
                "n = {n} exceeds the build limit {max_n}"
            )));
        }
        let model = Arc::new(OneBitModel::new(n as u64, 8 * n as u128));
        Ok(Self::build_with_model(values, model))
    }

    pub fn build_with_model(values: &[i64], model: Arc<OneBitModel>) -> Self {
        let n = values.len();
        assert_eq!(model.n, n as u64);
        let vals = rank_reduce(values);
        let (lab, node) = encode_node(&model, &vals, 1, n);
        let m = lab.l + lab.r;
        let t2 = model.table(&Ctx::Root2 { m });
        let (mem2, sp2) = t2.encode(lab.l, &[(&node.mem, node.spill)]);
        let t1 = model.table(&Ctx::Root1);
        let (mem, spill) = t1.encode(m, &[(&mem2, sp2)]);
        OneBitRmq {
            n,
            rep: SpillRep {
                size: t1.size(),
                mem,
                spill,
            },
            model,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> u128 {
        self.model.r
    }

    pub fn model(&self) -> &Arc<OneBitModel> {
        &self.model
    }

    pub fn rep(&self) -> &SpillRep {
        &self.rep
    }

    /// `M* + log2 K*` of the root representation.
    pub fn accounted_bits(&self) -> f64 {
        self.rep.accounted_bits()
    }

    /// `M* + ceil(log2 K*)`.
    pub fn physical_bits(&self) -> u64 {
        self.rep.physical_bits()
    }

    /// `log2 C_n`.
    pub fn benchmark_bits(&self) -> f64 {
        log2_big(&catalan_number(self.n as u64))
    }

    pub fn space_report(&self) -> SpaceReport {
        let mut components = std::collections::BTreeMap::new();
        components.insert("memory_bits".to_string(), self.rep.size.m as f64);
        components.insert("spill_bits".to_string(), (self.rep.size.k as f64).log2());
        let total = self.accounted_bits();
        let bench = self.benchmark_bits();
        SpaceReport {
            n: self.n as u64,
            kind: Kind::OneBit.name().into(),
            total_bits: total,
            dfuds_bits: None,
            redundancy_bits: total - bench,
            benchmark_bits: bench,
            components,
        }
    }

    fn root(&self, probes: &mut ProbeCounter) -> Result<NodeH<'_>> {
        probes.touch_cell(REGION_SPILL, 0);
        let view = MemView::new(&self.rep.mem);
        let m = &self.model;
        let t1 = m.table(&Ctx::Root1);
        let d1 = t1.decode(&view, self.rep.spill, Ctx::Root1.tag(), probes)?;
        let mm = d1.x;
        let (v1, s1) = d1.parts.into_iter().next().unwrap();
        let c2 = Ctx::Root2 { m: mm };
        let d2 = m.table(&c2).decode(&v1, s1, c2.tag(), probes)?;
        let l = d2.x;
        let (view, spill) = d2.parts.into_iter().next().unwrap();
        Ok(NodeH {
            lo: 1,
            hi: self.n,
            l,
            r: mm - l,
            view,
            spill,
        })
    }

    fn split<'a>(&'a self, h: &NodeH<'a>, probes: &mut ProbeCounter) -> Result<Split<'a>> {
        let m = &self.model;
        let s = (h.hi - h.lo + 1) as u64;
        let (a, _) = halves(s);
        let mid = h.lo + a as usize - 1;
        let c = Ctx::Node { s, l: h.l, r: h.r };
        let d = m.table(&c).decode(&h.view, h.spill, c.tag(), probes)?;
        let x = d.x;
        let mut parts = d.parts.into_iter();
        let (v_child, s_child) = parts.next().unwrap();
        let (v_rest, s_rest) = parts.next().unwrap();
        if x <= a {
            let rp = x;
            let left = NodeH {
                lo: h.lo,
                hi: mid,
                l: h.l,
                r: rp,
                view: v_child,
                spill: s_child,
            };
            let rc = Ctx::Rest {
                side: 1,
                s,
                arm: h.r,
                arm2: rp,
            };
            let dr = m.table(&rc).decode(&v_rest, s_rest, rc.tag(), probes)?;
            let k = dr.x;
            let (vp, sp) = dr.parts.into_iter().next().unwrap();
            let pc = Ctx::Pick {
                side: 1,
                s,
                arm: h.r - k,
                c: rp - k,
            };
            let dp = m.table(&pc).decode(&vp, sp, pc.tag(), probes)?;
            let lpp = dp.x;
            let mut pp = dp.parts.into_iter();
            let (vn, sn) = pp.next().unwrap();
            let (vt, st) = pp.next().unwrap();
            let right = NodeH {
                lo: mid + 1,
                hi: h.hi,
                l: lpp,
                r: h.r - k,
                view: vn,
                spill: sn,
            };
            let witness = Witness {
                min_on_left: true,
                f: rp - k + lpp - 1,
                j: lpp - 1,
                view: vt,
                spill: st,
            };
            Ok(Split {
                left,
                right,
                witness,
            })
        } else {
            let lpp = x - a;
            let right = NodeH {
                lo: mid + 1,
                hi: h.hi,
                l: lpp,
                r: h.r,
                view: v_child,
                spill: s_child,
            };
            let rc = Ctx::Rest {
                side: 2,
                s,
                arm: h.l,
                arm2: lpp,
            };
            let dr = m.table(&rc).decode(&v_rest, s_rest, rc.tag(), probes)?;
            let k = dr.x;
            let (vp, sp) = dr.parts.into_iter().next().unwrap();
            let cc = lpp - k;
            let pc = Ctx::Pick {
                side: 2,
                s,
                arm: h.l - k,
                c: cc,
            };
            let dp = m.table(&pc).decode(&vp, sp, pc.tag(), probes)?;
            let rp = dp.x;
            let mut pp = dp.parts.into_iter();
            let (vn, sn) = pp.next().unwrap();
            let (vt, st) = pp.next().unwrap();
            let left = NodeH {
                lo: h.lo,
                hi: mid,
                l: h.l - k,
                r: rp,
                view: vn,
                spill: sn,
            };
            let witness = Witness {
                min_on_left: false,
                f: cc + rp - 1,
                j: cc,
                view: vt,
                spill: st,
            };
            Ok(Split {
                left,
                right,
                witness,
            })
        }
    }

    /// Number of suffix minima of `p` at positions `>= a`.
    fn find_a<'a>(&'a self, p: &NodeH<'a>, a: usize, probes: &mut ProbeCounter) -> Result<u64> {
        if p.is_leaf() {
            return Ok(1);
        }
        let sp = self.split(p, probes)?;
        if a >= sp.right.lo {
            return self.find_a(&sp.right, a, probes);
        }
        let off = self.find_a(&sp.left, a, probes)? as i64;
        let lost = (sp.left.r + sp.right.r) as i64 - p.r as i64;
        Ok((off - lost).max(0) as u64 + sp.right.r)
    }

    /// Number of prefix minima of `q` at positions `<= b`.
    fn find_b<'a>(&'a self, q: &NodeH<'a>, b: usize, probes: &mut ProbeCounter) -> Result<u64> {
        if q.is_leaf() {
            return Ok(1);
        }
        let sp = self.split(q, probes)?;
        if b <= sp.left.hi {
            return self.find_b(&sp.left, b, probes);
        }
        let off = self.find_b(&sp.right, b, probes)? as i64;
        let lost = (sp.left.l + sp.right.l) as i64 - q.l as i64;
        Ok(sp.left.l + (off - lost).max(0) as u64)
    }

    /// Position of the `i`-th suffix minimum of `v`.
    fn find_a_pos<'a>(&'a self, v: &NodeH<'a>, i: u64, probes: &mut ProbeCounter) -> Result<usize> {
        let mut v = v.clone();
        let mut i = i;
        while !v.is_leaf() {
            let sp = self.split(&v, probes)?;
            if i <= sp.right.r {
                v = sp.right;
            } else {
                i = i - sp.right.r + (sp.left.r + sp.right.r - v.r);
                v = sp.left;
            }
        }
        Ok(v.lo)
    }

    /// Position of the `i`-th prefix minimum of `v`.
    fn find_b_pos<'a>(&'a self, v: &NodeH<'a>, i: u64, probes: &mut ProbeCounter) -> Result<usize> {
        let mut v = v.clone();
        let mut i = i;
        while !v.is_leaf() {
            let sp = self.split(&v, probes)?;
            if i <= sp.left.l {
                v = sp.left;
            } else {
                i = i - sp.left.l + (sp.left.l + sp.right.l - v.l);
                v = sp.right;
            }
        }
        Ok(v.lo)
    }

    fn straddle<'a>(&'a self, a: usize, b: usize, probes: &mut ProbeCounter) -> Result<Split<'a>> {
        let mut v = self.root(probes)?;
        loop {
            let sp = self.split(&v, probes)?;
            if b <= sp.left.hi {
                v = sp.left;
            } else if a > sp.left.hi {
                v = sp.right;
            } else {
                return Ok(sp);
            }
        }
    }

    /// Ranks `(a', b')` of the candidate minima for a query `a < b`.
    pub fn relocate(&self, a: usize, b: usize, probes: &mut ProbeCounter) -> Result<Relocation> {
        check_range(self.n, a, b)?;
        if a == b {
            return Err(Error::Range("relocation needs a < b".into()));
        }
        let sp = self.straddle(a, b, probes)?;
        let a_rank = self.find_a(&sp.left, a, probes)?;
        let b_rank = self.find_b(&sp.right, b, probes)?;
        Ok(Relocation {
            mid: sp.left.hi,
            a_rank,
            b_rank,
        })
    }

    /// Leftmost minimum of `[a, b]`, recording memory reads in `probes`.
    pub fn query_probed(&self, a: usize, b: usize, probes: &mut ProbeCounter) -> Result<usize> {
        check_range(self.n, a, b)?;
        if a == b {
            return Ok(a);
        }
        let sp = self.straddle(a, b, probes)?;
        let ar = self.find_a(&sp.left, a, probes)?;
        let br = self.find_b(&sp.right, b, probes)?;
        let w = &sp.witness;
        // position of the br-th right element in the decreasing merge
        let sel = if w.min_on_left {
            if br <= w.j {
                self.model
                    .subsets
                    .select(w.f, w.j, &w.view, w.spill, br, probes)?
            } else {
                w.f + 1
            }
        } else if br <= w.j {
            self.model
                .subsets
                .select(w.f, w.j, &w.view, w.spill, br, probes)?
        } else {
            w.f + 1 + (br - w.j)
        };
        if sel < ar + br {
            self.find_a_pos(&sp.left, ar, probes)
        } else {
            self.find_b_pos(&sp.right, br, probes)
        }
    }

    pub fn query(&self, a: usize, b: usize) -> Result<usize> {
        self.query_probed(a, b, &mut ProbeCounter::disabled())
    }

    /// Labels of every node in preorder, decoded from the structure.
    pub fn decode_labels(&self) -> Result<Vec<(usize, usize, NodeLabel)>> {
        let mut p = ProbeCounter::disabled();
        let mut out = Vec::new();
        let mut stack = vec![self.root(&mut p)?];
        while let Some(h) = stack.pop() {
            out.push((h.lo, h.hi, NodeLabel { l: h.l, r: h.r }));
            if !h.is_leaf() {
                let sp = self.split(&h, &mut p)?;
                stack.push(sp.right);
                stack.push(sp.left);
            }
        }
        Ok(out)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        write_header(w, Kind::OneBit, self.n as u64)?;
        w.write_all(&(self.model.r as u64).to_le_bytes())?;
        self.rep.write_to(w)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write_to(&mut v).expect("write to memory");
        v
    }

    /// Reads the body after the common header.
    pub(crate) fn read_body<R: Read>(r: &mut R, n: u64) -> Result<Self> {
        let rr = crate::bits::read_u64(r)? as u128;
        if n == 0 || rr == 0 || rr > R_INTERNAL {
            return Err(Error::Format("invalid n or r".into()));
        }
        let rep = SpillRep::read_from(r)?;
        let model = Arc::new(OneBitModel::new(n, rr));
        if rep.size != model.root_size() {
            return Err(Error::Integrity(
                "stored size does not match the model for n".into(),
            ));
        }
        Ok(OneBitRmq {
            n: n as usize,
            rep,
            model,
        })
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let (kind, n) = read_header(r)?;
        if kind != Kind::OneBit {
            return Err(Error::Format("not a onebit structure".into()));
        }
        Self::read_body(r, n)
    }
}

impl RangeMinimum for OneBitRmq {
    fn len(&self) -> usize {
        self.n
    }

    fn rmq(&self, a: usize, b: usize) -> usize {
        self.query(a, b).expect("valid query")
    }
}

fn encode_node(model: &OneBitModel, vals: &[u32], lo: usize, hi: usize) -> (NodeLabel, SpillRep) {
    let s = (hi - lo + 1) as u64;
    if s == 1 {
        return (NodeLabel { l: 1, r: 1 }, SpillRep::empty());
    }
    let (a, _) = halves(s);
    let mid = lo + a as usize - 1;
    let (ll, lrep) = encode_node(model, vals, lo, mid);
    let (rl, rrep) = encode_node(model, vals, mid + 1, hi);
    let p = suffix_minima(vals, lo, mid);
    let q = prefix_minima(vals, mid + 1, hi);
    debug_assert_eq!(p.len() as u64, ll.r);
    debug_assert_eq!(q.len() as u64, rl.l);
    let min_l = vals[*p.last().unwrap() - 1];
    let min_r = vals[*q.last().unwrap() - 1];
    // merge in decreasing value order: false = left element, true = right
    let mut merged = Vec::with_capacity(p.len() + q.len());
    let (mut i, mut j) = (0, 0);
    while i < p.len() || j < q.len() {
        let take_left = j == q.len() || (i < p.len() && vals[p[i] - 1] > vals[q[j] - 1]);
        merged.push(!take_left);
        if take_left {
            i += 1;
        } else {
            j += 1;
        }
    }
    let (rp, lpp) = (ll.r, rl.l);
    if min_l < min_r {
        let k = p.iter().filter(|&&x| vals[x - 1] < min_r).count() as u64;
        let label = NodeLabel {
            l: ll.l,
            r: rl.r + k,
        };
        let f = rp - k + lpp - 1;
        debug_assert!(merged[f as usize] && merged[f as usize + 1..].iter().all(|&b| !b));
        let set: Vec<u64> = (0..f)
            .filter(|&t| merged[t as usize])
            .map(|t| t + 1)
            .collect();
        let tiny = model.subsets.encode(f, &set);
        let pick = model.table(&Ctx::Pick {
            side: 1,
            s,
            arm: rl.r,
            c: rp - k,
        });
        let (pm, ps) = pick.encode(lpp, &[(&rrep.mem, rrep.spill), (&tiny.mem, tiny.spill)]);
        let rest = model.table(&Ctx::Rest {
            side: 1,
            s,
            arm: label.r,
            arm2: rp,
        });
        let (rm, rs) = rest.encode(k, &[(&pm, ps)]);
        let node = model.table(&Ctx::Node {
            s,
            l: label.l,
            r: label.r,
        });
        let (mem, spill) = node.encode(rp, &[(&lrep.mem, lrep.spill), (&rm, rs)]);
        (
            label,
            SpillRep {
                size: node.size(),
                mem,
                spill,
            },
        )
    } else {
        let k = q.iter().filter(|&&x| vals[x - 1] < min_l).count() as u64;
        let label = NodeLabel {
            l: ll.l + k,
            r: rl.r,
        };
        let c = lpp - k;
        let f = rp - 1 + c;
        debug_assert!(!merged[f as usize] && merged[f as usize + 1..].iter().all(|&b| b));
        let set: Vec<u64> = (0..f)
            .filter(|&t| merged[t as usize])
            .map(|t| t + 1)
            .collect();
        let tiny = model.subsets.encode(f, &set);
        let pick = model.table(&Ctx::Pick {
            side: 2,
            s,
            arm: ll.l,
            c,
        });
        let (pm, ps) = pick.encode(rp, &[(&lrep.mem, lrep.spill), (&tiny.mem, tiny.spill)]);
        let rest = model.table(&Ctx::Rest {
            side: 2,
            s,
            arm: label.l,
            arm2: lpp,
        });
        let (rm, rs) = rest.encode(k, &[(&pm, ps)]);
        let node = model.table(&Ctx::Node {
            s,
            l: label.l,
            r: label.r,
        });
        let (mem, spill) = node.encode(a + lpp, &[(&rrep.mem, rrep.spill), (&rm, rs)]);
        (
            label,
            SpillRep {
                size: node.size(),
                mem,
                spill,
            },
        )
    }
}

/// Label of `vals[lo..=hi]` computed directly.
pub fn label_of(vals: &[u32], lo: usize, hi: usize) -> NodeLabel {
    NodeLabel {
        l: prefix_minima(vals, lo, hi).len() as u64,
        r: suffix_minima(vals, lo, hi).len() as u64,
    }
}

/// Exact count of labels of size-`s` arrays: `sum_phi N(s, phi)`.
pub fn total_count(s: u64) -> BigCount {
    let mut t = BigCount::zero();
    for l in 1..=s {
        for r in 1..=s {
            t += count_n(s, NodeLabel { l, r });
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartesian::rmq_scan;
    use crate::catalan::tree_unrank;
    use num_traits::{One, ToPrimitive};

    #[test]
    fn label_sums_are_catalan() {
        for s in 1..=12 {
            assert_eq!(total_count(s), catalan_number(s), "s = {s}");
        }
        assert_eq!(count_n(1, NodeLabel { l: 1, r: 1 }), BigCount::one());
    }

    #[test]
    fn rest_closed_form_matches_sum() {
        for cs in 1..=8u64 {
            for arm in 1..=cs + 1 {
                for arm2 in 1..=9u64 {
                    let mut sum = BigCount::zero();
                    for k in 1..=arm2.min(arm - 1) {
                        sum += mfold(arm + arm2 - 2 * k, cs + arm2 - k);
                    }
                    assert_eq!(rest_count(cs, arm, arm2), sum, "{cs} {arm} {arm2}");
                }
            }
        }
    }

    #[test]
    fn recursion_reproduces_counts() {
        for s in 2..=9u64 {
            let (a, b) = halves(s);
            for l in 1..=s {
                for r in 1..=s {
                    let phi = NodeLabel { l, r };
                    let mut sum = BigCount::zero();
                    for l1 in 1..=a {
                        for r1 in 1..=a {
                            for l2 in 1..=b {
                                for r2 in 1..=b {
                                    let (c1, c2) =
                                        (NodeLabel { l: l1, r: r1 }, NodeLabel { l: l2, r: r2 });
                                    if let Ok(m) = merge_count(phi, c1, c2) {
                                        sum += count_n(a, c1) * count_n(b, c2) * m;
                                    }
                                }
                            }
                        }
                    }
                    assert_eq!(sum, count_n(s, phi), "s={s} phi={phi:?}");
                }
            }
        }
    }

    #[test]
    fn leaf_merge_count() {
        let leaf = NodeLabel { l: 1, r: 1 };
        assert_eq!(
            merge_count(NodeLabel { l: 1, r: 2 }, leaf, leaf).unwrap(),
            BigCount::one()
        );
        assert!(merge_count(NodeLabel { l: 1, r: 1 }, leaf, leaf).is_err());
    }

    #[test]
    fn small_trees_all_queries() {
        for n in 1..=6usize {
            let c = catalan_number(n as u64).to_u64().unwrap();
            for z in 1..=c {
                let t = tree_unrank(n, &BigCount::from(z)).unwrap();
                let arr = crate::cartesian::CartesianTree { shape: t }.realize();
                let ds = OneBitRmq::build(&arr).unwrap();
                for a in 1..=n {
                    for b in a..=n {
                        assert_eq!(
                            ds.query(a, b).unwrap(),
                            rmq_scan(&arr, a, b).unwrap(),
                            "n={n} z={z} [{a},{b}]"
                        );
                    }
                }
            }
        }
    }
}
