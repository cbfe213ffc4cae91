//! Fractional-bit storage.
//!
//! A value is stored as a pair `(memory bits, spill)` with `spill < K`, so
//! its size is `M + log2 K` bits. [`Table`] realizes the compression step:
//! given a finite domain of choices `x`, each carrying sub-representations
//! whose combined size is `V(x) = prod K_i * 2^(sum M_i)`, it packs
//! `(x, subs)` into one representation of a fixed target size.
//!
//! Layout of a packed representation of size `K_c * 2^M_c` with frame
//! `m* = M_c - g` (`g` guard bits): the first `m*` memory bits are the low
//! bits of the combined sub value, the next `M_c - m*` bits and the spill
//! hold `z = start(x) + (combined value >> m*)`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, RwLock};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::bits::{read_u64, BitVec};
use crate::catalan::{binomial, log2_big, BigCount, BinomCursor};
use crate::error::{Error, Result};
use crate::probe::{ProbeCounter, Region};

/// Guard bits between the frame and the memory length.
pub const GUARD_BITS: u64 = 48;
/// Granularity of internal (non user-facing) representations.
pub const R_INTERNAL: u128 = 1 << 40;
/// Representations with at most this many values are stored exactly.
pub const EXACT_LIMIT: u128 = 1 << 40;
/// `log2(1/eta)` for the bookkeeping factor `1 + eta`.
pub const ETA_BITS: u32 = 30;
/// Exponent reserved per table for the ceiling of region sizes.
pub const E_DELTA: u64 = 4;

pub const REGION_MEMORY: Region = 0;
pub const REGION_TABLE: Region = 1;
pub const REGION_SPILL: Region = 2;

/// Size `k * 2^m` of a representation: `m` memory bits and a spill below `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Size {
    pub k: u128,
    pub m: u64,
}

impl Size {
    pub const ONE: Size = Size { k: 1, m: 0 };

    pub fn is_zero(&self) -> bool {
        self.k == 0
    }

    /// Accounted size `m + log2 k`.
    pub fn log2(&self) -> f64 {
        self.m as f64 + (self.k as f64).log2()
    }

    /// Memory bits plus the bits needed to write the spill.
    pub fn physical_bits(&self) -> u64 {
        self.m + bits_for(self.k)
    }
}

/// Bits needed to write any value below `k`.
pub fn bits_for(k: u128) -> u64 {
    if k <= 1 {
        0
    } else {
        128 - (k - 1).leading_zeros() as u64
    }
}

#[inline]
fn mask(bits: u64) -> u128 {
    if bits >= 128 {
        u128::MAX
    } else {
        (1u128 << bits) - 1
    }
}

/// Exponent of `1 + eta` covering one rounding to granularity `r`:
/// `(1 + 1/r) * (1 + tiny) <= (1 + eta)^e`.
pub fn rounding_exponent(r: u128) -> u64 {
    let unit = 1u128 << ETA_BITS;
    (unit.div_ceil(r.max(1)) + 2) as u64
}

/// Upper approximation `mant * 2^exp` of `(1 + eta)^e`, `mant` normalized
/// to 64 bits.
pub fn lambda_up(e: u64) -> (u64, i64) {
    fn mul_up(a: (u64, i64), b: (u64, i64)) -> (u64, i64) {
        let p = a.0 as u128 * b.0 as u128;
        let lz = p.leading_zeros();
        let p = p << lz;
        let hi = (p >> 64) as u64;
        let lo = p as u64;
        let exp = a.1 + b.1 + 64 - lz as i64;
        if lo == 0 {
            (hi, exp)
        } else if hi == u64::MAX {
            (1 << 63, exp + 1)
        } else {
            (hi + 1, exp)
        }
    }
    let mut acc: (u64, i64) = (1 << 63, -63);
    let mut base: (u64, i64) = ((1 << 63) + (1 << (63 - ETA_BITS)), -63);
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_up(acc, base);
        }
        e >>= 1;
        if e > 0 {
            base = mul_up(base, base);
        }
    }
    acc
}

fn ceil_shr(x: &BigUint, t: u64) -> BigUint {
    if t == 0 {
        return x.clone();
    }
    let q = x >> t;
    let exact = x.trailing_zeros().is_none_or(|tz| tz >= t);
    if exact {
        q
    } else {
        q + 1u32
    }
}

/// Size of a representation holding `w` equally likely values with
/// bookkeeping exponent `e`, rounded to granularity `r`.
///
/// Exact (`k = w`, `m = 0`) when `w <= exact_limit`; otherwise the smallest
/// `k * 2^m >= w * (1 + eta)^e` with `k <= 2r` and `k > r` whenever `m > 0`.
pub fn rounded_size(w: &BigCount, e: u64, r: u128, exact_limit: u128) -> Size {
    if w.is_zero() {
        return Size { k: 0, m: 0 };
    }
    if w.bits() <= 128 {
        let wv = w.to_u128().unwrap();
        if wv <= exact_limit {
            return Size { k: wv, m: 0 };
        }
    }
    let (mant, exp) = lambda_up(e);
    let x = w * BigUint::from(mant);
    // value = x * 2^exp with exp < 0; k = ceil(x >> t), m = t + exp
    let neg = (-exp) as u64;
    let two_r = BigUint::from(2 * r);
    let lim_bits = two_r.bits();
    let mut t = neg.max(x.bits().saturating_sub(lim_bits));
    while t > neg && ceil_shr(&x, t - 1) <= two_r {
        t -= 1;
    }
    while ceil_shr(&x, t) > two_r {
        t += 1;
    }
    let k = ceil_shr(&x, t).to_u128().unwrap();
    Size { k, m: t - neg }
}

/// Sub-representation sizes attached to one choice `x` (at most two).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Subs {
    len: u8,
    s: [Size; 2],
}

impl Subs {
    pub fn none() -> Self {
        Subs {
            len: 0,
            s: [Size::ONE; 2],
        }
    }
    pub fn one(a: Size) -> Self {
        Subs {
            len: 1,
            s: [a, Size::ONE],
        }
    }
    pub fn two(a: Size, b: Size) -> Self {
        Subs { len: 2, s: [a, b] }
    }
    pub fn as_slice(&self) -> &[Size] {
        &self.s[..self.len as usize]
    }
    pub fn is_zero(&self) -> bool {
        self.as_slice().iter().any(|s| s.is_zero())
    }
    fn total_m(&self) -> u64 {
        self.as_slice().iter().map(|s| s.m).sum()
    }
    fn k_prod(&self) -> u128 {
        self.as_slice().iter().fold(1u128, |a, s| {
            a.checked_mul(s.k).expect("spill product overflow")
        })
    }
}

#[derive(Clone, Debug)]
struct Entry {
    x: u64,
    subs: Subs,
    sub_m: u64,
    k_prod: u128,
    start: u128,
    width: u128,
}

/// Decoding table of one packing step: regions of the frame per choice.
#[derive(Clone, Debug)]
pub struct Table {
    size: Size,
    m_star: u64,
    entries: Vec<Entry>,
}

/// Sub-representations recovered by [`Table::decode`].
#[derive(Clone, Debug)]
pub struct Decoded<'a> {
    pub index: usize,
    pub x: u64,
    pub parts: Vec<(MemView<'a>, u128)>,
}

impl Table {
    /// Lays out the regions; `None` if they do not fit in `size`.
    /// Choices must be given in increasing `x`; zero-size choices are dropped.
    pub fn try_build(size: Size, items: impl IntoIterator<Item = (u64, Subs)>) -> Option<Table> {
        let m_star = size.m.saturating_sub(GUARD_BITS);
        let zu = size.k.checked_shl((size.m - m_star) as u32)?;
        let mut entries = Vec::new();
        let mut start: u128 = 0;
        let mut last_x = None;
        for (x, subs) in items {
            if subs.is_zero() {
                continue;
            }
            if let Some(lx) = last_x {
                assert!(x > lx, "choices must be increasing");
            }
            last_x = Some(x);
            let sub_m = subs.total_m();
            let k_prod = subs.k_prod();
            let width = if sub_m >= m_star {
                let d = sub_m - m_star;
                if d >= 128 || k_prod.leading_zeros() as u64 <= d {
                    return None;
                }
                k_prod << d
            } else {
                let d = m_star - sub_m;
                if d >= 128 {
                    1
                } else {
                    k_prod.div_ceil(1u128 << d)
                }
            };
            start = start.checked_add(width)?;
            if start > zu {
                return None;
            }
            entries.push(Entry {
                x,
                subs,
                sub_m,
                k_prod,
                start: start - width,
                width,
            });
        }
        Some(Table {
            size,
            m_star,
            entries,
        })
    }

    pub fn build(size: Size, items: impl IntoIterator<Item = (u64, Subs)>) -> Table {
        Self::try_build(size, items).expect("packing regions exceed the target size")
    }

    pub fn size(&self) -> Size {
        self.size
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Table footprint in 64-bit words (x, start and sub sizes per entry).
    pub fn words(&self) -> usize {
        self.entries.len() * 4
    }

    pub fn index_of(&self, x: u64) -> Option<usize> {
        self.entries.binary_search_by_key(&x, |e| e.x).ok()
    }

    pub fn subs(&self, index: usize) -> &[Size] {
        self.entries[index].subs.as_slice()
    }

    /// Packs choice `x` with its sub-representations `(memory, spill)`.
    pub fn encode(&self, x: u64, parts: &[(&BitVec, u128)]) -> (BitVec, u128) {
        let idx = self.index_of(x).expect("choice has no region");
        let e = &self.entries[idx];
        let subs = e.subs.as_slice();
        assert_eq!(parts.len(), subs.len());
        let mut ym = BitVec::with_capacity(e.sub_m as usize);
        let mut yk: u128 = 0;
        let mut radix: u128 = 1;
        for (i, (mem, sp)) in parts.iter().enumerate() {
            assert_eq!(mem.len() as u64, subs[i].m, "sub memory length");
            assert!(*sp < subs[i].k, "sub spill out of range");
            ym.extend_from(mem);
            yk += sp * radix;
            if i + 1 < parts.len() {
                radix *= subs[i].k;
            }
        }
        let ms = self.m_star;
        let (mut out, q) = if e.sub_m >= ms {
            let d = e.sub_m - ms;
            let hi = if d == 0 {
                0
            } else {
                ym.get_bits_u128(ms as usize, d as usize)
            };
            (ym.slice(0, ms as usize), (yk << d) | hi)
        } else {
            let d = ms - e.sub_m;
            let mut low = ym;
            let take = d.min(128);
            low.push_bits_u128(yk & mask(take), take as usize);
            if d > 128 {
                low.extend_from(&BitVec::zeros((d - 128) as usize));
            }
            let q = if d >= 128 { 0 } else { yk >> d };
            (low, q)
        };
        assert!(q < e.width);
        let z = e.start + q;
        let zb = self.size.m - ms;
        out.push_bits_u128(z & mask(zb), zb as usize);
        let spill = z >> zb;
        assert!(spill < self.size.k);
        (out, spill)
    }

    /// Recovers the choice and its sub-representations from a packed one.
    pub fn decode<'a>(
        &self,
        view: &MemView<'a>,
        spill: u128,
        tag: u64,
        probes: &mut ProbeCounter,
    ) -> Result<Decoded<'a>> {
        let ms = self.m_star;
        let zb = self.size.m - ms;
        if view.len() as u64 != self.size.m || spill >= self.size.k {
            return Err(Error::Integrity(
                "representation does not match its table".into(),
            ));
        }
        let zlow = view.read(ms as usize, zb as usize, probes);
        let z = (spill << zb) | zlow;
        let idx = self.entries.partition_point(|e| e.start + e.width <= z);
        if idx == self.entries.len() {
            return Err(Error::Integrity("packed value outside every region".into()));
        }
        probes.touch_cell(
            REGION_TABLE,
            tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ idx as u64,
        );
        let e = &self.entries[idx];
        let q = z - e.start;
        let (ym, mut yk) = if e.sub_m >= ms {
            let d = e.sub_m - ms;
            let mut v = view.slice(0, ms as usize);
            v.push_tail(q & mask(d), d as usize);
            (v, q >> d)
        } else {
            let d = ms - e.sub_m;
            let kb = bits_for(e.k_prod);
            let rb = d.min(kb);
            let low = view.read(e.sub_m as usize, rb as usize, probes);
            let yk = if q == 0 { low } else { (q << d) | low };
            (view.slice(0, e.sub_m as usize), yk)
        };
        if yk >= e.k_prod {
            return Err(Error::Integrity("spill digit out of range".into()));
        }
        let subs = e.subs.as_slice();
        let mut parts = Vec::with_capacity(subs.len());
        let mut off = 0usize;
        for (i, s) in subs.iter().enumerate() {
            let sp = if i + 1 < subs.len() { yk % s.k } else { yk };
            yk = if i + 1 < subs.len() { yk / s.k } else { 0 };
            parts.push((ym.slice(off, s.m as usize), sp));
            off += s.m as usize;
        }
        Ok(Decoded {
            index: idx,
            x: e.x,
            parts,
        })
    }
}

/// A window of memory: a physical slice of the stored bit vector followed
/// by bits already recovered from decoded values.
#[derive(Clone, Debug)]
pub struct MemView<'a> {
    root: &'a BitVec,
    base: usize,
    plen: usize,
    tail: BitVec,
}

impl<'a> MemView<'a> {
    pub fn new(root: &'a BitVec) -> Self {
        MemView {
            root,
            base: 0,
            plen: root.len(),
            tail: BitVec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.plen + self.tail.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice(&self, off: usize, len: usize) -> MemView<'a> {
        assert!(off + len <= self.len());
        if off >= self.plen {
            return MemView {
                root: self.root,
                base: 0,
                plen: 0,
                tail: self.tail.slice(off - self.plen, len),
            };
        }
        let p = len.min(self.plen - off);
        let tail = if p < len {
            self.tail.slice(0, len - p)
        } else {
            BitVec::new()
        };
        MemView {
            root: self.root,
            base: self.base + off,
            plen: p,
            tail,
        }
    }

    fn push_tail(&mut self, bits: u128, len: usize) {
        self.tail.push_bits_u128(bits, len);
    }

    /// Reads `len <= 128` bits starting at `pos` (little-endian).
    pub fn read(&self, pos: usize, len: usize, probes: &mut ProbeCounter) -> u128 {
        assert!(len <= 128 && pos + len <= self.len());
        if len == 0 {
            return 0;
        }
        let mut out: u128 = 0;
        let mut got = 0usize;
        if pos < self.plen {
            let p = len.min(self.plen - pos);
            probes.touch_bits(REGION_MEMORY, (self.base + pos) as u64, p as u64);
            out = self.root.get_bits_u128(self.base + pos, p);
            got = p;
        }
        if got < len {
            let tpos = pos + got - self.plen;
            let rest = self.tail.get_bits_u128(tpos, len - got);
            out |= rest << got;
        }
        out
    }

    /// Copies the viewed bits out (no probes recorded).
    pub fn to_bitvec(&self) -> BitVec {
        let mut v = self.root.slice(self.base, self.plen);
        v.extend_from(&self.tail);
        v
    }
}

/// A stored value: `mem` holds `size.m` bits, `spill < size.k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpillRep {
    pub size: Size,
    pub mem: BitVec,
    pub spill: u128,
}

impl SpillRep {
    pub fn empty() -> Self {
        SpillRep {
            size: Size::ONE,
            mem: BitVec::new(),
            spill: 0,
        }
    }

    pub fn accounted_bits(&self) -> f64 {
        self.size.log2()
    }

    pub fn physical_bits(&self) -> u64 {
        self.size.physical_bits()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let k: u64 = self
            .size
            .k
            .try_into()
            .map_err(|_| Error::Format("spill universe exceeds 64 bits".into()))?;
        w.write_all(&self.size.m.to_le_bytes())?;
        w.write_all(&k.to_le_bytes())?;
        w.write_all(&(self.spill as u64).to_le_bytes())?;
        self.mem.write_to(w)
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let m = read_u64(r)?;
        let k = read_u64(r)? as u128;
        let spill = read_u64(r)? as u128;
        let mem = BitVec::read_from(r)?;
        if mem.len() as u64 != m {
            return Err(Error::Format(
                "spill memory length does not match header".into(),
            ));
        }
        if k == 0 || spill >= k {
            return Err(Error::Format("spill value outside its universe".into()));
        }
        Ok(SpillRep {
            size: Size { k, m },
            mem,
            spill,
        })
    }
}

/// A packing problem: choice `x` has probability `p(x)` and carries
/// `M(x)` memory bits plus a value below `K(x)`.
#[derive(Clone, Debug)]
pub struct DensityModel {
    pub p: Vec<BigRational>,
    pub m: Vec<u64>,
    pub k: Vec<u128>,
}

impl DensityModel {
    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Smallest `H` with `log2(1/p(x)) + M(x) + log2 K(x) <= H` for all x.
    pub fn budget(&self) -> f64 {
        (0..self.len())
            .map(|x| {
                let p = &self.p[x];
                log2_big(&p.denom().to_biguint().unwrap())
                    - log2_big(&p.numer().to_biguint().unwrap())
                    + self.m[x] as f64
                    + (self.k[x] as f64).log2()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn validate(&self) -> Result<()> {
        if self.is_empty() || self.m.len() != self.len() || self.k.len() != self.len() {
            return Err(Error::Range(
                "model vectors must be non-empty and of equal length".into(),
            ));
        }
        let mut total = BigRational::zero();
        for x in 0..self.len() {
            if self.p[x] <= BigRational::zero() || self.k[x] == 0 || self.k[x] > 1 << 64 {
                return Err(Error::Range(format!("model entry {x} invalid")));
            }
            total += &self.p[x];
        }
        if total != BigRational::one() {
            return Err(Error::Range("model probabilities must sum to 1".into()));
        }
        Ok(())
    }
}

/// The compression step for an explicit [`DensityModel`] at granularity `r`.
#[derive(Clone, Debug)]
pub struct SpillCodec {
    model: DensityModel,
    r: u128,
    table: Table,
}

impl SpillCodec {
    pub fn new(model: DensityModel, r: u128) -> Result<Self> {
        model.validate()?;
        if r == 0 || r > R_INTERNAL {
            return Err(Error::Range("granularity r must be in [1, 2^40]".into()));
        }
        let mut w = BigCount::zero();
        for x in 0..model.len() {
            w += BigCount::from(model.k[x]) << model.m[x];
        }
        let items: Vec<(u64, Subs)> = (0..model.len())
            .map(|x| {
                (
                    x as u64,
                    Subs::one(Size {
                        k: model.k[x],
                        m: model.m[x],
                    }),
                )
            })
            .collect();
        let mut e = E_DELTA;
        loop {
            let size = rounded_size(&w, e, r, 2 * r);
            if let Some(table) = Table::try_build(size, items.iter().copied()) {
                return Ok(SpillCodec { model, r, table });
            }
            e += E_DELTA;
        }
    }

    pub fn model(&self) -> &DensityModel {
        &self.model
    }

    pub fn r(&self) -> u128 {
        self.r
    }

    pub fn size(&self) -> Size {
        self.table.size()
    }

    pub fn table_words(&self) -> usize {
        self.table.words()
    }

    /// Accounted size minus the model budget.
    pub fn redundancy(&self) -> f64 {
        self.size().log2() - self.model.budget()
    }

    pub fn encode(&self, x: usize, y_m: &BitVec, y_k: u128) -> Result<SpillRep> {
        if x >= self.model.len() || y_m.len() as u64 != self.model.m[x] || y_k >= self.model.k[x] {
            return Err(Error::Range("payload does not match the model".into()));
        }
        let (mem, spill) = self.table.encode(x as u64, &[(y_m, y_k)]);
        Ok(SpillRep {
            size: self.size(),
            mem,
            spill,
        })
    }

    pub fn decode(
        &self,
        rep: &SpillRep,
        probes: &mut ProbeCounter,
    ) -> Result<(usize, BitVec, u128)> {
        if rep.size != self.size() {
            return Err(Error::Integrity(
                "representation size does not match the model".into(),
            ));
        }
        let view = MemView::new(&rep.mem);
        let d = self.table.decode(&view, rep.spill, 0, probes)?;
        let (v, k) = &d.parts[0];
        Ok((d.x as usize, v.to_bitvec(), *k))
    }
}

/// Exponent bookkeeping of a split-tree subset of a universe of size `f`.
pub fn subset_exponent(f: u64) -> u64 {
    if f == 0 {
        0
    } else {
        (f - 1) * (2 * rounding_exponent(R_INTERNAL) + E_DELTA)
    }
}

/// Encoder and select oracle for `j`-subsets of `[f]`, split recursively by
/// halves of the universe; one packing step per level.
#[derive(Debug, Default)]
pub struct SubsetCodec {
    sizes: RwLock<HashMap<(u64, u64), Size>>,
    tables: RwLock<HashMap<(u64, u64), Arc<Table>>>,
}

fn halves(f: u64) -> (u64, u64) {
    (f / 2, f - f / 2)
}

impl SubsetCodec {
    pub fn new() -> Self {
        Self::default()
    }

    fn trivial(f: u64, j: u64) -> bool {
        j == 0 || j == f
    }

    /// Size of the representation of a `j`-subset of `[f]`.
    pub fn size(&self, f: u64, j: u64) -> Size {
        if j > f {
            return Size { k: 0, m: 0 };
        }
        if Self::trivial(f, j) {
            return Size::ONE;
        }
        if let Some(s) = self.sizes.read().unwrap().get(&(f, j)) {
            return *s;
        }
        let s = rounded_size(&binomial(f, j), subset_exponent(f), R_INTERNAL, EXACT_LIMIT);
        self.sizes.write().unwrap().insert((f, j), s);
        s
    }

    pub(crate) fn size_from(&self, f: u64, j: u64, w: &BigCount) -> Size {
        if Self::trivial(f, j) {
            return Size::ONE;
        }
        if let Some(s) = self.sizes.read().unwrap().get(&(f, j)) {
            return *s;
        }
        let s = rounded_size(w, subset_exponent(f), R_INTERNAL, EXACT_LIMIT);
        self.sizes.write().unwrap().insert((f, j), s);
        s
    }

    pub fn table(&self, f: u64, j: u64) -> Arc<Table> {
        if let Some(t) = self.tables.read().unwrap().get(&(f, j)) {
            return t.clone();
        }
        let (f1, f2) = halves(f);
        let lo = j.saturating_sub(f2);
        let hi = j.min(f1);
        let mut c1 = BinomCursor::new(f1 as i64, lo as i64);
        let mut c2 = BinomCursor::new(f2 as i64, (j - lo) as i64);
        let mut items = Vec::with_capacity((hi - lo + 1) as usize);
        for j1 in lo..=hi {
            let w1 = c1.go(f1 as i64, j1 as i64).clone();
            let w2 = c2.go(f2 as i64, (j - j1) as i64).clone();
            items.push((
                j1,
                Subs::two(self.size_from(f1, j1, &w1), self.size_from(f2, j - j1, &w2)),
            ));
        }
        let t = Arc::new(Table::build(self.size(f, j), items));
        self.tables.write().unwrap().insert((f, j), t.clone());
        t
    }

    /// Encodes a sorted subset (1-based elements of `[f]`).
    pub fn encode(&self, f: u64, set: &[u64]) -> SpillRep {
        let j = set.len() as u64;
        if Self::trivial(f, j) {
            return SpillRep::empty();
        }
        let (f1, f2) = halves(f);
        let cut = set.partition_point(|&v| v <= f1);
        let right: Vec<u64> = set[cut..].iter().map(|&v| v - f1).collect();
        let a = self.encode(f1, &set[..cut]);
        let b = self.encode(f2, &right);
        let t = self.table(f, j);
        let (mem, spill) = t.encode(cut as u64, &[(&a.mem, a.spill), (&b.mem, b.spill)]);
        SpillRep {
            size: t.size(),
            mem,
            spill,
        }
    }

    /// The `i`-th smallest element (1-based) of the subset stored in `view`.
    pub fn select(
        &self,
        f: u64,
        j: u64,
        view: &MemView<'_>,
        spill: u128,
        i: u64,
        probes: &mut ProbeCounter,
    ) -> Result<u64> {
        if i == 0 || i > j {
            return Err(Error::Range(format!("select({i}) on a set of size {j}")));
        }
        let (mut f, mut j, mut i) = (f, j, i);
        let mut view = view.clone();
        let mut spill = spill;
        let mut offset = 0u64;
        loop {
            if j == f {
                return Ok(offset + i);
            }
            let t = self.table(f, j);
            let d = t.decode(&view, spill, f << 32 ^ j, probes)?;
            let (f1, f2) = halves(f);
            let j1 = d.x;
            let mut parts = d.parts.into_iter();
            let (v1, s1) = parts.next().unwrap();
            let (v2, s2) = parts.next().unwrap();
            if i <= j1 {
                (f, j, view, spill) = (f1, j1, v1, s1);
            } else {
                (f, j, i, view, spill) = (f2, j - j1, i - j1, v2, s2);
                offset += f1;
            }
        }
    }

    /// Decodes the whole subset (for tests and integrity checks).
    pub fn decode_all(&self, f: u64, j: u64, view: &MemView<'_>, spill: u128) -> Result<Vec<u64>> {
        let mut p = ProbeCounter::disabled();
        (1..=j)
            .map(|i| self.select(f, j, view, spill, i, &mut p))
            .collect()
    }
}

/// A subset of `[u]` with fast `select`, stored in `log2 binom(u, n)` bits
/// plus a small redundancy.
#[derive(Debug)]
pub struct SetSelectRep {
    pub u: u64,
    pub n: u64,
    pub r: u128,
    inner: Size,
    outer: SpillCodec,
    rep: SpillRep,
    codec: SubsetCodec,
}

impl SetSelectRep {
    pub fn build(set: &[u64], u: u64, r: u128) -> Result<Self> {
        if set.windows(2).any(|w| w[0] >= w[1]) || set.iter().any(|&v| v == 0 || v > u) {
            return Err(Error::Range(
                "set must be strictly increasing within [1, u]".into(),
            ));
        }
        let n = set.len() as u64;
        let codec = SubsetCodec::new();
        let inner_rep = codec.encode(u, set);
        let inner = inner_rep.size;
        let model = DensityModel {
            p: vec![BigRational::one()],
            m: vec![inner.m],
            k: vec![inner.k],
        };
        let outer = SpillCodec::new(model, r)?;
        let rep = outer.encode(0, &inner_rep.mem, inner_rep.spill)?;
        Ok(SetSelectRep {
            u,
            n,
            r,
            inner,
            outer,
            rep,
            codec,
        })
    }

    pub fn size(&self) -> Size {
        self.rep.size
    }

    pub fn accounted_bits(&self) -> f64 {
        self.rep.accounted_bits()
    }

    /// Accounted size minus `log2 binom(u, n)`.
    pub fn redundancy(&self) -> f64 {
        self.accounted_bits() - log2_big(&binomial(self.u, self.n))
    }

    pub fn select(&self, i: u64, probes: &mut ProbeCounter) -> Result<u64> {
        let view = MemView::new(&self.rep.mem);
        let t = &self.outer.table;
        let d = t.decode(&view, self.rep.spill, u64::MAX, probes)?;
        let (v, s) = &d.parts[0];
        debug_assert_eq!(v.len() as u64, self.inner.m);
        self.codec.select(self.u, self.n, v, *s, i, probes)
    }
}
