//! Bit vectors, rank/select, Elias gamma codes and parenthesis oracles.
//!
//! Storage is 0-based and little-endian within 64-bit words. Rank and select
//! use 1-based positions: `rank1(i)` counts ones among positions `1..=i`.

use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitVec {
    words: Vec<u64>,
    len: usize,
}

impl std::fmt::Debug for BitVec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: String = (0..self.len.min(256))
            .map(|i| if self.get(i) { '1' } else { '0' })
            .collect();
        write!(
            f,
            "BitVec({}; {}{})",
            self.len,
            s,
            if self.len > 256 { "..." } else { "" }
        )
    }
}

#[inline]
fn mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

impl BitVec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        BitVec {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitVec {
            words: Vec::with_capacity(bits.div_ceil(64)),
            len: 0,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::with_capacity(bits.len());
        for &b in bits {
            v.push(b);
        }
        v
    }

    /// Parses a string of '0'/'1' characters (other characters are ignored).
    pub fn from_str01(s: &str) -> Self {
        let mut v = Self::new();
        for c in s.chars() {
            match c {
                '0' => v.push(false),
                '1' => v.push(true),
                _ => {}
            }
        }
        v
    }

    /// Parses parentheses: '(' is 1, ')' is 0.
    pub fn from_parens(s: &str) -> Self {
        let mut v = Self::new();
        for c in s.chars() {
            match c {
                '(' => v.push(true),
                ')' => v.push(false),
                _ => {}
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, b: bool) {
        assert!(i < self.len);
        if b {
            self.words[i >> 6] |= 1 << (i & 63);
        } else {
            self.words[i >> 6] &= !(1 << (i & 63));
        }
    }

    pub fn push(&mut self, b: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        if b {
            self.words[self.len >> 6] |= 1 << (self.len & 63);
        }
        self.len += 1;
    }

    /// Appends the low `len` bits of `value`, least significant first.
    pub fn push_bits(&mut self, value: u64, len: usize) {
        assert!(len <= 64);
        if len == 0 {
            return;
        }
        let value = value & mask(len);
        let off = self.len & 63;
        if off == 0 {
            self.words.push(value);
        } else {
            let last = self.words.len() - 1;
            self.words[last] |= value << off;
            if off + len > 64 {
                self.words.push(value >> (64 - off));
            }
        }
        self.len += len;
    }

    /// Appends the low `len` bits of a 128-bit value.
    pub fn push_bits_u128(&mut self, value: u128, len: usize) {
        assert!(len <= 128);
        if len > 64 {
            self.push_bits(value as u64, 64);
            self.push_bits((value >> 64) as u64, len - 64);
        } else {
            self.push_bits(value as u64, len);
        }
    }

    /// Reads `len <= 64` bits starting at 0-based `pos`.
    #[inline]
    pub fn get_bits(&self, pos: usize, len: usize) -> u64 {
        debug_assert!(len <= 64 && pos + len <= self.len);
        if len == 0 {
            return 0;
        }
        let w = pos >> 6;
        let off = pos & 63;
        let mut v = self.words[w] >> off;
        if off + len > 64 {
            v |= self.words[w + 1] << (64 - off);
        }
        v & mask(len)
    }

    /// Reads `len <= 128` bits starting at `pos`.
    pub fn get_bits_u128(&self, pos: usize, len: usize) -> u128 {
        if len > 64 {
            self.get_bits(pos, 64) as u128 | (self.get_bits(pos + 64, len - 64) as u128) << 64
        } else {
            self.get_bits(pos, len) as u128
        }
    }

    pub fn extend_from(&mut self, other: &BitVec) {
        self.extend_range(other, 0, other.len);
    }

    /// Appends bits `start..start+len` of `other`.
    pub fn extend_range(&mut self, other: &BitVec, start: usize, len: usize) {
        assert!(start + len <= other.len);
        let mut p = start;
        let end = start + len;
        while p < end {
            let take = (end - p).min(64);
            self.push_bits(other.get_bits(p, take), take);
            p += take;
        }
    }

    pub fn slice(&self, start: usize, len: usize) -> BitVec {
        let mut v = BitVec::with_capacity(len);
        v.extend_range(self, start, len);
        v
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    pub fn to_parens(&self) -> String {
        (0..self.len)
            .map(|i| if self.get(i) { '(' } else { ')' })
            .collect()
    }

    /// Serialized size in bytes: 8-byte length plus whole words.
    pub fn serialized_len(&self) -> usize {
        8 + 8 * self.len.div_ceil(64)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&(self.len as u64).to_le_bytes())?;
        for &word in &self.words[..self.len.div_ceil(64)] {
            w.write_all(&word.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let len = read_u64(r)? as usize;
        if len > (1usize << 40) {
            return Err(Error::Format("bit vector length implausibly large".into()));
        }
        let nw = len.div_ceil(64);
        let mut words = Vec::with_capacity(nw);
        for _ in 0..nw {
            words.push(read_u64(r)?);
        }
        if !len.is_multiple_of(64) {
            if let Some(last) = words.last() {
                if last & !mask(len % 64) != 0 {
                    return Err(Error::Format("nonzero padding bits in bit vector".into()));
                }
            }
        }
        Ok(BitVec { words, len })
    }
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(b[0])
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated input".into())
    } else {
        Error::Io(e)
    }
}

/// Append-only writer over a [`BitVec`].
#[derive(Default, Debug, Clone)]
pub struct BitWriter {
    bits: BitVec,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_bit(&mut self, b: bool) {
        self.bits.push(b);
    }

    /// Writes `len` bits of `value`, most significant first.
    pub fn write_bits_msb(&mut self, value: u64, len: usize) {
        for i in (0..len).rev() {
            self.bits.push((value >> i) & 1 == 1);
        }
    }

    pub fn position(&self) -> usize {
        self.bits.len()
    }

    pub fn finish(self) -> BitVec {
        self.bits
    }
}

/// Sequential reader over a bit slice.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bits: &'a BitVec,
    pos: usize,
}

impl<'a> BitReader<'a> {
    pub fn new(bits: &'a BitVec) -> Self {
        BitReader { bits, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        if self.pos >= self.bits.len() {
            return Err(Error::Format("read past end of bit stream".into()));
        }
        let b = self.bits.get(self.pos);
        self.pos += 1;
        Ok(b)
    }

    pub fn read_bits_msb(&mut self, len: usize) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..len {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }
}

/// Elias gamma: `floor(log2 x)` zeros, then `x` in binary from its leading one.
pub fn gamma_write(w: &mut BitWriter, x: u64) {
    assert!(x >= 1, "gamma code needs x >= 1");
    let n = 63 - x.leading_zeros() as usize;
    for _ in 0..n {
        w.write_bit(false);
    }
    w.write_bits_msb(x, n + 1);
}

pub fn gamma_read(r: &mut BitReader<'_>) -> Result<u64> {
    let mut n = 0usize;
    while !r.read_bit()? {
        n += 1;
        if n > 63 {
            return Err(Error::Format("gamma code too long".into()));
        }
    }
    let rest = r.read_bits_msb(n)?;
    Ok((1u64 << n) | rest)
}

/// Length in bits of the gamma code of `x`.
pub fn gamma_len(x: u64) -> usize {
    2 * (63 - x.leading_zeros() as usize) + 1
}

/// Two-level rank/select directory: cumulative counts per 512-bit
/// superblock and per-word offsets inside each superblock.
#[derive(Clone, Debug)]
pub struct RankSelect {
    bits: BitVec,
    supers: Vec<u64>,
    blocks: Vec<u16>,
    ones: usize,
}

impl RankSelect {
    pub fn new(bits: BitVec) -> Self {
        let nw = bits.words.len();
        let mut supers = Vec::with_capacity(nw / 8 + 2);
        let mut blocks = Vec::with_capacity(nw + 1);
        let mut total = 0u64;
        let mut inner = 0u16;
        for (i, w) in bits.words.iter().enumerate() {
            if i % 8 == 0 {
                supers.push(total);
                inner = 0;
            }
            blocks.push(inner);
            let c = w.count_ones();
            total += c as u64;
            inner += c as u16;
        }
        supers.push(total);
        RankSelect {
            bits,
            supers,
            blocks,
            ones: total as usize,
        }
    }

    pub fn bits(&self) -> &BitVec {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.ones
    }

    pub fn count_zeros(&self) -> usize {
        self.bits.len() - self.ones
    }

    /// Directory size in bits (64 per superblock, 16 per word).
    pub fn overhead_bits(&self) -> usize {
        64 * self.supers.len() + 16 * self.blocks.len()
    }

    /// Number of ones among positions `1..=i`; `i` may be 0.
    pub fn rank1(&self, i: usize) -> usize {
        assert!(i <= self.bits.len(), "rank position out of range");
        if i == 0 {
            return 0;
        }
        let w = (i - 1) >> 6;
        let within = self.bits.words[w] & mask(((i - 1) & 63) + 1);
        self.supers[w / 8] as usize + self.blocks[w] as usize + within.count_ones() as usize
    }

    pub fn rank0(&self, i: usize) -> usize {
        i - self.rank1(i)
    }

    /// Position of the k-th one (1-based), or `None` when `k` exceeds the count.
    pub fn select1(&self, k: usize) -> Option<usize> {
        if k == 0 || k > self.ones {
            return None;
        }
        self.select_impl(k, true)
    }

    pub fn select0(&self, k: usize) -> Option<usize> {
        if k == 0 || k > self.count_zeros() {
            return None;
        }
        self.select_impl(k, false)
    }

    fn select_impl(&self, k: usize, ones: bool) -> Option<usize> {
        let count_sup = |s: usize| -> usize {
            let c = self.supers[s] as usize;
            if ones {
                c
            } else {
                (s * 512).min(self.bits.len()) - c
            }
        };
        // last superblock whose prefix count is < k
        let (mut lo, mut hi) = (0usize, self.supers.len() - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if count_sup(mid) < k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut rem = k - count_sup(lo);
        let last_word = ((lo + 1) * 8).min(self.bits.words.len());
        for w in lo * 8..last_word {
            let mut word = self.bits.words[w];
            if !ones {
                word = !word;
                let valid = self.bits.len() - w * 64;
                if valid < 64 {
                    word &= mask(valid);
                }
            }
            let c = word.count_ones() as usize;
            if rem <= c {
                return Some(w * 64 + select_in_word(word, rem) + 1);
            }
            rem -= c;
        }
        None
    }
}

/// 0-based index of the k-th (1-based) set bit of `w`.
#[inline]
pub fn select_in_word(mut w: u64, k: usize) -> usize {
    for _ in 1..k {
        w &= w - 1;
    }
    w.trailing_zeros() as usize
}

/// Matching open parenthesis of the close at 1-based position `i` ('(' = 1).
pub fn findopen_oracle(parens: &BitVec, i: usize) -> Result<usize> {
    if i == 0 || i > parens.len() || parens.get(i - 1) {
        return Err(Error::Range(format!("position {i} is not a close")));
    }
    let mut stack = Vec::new();
    for p in 0..parens.len() {
        if parens.get(p) {
            stack.push(p + 1);
        } else {
            let o = stack
                .pop()
                .ok_or_else(|| Error::Format("unbalanced parentheses".into()))?;
            if p + 1 == i {
                return Ok(o);
            }
        }
    }
    Err(Error::Format("unbalanced parentheses".into()))
}

/// Matching opens for every position (0 for opens), 1-based; rejects unbalanced input.
pub fn match_all(parens: &BitVec) -> Result<Vec<usize>> {
    let mut out = vec![0usize; parens.len() + 1];
    let mut stack = Vec::new();
    for p in 0..parens.len() {
        if parens.get(p) {
            stack.push(p + 1);
        } else {
            out[p + 1] = stack
                .pop()
                .ok_or_else(|| Error::Format("unbalanced parentheses".into()))?;
        }
    }
    if !stack.is_empty() {
        return Err(Error::Format("unbalanced parentheses".into()));
    }
    Ok(out)
}

/// `E[i]` = opens minus closes among positions `1..=i`, listed for i = 1..len.
pub fn excess_array(parens: &BitVec) -> Vec<i64> {
    let mut e = 0i64;
    (0..parens.len())
        .map(|p| {
            e += if parens.get(p) { 1 } else { -1 };
            e
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_select_examples() {
        let rs = RankSelect::new(BitVec::from_str01("110100"));
        assert_eq!(rs.rank1(4), 3);
        assert_eq!(rs.select1(3), Some(4));
        assert_eq!(rs.select1(4), None);
        assert_eq!(rs.select0(1), Some(3));
        assert_eq!(rs.rank0(6), 3);
    }

    #[test]
    fn gamma_examples() {
        let mut w = BitWriter::new();
        gamma_write(&mut w, 1);
        assert_eq!(w.position(), 1);
        gamma_write(&mut w, 5);
        assert_eq!(w.position(), 6);
        let bv = w.finish();
        let mut r = BitReader::new(&bv);
        assert_eq!(gamma_read(&mut r).unwrap(), 1);
        assert_eq!(gamma_read(&mut r).unwrap(), 5);
        assert!(gamma_read(&mut r).is_err());
    }

    #[test]
    fn findopen_examples() {
        let p = BitVec::from_parens("(())");
        assert_eq!(findopen_oracle(&p, 4).unwrap(), 1);
        assert_eq!(findopen_oracle(&p, 3).unwrap(), 2);
        assert_eq!(findopen_oracle(&BitVec::from_parens("()()"), 4).unwrap(), 3);
        assert!(findopen_oracle(&p, 1).is_err());
    }

    #[test]
    fn excess_examples() {
        assert_eq!(
            excess_array(&BitVec::from_parens("(()())")),
            vec![1, 2, 1, 2, 1, 0]
        );
        assert_eq!(excess_array(&BitVec::from_parens("()")), vec![1, 0]);
    }

    #[test]
    fn serialization_round_trip() {
        let v = BitVec::from_str01("1011001110001");
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), v.serialized_len());
        let back = BitVec::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(v, back);
    }

    #[test]
    fn push_and_get_bits_across_words() {
        let mut v = BitVec::new();
        v.push_bits(0b101, 3);
        v.push_bits(u64::MAX, 64);
        v.push_bits(0x1234, 16);
        assert_eq!(v.len(), 83);
        assert_eq!(v.get_bits(0, 3), 0b101);
        assert_eq!(v.get_bits(3, 64), u64::MAX);
        assert_eq!(v.get_bits(67, 16), 0x1234);
    }
}
