//! Input arrays, Cartesian trees, DFUDS strings and reference RMQ oracles.

use std::io::{Read, Write};

use crate::bits::{read_u32, read_u64, BitVec};
use crate::catalan::TreeShape;
use crate::catalan::{catalan_number, log2_big};
use crate::container::{write_header, Kind};
use crate::error::{Error, Result};
use crate::probe::ProbeCounter;
use crate::report::SpaceReport;

/// Anything that answers leftmost range-minimum queries over positions `1..=n`.
pub trait RangeMinimum {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Leftmost position of the minimum in `[a, b]`, `1 <= a <= b <= n`.
    fn rmq(&self, a: usize, b: usize) -> usize;
}

pub(crate) fn check_range(n: usize, a: usize, b: usize) -> Result<()> {
    if a == 0 || a > b || b > n {
        return Err(Error::Range(format!(
            "query [{a}, {b}] outside 1..={n} or empty"
        )));
    }
    Ok(())
}

/// Leftmost index of the minimum of `A[a..=b]` (1-based), by linear scan.
pub fn rmq_scan(a_vals: &[i64], a: usize, b: usize) -> Result<usize> {
    check_range(a_vals.len(), a, b)?;
    let mut best = a;
    for i in a + 1..=b {
        if a_vals[i - 1] < a_vals[best - 1] {
            best = i;
        }
    }
    Ok(best)
}

/// Cartesian tree with the leftmost minimum at the root.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CartesianTree {
    pub shape: TreeShape,
}

impl CartesianTree {
    pub fn n(&self) -> usize {
        self.shape.n
    }

    /// Parent of every node (0 for the root).
    pub fn parents(&self) -> Vec<usize> {
        let mut p = vec![0usize; self.shape.n + 1];
        for v in 1..=self.shape.n {
            for c in [self.shape.left[v], self.shape.right[v]] {
                if c != 0 {
                    p[c] = v;
                }
            }
        }
        p
    }

    /// Depth of every node (root has depth 0); index 0 unused.
    pub fn depths(&self) -> Vec<i64> {
        let n = self.shape.n;
        let mut d = vec![0i64; n + 1];
        if n == 0 {
            return d;
        }
        let mut stack = vec![self.shape.root];
        while let Some(v) = stack.pop() {
            for c in [self.shape.left[v], self.shape.right[v]] {
                if c != 0 {
                    d[c] = d[v] + 1;
                    stack.push(c);
                }
            }
        }
        d
    }

    /// An array whose Cartesian tree is this tree (node depths).
    pub fn realize(&self) -> Vec<i64> {
        self.depths()[1..].to_vec()
    }

    /// Lowest common ancestor by parent walks (reference only).
    pub fn lca_naive(&self, a: usize, b: usize) -> usize {
        let p = self.parents();
        let d = self.depths();
        let (mut x, mut y) = (a, b);
        while d[x] > d[y] {
            x = p[x];
        }
        while d[y] > d[x] {
            y = p[y];
        }
        while x != y {
            x = p[x];
            y = p[y];
        }
        x
    }
}

/// Builds the leftmost-minimum Cartesian tree with the right-spine stack.
pub fn build_cartesian(a_vals: &[i64]) -> CartesianTree {
    let n = a_vals.len();
    let mut shape = TreeShape::empty(n);
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    for i in 1..=n {
        let mut last = 0;
        // strict comparison keeps an earlier equal value above a later one
        while let Some(&top) = stack.last() {
            if a_vals[top - 1] > a_vals[i - 1] {
                last = stack.pop().unwrap();
            } else {
                break;
            }
        }
        shape.left[i] = last;
        if let Some(&top) = stack.last() {
            shape.right[top] = i;
        }
        stack.push(i);
    }
    shape.root = stack.first().copied().unwrap_or(0);
    CartesianTree { shape }
}

/// True iff both arrays have the same Cartesian tree.
pub fn cartesian_equivalent(a1: &[i64], a2: &[i64]) -> bool {
    a1.len() == a2.len() && build_cartesian(a1) == build_cartesian(a2)
}

/// Replaces values by a permutation of `1..=n` with the same Cartesian tree
/// (ties broken toward the left).
pub fn rank_reduce(a_vals: &[i64]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..a_vals.len()).collect();
    idx.sort_by_key(|&i| (a_vals[i], i));
    let mut out = vec![0u32; a_vals.len()];
    for (rank, &i) in idx.iter().enumerate() {
        out[i] = rank as u32 + 1;
    }
    out
}

/// Classic sparse table: `O(n log n)` words, constant-time queries.
#[derive(Clone, Debug)]
pub struct SparseTable {
    vals: Vec<i64>,
    levels: Vec<Vec<u32>>,
}

impl SparseTable {
    pub fn build(a_vals: &[i64]) -> Self {
        let n = a_vals.len();
        let mut levels: Vec<Vec<u32>> = vec![(0..n as u32).collect()];
        let mut k = 1;
        while (1usize << k) <= n {
            let prev = &levels[k - 1];
            let half = 1usize << (k - 1);
            let cur: Vec<u32> = (0..=n - (1 << k))
                .map(|i| {
                    let (x, y) = (prev[i], prev[i + half]);
                    if a_vals[y as usize] < a_vals[x as usize] {
                        y
                    } else {
                        x
                    }
                })
                .collect();
            levels.push(cur);
            k += 1;
        }
        SparseTable {
            vals: a_vals.to_vec(),
            levels,
        }
    }

    pub fn query(&self, a: usize, b: usize) -> Result<usize> {
        check_range(self.vals.len(), a, b)?;
        Ok(self.rmq(a, b))
    }

    pub fn values(&self) -> &[i64] {
        &self.vals
    }

    /// Table size in bits (32-bit entries, values excluded).
    pub fn size_bits(&self) -> u64 {
        self.levels.iter().map(|l| 32 * l.len() as u64).sum()
    }

    /// Query that records reads: two 32-bit table entries (region 1) and
    /// two 64-bit values (region 0).
    pub fn query_probed(&self, a: usize, b: usize, probes: &mut ProbeCounter) -> Result<usize> {
        check_range(self.vals.len(), a, b)?;
        let (l, r) = (a - 1, b - 1);
        let k = (usize::BITS - 1 - (r - l + 1).leading_zeros()) as usize;
        let row: usize = self.levels[..k].iter().map(Vec::len).sum();
        let (i, j) = (row + l, row + r + 1 - (1 << k));
        probes.touch_bits(1, 32 * i as u64, 32);
        probes.touch_bits(1, 32 * j as u64, 32);
        let (x, y) = (
            self.levels[k][l] as usize,
            self.levels[k][r + 1 - (1 << k)] as usize,
        );
        probes.touch_cell(0, x as u64);
        probes.touch_cell(0, y as u64);
        Ok(if self.vals[y] < self.vals[x] {
            y + 1
        } else {
            x + 1
        })
    }

    pub fn space_report(&self) -> SpaceReport {
        let n = self.vals.len() as u64;
        let mut components = std::collections::BTreeMap::new();
        components.insert("values".to_string(), 64.0 * n as f64);
        components.insert("table".to_string(), self.size_bits() as f64);
        let total = 64.0 * n as f64 + self.size_bits() as f64;
        let bench = log2_big(&catalan_number(n));
        SpaceReport {
            n,
            kind: Kind::Sparse.name().into(),
            total_bits: total,
            dfuds_bits: None,
            redundancy_bits: total - bench,
            benchmark_bits: bench,
            components,
        }
    }

    /// Structure file: common header, then the `n` values as little-endian
    /// `i64`; the table is rebuilt on load.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        write_header(w, Kind::Sparse, self.vals.len() as u64)?;
        for v in &self.vals {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.write_to(&mut v).expect("write to memory");
        v
    }

    pub(crate) fn read_body<R: Read>(r: &mut R, n: u64) -> Result<Self> {
        if n == 0 || n > 1 << 32 {
            return Err(Error::Format("implausible n".into()));
        }
        let vals = (0..n)
            .map(|_| read_u64(r).map(|x| x as i64))
            .collect::<Result<Vec<i64>>>()?;
        Ok(SparseTable::build(&vals))
    }
}

impl RangeMinimum for SparseTable {
    fn len(&self) -> usize {
        self.vals.len()
    }

    fn rmq(&self, a: usize, b: usize) -> usize {
        let (l, r) = (a - 1, b - 1);
        let k = (usize::BITS - 1 - (r - l + 1).leading_zeros()) as usize;
        let x = self.levels[k][l];
        let y = self.levels[k][r + 1 - (1 << k)];
        let best = if self.vals[y as usize] < self.vals[x as usize] {
            y
        } else {
            x
        };
        best as usize + 1
    }
}

/// Scan oracle wrapper implementing [`RangeMinimum`].
#[derive(Clone, Debug)]
pub struct ScanRmq(pub Vec<i64>);

impl RangeMinimum for ScanRmq {
    fn len(&self) -> usize {
        self.0.len()
    }

    fn rmq(&self, a: usize, b: usize) -> usize {
        rmq_scan(&self.0, a, b).expect("range checked by caller")
    }
}

/// DFUDS of the previous-smaller-value tree of an array with a virtual
/// node 0 in front. The full string is `"(" + middle + ")"`; only the
/// middle `2n` bits are stored, since the outer two symbols are fixed.
/// '(' is stored as 1 and ')' as 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DfudsString {
    pub n: usize,
    pub middle: BitVec,
}

impl DfudsString {
    /// The complete `2n + 2` symbol string.
    pub fn full(&self) -> BitVec {
        let mut v = BitVec::with_capacity(2 * self.n + 2);
        v.push(true);
        v.extend_from(&self.middle);
        v.push(false);
        v
    }
}

/// Previous-smaller-or-equal parent of each position (0 = virtual root).
pub fn psv_parents(a_vals: &[i64]) -> Vec<usize> {
    let n = a_vals.len();
    let mut parent = vec![0usize; n + 1];
    let mut stack: Vec<usize> = Vec::new();
    for i in 1..=n {
        while let Some(&top) = stack.last() {
            if a_vals[top - 1] > a_vals[i - 1] {
                stack.pop();
            } else {
                break;
            }
        }
        parent[i] = stack.last().copied().unwrap_or(0);
        stack.push(i);
    }
    parent
}

/// Full DFUDS (2n + 2 symbols) of an array's previous-smaller tree.
pub fn dfuds_full_from_array(a_vals: &[i64]) -> BitVec {
    let n = a_vals.len();
    let parent = psv_parents(a_vals);
    let mut deg = vec![0usize; n + 1];
    for v in 1..=n {
        deg[parent[v]] += 1;
    }
    let mut bits = BitVec::with_capacity(2 * n + 2);
    bits.push(true);
    // preorder of this tree is 0, 1, ..., n
    for &d in &deg {
        for _ in 0..d {
            bits.push(true);
        }
        bits.push(false);
    }
    bits
}

pub fn dfuds_encode(t: &CartesianTree) -> DfudsString {
    let full = dfuds_full_from_array(&t.realize());
    let n = t.n();
    DfudsString {
        n,
        middle: full.slice(1, 2 * n),
    }
}

pub fn dfuds_decode(s: &DfudsString) -> Result<CartesianTree> {
    if s.middle.len() != 2 * s.n {
        return Err(Error::Format("DFUDS length must be 2n".into()));
    }
    let full = s.full();
    let n = s.n;
    let mut parent = vec![0usize; n + 1];
    let mut pos = 1usize;
    let mut stack: Vec<(usize, usize)> = Vec::new();
    #[allow(clippy::needless_range_loop)]
    for v in 0..=n {
        if v > 0 {
            let top = stack
                .last_mut()
                .ok_or_else(|| Error::Format("DFUDS has too many nodes".into()))?;
            parent[v] = top.0;
            top.1 -= 1;
            if top.1 == 0 {
                stack.pop();
            }
        }
        let mut d = 0;
        while pos < full.len() && full.get(pos) {
            d += 1;
            pos += 1;
        }
        if pos >= full.len() {
            return Err(Error::Format("DFUDS ends inside a node description".into()));
        }
        pos += 1;
        if d > 0 {
            stack.push((v, d));
        }
    }
    if !stack.is_empty() || pos != full.len() {
        return Err(Error::Format("malformed DFUDS".into()));
    }
    // depth in the previous-smaller tree, later siblings ranked smaller
    let mut depth = vec![0i64; n + 1];
    for v in 1..=n {
        depth[v] = depth[parent[v]] + 1;
    }
    let keys: Vec<i64> = (1..=n)
        .map(|v| depth[v] * (n as i64 + 1) + (n - v) as i64)
        .collect();
    Ok(build_cartesian(&keys))
}

/// On-disk encoding of an array file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArrayFormat {
    Text,
    Bin,
}

pub const ARRAY_MAGIC: &[u8; 4] = b"RMQA";

pub fn write_array<W: Write>(w: &mut W, a_vals: &[i64], fmt: ArrayFormat) -> Result<()> {
    match fmt {
        ArrayFormat::Text => {
            let mut s = String::with_capacity(a_vals.len() * 6);
            for v in a_vals {
                s.push_str(&v.to_string());
                s.push('\n');
            }
            w.write_all(s.as_bytes())?;
        }
        ArrayFormat::Bin => {
            w.write_all(ARRAY_MAGIC)?;
            w.write_all(&1u32.to_le_bytes())?;
            w.write_all(&(a_vals.len() as u64).to_le_bytes())?;
            for v in a_vals {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Parses an array file; `None` detects the format from the magic bytes.
pub fn parse_array(bytes: &[u8], fmt: Option<ArrayFormat>) -> Result<Vec<i64>> {
    let fmt = fmt.unwrap_or(if bytes.starts_with(ARRAY_MAGIC) {
        ArrayFormat::Bin
    } else {
        ArrayFormat::Text
    });
    let vals =
        match fmt {
            ArrayFormat::Text => {
                let s = std::str::from_utf8(bytes)
                    .map_err(|_| Error::Format("array text is not UTF-8".into()))?;
                let mut out = Vec::new();
                for (lineno, line) in s.lines().enumerate() {
                    let t = line.trim();
                    if t.is_empty() {
                        continue;
                    }
                    out.push(t.parse::<i64>().map_err(|_| {
                        Error::Format(format!("line {}: not an integer", lineno + 1))
                    })?);
                }
                out
            }
            ArrayFormat::Bin => {
                let mut r = bytes;
                let mut magic = [0u8; 4];
                r.read_exact(&mut magic)
                    .map_err(|_| Error::Format("truncated array header".into()))?;
                if &magic != ARRAY_MAGIC {
                    return Err(Error::Format("bad array magic".into()));
                }
                let ver = read_u32(&mut r)?;
                if ver != 1 {
                    return Err(Error::Format(format!("unsupported array version {ver}")));
                }
                let n = read_u64(&mut r)? as usize;
                if r.len() != n * 8 {
                    return Err(Error::Format("array payload length mismatch".into()));
                }
                (0..n)
                    .map(|i| i64::from_le_bytes(r[8 * i..8 * i + 8].try_into().unwrap()))
                    .collect()
            }
        };
    if vals.is_empty() {
        return Err(Error::Format(
            "array must contain at least one value".into(),
        ));
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cartesian_examples() {
        let t = build_cartesian(&[2, 1, 3]);
        assert_eq!(t.shape.root, 2);
        assert_eq!(t.shape.left[2], 1);
        assert_eq!(t.shape.right[2], 3);
        let t = build_cartesian(&[1, 1]);
        assert_eq!(t.shape.root, 1);
        assert_eq!(t.shape.right[1], 2);
        let t = build_cartesian(&[1, 2, 3, 4]);
        assert_eq!(t.shape.root, 1);
        assert_eq!(
            (t.shape.right[1], t.shape.right[2], t.shape.right[3]),
            (2, 3, 4)
        );
    }

    #[test]
    fn scan_examples() {
        assert_eq!(rmq_scan(&[5, 3, 4, 1, 2], 1, 5).unwrap(), 4);
        assert_eq!(rmq_scan(&[5, 3, 4, 1, 2], 3, 3).unwrap(), 3);
        assert_eq!(rmq_scan(&[1, 1], 1, 2).unwrap(), 1);
        assert!(rmq_scan(&[1, 1], 2, 1).is_err());
        assert!(rmq_scan(&[1, 1], 1, 3).is_err());
    }

    #[test]
    fn sparse_examples() {
        let st = SparseTable::build(&[3, 1, 2]);
        assert_eq!(st.query(2, 3).unwrap(), 2);
        assert_eq!(SparseTable::build(&[7]).query(1, 1).unwrap(), 1);
    }

    #[test]
    fn equivalence_examples() {
        assert!(cartesian_equivalent(&[1, 2, 3], &[10, 20, 30]));
        assert!(!cartesian_equivalent(&[1, 2], &[2, 1]));
        assert!(cartesian_equivalent(&[4, 4, 1], &[4, 4, 1]));
    }

    #[test]
    fn dfuds_single_node() {
        let t = build_cartesian(&[5]);
        let d = dfuds_encode(&t);
        assert_eq!(d.full().to_parens(), "(())");
        assert_eq!(dfuds_decode(&d).unwrap(), t);
    }

    #[test]
    fn array_formats_round_trip() {
        let a = vec![3, -1, 7, 0];
        for fmt in [ArrayFormat::Text, ArrayFormat::Bin] {
            let mut buf = Vec::new();
            write_array(&mut buf, &a, fmt).unwrap();
            assert_eq!(parse_array(&buf, Some(fmt)).unwrap(), a);
            assert_eq!(parse_array(&buf, None).unwrap(), a);
        }
        assert!(parse_array(b"1\nx\n", None).is_err());
    }
}
