//! Cell-probe instrumentation: counts w-bit cell reads per query.

use std::collections::HashSet;

/// Address space tag so that cells of distinct arrays never alias.
pub type Region = u32;

#[derive(Clone, Debug)]
pub struct ProbeCounter {
    w: u32,
    total: u64,
    cells: HashSet<(Region, u64)>,
    enabled: bool,
}

impl Default for ProbeCounter {
    fn default() -> Self {
        Self::new(64)
    }
}

impl ProbeCounter {
    pub fn new(w: u32) -> Self {
        assert!(w > 0);
        ProbeCounter {
            w,
            total: 0,
            cells: HashSet::new(),
            enabled: true,
        }
    }

    /// A counter that ignores all reads (for unmetered internal use).
    pub fn disabled() -> Self {
        ProbeCounter {
            w: 64,
            total: 0,
            cells: HashSet::new(),
            enabled: false,
        }
    }

    pub fn word_size(&self) -> u32 {
        self.w
    }

    /// Records a read of bits `[bit_pos, bit_pos + len)` in `region`.
    #[inline]
    pub fn touch_bits(&mut self, region: Region, bit_pos: u64, len: u64) {
        if !self.enabled || len == 0 {
            return;
        }
        let w = self.w as u64;
        let first = bit_pos / w;
        let last = (bit_pos + len - 1) / w;
        for c in first..=last {
            self.total += 1;
            self.cells.insert((region, c));
        }
    }

    /// Records a read of one whole cell.
    #[inline]
    pub fn touch_cell(&mut self, region: Region, cell: u64) {
        if !self.enabled {
            return;
        }
        self.total += 1;
        self.cells.insert((region, cell));
    }

    pub fn distinct(&self) -> u64 {
        self.cells.len() as u64
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn reset(&mut self) {
        self.total = 0;
        self.cells.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_distinct_and_total() {
        let mut p = ProbeCounter::new(64);
        p.touch_bits(0, 60, 8);
        p.touch_bits(0, 0, 1);
        p.touch_bits(1, 0, 1);
        assert_eq!(p.total(), 4);
        assert_eq!(p.distinct(), 3);
        p.reset();
        assert_eq!(p.distinct(), 0);
        let mut off = ProbeCounter::disabled();
        off.touch_cell(0, 1);
        assert_eq!(off.total(), 0);
    }
}
