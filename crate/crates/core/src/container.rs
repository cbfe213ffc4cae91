//! Common header of structure files: magic, version, kind and `n`.

use std::io::{Read, Write};

use crate::bits::{read_u32, read_u64, read_u8};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SRMQ";
pub const VERSION: u32 = 1;
/// Bytes before the structure-specific body.
pub const HEADER_BYTES: usize = 4 + 4 + 1 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    OneBit = 1,
    Tradeoff = 2,
    Sparse = 3,
}

impl Kind {
    pub fn from_u8(v: u8) -> Result<Kind> {
        match v {
            1 => Ok(Kind::OneBit),
            2 => Ok(Kind::Tradeoff),
            3 => Ok(Kind::Sparse),
            _ => Err(Error::Format(format!("unknown structure kind {v}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kind::OneBit => "onebit",
            Kind::Tradeoff => "tradeoff",
            Kind::Sparse => "sparse",
        }
    }
}

pub fn write_header<W: Write>(w: &mut W, kind: Kind, n: u64) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[kind as u8])?;
    w.write_all(&n.to_le_bytes())?;
    Ok(())
}

pub fn read_header<R: Read>(r: &mut R) -> Result<(Kind, u64)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("bad structure magic".into()));
    }
    let v = read_u32(r)?;
    if v != VERSION {
        return Err(Error::Format(format!("unsupported structure version {v}")));
    }
    let kind = Kind::from_u8(read_u8(r)?)?;
    let n = read_u64(r)?;
    Ok((kind, n))
}

/// Any structure file, dispatched on its kind byte.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Structure {
    OneBit(crate::onebit::OneBitRmq),
    Tradeoff(crate::tradeoff::TradeoffRmq),
    Sparse(crate::cartesian::SparseTable),
}

impl Structure {
    pub fn read_from<R: Read>(r: &mut R) -> Result<Structure> {
        let (kind, n) = read_header(r)?;
        let s = match kind {
            Kind::OneBit => Structure::OneBit(crate::onebit::OneBitRmq::read_body(r, n)?),
            Kind::Tradeoff => Structure::Tradeoff(crate::tradeoff::TradeoffRmq::read_body(r, n)?),
            Kind::Sparse => Structure::Sparse(crate::cartesian::SparseTable::read_body(r, n)?),
        };
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after structure".into()));
        }
        Ok(s)
    }

    pub fn kind(&self) -> Kind {
        match self {
            Structure::OneBit(_) => Kind::OneBit,
            Structure::Tradeoff(_) => Kind::Tradeoff,
            Structure::Sparse(_) => Kind::Sparse,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Structure::OneBit(s) => s.n(),
            Structure::Tradeoff(s) => s.n(),
            Structure::Sparse(s) => s.values().len(),
        }
    }

    pub fn query_probed(
        &self,
        a: usize,
        b: usize,
        probes: &mut crate::probe::ProbeCounter,
    ) -> Result<usize> {
        match self {
            Structure::OneBit(s) => s.query_probed(a, b, probes),
            Structure::Tradeoff(s) => s.query_probed(a, b, probes),
            Structure::Sparse(s) => s.query_probed(a, b, probes),
        }
    }

    pub fn space_report(&self) -> crate::report::SpaceReport {
        match self {
            Structure::OneBit(s) => s.space_report(),
            Structure::Tradeoff(s) => s.space_report(),
            Structure::Sparse(s) => s.space_report(),
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        match self {
            Structure::OneBit(s) => s.write_to(w),
            Structure::Tradeoff(s) => s.write_to(w),
            Structure::Sparse(s) => s.write_to(w),
        }
    }
}
