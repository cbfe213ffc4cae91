//! Succinct range minimum query structures with exact Catalan combinatorics
//! and hard-instance generators.

pub mod bits;
pub mod cartesian;
pub mod catalan;
pub mod container;
pub mod error;
pub mod hardgen;
pub mod onebit;
pub mod probe;
pub mod report;
pub mod spillover;
pub mod tradeoff;

pub use bits::{BitReader, BitVec, BitWriter, RankSelect};
pub use cartesian::{
    build_cartesian, rmq_scan, CartesianTree, DfudsString, RangeMinimum, SparseTable,
};
pub use catalan::{catalan_number, BigCount, TreeShape};
pub use container::{Kind, Structure};
pub use error::{Error, Result};
pub use onebit::{NodeLabel, OneBitRmq};
pub use probe::ProbeCounter;
pub use report::SpaceReport;
pub use spillover::{DensityModel, MemView, SetSelectRep, Size, SpillCodec, SpillRep};
pub use tradeoff::{BalancedParens, ParenParams, TradeoffRmq};
