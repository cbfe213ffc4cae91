//! Space accounting shared by every structure kind.

use std::collections::BTreeMap;

use serde::Serialize;

/// Bit budget of one built structure.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SpaceReport {
    pub n: u64,
    pub kind: String,
    pub total_bits: f64,
    pub dfuds_bits: Option<u64>,
    pub redundancy_bits: f64,
    /// log2 of the n-th Catalan number.
    pub benchmark_bits: f64,
    pub components: BTreeMap<String, f64>,
}
