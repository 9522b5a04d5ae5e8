//! Detection and characterization of autonomous systems that transit packets
//! with bogon (private/reserved) source addresses.
//!
//! The crate joins traceroute corpora against BGP routing-table snapshots and
//! classifies, per traceroute, which ASes forwarded packets sourced from
//! special-purpose address space. Pipeline stages:
//!
//! 1. [`bogon`] — registry of special-purpose address blocks and per-address
//!    classification.
//! 2. [`mrt`] / [`rib`] — MRT TABLE_DUMP_V2 RIB parsing and the merged
//!    longest-prefix-match table.
//! 3. [`trace`] — canonical line-delimited JSON traceroute corpus.
//! 4. [`annotate`] — hop-by-hop origin resolution and AS-path cleaning.
//! 5. [`transit`] — the BA/BB/BC transit attribution cases.
//! 6. [`metrics`] — per-measurement statistics, Jaccard/containment matrices
//!    and occurrence counts.
//! 7. [`crosscheck`] — joins against spoofing-test results, anti-spoofing
//!    pledges and AS metadata.
//! 8. [`synth`] — ground-truth generator plus the naive reference
//!    implementations used as oracles in tests.

pub mod annotate;
pub mod bogon;
pub mod crosscheck;
pub mod metrics;
pub mod mrt;
pub mod net;
pub mod pipeline;
pub mod rib;
pub mod synth;
pub mod trace;
pub mod transit;

pub use net::{Asn, AsnSet, Ipv4Prefix};
