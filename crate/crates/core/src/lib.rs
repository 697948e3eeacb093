//! Belief propagation as a partial decoder ahead of minimum-weight perfect
//! matching, together with the rotated surface code memory experiment used to
//! benchmark it.
//!
//! The pipeline is: build a noisy circuit ([`surface::build_memory_circuit`]),
//! extract its detector error model ([`dem::extract_dem`]), decompose it into a
//! matching graph ([`graph::decompose_to_graph`]), sample shots
//! ([`frame::sample_shots`]) and decode them with [`partial::TwoStageDecoder`],
//! [`mwpm::MatchingDecoder`] or [`mwpm::BeliefMatchingDecoder`].

pub mod bench;
pub mod bits;
pub mod bp;
pub mod circuit;
pub mod dem;
pub mod error;
pub mod frame;
pub mod graph;
pub mod mwpm;
pub mod noise;
pub mod partial;
pub mod pauli;
pub mod sparse;
pub mod surface;

pub use bits::{Bits, Syndrome};
pub use error::{Error, Result};
