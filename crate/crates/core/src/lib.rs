//! # forge-core
//!
//! Simulation framework for synchronous, full-information protocols without
//! private inputs.
//!
//! The crate is organised around a small number of layers:
//!
//! * [`model`] and [`engine`]: the protocol model (parameters, transcripts,
//!   output maps) and a deterministic, seeded execution engine with rushing
//!   adversaries.
//! * [`protocols`]: built-in public-coin protocols (coin flipping, majority,
//!   selection, leader election).
//! * [`adversary`]: the strategy interface, built-in strategies, the bias
//!   functional and an exact backward-induction solver for optimal adaptive
//!   adversaries on tiny instances.
//! * [`compression`]: the long-to-short message transformation driven by a
//!   random matrix, the matrix-tracking reduction adversary and the hybrid
//!   experiments between the reduction and the ideal run.
//! * [`publiccoin`]: the transformation of a protocol with private randomness
//!   into one whose messages are uniformly random permutations.
//! * [`stats`]: exact and empirical distributions, statistical distance,
//!   entropy, KL divergence, the entropy-to-distance bound, the counting claim
//!   and Chernoff-style estimation.
//!
//! Every randomised routine takes an explicit [`RngSeed`]; two runs with the
//! same inputs produce identical results regardless of thread count.

pub mod adversary;
pub mod bits;
pub mod compression;
pub mod engine;
pub mod error;
pub mod model;
pub mod party;
pub mod protocols;
pub mod publiccoin;
pub mod rng;
pub mod stats;

pub use bits::BitString;
pub use error::{Error, Result};
pub use model::{
    MessageSpace, ProtocolParams, ProtocolSpec, SpeakerStatus, Transcript, TranscriptEntry,
};
pub use party::PartySet;
pub use rng::RngSeed;

/// Default bound on the number of states any exhaustive enumeration may visit.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 24;
