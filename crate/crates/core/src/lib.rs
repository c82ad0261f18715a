//! Modulo zero-sum randomness and the multiparty protocols built on it.
//!
//! The crate covers three layers:
//!
//! * classical: finite fields ([`field`]), zero-sum share generators
//!   ([`mzsr`]), a simulated broadcast channel ([`channel`]) and the
//!   protocols that run over it ([`protocols`]);
//! * quantum: a dense qudit simulator ([`quantum`]) and the GHZ-state
//!   verification tests ([`verification`]);
//! * audit: exact distribution machinery ([`analysis`]) and adversary
//!   strategies with exact or Monte-Carlo success estimates ([`attacks`]).

pub mod analysis;
pub mod attacks;
pub mod channel;
pub mod field;
pub mod mzsr;
pub mod protocols;
pub mod quantum;
pub mod tape;

pub mod verification;

pub use attacks::{AttackKind, AttackMode, AttackResult, AttackSpec};
pub use analysis::{JointTable, Weight};
pub use channel::{AdversaryModel, Behavior, BroadcastMessage, PartyId, Payload, Transcript, View};
pub use field::{ExtFieldSpec, Field, FieldElement, FieldSpec, FieldVector};
pub use mzsr::{Provenance, ZeroSumBundle};
pub use quantum::{NoiseModel, Observable, Projector, QuantumRegister};
pub use verification::{CheckResult, ThresholdSet, VerificationReport};
pub use tape::{seeded_rng, ExhaustiveTape, Tape};

/// Version string embedded into every report.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("operands belong to different fields")]
    FieldMismatch,
    #[error("zero has no multiplicative inverse")]
    NotInvertible,
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),
    #[error("unsupported observable: {0}")]
    UnsupportedObservable(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("enumeration exceeds {limit} atoms; use Monte-Carlo mode")]
    EnumerationTooLarge { limit: u64 },
    #[error("insufficient copies: need {needed}, have {available}")]
    InsufficientCopies { needed: usize, available: usize },
    #[error("inconsistent thresholds: {0}")]
    InvalidThresholds(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("party {party} failed in round {round}: {reason}")]
    PartyFault { party: usize, round: usize, reason: String },
    #[error("malformed table: {0}")]
    MalformedTable(String),
    #[error("conditioning on an event of probability zero")]
    ImpossibleConditioning,
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
