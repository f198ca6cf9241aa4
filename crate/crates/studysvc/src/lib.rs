//! Human face/voice matching study service: seeded session generation,
//! append-only record logs, exclusion rules and per-experiment aggregates,
//! exposed over a small JSON HTTP API.

pub mod aggregate;
pub mod config;
pub mod error;
pub mod experiment;
pub mod http;
pub mod log;
pub mod session;
pub mod stimuli;
pub mod store;

pub use aggregate::{aggregate, control_failures, ControlFailures, Exclusion, ExperimentSummary};
pub use config::ServiceConfig;
pub use error::{Result, StudyError};
pub use experiment::{ExperimentId, ExperimentSpec, PairConstraint};
pub use session::{
    Choice, NextTrial, ResponseRecord, SessionHeader, StudySession, SubmitAck, Trial, TrialKind,
    TrialPayload,
};
pub use stimuli::{MediaIndex, PairingPool, StimulusPool};
pub use store::{SessionCreated, StudyStore};
