//! Simulation laboratory for key establishment through frequency-hopping
//! collisions.
//!
//! Two full-duplex nodes each pick one of two frequencies per slot, transmit
//! on it and listen on the other. Slots where they picked the same frequency
//! are discarded; every other slot yields a bit both sides agree on. A
//! passive eavesdropper who reads received signal strength on both
//! frequencies tries to tell which node sent where.
//!
//! - [`scenario`]: positions, distances and parameters.
//! - [`channel`]: log-distance path loss with optional log-normal shadowing.
//! - [`protocol`]: the per-slot engine and session transcripts.
//! - [`adversary`]: Eve's observations, classifiers and secrecy accounting.
//! - [`analysis`]: closed forms, minimum transmissions, privacy radius.
//! - [`experiments`]: seeded Monte Carlo sweeps and frontiers.

pub mod adversary;
pub mod analysis;
pub mod channel;
pub mod experiments;
pub mod protocol;
pub mod scenario;

pub use adversary::{
    AdversaryError, AdversaryRule, Decision, EveKnowledge, Guess, Observation, ObservationKind, SecrecyReport,
};
pub use analysis::{AnalysisError, KeyRequest, PrivacyRegion, Probability};
pub use channel::{ChannelError, ChannelModel, Frequency, PathLossParams, RssSample, ShadowingParams};
pub use experiments::{
    analytic_sweep, frontier, sweep, Engagement, ExperimentError, FrontierRow, FrontierSource, Geometry, GridParams,
    Metric, ResultRow, ResultTable, SweepSpec,
};
pub use protocol::{NodeId, ProtocolError, RoundAction, RoundOutcome, SessionTranscript};
pub use scenario::{ConfigError, Deployment, Position, ScenarioConfig};

/// Any error raised by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}
