//! Playground geometry and simulation parameters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Separation between Alice and Bob in the canonical deployment, meters.
pub const CANONICAL_AB_DISTANCE: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid gamma {0}: path-loss exponent must be positive and finite")]
    InvalidGamma(f64),
    #[error("invalid sigma {0}: shadowing std-dev must be non-negative and finite")]
    InvalidSigma(f64),
    #[error("invalid pl0 {0}: reference path loss must be finite")]
    InvalidPl0(f64),
    #[error("invalid d0 {0}: reference distance must be positive and finite")]
    InvalidD0(f64),
    #[error("invalid pt {0}: transmit power must be finite")]
    InvalidPt(f64),
    #[error("invalid slot duration {0}: must be positive and finite")]
    InvalidSlotDuration(f64),
    #[error("invalid rounds: n_rounds must be at least 1")]
    InvalidRounds,
    #[error("invalid position ({x}, {y}): coordinates must be finite")]
    InvalidPosition { x: f64, y: f64 },
    #[error("invalid d_be {0}: Eve-Bob distance must be positive and finite")]
    InvalidEveDistance(f64),
    #[error("{0} and {1} are co-located")]
    CoLocated(&'static str, &'static str),
}

/// A point on the playground, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn checked(x: f64, y: f64) -> Result<Self, ConfigError> {
        if x.is_finite() && y.is_finite() {
            Ok(Self { x, y })
        } else {
            Err(ConfigError::InvalidPosition { x, y })
        }
    }

    pub fn distance_to(&self, other: &Position) -> f64 {
        distance(*self, *other)
    }
}

/// Euclidean distance between two positions.
pub fn distance(a: Position, b: Position) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Positions of the two legitimate nodes and the eavesdropper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    alice: Position,
    bob: Position,
    eve: Position,
}

impl Deployment {
    pub fn new(alice: Position, bob: Position, eve: Position) -> Result<Self, ConfigError> {
        for p in [alice, bob, eve] {
            Position::checked(p.x, p.y)?;
        }
        if distance(alice, bob) <= 0.0 {
            return Err(ConfigError::CoLocated("alice", "bob"));
        }
        if distance(alice, eve) <= 0.0 {
            return Err(ConfigError::CoLocated("alice", "eve"));
        }
        if distance(bob, eve) <= 0.0 {
            return Err(ConfigError::CoLocated("bob", "eve"));
        }
        Ok(Self { alice, bob, eve })
    }

    /// Alice at `[-25, 0]`, Bob at `[25, 0]` and Eve on the same axis at
    /// `[25 + d_be, 0]`, so that `d_AB = 50` and `d_AE = d_BE + 50`.
    pub fn canonical(d_be: f64) -> Result<Self, ConfigError> {
        if !(d_be.is_finite() && d_be > 0.0) {
            return Err(ConfigError::InvalidEveDistance(d_be));
        }
        let half = CANONICAL_AB_DISTANCE / 2.0;
        Self::new(
            Position::new(-half, 0.0),
            Position::new(half, 0.0),
            Position::new(half + d_be, 0.0),
        )
    }

    /// Eve on the perpendicular bisector of the Alice-Bob segment, at
    /// distance `d` from both nodes. Requires `d >= 25`.
    pub fn equidistant(d: f64) -> Result<Self, ConfigError> {
        let half = CANONICAL_AB_DISTANCE / 2.0;
        if !(d.is_finite() && d >= half) {
            return Err(ConfigError::InvalidEveDistance(d));
        }
        let y = (d * d - half * half).sqrt();
        Self::new(
            Position::new(-half, 0.0),
            Position::new(half, 0.0),
            Position::new(0.0, y),
        )
    }

    pub fn alice(&self) -> Position {
        self.alice
    }

    pub fn bob(&self) -> Position {
        self.bob
    }

    pub fn eve(&self) -> Position {
        self.eve
    }

    pub fn d_ab(&self) -> f64 {
        distance(self.alice, self.bob)
    }

    pub fn d_ae(&self) -> f64 {
        distance(self.alice, self.eve)
    }

    pub fn d_be(&self) -> f64 {
        distance(self.bob, self.eve)
    }

    /// Same playground with Alice and Bob exchanging places.
    pub fn swapped(&self) -> Self {
        Self {
            alice: self.bob,
            bob: self.alice,
            eve: self.eve,
        }
    }
}

/// Protocol and channel parameters for a session.
///
/// `slot_duration` only feeds wall-clock estimates; the simulator is
/// slot-synchronous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub gamma: f64,
    pub sigma: f64,
    pub pl0: f64,
    pub d0: f64,
    pub pt: f64,
    pub slot_duration: f64,
    pub n_rounds: u64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            gamma: 3.5,
            sigma: 8.0,
            pl0: 40.0,
            d0: 1.0,
            pt: 20.0,
            slot_duration: 0.01,
            n_rounds: 600,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(self) -> Result<Self, ConfigError> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(ConfigError::InvalidGamma(self.gamma));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(ConfigError::InvalidSigma(self.sigma));
        }
        if !self.pl0.is_finite() {
            return Err(ConfigError::InvalidPl0(self.pl0));
        }
        if !(self.d0.is_finite() && self.d0 > 0.0) {
            return Err(ConfigError::InvalidD0(self.d0));
        }
        if !self.pt.is_finite() {
            return Err(ConfigError::InvalidPt(self.pt));
        }
        if !(self.slot_duration.is_finite() && self.slot_duration > 0.0) {
            return Err(ConfigError::InvalidSlotDuration(self.slot_duration));
        }
        if self.n_rounds == 0 {
            return Err(ConfigError::InvalidRounds);
        }
        Ok(self)
    }

    /// Wall-clock length of a session of `n_rounds` slots, seconds.
    pub fn session_duration(&self) -> f64 {
        self.n_rounds as f64 * self.slot_duration
    }
}

/// Free-function form of [`ScenarioConfig::validate`].
pub fn validate_config(cfg: ScenarioConfig) -> Result<ScenarioConfig, ConfigError> {
    cfg.validate()
}
