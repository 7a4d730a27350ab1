//! Log-distance path loss, with and without log-normal shadowing.
//!
//! Both hop frequencies share one propagation model. Every call to
//! [`path_loss_shadowed`] consumes exactly one standard-normal variate from
//! the caller's generator, also when `sigma == 0`, so that replaying a seed
//! with different powers or reference losses lines up draw for draw.
//! Shadowing draws are independent per round, link and frequency.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("distance {d} m is below the reference distance {d0} m")]
    BelowReference { d: f64, d0: f64 },
}

/// One of the two hop frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Frequency {
    F0,
    F1,
}

impl Frequency {
    /// `f_b` for bit `b`.
    pub fn for_bit(bit: bool) -> Self {
        if bit {
            Frequency::F1
        } else {
            Frequency::F0
        }
    }

    pub fn other(self) -> Self {
        match self {
            Frequency::F0 => Frequency::F1,
            Frequency::F1 => Frequency::F0,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Frequency::F0 => 0,
            Frequency::F1 => 1,
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Frequency::F0 => f.write_str("f0"),
            Frequency::F1 => f.write_str("f1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    /// Loss at the reference distance, dB.
    pub pl0: f64,
    pub gamma: f64,
    /// Reference distance, meters.
    pub d0: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            pl0: 40.0,
            gamma: 3.5,
            d0: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShadowingParams {
    /// Std-dev of the zero-mean dB-domain Gaussian term.
    pub sigma: f64,
}

/// Everything needed to turn a transmission into an RSS reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    /// Transmit power, dBm.
    pub pt: f64,
    pub path_loss: PathLossParams,
    pub shadowing: ShadowingParams,
}

impl ChannelModel {
    pub fn from_config(cfg: &crate::scenario::ScenarioConfig) -> Self {
        Self {
            pt: cfg.pt,
            path_loss: PathLossParams {
                pl0: cfg.pl0,
                gamma: cfg.gamma,
                d0: cfg.d0,
            },
            shadowing: ShadowingParams { sigma: cfg.sigma },
        }
    }

    pub fn rss<R: Rng + ?Sized>(&self, d: f64, frequency: Frequency, rng: &mut R) -> Result<RssSample, ChannelError> {
        rss(self.pt, d, &self.path_loss, &self.shadowing, frequency, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssSample {
    /// dBm.
    pub value: f64,
    pub frequency: Frequency,
}

pub fn path_loss_deterministic(d: f64, p: &PathLossParams) -> Result<f64, ChannelError> {
    if d.is_nan() || d < p.d0 {
        return Err(ChannelError::BelowReference { d, d0: p.d0 });
    }
    Ok(p.pl0 + 10.0 * p.gamma * (d / p.d0).log10())
}

pub fn path_loss_shadowed<R: Rng + ?Sized>(
    d: f64,
    p: &PathLossParams,
    s: &ShadowingParams,
    rng: &mut R,
) -> Result<f64, ChannelError> {
    let mean = path_loss_deterministic(d, p)?;
    let z: f64 = rng.sample(StandardNormal);
    Ok(mean + s.sigma * z)
}

/// Received power `pt - PL(d)` on `frequency`.
pub fn rss<R: Rng + ?Sized>(
    pt: f64,
    d: f64,
    p: &PathLossParams,
    s: &ShadowingParams,
    frequency: Frequency,
    rng: &mut R,
) -> Result<RssSample, ChannelError> {
    let loss = path_loss_shadowed(d, p, s, rng)?;
    Ok(RssSample {
        value: pt - loss,
        frequency,
    })
}

/// Mean path-loss gap `PL(d_ae) - PL(d_be)` in dB. Reference loss, reference
/// distance and transmit power all cancel. Both distances must be positive.
pub fn delta_mean_pathloss(d_ae: f64, d_be: f64, gamma: f64) -> f64 {
    debug_assert!(d_ae > 0.0 && d_be > 0.0);
    10.0 * gamma * (d_ae / d_be).log10()
}
