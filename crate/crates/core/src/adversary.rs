//! The passive, location-aware eavesdropper.
//!
//! Eve listens on both hop frequencies. A colliding slot occupies a single
//! frequency and carries no key material, so she skips it. On a bit slot
//! she reads one RSS sample per frequency and decides which node sent on
//! `f0`; knowing the protocol, that assignment is the key bit.
//!
//! The maximum-likelihood rule compares the two simultaneous samples. Under
//! Gaussian dB-domain shadowing the sample difference `D = rss_f0 - rss_f1`
//! is `N(-delta, 2 sigma^2)` if Alice sent on `f0` (bit 0) and
//! `N(+delta, 2 sigma^2)` otherwise, with `delta = PL(d_AE) - PL(d_BE)`.
//! The likelihood ratio therefore only depends on `sign(D * delta)`, which is
//! why transmit power and reference loss never influence a decision. An
//! exact likelihood tie is an abstention.

use std::fmt;
use std::io;

use libm::erfc;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{delta_mean_pathloss, ChannelError, ChannelModel, Frequency, PathLossParams};
use crate::protocol::{RoundOutcome, SessionTranscript};
use crate::scenario::Deployment;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdversaryError {
    #[error("round {0} is a collision round; there is no bit to classify")]
    CollisionRound(u64),
    #[error("expected guesses for {expected} bit rounds, got {got}")]
    CoverageMismatch { expected: usize, got: usize },
    #[error("guess for round {got} where bit round {expected} was expected")]
    RoundMismatch { expected: u64, got: u64 },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryRule {
    RandomGuess,
    MlPairwise,
}

impl fmt::Display for AdversaryRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryRule::RandomGuess => f.write_str("random-guess"),
            AdversaryRule::MlPairwise => f.write_str("ml-pairwise"),
        }
    }
}

impl std::str::FromStr for AdversaryRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random-guess" | "random" => Ok(AdversaryRule::RandomGuess),
            "ml-pairwise" | "ml" => Ok(AdversaryRule::MlPairwise),
            other => Err(format!("unknown adversary rule `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ObservationKind {
    Collision { freq: Frequency },
    BitRound { rss_f0: f64, rss_f1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub round: u64,
    pub kind: ObservationKind,
}

impl Observation {
    fn samples(&self) -> Result<(f64, f64), AdversaryError> {
        match self.kind {
            ObservationKind::BitRound { rss_f0, rss_f1 } => Ok((rss_f0, rss_f1)),
            ObservationKind::Collision { .. } => Err(AdversaryError::CollisionRound(self.round)),
        }
    }
}

/// What Eve knows: the geometry, the propagation model and her own rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveKnowledge {
    pub d_ae: f64,
    pub d_be: f64,
    pub params: PathLossParams,
    pub sigma: f64,
    pub rule: AdversaryRule,
}

impl EveKnowledge {
    pub fn new(deployment: &Deployment, channel: &ChannelModel, rule: AdversaryRule) -> Self {
        Self {
            d_ae: deployment.d_ae(),
            d_be: deployment.d_be(),
            params: channel.path_loss,
            sigma: channel.shadowing.sigma,
            rule,
        }
    }

    pub fn delta(&self) -> f64 {
        delta_mean_pathloss(self.d_ae, self.d_be, self.params.gamma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Bit0,
    Bit1,
    Abstain,
}

impl Decision {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Decision::Bit1
        } else {
            Decision::Bit0
        }
    }

    pub fn bit(self) -> Option<bool> {
        match self {
            Decision::Bit0 => Some(false),
            Decision::Bit1 => Some(true),
            Decision::Abstain => None,
        }
    }

    /// Abstaining is never correct.
    pub fn is_correct(self, truth: bool) -> bool {
        self.bit() == Some(truth)
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Bit0 => "0",
            Decision::Bit1 => "1",
            Decision::Abstain => "abstain",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Guess {
    pub round: u64,
    pub decision: Decision,
}

/// Eve's RSS readings for one resolved slot. Bit slots draw Alice's sample
/// (at `d_AE`, on her frequency) and then Bob's; collision slots draw nothing.
pub fn observe_round<R: Rng + ?Sized>(
    round: u64,
    outcome: &RoundOutcome,
    deployment: &Deployment,
    channel: &ChannelModel,
    rng: &mut R,
) -> Result<Observation, ChannelError> {
    let kind = match *outcome {
        RoundOutcome::Collision { freq } => ObservationKind::Collision { freq },
        RoundOutcome::SharedBit {
            alice_freq, bob_freq, ..
        } => {
            let from_alice = channel.rss(deployment.d_ae(), alice_freq, rng)?;
            let from_bob = channel.rss(deployment.d_be(), bob_freq, rng)?;
            let (f0, f1) = if alice_freq == Frequency::F0 {
                (from_alice, from_bob)
            } else {
                (from_bob, from_alice)
            };
            ObservationKind::BitRound {
                rss_f0: f0.value,
                rss_f1: f1.value,
            }
        }
    };
    Ok(Observation { round, kind })
}

/// Maximum-likelihood source assignment on the two simultaneous samples.
pub fn classify_ml(obs: &Observation, k: &EveKnowledge) -> Result<Guess, AdversaryError> {
    let (rss_f0, rss_f1) = obs.samples()?;
    let score = (rss_f0 - rss_f1) * k.delta();
    let decision = if score > 0.0 {
        Decision::Bit1
    } else if score < 0.0 {
        Decision::Bit0
    } else {
        Decision::Abstain
    };
    Ok(Guess {
        round: obs.round,
        decision,
    })
}

/// Coin flip, ignoring the readings. One draw per call.
pub fn classify_random<R: Rng + ?Sized>(obs: &Observation, rng: &mut R) -> Result<Guess, AdversaryError> {
    obs.samples()?;
    Ok(Guess {
        round: obs.round,
        decision: Decision::from_bit(rng.random::<bool>()),
    })
}

pub fn classify<R: Rng + ?Sized>(obs: &Observation, k: &EveKnowledge, rng: &mut R) -> Result<Guess, AdversaryError> {
    match k.rule {
        AdversaryRule::MlPairwise => classify_ml(obs, k),
        AdversaryRule::RandomGuess => classify_random(obs, rng),
    }
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Probability that the ML rule names the right bit, `Phi(|delta| / (sigma sqrt 2))`.
/// Without shadowing the rule is always right unless the hypotheses coincide,
/// in which case it abstains.
pub fn pg_closed_form(delta: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        std_normal_cdf(delta.abs() / (sigma * std::f64::consts::SQRT_2))
    } else if delta != 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Exact success probability of [`classify_ml`]. Identical hypotheses
/// (`delta == 0`) make every reading a tie, so the rule always abstains;
/// elsewhere this is [`pg_closed_form`].
pub fn ml_success_prob(delta: f64, sigma: f64) -> f64 {
    if delta == 0.0 {
        0.0
    } else {
        pg_closed_form(delta, sigma)
    }
}

/// Per-session secrecy accounting. A secret bit is a key bit Eve got wrong
/// or abstained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecrecyReport {
    pub n_rounds: u64,
    pub generated: u64,
    pub guessed_correct: u64,
    pub secret: u64,
    /// Position in the key of the first bit Eve missed, if any.
    pub first_miss: Option<u64>,
}

impl SecrecyReport {
    /// At least `k` key bits unknown to Eve.
    pub fn per_bit_success(&self, k: u64) -> bool {
        self.secret >= k
    }

    /// A `k`-bit key was established and Eve failed on at least one of its
    /// bits.
    pub fn whole_key_success(&self, k: u64) -> bool {
        if k == 0 {
            return true;
        }
        self.generated >= k && self.first_miss.is_some_and(|i| i < k)
    }
}

/// Scores Eve's guesses against the agreed key. `guesses` must list exactly
/// the bit rounds of `transcript`, in order.
pub fn score_session(transcript: &SessionTranscript, guesses: &[Guess]) -> Result<SecrecyReport, AdversaryError> {
    let bit_rounds: Vec<_> = transcript.rounds.iter().filter(|r| !r.outcome.is_collision()).collect();
    if bit_rounds.len() != guesses.len() {
        return Err(AdversaryError::CoverageMismatch {
            expected: bit_rounds.len(),
            got: guesses.len(),
        });
    }
    let mut generated = 0;
    let mut guessed_correct = 0;
    let mut first_miss = None;
    for (rec, guess) in bit_rounds.iter().zip(guesses) {
        if rec.round != guess.round {
            return Err(AdversaryError::RoundMismatch {
                expected: rec.round,
                got: guess.round,
            });
        }
        if !(rec.alice_detected && rec.bob_detected) {
            continue;
        }
        let truth = rec.outcome.shared_bit().expect("bit round");
        if guess.decision.is_correct(truth) {
            guessed_correct += 1;
        } else if first_miss.is_none() {
            first_miss = Some(generated);
        }
        generated += 1;
    }
    Ok(SecrecyReport {
        n_rounds: transcript.n_rounds() as u64,
        generated,
        guessed_correct,
        secret: generated - guessed_correct,
        first_miss,
    })
}

/// Eve's full view of a session.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttackTrace {
    pub observations: Vec<Observation>,
    /// One per bit round.
    pub guesses: Vec<Guess>,
}

/// Observes and classifies every slot of `transcript`.
pub fn eavesdrop_session<R: Rng + ?Sized>(
    transcript: &SessionTranscript,
    deployment: &Deployment,
    channel: &ChannelModel,
    knowledge: &EveKnowledge,
    rng: &mut R,
) -> Result<AttackTrace, AdversaryError> {
    let mut trace = AttackTrace {
        observations: Vec::with_capacity(transcript.rounds.len()),
        guesses: Vec::with_capacity(transcript.key_bits.len()),
    };
    for rec in &transcript.rounds {
        let obs = observe_round(rec.round, &rec.outcome, deployment, channel, rng)?;
        if !rec.outcome.is_collision() {
            trace.guesses.push(classify(&obs, knowledge, rng)?);
        }
        trace.observations.push(obs);
    }
    Ok(trace)
}

impl AttackTrace {
    /// `round,rss_f0,rss_f1,decision,correct`; collision rounds leave the
    /// reading and verdict columns empty and record `skip`.
    pub fn write_csv<W: io::Write>(&self, transcript: &SessionTranscript, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["round", "rss_f0", "rss_f1", "decision", "correct"])?;
        let mut guesses = self.guesses.iter();
        for (obs, rec) in self.observations.iter().zip(&transcript.rounds) {
            match obs.kind {
                ObservationKind::Collision { .. } => {
                    w.write_record([
                        obs.round.to_string(),
                        String::new(),
                        String::new(),
                        "skip".into(),
                        String::new(),
                    ])?;
                }
                ObservationKind::BitRound { rss_f0, rss_f1 } => {
                    let g = guesses.next().expect("one guess per bit round");
                    let truth = rec.outcome.shared_bit().expect("bit round");
                    w.write_record([
                        obs.round.to_string(),
                        rss_f0.to_string(),
                        rss_f1.to_string(),
                        g.decision.to_string(),
                        u8::from(g.decision.is_correct(truth)).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}
