//! The slot-by-slot key establishment engine.
//!
//! Each slot, both nodes draw a bit `b`, transmit on `f_b` and listen on the
//! other frequency. If they picked the same frequency the slot is lost to a
//! collision; otherwise each node keeps `b XOR id`, which is Alice's bit on
//! both sides. Slots are a shared logical index starting at 1.

use std::io;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::Frequency;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("scripted sequences differ in length: alice {alice}, bob {bob}")]
    ScriptLengthMismatch { alice: usize, bob: usize },
    #[error("scripted sequence exhausted for {0:?}")]
    ScriptExhausted(NodeId),
    #[error("detection-miss probability {0} is outside [0, 1)")]
    InvalidMissProbability(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeId {
    Alice,
    Bob,
}

impl NodeId {
    pub fn id(self) -> u8 {
        match self {
            NodeId::Alice => 0,
            NodeId::Bob => 1,
        }
    }

    /// `b XOR id`: the key bit this node derives from its own draw.
    pub fn key_bit(self, drawn: bool) -> bool {
        drawn ^ (self == NodeId::Bob)
    }
}

/// Anything that can supply the per-slot bit draws.
pub trait BitSource {
    fn next_bit(&mut self, node: NodeId) -> Result<bool, ProtocolError>;
}

impl<R: Rng + ?Sized> BitSource for R {
    fn next_bit(&mut self, _node: NodeId) -> Result<bool, ProtocolError> {
        Ok(self.random::<bool>())
    }
}

/// Externally fixed bit sequences in place of random draws.
#[derive(Debug, Clone)]
pub struct ScriptedBits {
    alice: std::vec::IntoIter<bool>,
    bob: std::vec::IntoIter<bool>,
}

impl ScriptedBits {
    pub fn new(alice: Vec<bool>, bob: Vec<bool>) -> Result<Self, ProtocolError> {
        if alice.len() != bob.len() {
            return Err(ProtocolError::ScriptLengthMismatch {
                alice: alice.len(),
                bob: bob.len(),
            });
        }
        Ok(Self {
            alice: alice.into_iter(),
            bob: bob.into_iter(),
        })
    }

    pub fn remaining(&self) -> usize {
        self.alice.len()
    }
}

impl BitSource for ScriptedBits {
    fn next_bit(&mut self, node: NodeId) -> Result<bool, ProtocolError> {
        let it = match node {
            NodeId::Alice => &mut self.alice,
            NodeId::Bob => &mut self.bob,
        };
        it.next().ok_or(ProtocolError::ScriptExhausted(node))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundAction {
    pub bit: bool,
    pub tx_freq: Frequency,
    pub rx_freq: Frequency,
}

impl RoundAction {
    pub fn from_bit(bit: bool) -> Self {
        let tx_freq = Frequency::for_bit(bit);
        Self {
            bit,
            tx_freq,
            rx_freq: tx_freq.other(),
        }
    }
}

/// Draws one bit for `id` and maps it to transmit/listen frequencies.
pub fn node_round_action<S: BitSource + ?Sized>(id: NodeId, source: &mut S) -> Result<RoundAction, ProtocolError> {
    source.next_bit(id).map(RoundAction::from_bit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoundOutcome {
    Collision {
        freq: Frequency,
    },
    SharedBit {
        value: bool,
        alice_freq: Frequency,
        bob_freq: Frequency,
    },
}

impl RoundOutcome {
    pub fn is_collision(&self) -> bool {
        matches!(self, RoundOutcome::Collision { .. })
    }

    pub fn shared_bit(&self) -> Option<bool> {
        match *self {
            RoundOutcome::SharedBit { value, .. } => Some(value),
            RoundOutcome::Collision { .. } => None,
        }
    }

    /// Frequencies carrying a transmission this slot.
    pub fn occupied(&self) -> Vec<Frequency> {
        match *self {
            RoundOutcome::Collision { freq } => vec![freq],
            RoundOutcome::SharedBit {
                alice_freq, bob_freq, ..
            } => vec![alice_freq, bob_freq],
        }
    }
}

/// `alice` and `bob` must be the respective nodes' actions.
pub fn resolve_round(alice: RoundAction, bob: RoundAction) -> RoundOutcome {
    if alice.tx_freq == bob.tx_freq {
        RoundOutcome::Collision { freq: alice.tx_freq }
    } else {
        RoundOutcome::SharedBit {
            value: NodeId::Alice.key_bit(alice.bit),
            alice_freq: alice.tx_freq,
            bob_freq: bob.tx_freq,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based slot index.
    pub round: u64,
    pub alice: RoundAction,
    pub bob: RoundAction,
    pub outcome: RoundOutcome,
    /// Whether each node saw the other's message. Always true under ideal
    /// detection.
    pub alice_detected: bool,
    pub bob_detected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SessionTranscript {
    pub rounds: Vec<RoundRecord>,
    pub key_bits: Vec<bool>,
}

impl SessionTranscript {
    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn collision_rounds(&self) -> impl Iterator<Item = u64> + '_ {
        self.rounds.iter().filter(|r| r.outcome.is_collision()).map(|r| r.round)
    }

    /// Key as reconstructed by one node from its own draws.
    pub fn node_key(&self, node: NodeId) -> Vec<bool> {
        self.rounds
            .iter()
            .filter(|r| !r.outcome.is_collision())
            .filter(|r| match node {
                NodeId::Alice => r.alice_detected,
                NodeId::Bob => r.bob_detected,
            })
            .map(|r| match node {
                NodeId::Alice => node.key_bit(r.alice.bit),
                NodeId::Bob => node.key_bit(r.bob.bit),
            })
            .collect()
    }

    pub fn key_string(&self) -> String {
        bits_to_string(&self.key_bits)
    }

    /// One row per round: `round,a_bit,b_bit,outcome,bit_value`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["round", "a_bit", "b_bit", "outcome", "bit_value"])?;
        for r in &self.rounds {
            let (outcome, value) = match r.outcome {
                RoundOutcome::Collision { freq } => (format!("collision_{freq}"), String::new()),
                RoundOutcome::SharedBit { value, .. } if r.alice_detected && r.bob_detected => {
                    ("bit".to_string(), u8::from(value).to_string())
                }
                RoundOutcome::SharedBit { .. } => ("missed".to_string(), String::new()),
            };
            w.write_record([
                r.round.to_string(),
                u8::from(r.alice.bit).to_string(),
                u8::from(r.bob.bit).to_string(),
                outcome,
                value,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Runs `n_rounds` slots drawing bits from `source`, with ideal detection.
pub fn run_rounds<S: BitSource + ?Sized>(n_rounds: u64, source: &mut S) -> Result<SessionTranscript, ProtocolError> {
    let mut t = SessionTranscript {
        rounds: Vec::with_capacity(n_rounds as usize),
        key_bits: Vec::new(),
    };
    for round in 1..=n_rounds {
        let alice = node_round_action(NodeId::Alice, source)?;
        let bob = node_round_action(NodeId::Bob, source)?;
        let outcome = resolve_round(alice, bob);
        if let Some(bit) = outcome.shared_bit() {
            t.key_bits.push(bit);
        }
        t.rounds.push(RoundRecord {
            round,
            alice,
            bob,
            outcome,
            alice_detected: true,
            bob_detected: true,
        });
    }
    Ok(t)
}

/// One full session of `cfg.n_rounds` slots. Deterministic given the
/// generator state.
pub fn run_session<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> SessionTranscript {
    run_rounds(cfg.n_rounds, rng).expect("random bit source never fails")
}

/// Replays fixed per-node bit sequences.
pub fn run_scripted(alice: &[bool], bob: &[bool]) -> Result<SessionTranscript, ProtocolError> {
    let mut src = ScriptedBits::new(alice.to_vec(), bob.to_vec())?;
    run_rounds(alice.len() as u64, &mut src)
}

/// Like [`run_session`], but each node independently fails to notice the
/// peer's message with probability `miss` on non-colliding slots, and then
/// discards the slot. A one-sided miss desynchronises the two keys.
pub fn run_session_with_detection_miss<R: Rng + ?Sized>(
    n_rounds: u64,
    miss: f64,
    rng: &mut R,
) -> Result<SessionTranscript, ProtocolError> {
    if !(0.0..1.0).contains(&miss) {
        return Err(ProtocolError::InvalidMissProbability(miss));
    }
    let mut t = run_rounds(n_rounds, rng)?;
    if miss == 0.0 {
        return Ok(t);
    }
    t.key_bits.clear();
    for r in &mut t.rounds {
        if let Some(bit) = r.outcome.shared_bit() {
            r.alice_detected = !rng.random_bool(miss);
            r.bob_detected = !rng.random_bool(miss);
            if r.alice_detected && r.bob_detected {
                t.key_bits.push(bit);
            }
        }
    }
    Ok(t)
}
