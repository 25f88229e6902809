//! Adversaries: the strategy interface, built-in strategies, the bias
//! functional and the exact solver for optimal adaptive adversaries.
//!
//! An adversary is consulted before every message slot. It may corrupt
//! parties (any number of times, within budget) and then fills the slot either
//! by ordering a pending honest party to speak or by sending a message on
//! behalf of a pending corrupted party. The engine enforces the rules; see
//! [`crate::engine`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::model::{ProtocolParams, Transcript};
use crate::party::PartySet;
use crate::rng::RngSeed;

mod policy;
mod solver;
mod strategies;
mod value;

pub use policy::{view_key, PolicyTable};
pub use solver::{optimal_adaptive_value, OptimalSolution};
pub use strategies::{GreedyMajority, LastSpeakerForcer, Passive, ScheduleOrder, StaticCorruption};
pub use value::{
    chernoff_radius, honest_mass, value_of, SecurityParams, TargetSet, ValueMethod, ValueMode,
    ValueReport,
};

/// What the adversary sees before acting: the full transcript so far.
#[derive(Clone, Copy)]
pub struct View<'a> {
    pub params: &'a ProtocolParams,
    pub transcript: &'a Transcript,
    pub corrupted: &'a PartySet,
    pub budget_left: usize,
    /// Parties that have not spoken in the current round.
    pub pending: &'a PartySet,
}

impl<'a> View<'a> {
    /// Zero-based round of the slot about to be filled.
    pub fn round(&self) -> usize {
        self.transcript.len() / self.params.parties
    }

    /// Zero-based position of the slot about to be filled within its round.
    pub fn position_in_round(&self) -> usize {
        self.transcript.len() % self.params.parties
    }

    pub fn pending_honest(&self) -> impl Iterator<Item = usize> + 'a {
        let (pending, corrupted) = (self.pending, self.corrupted);
        pending.iter().filter(move |&p| !corrupted.contains(p))
    }

    /// The action of an adversary that does nothing: lowest pending honest
    /// party speaks, otherwise a corrupted party sends zeros.
    pub fn passive_action(&self) -> AdversaryAction {
        match self.pending.first_outside(self.corrupted) {
            Some(p) => AdversaryAction::ScheduleHonest(p),
            None => {
                let p = self.pending.first().expect("view with no pending party");
                AdversaryAction::SendAs(p, BitString::zeros(self.params.message_bits))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryAction {
    Corrupt(usize),
    ScheduleHonest(usize),
    SendAs(usize, BitString),
}

impl AdversaryAction {
    pub fn fills_slot(&self) -> bool {
        !matches!(self, AdversaryAction::Corrupt(_))
    }
}

impl fmt::Display for AdversaryAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryAction::Corrupt(p) => write!(f, "corrupt P{}", p + 1),
            AdversaryAction::ScheduleHonest(p) => write!(f, "schedule P{}", p + 1),
            AdversaryAction::SendAs(p, m) => write!(f, "send {m} as P{}", p + 1),
        }
    }
}

/// A possibly stateful, possibly randomised adversary.
///
/// The engine calls [`begin`](AdversaryStrategy::begin) once per run with the
/// strategy's own seed, then [`act`](AdversaryStrategy::act) repeatedly.
pub trait AdversaryStrategy: Send {
    fn begin(&mut self, _seed: RngSeed) {}

    fn act(&mut self, view: &View<'_>) -> AdversaryAction;
}

/// A deterministic adversary: its action is a function of the view.
pub trait ViewPolicy: Send + Sync {
    fn decide(&self, view: &View<'_>) -> AdversaryAction;
}

impl<P: ViewPolicy + ?Sized> ViewPolicy for Arc<P> {
    fn decide(&self, view: &View<'_>) -> AdversaryAction {
        (**self).decide(view)
    }
}

impl<P: ViewPolicy + ?Sized> ViewPolicy for &P {
    fn decide(&self, view: &View<'_>) -> AdversaryAction {
        (**self).decide(view)
    }
}

/// Adapts a [`ViewPolicy`] to the stateful interface.
#[derive(Debug, Clone)]
pub struct Deterministic<P>(pub P);

impl<P: ViewPolicy> AdversaryStrategy for Deterministic<P> {
    fn act(&mut self, view: &View<'_>) -> AdversaryAction {
        self.0.decide(view)
    }
}
