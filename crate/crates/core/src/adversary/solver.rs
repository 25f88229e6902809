//! Exact optimal adaptive adversary by backward induction.
//!
//! Game states are `(transcript prefix, corrupted set)`. At a state the
//! adversary picks the best of: scheduling a pending honest party (value is
//! the average over that party's honest messages), sending any `L`-bit
//! message for a pending corrupted party, or corrupting a fresh party within
//! budget. Ties go to the first action in that order (parties ascending,
//! messages ascending); a later action replaces the incumbent only if it is
//! strictly better.

use std::collections::HashMap;
use std::rc::Rc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::policy::{hex_digest, state_digest, PolicyTable};
use super::value::{honest_mass, SecurityParams, ValueMethod, ValueReport};
use super::AdversaryAction;
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::model::{ProtocolSpec, SpeakerStatus, Transcript, TranscriptEntry};
use crate::party::PartySet;

pub struct OptimalSolution {
    pub report: ValueReport,
    /// Optimal action at every reachable state.
    pub policy: PolicyTable,
    pub states: usize,
}

/// A-priori upper bound on the number of game states: over all prefix
/// lengths `k`, within-round orderings times `2^{L·k}` message choices, times
/// the number of corrupted sets of size at most `t`.
pub fn game_state_estimate(spec: &ProtocolSpec, t: usize) -> f64 {
    let p = spec.params();
    let n = p.parties;
    let factorial = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
    let falling = |j: usize| factorial(n) / factorial(n - j);
    let binom = |k: usize| factorial(n) / (factorial(k) * factorial(n - k));
    let prefixes: f64 = (0..=p.slots())
        .map(|k| {
            factorial(n).powi((k / n) as i32)
                * falling(k % n)
                * 2f64.powi((p.message_bits * k) as i32)
        })
        .sum();
    let corrupted: f64 = (0..=t.min(n)).map(binom).sum();
    prefixes * corrupted
}

struct Solver<'a> {
    spec: &'a ProtocolSpec,
    sec: &'a SecurityParams,
    honest_messages: Rc<[BitString]>,
    all_messages: Rc<[BitString]>,
    memo: HashMap<[u8; 32], BigRational>,
    policy: PolicyTable,
}

impl Solver<'_> {
    fn solve(&mut self, transcript: &Transcript, corrupted: &PartySet) -> BigRational {
        if transcript.is_complete() {
            return if self.sec.target.contains(self.spec.output_value(transcript)) {
                BigRational::one()
            } else {
                BigRational::zero()
            };
        }
        let params = *self.spec.params();
        let digest = state_digest(&params, transcript, corrupted);
        if let Some(v) = self.memo.get(&digest) {
            return v.clone();
        }
        let round = transcript.current_round().expect("incomplete transcript");
        let pending = transcript.pending();
        let mut best: Option<(BigRational, AdversaryAction)> = None;
        let offer = |v: BigRational,
                     a: AdversaryAction,
                     best: &mut Option<(BigRational, AdversaryAction)>| {
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                *best = Some((v, a));
            }
        };
        let extend = |party: usize, message: &BitString, status: SpeakerStatus| {
            let mut next = transcript.clone();
            next.push(TranscriptEntry {
                round,
                party,
                message: message.clone(),
                status,
            })
            .expect("pending party");
            next
        };

        for p in pending.iter().filter(|&p| !corrupted.contains(p)) {
            let messages = Rc::clone(&self.honest_messages);
            let mut sum = BigRational::zero();
            for m in messages.iter() {
                sum += self.solve(&extend(p, m, SpeakerStatus::Honest), corrupted);
            }
            let v = sum / BigInt::from(messages.len());
            offer(v, AdversaryAction::ScheduleHonest(p), &mut best);
        }
        for p in pending.iter().filter(|&p| corrupted.contains(p)) {
            let messages = Rc::clone(&self.all_messages);
            for m in messages.iter() {
                let v = self.solve(&extend(p, m, SpeakerStatus::Corrupted), corrupted);
                offer(v, AdversaryAction::SendAs(p, m.clone()), &mut best);
            }
        }
        if corrupted.len() < self.sec.t {
            for p in (0..params.parties).filter(|&p| !corrupted.contains(p)) {
                let mut c = corrupted.clone();
                c.insert(p);
                let v = self.solve(transcript, &c);
                offer(v, AdversaryAction::Corrupt(p), &mut best);
            }
        }
        let (value, action) = best.expect("every state has a legal action");
        self.policy.actions.insert(hex_digest(&digest), action);
        self.memo.insert(digest, value.clone());
        value
    }
}

/// `max_A Pr[out^A ∈ M] − Pr[out ∈ M]` over all adaptive rushing adversaries
/// with budget `t`, together with an optimal policy.
pub fn optimal_adaptive_value(
    spec: &ProtocolSpec,
    sec: &SecurityParams,
    cap: u128,
) -> Result<OptimalSolution> {
    sec.check_against(spec)?;
    let estimate = game_state_estimate(spec, sec.t);
    if estimate > cap as f64 {
        return Err(Error::cap("game tree", estimate, cap));
    }
    let params = *spec.params();
    let honest = honest_mass(spec, &sec.target, cap)?;
    let mut solver = Solver {
        spec,
        sec,
        honest_messages: spec.message_space().enumerate(params.message_bits).into(),
        all_messages: (0..1u64 << params.message_bits)
            .map(|v| BitString::from_u64(v, params.message_bits))
            .collect::<Vec<_>>()
            .into(),
        memo: HashMap::new(),
        policy: PolicyTable::new(spec.label(), params, sec.t),
    };
    let best = solver.solve(
        &Transcript::new(params.parties, params.rounds),
        &PartySet::new(),
    );
    let states = solver.memo.len();
    Ok(OptimalSolution {
        report: ValueReport::exact(best, honest, ValueMethod::GameTree),
        policy: solver.policy,
        states,
    })
}
