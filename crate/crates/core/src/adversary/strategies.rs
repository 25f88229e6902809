use std::sync::Arc;

use super::value::TargetSet;
use super::{AdversaryAction, AdversaryStrategy, View, ViewPolicy};
use crate::bits::BitString;
use crate::model::ProtocolSpec;
use crate::party::PartySet;
use crate::rng::RngSeed;

/// Never corrupts; lets the lowest pending honest party speak.
#[derive(Debug, Clone, Copy, Default)]
pub struct Passive;

impl ViewPolicy for Passive {
    fn decide(&self, view: &View<'_>) -> AdversaryAction {
        view.passive_action()
    }
}

/// Never corrupts; within every round lets honest parties speak in a fixed
/// order (parties missing from the order go last, ascending).
#[derive(Debug, Clone)]
pub struct ScheduleOrder(pub Vec<usize>);

impl ViewPolicy for ScheduleOrder {
    fn decide(&self, view: &View<'_>) -> AdversaryAction {
        let next = self
            .0
            .iter()
            .copied()
            .find(|&p| view.pending.contains(p) && !view.corrupted.contains(p));
        match next {
            Some(p) => AdversaryAction::ScheduleHonest(p),
            None => view.passive_action(),
        }
    }
}

/// Greedy bias toward `target` in a one-round majority protocol.
///
/// Honest parties speak in ascending order. Once every remaining speaker of
/// the round must send `target` for the majority to reach it, and the
/// remaining budget covers them, each of them is corrupted just before its
/// slot.
#[derive(Debug, Clone)]
pub struct GreedyMajority {
    target: bool,
    seen: usize,
    hits: usize,
}

impl GreedyMajority {
    pub fn new(target: bool) -> Self {
        GreedyMajority {
            target,
            seen: 0,
            hits: 0,
        }
    }

    fn sync(&mut self, view: &View<'_>) {
        let entries = view.transcript.entries();
        if entries.len() < self.seen {
            self.seen = 0;
            self.hits = 0;
        }
        for e in &entries[self.seen..] {
            if e.message.bit(0) == self.target {
                self.hits += 1;
            }
        }
        self.seen = entries.len();
    }
}

impl AdversaryStrategy for GreedyMajority {
    fn begin(&mut self, _seed: RngSeed) {
        self.seen = 0;
        self.hits = 0;
    }

    fn act(&mut self, view: &View<'_>) -> AdversaryAction {
        self.sync(view);
        let bits = view.params.message_bits;
        let target_message = || {
            let mut m = BitString::zeros(bits);
            m.set(0, self.target);
            m
        };
        if let Some(p) = view.pending.iter().find(|&p| view.corrupted.contains(p)) {
            return AdversaryAction::SendAs(p, target_message());
        }
        let threshold = view.params.parties / 2 + 1;
        let need = threshold.saturating_sub(self.hits);
        let remaining = view.pending.len();
        if need > 0 && need == remaining && need <= view.budget_left {
            if let Some(p) = view.pending_honest().next() {
                return AdversaryAction::Corrupt(p);
            }
        }
        view.passive_action()
    }
}

/// Lets honest parties speak in ascending order; at the final slot corrupts
/// the last speaker (budget permitting) and sends the smallest message that
/// puts the output in the target set, or the smallest message if none does.
#[derive(Clone)]
pub struct LastSpeakerForcer {
    spec: Arc<ProtocolSpec>,
    target: TargetSet,
}

impl LastSpeakerForcer {
    pub fn new(spec: ProtocolSpec, target: TargetSet) -> Self {
        LastSpeakerForcer {
            spec: Arc::new(spec),
            target,
        }
    }

    fn forced_message(&self, view: &View<'_>, party: usize) -> BitString {
        let bits = view.params.message_bits;
        assert!(bits <= 24, "forcing over more than 2^24 candidate messages");
        let mut probe = view.transcript.clone();
        let round = view.round();
        for v in 0..1u64 << bits {
            let m = BitString::from_u64(v, bits);
            probe.clone_from(view.transcript);
            probe
                .push(crate::model::TranscriptEntry {
                    round,
                    party,
                    message: m.clone(),
                    status: crate::model::SpeakerStatus::Corrupted,
                })
                .expect("pending slot");
            if self.target.contains(self.spec.output_value(&probe)) {
                return m;
            }
        }
        BitString::zeros(bits)
    }
}

impl std::fmt::Debug for LastSpeakerForcer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LastSpeakerForcer")
            .field("spec", &self.spec.label())
            .field("target", &self.target)
            .finish()
    }
}

impl ViewPolicy for LastSpeakerForcer {
    fn decide(&self, view: &View<'_>) -> AdversaryAction {
        let last_slot = view.transcript.len() + 1 == view.params.slots();
        if !last_slot {
            return match view.pending_honest().next() {
                Some(p) => AdversaryAction::ScheduleHonest(p),
                None => view.passive_action(),
            };
        }
        let p = view
            .pending
            .first()
            .expect("final slot has a pending party");
        if view.corrupted.contains(p) {
            AdversaryAction::SendAs(p, self.forced_message(view, p))
        } else if view.budget_left > 0 {
            AdversaryAction::Corrupt(p)
        } else {
            AdversaryAction::ScheduleHonest(p)
        }
    }
}

/// Corrupts a fixed set before the first slot, then defers to `inner`.
#[derive(Debug, Clone)]
pub struct StaticCorruption<P> {
    parties: PartySet,
    inner: P,
}

impl<P> StaticCorruption<P> {
    pub fn new(parties: PartySet, inner: P) -> Self {
        StaticCorruption { parties, inner }
    }

    pub fn parties(&self) -> &PartySet {
        &self.parties
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: ViewPolicy> ViewPolicy for StaticCorruption<P> {
    fn decide(&self, view: &View<'_>) -> AdversaryAction {
        if let Some(p) = self.parties.iter().find(|&p| !view.corrupted.contains(p)) {
            return AdversaryAction::Corrupt(p);
        }
        match self.inner.decide(view) {
            AdversaryAction::Corrupt(_) => view.passive_action(),
            other => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::Deterministic;
    use crate::engine::{run_with_adversary, run_with_source, GridSource};
    use crate::model::SpeakerStatus;
    use crate::protocols::{make_majority_coin, make_xor_coin};

    fn grid(bits: &[&str]) -> GridSource {
        GridSource(bits.iter().map(|b| BitString::parse(b).unwrap()).collect())
    }

    #[test]
    fn greedy_corrupts_pivotal_speaker() {
        let spec = make_majority_coin(3).unwrap();
        let mut g = GreedyMajority::new(true);
        let run = run_with_source(&spec, &mut g, 1, &grid(&["1", "0", "0"]), RngSeed(0)).unwrap();
        assert_eq!(run.output.to_string(), "1");
        assert_eq!(run.corrupted.to_vec(), vec![2]);
        assert_eq!(run.transcript.entries()[2].status, SpeakerStatus::Corrupted);

        let run = run_with_source(&spec, &mut g, 1, &grid(&["1", "1", "0"]), RngSeed(0)).unwrap();
        assert_eq!(run.output.to_string(), "1");
        assert!(run.corrupted.is_empty());

        let run = run_with_source(&spec, &mut g, 1, &grid(&["0", "0", "1"]), RngSeed(0)).unwrap();
        assert_eq!(run.output.to_string(), "0");
        assert!(run.corrupted.is_empty());
    }

    #[test]
    fn forcer_fixes_xor() {
        let spec = make_xor_coin(2, 1, 1).unwrap();
        let target = TargetSet::new(1, [0]).unwrap();
        let mut f = Deterministic(LastSpeakerForcer::new(spec.clone(), target));
        for seed in 0..32 {
            let run = run_with_adversary(&spec, &mut f, 1, RngSeed(seed)).unwrap();
            assert_eq!(run.output.to_string(), "0");
            assert_eq!(run.corrupted.to_vec(), vec![1]);
        }
    }

    #[test]
    fn forcer_without_budget_is_passive() {
        let spec = make_xor_coin(2, 1, 1).unwrap();
        let mut f = Deterministic(LastSpeakerForcer::new(
            spec.clone(),
            TargetSet::new(1, [0]).unwrap(),
        ));
        let run = run_with_source(&spec, &mut f, 0, &grid(&["1", "0"]), RngSeed(0)).unwrap();
        assert_eq!(run.output.to_string(), "1");
    }

    #[test]
    fn static_wrapper_corrupts_up_front() {
        let spec = make_xor_coin(3, 1, 1).unwrap();
        let s = StaticCorruption::new([0, 2].into_iter().collect(), Passive);
        let run = run_with_adversary(&spec, &mut Deterministic(s), 2, RngSeed(4)).unwrap();
        assert_eq!(run.corrupted.to_vec(), vec![0, 2]);
        // Passive fills corrupted slots with zeros, after the honest party.
        assert_eq!(run.transcript.entries()[0].party, 1);
        assert_eq!(run.transcript.entries()[1].message.to_string(), "0");
    }

    #[test]
    fn schedule_order_reorders_honest_parties() {
        let spec = make_xor_coin(3, 2, 1).unwrap();
        let run = run_with_adversary(
            &spec,
            &mut Deterministic(ScheduleOrder(vec![2, 0])),
            0,
            RngSeed(1),
        )
        .unwrap();
        let order: Vec<usize> = run.transcript.entries().iter().map(|e| e.party).collect();
        assert_eq!(order, vec![2, 0, 1, 2, 0, 1]);
    }
}
