//! Deterministic execution engine.
//!
//! A run fills `d·n` message slots in order. Before each slot the adversary
//! is consulted until it fills the slot; honest messages are read from a
//! [`HonestSource`], which is either a seeded stream keyed by
//! `(seed, round, party)` or an explicit grid used for exhaustive
//! enumeration.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_bigint::BigUint;
use rand::SeedableRng;
use serde::Serialize;

use crate::adversary::{AdversaryAction, AdversaryStrategy, Deterministic, Passive, View};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::model::{ProtocolSpec, SpeakerStatus, Transcript, TranscriptEntry};
use crate::party::PartySet;
use crate::rng::{tag, RngSeed};
use crate::stats::Distribution;

/// Supplies the message an honest party sends in a given slot.
pub trait HonestSource {
    fn message(&self, spec: &ProtocolSpec, round: usize, party: usize) -> BitString;
}

/// Lazily drawn honest randomness keyed by `(seed, round, party)`.
#[derive(Debug, Clone, Copy)]
pub struct SeededSource(pub RngSeed);

impl HonestSource for SeededSource {
    fn message(&self, spec: &ProtocolSpec, round: usize, party: usize) -> BitString {
        spec.sample_message(&mut self.0.honest_stream(round, party))
    }
}

/// Explicit honest messages indexed by `round * n + party`.
#[derive(Debug, Clone)]
pub struct GridSource(pub Vec<BitString>);

impl HonestSource for GridSource {
    fn message(&self, spec: &ProtocolSpec, round: usize, party: usize) -> BitString {
        self.0[round * spec.params().parties + party].clone()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Execution {
    pub transcript: Transcript,
    pub output: BitString,
    pub corrupted: PartySet,
}

/// An in-progress run that can be advanced slot by slot or resumed from a
/// given prefix.
pub struct Simulation<'s> {
    spec: &'s ProtocolSpec,
    budget: usize,
    transcript: Transcript,
    corrupted: PartySet,
    pending: PartySet,
}

impl<'s> Simulation<'s> {
    pub fn new(spec: &'s ProtocolSpec, budget: usize) -> Result<Self> {
        let p = spec.params();
        p.check()?;
        if budget > p.parties {
            return Err(Error::InvalidParams(format!(
                "budget t={budget} exceeds n={}",
                p.parties
            )));
        }
        Ok(Simulation {
            spec,
            budget,
            transcript: Transcript::new(p.parties, p.rounds),
            corrupted: PartySet::new(),
            pending: PartySet::full(p.parties),
        })
    }

    /// Continue from an existing prefix with the given corrupted set.
    pub fn resume(
        spec: &'s ProtocolSpec,
        budget: usize,
        transcript: Transcript,
        corrupted: PartySet,
    ) -> Result<Self> {
        let mut sim = Simulation::new(spec, budget)?;
        if transcript.parties() != spec.params().parties
            || transcript.rounds() != spec.params().rounds
        {
            return Err(Error::ShapeMismatch(
                "prefix shape differs from protocol".into(),
            ));
        }
        if corrupted.len() > budget {
            return Err(Error::BudgetExceeded { budget });
        }
        sim.pending = transcript.pending();
        sim.transcript = transcript;
        sim.corrupted = corrupted;
        Ok(sim)
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn corrupted(&self) -> &PartySet {
        &self.corrupted
    }

    pub fn is_complete(&self) -> bool {
        self.transcript.is_complete()
    }

    /// Fill the next slot.
    pub fn step(
        &mut self,
        strategy: &mut dyn AdversaryStrategy,
        source: &dyn HonestSource,
    ) -> Result<()> {
        let params = *self.spec.params();
        let round = self
            .transcript
            .current_round()
            .ok_or_else(|| Error::IllegalAction("run already complete".into()))?;
        // Every corruption must name a fresh party, so a slot takes at most n+1 actions.
        for _ in 0..=params.parties {
            let view = View {
                params: &params,
                transcript: &self.transcript,
                corrupted: &self.corrupted,
                budget_left: self.budget - self.corrupted.len(),
                pending: &self.pending,
            };
            let (party, message, status) = match strategy.act(&view) {
                AdversaryAction::Corrupt(p) => {
                    if p >= params.parties || self.corrupted.contains(p) {
                        return Err(Error::IllegalAction(format!("cannot corrupt P{}", p + 1)));
                    }
                    if self.corrupted.len() >= self.budget {
                        return Err(Error::BudgetExceeded {
                            budget: self.budget,
                        });
                    }
                    self.corrupted.insert(p);
                    continue;
                }
                AdversaryAction::ScheduleHonest(p) => {
                    self.check_pending(round, p)?;
                    if self.corrupted.contains(p) {
                        return Err(Error::IllegalAction(format!(
                            "P{} is corrupted and cannot be scheduled as honest",
                            p + 1
                        )));
                    }
                    (
                        p,
                        source.message(self.spec, round, p),
                        SpeakerStatus::Honest,
                    )
                }
                AdversaryAction::SendAs(p, m) => {
                    self.check_pending(round, p)?;
                    if !self.corrupted.contains(p) {
                        return Err(Error::IllegalAction(format!("P{} is not corrupted", p + 1)));
                    }
                    if m.len() != params.message_bits {
                        return Err(Error::IllegalAction(format!(
                            "message of {} bits, expected {}",
                            m.len(),
                            params.message_bits
                        )));
                    }
                    (p, m, SpeakerStatus::Corrupted)
                }
            };
            self.transcript.push(TranscriptEntry {
                round,
                party,
                message,
                status,
            })?;
            self.pending.remove(party);
            if self.pending.is_empty() && !self.transcript.is_complete() {
                self.pending = PartySet::full(params.parties);
            }
            return Ok(());
        }
        Err(Error::IllegalAction(
            "adversary did not fill the slot".into(),
        ))
    }

    /// Advance until `slots` slots are filled in total.
    pub fn run_until(
        &mut self,
        slots: usize,
        strategy: &mut dyn AdversaryStrategy,
        source: &dyn HonestSource,
    ) -> Result<()> {
        while self.transcript.len() < slots.min(self.spec.params().slots()) {
            self.step(strategy, source)?;
        }
        Ok(())
    }

    pub fn finish(self) -> Execution {
        assert!(
            self.transcript.is_complete(),
            "finish called on an incomplete run"
        );
        let output = self.spec.output(&self.transcript);
        Execution {
            transcript: self.transcript,
            output,
            corrupted: self.corrupted,
        }
    }

    fn check_pending(&self, round: usize, party: usize) -> Result<()> {
        if party >= self.spec.params().parties {
            return Err(Error::IllegalAction(format!("no party P{}", party + 1)));
        }
        if !self.pending.contains(party) {
            return Err(Error::ScheduleViolation { round, party });
        }
        Ok(())
    }
}

/// Honest run in default order (ascending party index within each round).
pub fn run_honest(spec: &ProtocolSpec, seed: RngSeed) -> Execution {
    run_with_adversary(spec, &mut Deterministic(Passive), 0, seed)
        .expect("passive run of a valid spec")
}

pub fn run_with_adversary(
    spec: &ProtocolSpec,
    strategy: &mut dyn AdversaryStrategy,
    budget: usize,
    seed: RngSeed,
) -> Result<Execution> {
    run_with_source(
        spec,
        strategy,
        budget,
        &SeededSource(seed),
        seed.child(tag::ADVERSARY),
    )
}

pub fn run_with_source(
    spec: &ProtocolSpec,
    strategy: &mut dyn AdversaryStrategy,
    budget: usize,
    source: &dyn HonestSource,
    adversary_seed: RngSeed,
) -> Result<Execution> {
    let mut sim = Simulation::new(spec, budget)?;
    strategy.begin(adversary_seed);
    sim.run_until(spec.params().slots(), strategy, source)?;
    Ok(sim.finish())
}

/// Calls `visit` with every honest grid (indexed by `round * n + party`) in
/// odometer order. Refuses when the count exceeds `cap`.
pub fn for_each_honest_grid<F>(spec: &ProtocolSpec, cap: u128, mut visit: F) -> Result<()>
where
    F: FnMut(&[BitString]),
{
    let states = spec.honest_state_count();
    if states > cap as f64 {
        return Err(Error::cap("honest randomness enumeration", states, cap));
    }
    let messages = spec.message_space().enumerate(spec.params().message_bits);
    let slots = spec.params().slots();
    let mut digits = vec![0usize; slots];
    let mut grid: Vec<BitString> = vec![messages[0].clone(); slots];
    loop {
        visit(&grid);
        let mut i = slots;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < messages.len() {
                grid[i] = messages[digits[i]].clone();
                break;
            }
            digits[i] = 0;
            grid[i] = messages[0].clone();
        }
    }
}

/// Exact honest output distribution by iterating all honest randomness.
pub fn enumerate_honest_outputs(spec: &ProtocolSpec, cap: u128) -> Result<Distribution> {
    let p = *spec.params();
    p.check()?;
    let mut counts: BTreeMap<u64, BigUint> = BTreeMap::new();
    let mut total = BigUint::from(0u32);
    for_each_honest_grid(spec, cap, |grid| {
        let t = Transcript::from_grid(p.parties, p.rounds, grid.to_vec());
        *counts.entry(spec.output_value(&t)).or_default() += 1u32;
        total += 1u32;
    })?;
    Ok(Distribution::exact_from_counts(
        p.output_bits as u32,
        counts,
        total,
    ))
}

const PROBE_TRANSCRIPTS: usize = 16;

/// Checks parameter bounds, output width and determinism on random probes.
/// Returns every problem found; never panics.
pub fn validate_protocol(spec: &ProtocolSpec) -> std::result::Result<(), Vec<String>> {
    let p = *spec.params();
    let mut problems = p.problems();
    if !problems.is_empty() {
        return Err(problems);
    }
    if let crate::model::MessageSpace::Permutations { entry_bits } = spec.message_space() {
        if (1usize << entry_bits) * entry_bits != p.message_bits {
            problems.push("permutation message width mismatch".to_string());
            return Err(problems);
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(RngSeed(0).child(tag::PROBE).0);
    for probe in 0..PROBE_TRANSCRIPTS {
        let grid: Vec<BitString> = (0..p.slots())
            .map(|_| spec.sample_message(&mut rng))
            .collect();
        let t = Transcript::from_grid(p.parties, p.rounds, grid);
        let first = catch_unwind(AssertUnwindSafe(|| spec.output(&t)));
        let second = catch_unwind(AssertUnwindSafe(|| spec.output(&t)));
        match (first, second) {
            (Ok(a), Ok(b)) => {
                if a.len() != p.output_bits {
                    problems.push(format!(
                        "output width mismatch: probe {probe} produced {} bits, expected {}",
                        a.len(),
                        p.output_bits
                    ));
                    break;
                }
                if a != b {
                    problems.push(format!("output map is not deterministic on probe {probe}"));
                    break;
                }
            }
            _ => {
                problems.push(format!("output map panicked on probe {probe}"));
                break;
            }
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems)
    }
}
