//! Exact and sampled evaluation of the reduction run, the ideal run and the
//! hybrid experiments between them.
//!
//! The hybrid at level `k` runs the reduction adversary for the first `k`
//! slots, then draws `H` uniformly from the consistent set, maps the prefix
//! into `Π_H` and finishes as `Π_H` against `A^H`, lifting the result back.
//! Level `d·n` is the reduction run itself and level `0` is the ideal run.
//!
//! Exact evaluation enumerates honest messages and every random choice of the
//! adversary. Branches whose consistent set becomes empty complete passively
//! in `Π` at every level, exactly as a halted reduction run does, and their
//! mass is reported separately.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::Serialize;

use super::compressed::{compressed_protocol, lift, map_transcript};
use super::reduction::{Family, ReductionAdversary};
use crate::adversary::{AdversaryAction, AdversaryStrategy, Deterministic, TargetSet, View};
use crate::bits::BitString;
use crate::engine::{for_each_honest_grid, run_with_source, GridSource, SeededSource, Simulation};
use crate::error::{Error, Result};
use crate::model::{ProtocolSpec, SpeakerStatus, Transcript, TranscriptEntry};
use crate::party::PartySet;
use crate::rng::{tag, RngSeed};
use crate::stats::ratio_to_f64;

/// Ordered `(party, message)` pairs of a complete long transcript.
pub type TranscriptKey = Vec<(usize, BitString)>;

/// Exact distribution over complete long transcripts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TranscriptDistribution {
    pub masses: BTreeMap<TranscriptKey, BigRational>,
    /// The part of `masses` coming from halted runs.
    pub halted: BTreeMap<TranscriptKey, BigRational>,
}

impl TranscriptDistribution {
    fn add(&mut self, key: TranscriptKey, weight: &BigRational, halted: bool) {
        if halted {
            *self
                .halted
                .entry(key.clone())
                .or_insert_with(BigRational::zero) += weight;
        }
        *self.masses.entry(key).or_insert_with(BigRational::zero) += weight;
    }

    pub fn total(&self) -> BigRational {
        self.masses.values().fold(BigRational::zero(), |a, b| a + b)
    }

    pub fn halted_mass(&self) -> BigRational {
        self.halted.values().fold(BigRational::zero(), |a, b| a + b)
    }

    /// Exact statistical distance, halted or not.
    pub fn distance(&self, other: &TranscriptDistribution) -> BigRational {
        let zero = BigRational::zero();
        let mut sum = BigRational::zero();
        for (k, p) in &self.masses {
            sum += (p - other.masses.get(k).unwrap_or(&zero)).abs();
        }
        for (k, q) in &other.masses {
            if !self.masses.contains_key(k) {
                sum += q;
            }
        }
        sum / BigRational::from_integer(BigInt::from(2))
    }

    /// `(Pr[out ∈ M], Pr[out ∈ M | not halted])`; the second is `None` when
    /// every run halts.
    pub fn target_mass(
        &self,
        base: &ProtocolSpec,
        target: &TargetSet,
    ) -> (BigRational, Option<BigRational>) {
        let hit = |key: &TranscriptKey| {
            target.contains(base.output_value(&transcript_from_key(base, key)))
        };
        let sum = |m: &BTreeMap<TranscriptKey, BigRational>| {
            m.iter()
                .filter(|(k, _)| hit(k))
                .fold(BigRational::zero(), |a, (_, p)| a + p)
        };
        let all = sum(&self.masses);
        let halted = sum(&self.halted);
        let live = BigRational::one() - self.halted_mass();
        let conditional = (!live.is_zero()).then(|| (&all - halted) / live);
        (all, conditional)
    }
}

/// Rebuilds a transcript from its key; rounds follow from the positions.
pub fn transcript_from_key(base: &ProtocolSpec, key: &TranscriptKey) -> Transcript {
    let p = base.params();
    let mut t = Transcript::new(p.parties, p.rounds);
    for (i, (party, message)) in key.iter().enumerate() {
        t.push(TranscriptEntry {
            round: i / p.parties,
            party: *party,
            message: message.clone(),
            status: SpeakerStatus::Honest,
        })
        .expect("key of a valid transcript");
    }
    t
}

fn ratio(a: usize, b: usize) -> BigRational {
    BigRational::new(BigInt::from(a), BigInt::from(b))
}

#[derive(Clone)]
struct State {
    prefix: Transcript,
    corrupted: PartySet,
    set: Vec<usize>,
}

/// Per honest slot: the size of the consistent set, the size of the plan
/// group, and for each honest message the expected size afterwards.
struct HonestEvent {
    before: usize,
    expected_after: Vec<BigRational>,
}

struct Explorer<'a> {
    family: &'a Family,
    budget: usize,
    messages: Vec<BitString>,
    nodes: u128,
    cap: u128,
    events: Option<Vec<HonestEvent>>,
}

impl<'a> Explorer<'a> {
    fn new(family: &'a Family, budget: usize, cap: u128) -> Result<Self> {
        let base = family.base();
        let space = base.message_space();
        let size = space.size(base.params().message_bits);
        if size > cap as f64 {
            return Err(Error::cap("honest messages per slot", size, cap));
        }
        Ok(Explorer {
            family,
            budget,
            messages: space.enumerate(base.params().message_bits),
            nodes: 0,
            cap,
            events: None,
        })
    }

    fn tick(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.cap {
            return Err(Error::cap("reduction states", self.nodes as f64, self.cap));
        }
        Ok(())
    }

    /// Runs the reduction from `state` until `stop` slots are filled, then
    /// calls `visit(state, weight, halted)`. Halted branches are completed
    /// passively before being visited.
    fn explore(
        &mut self,
        state: State,
        weight: BigRational,
        stop: usize,
        visit: &mut dyn FnMut(&mut Self, State, BigRational, bool) -> Result<()>,
    ) -> Result<()> {
        self.tick()?;
        if state.set.is_empty() {
            return self.passive(state, weight, visit);
        }
        if state.prefix.len() >= stop {
            return visit(self, state, weight, false);
        }
        let family = self.family;
        let n = family.base().params().parties;
        let round = state.prefix.len() / n;
        let mut groups: BTreeMap<Vec<AdversaryAction>, Vec<usize>> = BTreeMap::new();
        for &k in &state.set {
            let plan = self
                .family
                .plan(k, &state.prefix, &state.corrupted, self.budget)
                .expect("consistent matrices map the prefix");
            groups.entry(plan).or_default().push(k);
        }
        let pending = state.prefix.pending();
        for (plan, group) in groups {
            let w_group = &weight * ratio(group.len(), state.set.len());
            let mut corrupted = state.corrupted.clone();
            for a in &plan[..plan.len() - 1] {
                if let AdversaryAction::Corrupt(p) = a {
                    corrupted.insert(*p);
                }
            }
            match plan.last().expect("plans are nonempty") {
                AdversaryAction::SendAs(u, r) if pending.contains(*u) && corrupted.contains(*u) => {
                    let idx = r.to_u64().expect("ell ≤ 24") as usize;
                    let mut by_row: BTreeMap<&[u64], Vec<usize>> = BTreeMap::new();
                    for &k in &group {
                        by_row
                            .entry(family.members()[k].matrix.row(round, *u))
                            .or_default()
                            .push(k);
                    }
                    let l = family.base().params().message_bits;
                    for (row, class) in by_row {
                        let mut prefix = state.prefix.clone();
                        let message = BitString::from_u64(row[idx], l);
                        prefix.push(TranscriptEntry {
                            round,
                            party: *u,
                            message,
                            status: SpeakerStatus::Corrupted,
                        })?;
                        let w = &w_group * ratio(class.len(), group.len());
                        self.explore(
                            State {
                                prefix,
                                corrupted: corrupted.clone(),
                                set: class,
                            },
                            w,
                            stop,
                            visit,
                        )?;
                    }
                }
                AdversaryAction::ScheduleHonest(u)
                    if pending.contains(*u) && !corrupted.contains(*u) =>
                {
                    let w_message = &w_group * ratio(1, self.messages.len());
                    let mut expected_after = Vec::new();
                    for message in self.messages.clone() {
                        let value = message.to_u64().expect("L ≤ 64");
                        let mut by_row: BTreeMap<&[u64], Vec<usize>> = BTreeMap::new();
                        for &k in &group {
                            let row = family.members()[k].matrix.row(round, *u);
                            if row.contains(&value) {
                                by_row.entry(row).or_default().push(k);
                            }
                        }
                        let candidates: usize = by_row.values().map(Vec::len).sum();
                        if self.events.is_some() {
                            let squares: usize = by_row.values().map(|c| c.len() * c.len()).sum();
                            expected_after.push(if candidates == 0 {
                                BigRational::zero()
                            } else {
                                ratio(squares, candidates)
                            });
                        }
                        let mut prefix = state.prefix.clone();
                        prefix.push(TranscriptEntry {
                            round,
                            party: *u,
                            message,
                            status: SpeakerStatus::Honest,
                        })?;
                        if candidates == 0 {
                            let next = State {
                                prefix,
                                corrupted: corrupted.clone(),
                                set: Vec::new(),
                            };
                            self.explore(next, w_message.clone(), stop, visit)?;
                            continue;
                        }
                        for class in by_row.into_values() {
                            let w = &w_message * ratio(class.len(), candidates);
                            let next = State {
                                prefix: prefix.clone(),
                                corrupted: corrupted.clone(),
                                set: class,
                            };
                            self.explore(next, w, stop, visit)?;
                        }
                    }
                    if let Some(events) = &mut self.events {
                        events.push(HonestEvent {
                            before: state.set.len(),
                            expected_after,
                        });
                    }
                }
                other => {
                    return Err(Error::IllegalAction(format!(
                        "strategy for Π_H chose {other}"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Completes a halted run with the passive adversary.
    fn passive(
        &mut self,
        state: State,
        weight: BigRational,
        visit: &mut dyn FnMut(&mut Self, State, BigRational, bool) -> Result<()>,
    ) -> Result<()> {
        if state.prefix.is_complete() {
            return visit(self, state, weight, true);
        }
        self.tick()?;
        let params = *self.family.base().params();
        let pending = state.prefix.pending();
        let view = View {
            params: &params,
            transcript: &state.prefix,
            corrupted: &state.corrupted,
            budget_left: self.budget - state.corrupted.len(),
            pending: &pending,
        };
        let round = view.round();
        match view.passive_action() {
            AdversaryAction::ScheduleHonest(u) => {
                let w = &weight * ratio(1, self.messages.len());
                for message in self.messages.clone() {
                    let mut prefix = state.prefix.clone();
                    prefix.push(TranscriptEntry {
                        round,
                        party: u,
                        message,
                        status: SpeakerStatus::Honest,
                    })?;
                    self.passive(
                        State {
                            prefix,
                            ..state.clone()
                        },
                        w.clone(),
                        visit,
                    )?;
                }
                Ok(())
            }
            AdversaryAction::SendAs(u, message) => {
                let mut prefix = state.prefix.clone();
                prefix.push(TranscriptEntry {
                    round,
                    party: u,
                    message,
                    status: SpeakerStatus::Corrupted,
                })?;
                self.passive(State { prefix, ..state }, weight, visit)
            }
            AdversaryAction::Corrupt(_) => unreachable!("the passive action fills the slot"),
        }
    }
}

fn start(family: &Family) -> State {
    let p = family.base().params();
    State {
        prefix: Transcript::new(p.parties, p.rounds),
        corrupted: PartySet::new(),
        set: (0..family.len()).collect(),
    }
}

/// Exact distribution of the long transcript of `Π` against the reduction
/// adversary, over honest randomness and the adversary's draws.
pub fn reduction_distribution(
    family: &Family,
    budget: usize,
    cap: u128,
) -> Result<TranscriptDistribution> {
    hybrid_distribution(family, budget, family.base().params().slots(), cap)
}

/// Exact distribution of the ideal run: `H` uniform from the family, `Π_H`
/// against `A^H`, lifted through `H`.
pub fn ideal_distribution(
    family: &Family,
    budget: usize,
    cap: u128,
) -> Result<TranscriptDistribution> {
    let mut out = TranscriptDistribution::default();
    for member in family.members() {
        let short = compressed_protocol(family.base(), &member.matrix)?;
        let grids = num_traits::pow(
            BigInt::from(2),
            short.params().message_bits * short.params().slots(),
        );
        let weight = BigRational::new(BigInt::one(), BigInt::from(family.len()) * grids);
        let mut failure = None;
        for_each_honest_grid(&short, cap, |grid| {
            if failure.is_some() {
                return;
            }
            let mut adversary = Deterministic(&*member.strategy);
            match run_with_source(
                &short,
                &mut adversary,
                budget,
                &GridSource(grid.to_vec()),
                RngSeed(0),
            ) {
                Ok(run) => out.add(lift(&member.matrix, &run.transcript).key(), &weight, false),
                Err(e) => failure = Some(e),
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
    }
    Ok(out)
}

/// Exact distribution of the hybrid experiment at `level` slots.
pub fn hybrid_distribution(
    family: &Family,
    budget: usize,
    level: usize,
    cap: u128,
) -> Result<TranscriptDistribution> {
    let params = *family.base().params();
    if level > params.slots() {
        return Err(Error::InvalidParams(format!(
            "level {level} exceeds d·n = {}",
            params.slots()
        )));
    }
    let shorts: Vec<ProtocolSpec> = family
        .members()
        .iter()
        .map(|m| compressed_protocol(family.base(), &m.matrix))
        .collect::<Result<_>>()?;
    let mut explorer = Explorer::new(family, budget, cap)?;
    let mut out = TranscriptDistribution::default();
    let mut visit =
        |ex: &mut Explorer<'_>, state: State, weight: BigRational, halted: bool| -> Result<()> {
            if halted {
                out.add(state.prefix.key(), &weight, true);
                return Ok(());
            }
            let share = &weight * ratio(1, state.set.len());
            for &k in &state.set {
                let member = &ex.family.members()[k];
                let short_prefix = map_transcript(&member.matrix, &state.prefix)
                    .expect("consistent matrices map the prefix");
                complete_short(
                    &shorts[k],
                    &member.matrix,
                    &*member.strategy,
                    budget,
                    short_prefix,
                    &state.corrupted,
                    &share,
                    ex,
                    &mut out,
                )?;
            }
            Ok(())
        };
    explorer.explore(start(family), BigRational::one(), level, &mut visit)?;
    Ok(out)
}

/// Finishes `Π_H` from a short prefix over every assignment of the
/// remaining honest short messages and adds the lifted transcripts.
#[allow(clippy::too_many_arguments)]
fn complete_short(
    short: &ProtocolSpec,
    h: &super::matrix::MatrixH,
    policy: &dyn crate::adversary::ViewPolicy,
    budget: usize,
    prefix: Transcript,
    corrupted: &PartySet,
    weight: &BigRational,
    ex: &mut Explorer<'_>,
    out: &mut TranscriptDistribution,
) -> Result<()> {
    let p = *short.params();
    let open: Vec<usize> = (0..p.slots())
        .filter(|&s| !prefix.has_spoken(s / p.parties, s % p.parties))
        .collect();
    let n_short = 1u64 << p.message_bits;
    let count = (n_short as f64).powi(open.len() as i32);
    if count > ex.cap as f64 {
        return Err(Error::cap("short completions", count, ex.cap));
    }
    let w = weight / BigRational::from_integer(BigInt::from(count as u64));
    for code in 0..count as u64 {
        ex.tick()?;
        let mut grid = vec![BitString::zeros(p.message_bits); p.slots()];
        let mut c = code;
        for &s in &open {
            grid[s] = BitString::from_u64(c % n_short, p.message_bits);
            c /= n_short;
        }
        let mut sim = Simulation::resume(short, budget, prefix.clone(), corrupted.clone())?;
        sim.run_until(p.slots(), &mut Deterministic(policy), &GridSource(grid))?;
        out.add(lift(h, sim.transcript()).key(), &w, false);
    }
    Ok(())
}

/// One sampled hybrid experiment.
#[derive(Debug, Clone, Serialize)]
pub struct HybridSample {
    pub transcript: Transcript,
    pub output: BitString,
    /// Index into the family of the matrix drawn after the prefix.
    pub matrix: usize,
}

/// Samples the hybrid at `level`: the reduction (honest randomness from
/// `seed`, adversary from `seed.child(ADVERSARY)`) fills `level` slots, then
/// `H` and the remaining short messages are drawn from `seed.child(HYBRID)`.
pub fn hybrid_experiment(
    family: &std::sync::Arc<Family>,
    budget: usize,
    level: usize,
    seed: RngSeed,
) -> Result<HybridSample> {
    let base = family.base();
    let params = *base.params();
    if level > params.slots() {
        return Err(Error::InvalidParams(format!(
            "level {level} exceeds d·n = {}",
            params.slots()
        )));
    }
    let mut adversary = ReductionAdversary::new(family.clone(), budget);
    adversary.begin(seed.child(tag::ADVERSARY));
    let mut sim = Simulation::new(base, budget)?;
    sim.run_until(level, &mut adversary, &SeededSource(seed))?;
    adversary.observe(sim.transcript());
    if adversary.halted() {
        return Err(Error::EmptyConsistentSet);
    }
    let hybrid = seed.child(tag::HYBRID);
    let set = adversary.consistent();
    let k = set[hybrid.child(tag::MATRIX).rng().gen_range(0..set.len())];
    let member = &family.members()[k];
    let short = compressed_protocol(base, &member.matrix)?;
    let prefix = map_transcript(&member.matrix, sim.transcript())
        .expect("consistent matrices map the prefix");
    let mut rest = Simulation::resume(&short, budget, prefix, sim.corrupted().clone())?;
    rest.run_until(
        params.slots(),
        &mut Deterministic(&*member.strategy),
        &SeededSource(hybrid),
    )?;
    let transcript = lift(&member.matrix, rest.transcript());
    let output = base.output(&transcript);
    Ok(HybridSample {
        transcript,
        output,
        matrix: k,
    })
}

/// Exact distributions at every level with their pairwise distances.
#[derive(Debug, Clone, Serialize)]
pub struct HybridChainReport {
    pub levels: usize,
    /// `distances[a][b]` = SD between levels `a` and `b`.
    pub distances: Vec<Vec<f64>>,
    /// SD between the reduction run and the ideal run.
    pub end_to_end: f64,
    pub reduction_matches_top: bool,
    pub ideal_matches_bottom: bool,
    /// Halted mass at each level.
    pub halted: Vec<f64>,
    /// The largest distance between two levels, minus `end_to_end`.
    pub excess: f64,
}

pub fn hybrid_chain(family: &Family, budget: usize, cap: u128) -> Result<HybridChainReport> {
    let slots = family.base().params().slots();
    let dists: Vec<TranscriptDistribution> = (0..=slots)
        .map(|k| hybrid_distribution(family, budget, k, cap))
        .collect::<Result<_>>()?;
    let reduction = reduction_distribution(family, budget, cap)?;
    let ideal = ideal_distribution(family, budget, cap)?;
    let end = reduction.distance(&ideal);
    let distances: Vec<Vec<f64>> = dists
        .iter()
        .map(|a| dists.iter().map(|b| ratio_to_f64(&a.distance(b))).collect())
        .collect();
    let end_to_end = ratio_to_f64(&end);
    let max = distances.iter().flatten().fold(0.0f64, |m, &x| m.max(x));
    Ok(HybridChainReport {
        levels: slots + 1,
        reduction_matches_top: reduction == dists[slots],
        ideal_matches_bottom: ideal == dists[0],
        halted: dists
            .iter()
            .map(|d| ratio_to_f64(&d.halted_mass()))
            .collect(),
        distances,
        end_to_end,
        excess: max - end_to_end,
    })
}

/// Shrinkage of the consistent set at honest slots, for one `ε`.
#[derive(Debug, Clone, Serialize)]
pub struct ShrinkageLevel {
    pub epsilon: f64,
    /// `ε / (2^{N·L} · 4nN)`.
    pub threshold: f64,
    /// Smallest fraction, over honest slots reached, of honest messages after
    /// which the expected ratio `|ℋ_{i,j}| / |ℋ_{i,j−1}|` is at least the threshold.
    pub worst_fraction: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShrinkageReport {
    pub honest_slots: usize,
    pub levels: Vec<ShrinkageLevel>,
}

/// Checks the per-slot shrinkage bound by enumerating every reachable honest
/// slot of the reduction run.
pub fn shrinkage_check(
    family: &Family,
    budget: usize,
    epsilons: &[f64],
    cap: u128,
) -> Result<ShrinkageReport> {
    let mut explorer = Explorer::new(family, budget, cap)?;
    explorer.events = Some(Vec::new());
    let slots = family.base().params().slots();
    explorer.explore(
        start(family),
        BigRational::one(),
        slots,
        &mut |_, _, _, _| Ok(()),
    )?;
    let events = explorer.events.take().unwrap_or_default();
    let cp = family.members()[0].matrix.params();
    let (n, big_n, l) = (
        cp.base.parties as f64,
        cp.row_len() as f64,
        cp.base.message_bits as f64,
    );
    let levels = epsilons
        .iter()
        .map(|&epsilon| {
            let threshold = epsilon / ((big_n * l).exp2() * 4.0 * n * big_n);
            let worst_fraction = events
                .iter()
                .map(|e| {
                    let ok = e
                        .expected_after
                        .iter()
                        .filter(|x| ratio_to_f64(x) / e.before as f64 >= threshold)
                        .count();
                    ok as f64 / e.expected_after.len() as f64
                })
                .fold(1.0f64, f64::min);
            ShrinkageLevel {
                epsilon,
                threshold,
                worst_fraction,
                holds: worst_fraction >= 1.0 - epsilon,
            }
        })
        .collect();
    Ok(ShrinkageReport {
        honest_slots: events.len(),
        levels,
    })
}
