//! The matrix-tracking reduction adversary for the long protocol `Π`.
//!
//! It is built from a family of matrices `H`, each paired with a
//! deterministic adversary `A^H` for `Π_H`. Before every slot it draws `H*`
//! uniformly from the matrices still consistent with the run, asks `A^{H*}`
//! what to do on the mapped transcript and mirrors the answer in `Π`:
//! corruptions are copied, a short message `r*` becomes `H*(i, u, r*)`, and an
//! honest message `R*` chosen by `Π`'s randomness is absorbed by redrawing a
//! matrix that could have produced it. The consistent set only ever shrinks.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::compressed::{compressed_protocol, map_h, map_transcript};
use super::matrix::MatrixH;
use crate::adversary::{AdversaryAction, AdversaryStrategy, StaticCorruption, View, ViewPolicy};
use crate::engine::{Execution, SeededSource, Simulation};
use crate::error::{Error, Result};
use crate::model::{ProtocolParams, ProtocolSpec, Transcript};
use crate::party::PartySet;
use crate::rng::{tag, RngSeed};

/// A matrix together with the adversary attacking `Π_H`.
#[derive(Clone)]
pub struct FamilyMember {
    pub matrix: MatrixH,
    pub strategy: Arc<dyn ViewPolicy>,
}

impl FamilyMember {
    pub fn new(matrix: MatrixH, strategy: impl ViewPolicy + 'static) -> Self {
        FamilyMember {
            matrix,
            strategy: Arc::new(strategy),
        }
    }
}

impl std::fmt::Debug for FamilyMember {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FamilyMember")
            .field("matrix", &self.matrix)
            .finish_non_exhaustive()
    }
}

/// The base protocol and the explicit family standing in for `ℋ_1`.
#[derive(Clone, Debug)]
pub struct Family {
    base: ProtocolSpec,
    members: Vec<FamilyMember>,
}

impl Family {
    pub fn new(base: ProtocolSpec, members: Vec<FamilyMember>) -> Result<Self> {
        let first = members.first().ok_or(Error::EmptyFamily)?;
        let cp = *first.matrix.params();
        if cp.base != *base.params() {
            return Err(Error::ShapeMismatch(format!(
                "matrices built for {:?}, protocol has {:?}",
                cp.base,
                base.params()
            )));
        }
        if members.iter().any(|m| *m.matrix.params() != cp) {
            return Err(Error::ShapeMismatch(
                "family members differ in shape".into(),
            ));
        }
        Ok(Family { base, members })
    }

    /// Pairs every matrix with the strategy produced by `make` for its `Π_H`.
    pub fn build<P, F>(
        base: &ProtocolSpec,
        matrices: impl IntoIterator<Item = MatrixH>,
        make: F,
    ) -> Result<Self>
    where
        P: ViewPolicy + 'static,
        F: Fn(ProtocolSpec) -> P,
    {
        let members = matrices
            .into_iter()
            .map(|h| {
                Ok(FamilyMember::new(
                    h.clone(),
                    make(compressed_protocol(base, &h)?),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Family::new(base.clone(), members)
    }

    pub fn base(&self) -> &ProtocolSpec {
        &self.base
    }

    pub fn members(&self) -> &[FamilyMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn short_params(&self) -> ProtocolParams {
        self.members[0].matrix.params().short_params()
    }

    /// What `A^H` does in the coming slot, given the long prefix: the
    /// corruptions it makes followed by the slot-filling action, in terms of
    /// `Π_H`. `None` if the prefix has no preimage under `H`.
    pub(crate) fn plan(
        &self,
        member: usize,
        prefix: &Transcript,
        corrupted: &PartySet,
        budget: usize,
    ) -> Option<Vec<AdversaryAction>> {
        let short = map_transcript(&self.members[member].matrix, prefix)?;
        Some(plan_on_short(
            &self.short_params(),
            &*self.members[member].strategy,
            &short,
            corrupted,
            budget,
        ))
    }
}

pub(crate) fn plan_on_short(
    params: &ProtocolParams,
    policy: &dyn ViewPolicy,
    short: &Transcript,
    corrupted: &PartySet,
    budget: usize,
) -> Vec<AdversaryAction> {
    let mut corrupted = corrupted.clone();
    let pending = short.pending();
    let mut plan = Vec::new();
    for _ in 0..=params.parties {
        let view = View {
            params,
            transcript: short,
            corrupted: &corrupted,
            budget_left: budget.saturating_sub(corrupted.len()),
            pending: &pending,
        };
        let action = policy.decide(&view);
        let done = action.fills_slot();
        if let AdversaryAction::Corrupt(p) = action {
            if p >= params.parties || corrupted.contains(p) || corrupted.len() >= budget {
                // Illegal; the engine rejects it when the plan is replayed.
                plan.push(action);
                break;
            }
            corrupted.insert(p);
        }
        plan.push(action);
        if done {
            break;
        }
    }
    plan
}

/// Long-protocol actions for a plan made by `A^H`.
fn lift_plan(h: &MatrixH, round: usize, plan: &[AdversaryAction]) -> Vec<AdversaryAction> {
    plan.iter()
        .map(|a| match a {
            AdversaryAction::SendAs(p, r) => AdversaryAction::SendAs(*p, h.get(round, *p, r)),
            other => other.clone(),
        })
        .collect()
}

#[derive(Clone, Debug)]
struct AwaitingHonest {
    prefix: Transcript,
    corrupted: PartySet,
    party: usize,
    plan: Vec<AdversaryAction>,
}

/// The adaptive reduction adversary. See the module docs.
///
/// A run whose consistent set becomes empty halts: from then on it acts
/// passively and [`halted`](Self::halted) reports it.
#[derive(Clone)]
pub struct ReductionAdversary {
    family: Arc<Family>,
    budget: usize,
    consistent: Vec<usize>,
    rng: ChaCha8Rng,
    queue: VecDeque<AdversaryAction>,
    awaiting: Option<AwaitingHonest>,
    halted: bool,
    sizes: Vec<usize>,
}

impl ReductionAdversary {
    pub fn new(family: Arc<Family>, budget: usize) -> Self {
        let consistent = (0..family.len()).collect();
        ReductionAdversary {
            sizes: vec![family.len()],
            family,
            budget,
            consistent,
            rng: RngSeed(0).rng(),
            queue: VecDeque::new(),
            awaiting: None,
            halted: false,
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Indices into the family of the matrices still consistent with the run.
    pub fn consistent(&self) -> &[usize] {
        &self.consistent
    }

    /// Consistent-set size after each update, starting with the family size.
    pub fn size_log(&self) -> &[usize] {
        &self.sizes
    }

    pub fn halted(&self) -> bool {
        self.halted || self.consistent.is_empty()
    }

    /// Absorbs the honest message of the last slot the adversary scheduled,
    /// if it now appears in `transcript`. [`act`](AdversaryStrategy::act)
    /// does this on its own; call it once more after the final slot.
    pub fn observe(&mut self, transcript: &Transcript) {
        let Some(w) = self.awaiting.take_if(|w| transcript.len() > w.prefix.len()) else {
            return;
        };
        let entry = &transcript.entries()[w.prefix.len()];
        let (round, party) = (entry.round, w.party);
        let family = &self.family;
        let candidates: Vec<usize> = self
            .consistent
            .iter()
            .copied()
            .filter(|&k| map_h(&family.members[k].matrix, round, party, &entry.message).is_some())
            .filter(|&k| {
                family
                    .plan(k, &w.prefix, &w.corrupted, self.budget)
                    .as_ref()
                    == Some(&w.plan)
            })
            .collect();
        if candidates.is_empty() {
            self.consistent.clear();
        } else {
            let pick = candidates[self.rng.gen_range(0..candidates.len())];
            let row = family.members[pick].matrix.row(round, party);
            self.consistent = candidates
                .into_iter()
                .filter(|&k| family.members[k].matrix.row(round, party) == row)
                .collect();
        }
        self.sizes.push(self.consistent.len());
    }

    fn start_slot(&mut self, view: &View<'_>) -> AdversaryAction {
        if self.halted || self.consistent.is_empty() {
            self.halted = true;
            return view.passive_action();
        }
        let family = &self.family;
        let star = self.consistent[self.rng.gen_range(0..self.consistent.len())];
        let plan = family
            .plan(star, view.transcript, view.corrupted, self.budget)
            .expect("consistent matrices map the prefix");
        let round = view.round();
        let h_star = &family.members[star].matrix;
        match plan.last().expect("plans are nonempty") {
            AdversaryAction::SendAs(u, _) => {
                let u = *u;
                self.consistent.retain(|&k| {
                    family.members[k].matrix.rows_equal(h_star, round, u)
                        && family
                            .plan(k, view.transcript, view.corrupted, self.budget)
                            .as_ref()
                            == Some(&plan)
                });
                self.sizes.push(self.consistent.len());
            }
            AdversaryAction::ScheduleHonest(u) => {
                self.awaiting = Some(AwaitingHonest {
                    prefix: view.transcript.clone(),
                    corrupted: view.corrupted.clone(),
                    party: *u,
                    plan: plan.clone(),
                });
            }
            // An illegal corruption ends the plan; the engine rejects it.
            AdversaryAction::Corrupt(_) => {}
        }
        self.queue.extend(lift_plan(h_star, round, &plan));
        self.queue.pop_front().expect("plans are nonempty")
    }
}

impl AdversaryStrategy for ReductionAdversary {
    fn begin(&mut self, seed: RngSeed) {
        self.consistent = (0..self.family.len()).collect();
        self.sizes = vec![self.family.len()];
        self.rng = seed.rng();
        self.queue.clear();
        self.awaiting = None;
        self.halted = false;
    }

    fn act(&mut self, view: &View<'_>) -> AdversaryAction {
        self.observe(view.transcript);
        match self.queue.pop_front() {
            Some(a) => a,
            None => self.start_slot(view),
        }
    }
}

/// One seeded run of the reduction adversary against `Π`.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionRun {
    pub execution: Execution,
    pub halted: bool,
    pub sizes: Vec<usize>,
}

/// Runs `Π` against the reduction adversary: honest randomness from `seed`,
/// adversary randomness from `seed.child(ADVERSARY)`.
pub fn run_reduction(family: &Arc<Family>, budget: usize, seed: RngSeed) -> Result<ReductionRun> {
    let mut adversary = ReductionAdversary::new(family.clone(), budget);
    adversary.begin(seed.child(tag::ADVERSARY));
    let mut sim = Simulation::new(family.base(), budget)?;
    sim.run_until(
        family.base().params().slots(),
        &mut adversary,
        &SeededSource(seed),
    )?;
    adversary.observe(sim.transcript());
    Ok(ReductionRun {
        execution: sim.finish(),
        halted: adversary.halted(),
        sizes: adversary.sizes,
    })
}

/// A family member for the static reduction: a strategy that corrupts
/// `parties` up front and never corrupts again.
#[derive(Clone)]
pub struct StaticMember {
    pub matrix: MatrixH,
    pub parties: PartySet,
    pub strategy: Arc<dyn ViewPolicy>,
}

impl StaticMember {
    pub fn new(matrix: MatrixH, parties: PartySet, strategy: impl ViewPolicy + 'static) -> Self {
        StaticMember {
            matrix,
            parties,
            strategy: Arc::new(strategy),
        }
    }
}

/// Outcome of the static reduction's choice of corruption set.
#[derive(Debug, Clone, Serialize)]
pub struct StaticChoice {
    /// `T*`, the most common corruption set (smallest first on ties).
    pub parties: PartySet,
    /// `α(T*)`, the number of matrices whose strategy corrupts `T*`.
    pub count: usize,
    pub family_size: usize,
    /// Every distinct set with its count, most common first.
    pub counts: Vec<(PartySet, usize)>,
}

/// The static reduction: picks `T*`, keeps only the matrices whose strategy
/// corrupts `T*`, and returns the adaptive machinery over that subfamily
/// with every strategy corrupting `T*` before the first slot.
pub fn reduction_adversary_static(
    base: &ProtocolSpec,
    members: Vec<StaticMember>,
    t: usize,
) -> Result<(StaticChoice, ReductionAdversary)> {
    if members.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if let Some(m) = members.iter().find(|m| m.parties.len() > t) {
        return Err(Error::InvalidParams(format!(
            "a strategy corrupts {} parties, budget is {t}",
            m.parties.len()
        )));
    }
    let mut counts: std::collections::BTreeMap<Vec<usize>, usize> = Default::default();
    for m in &members {
        *counts.entry(m.parties.to_vec()).or_default() += 1;
    }
    let mut ranked: Vec<(Vec<usize>, usize)> = counts.into_iter().collect();
    // Stable sort keeps the lexicographic order among equal counts.
    ranked.sort_by_key(|r| std::cmp::Reverse(r.1));
    let (best, count) = ranked[0].clone();
    let star: PartySet = best.iter().copied().collect();
    let family_size = members.len();
    let kept = members
        .into_iter()
        .filter(|m| m.parties == star)
        .map(|m| FamilyMember {
            matrix: m.matrix,
            strategy: Arc::new(StaticCorruption::new(star.clone(), m.strategy)),
        })
        .collect();
    let family = Arc::new(Family::new(base.clone(), kept)?);
    let choice = StaticChoice {
        parties: star,
        count,
        family_size,
        counts: ranked
            .into_iter()
            .map(|(s, c)| (s.into_iter().collect(), c))
            .collect(),
    };
    Ok((choice, ReductionAdversary::new(family, t)))
}
