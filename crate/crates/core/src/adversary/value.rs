use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use super::AdversaryStrategy;
use crate::bits::BitString;
use crate::engine::{
    enumerate_honest_outputs, for_each_honest_grid, run_honest, run_with_adversary,
    run_with_source, GridSource,
};
use crate::error::{Error, Result};
use crate::model::ProtocolSpec;
use crate::rng::{tag, RngSeed};
use crate::stats::{sample_seed, Prob};

pub use crate::stats::chernoff_radius;

/// The target set `M ⊆ {0,1}^m`, stored as little-endian integers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TargetSet {
    width: usize,
    elements: BTreeSet<u64>,
}

impl TargetSet {
    pub fn new(width: usize, elements: impl IntoIterator<Item = u64>) -> Result<Self> {
        if width == 0 || width > 64 {
            return Err(Error::InvalidTargetSet(format!(
                "output width {width} outside 1..=64"
            )));
        }
        let mut set = BTreeSet::new();
        for e in elements {
            if width < 64 && e >> width != 0 {
                return Err(Error::InvalidTargetSet(format!(
                    "element {e} has more than {width} bits"
                )));
            }
            if !set.insert(e) {
                return Err(Error::InvalidTargetSet(format!("duplicate element {e}")));
            }
        }
        if set.is_empty() {
            return Err(Error::InvalidTargetSet("M must be nonempty".into()));
        }
        Ok(TargetSet {
            width,
            elements: set,
        })
    }

    /// Parses bit strings (first character is bit 0), each exactly `width` long.
    pub fn parse<S: AsRef<str>>(width: usize, items: &[S]) -> Result<Self> {
        let mut values = Vec::with_capacity(items.len());
        for item in items {
            let b = BitString::parse(item.as_ref())
                .map_err(|e| Error::InvalidTargetSet(e.to_string()))?;
            if b.len() != width {
                return Err(Error::InvalidTargetSet(format!(
                    "element {:?} has {} bits, expected {width}",
                    item.as_ref(),
                    b.len()
                )));
            }
            values.push(b.to_u64().expect("width ≤ 64"));
        }
        TargetSet::new(width, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `s = |M|`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, element: u64) -> bool {
        self.elements.contains(&element)
    }

    pub fn iter(&self) -> impl Iterator<Item = &u64> {
        self.elements.iter()
    }

    pub fn bit_strings(&self) -> Vec<String> {
        self.elements
            .iter()
            .map(|&e| BitString::from_u64(e, self.width).to_string())
            .collect()
    }
}

/// Budget `t`, target set `M` (with `s = |M|`) and tolerance `δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecurityParams {
    pub t: usize,
    pub target: TargetSet,
    pub delta: BigRational,
}

impl SecurityParams {
    pub fn new(t: usize, target: TargetSet, delta: BigRational) -> Result<Self> {
        if delta.is_negative() || delta > BigRational::one() {
            return Err(Error::InvalidParams(format!("δ = {delta} outside [0, 1]")));
        }
        Ok(SecurityParams { t, target, delta })
    }

    pub fn with_budget(&self, t: usize) -> Self {
        SecurityParams { t, ..self.clone() }
    }

    pub fn s(&self) -> usize {
        self.target.len()
    }

    pub fn check_against(&self, spec: &ProtocolSpec) -> Result<()> {
        let p = spec.params();
        if self.t > p.parties {
            return Err(Error::InvalidParams(format!(
                "t={} exceeds n={}",
                self.t, p.parties
            )));
        }
        if self.target.width() != p.output_bits {
            return Err(Error::InvalidTargetSet(format!(
                "M has {}-bit elements but the protocol outputs {} bits",
                self.target.width(),
                p.output_bits
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValueMode {
    Exact,
    Sampled {
        samples: u64,
        seed: RngSeed,
        confidence: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ValueMethod {
    ExactEnumeration,
    GameTree,
    MonteCarlo { samples: u64, confidence: f64 },
}

/// `val^M = Pr[out^A ∈ M] − Pr[out ∈ M]`, signed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueReport {
    pub value: Prob,
    pub adversarial_mass: Prob,
    pub honest_mass: Prob,
    pub method: ValueMethod,
    /// Two-sided radius around `value` (sampled mode only).
    pub radius: Option<f64>,
}

impl ValueReport {
    pub(crate) fn exact(
        adversarial: BigRational,
        honest: BigRational,
        method: ValueMethod,
    ) -> Self {
        ValueReport {
            value: Prob::Exact(&adversarial - &honest),
            adversarial_mass: Prob::Exact(adversarial),
            honest_mass: Prob::Exact(honest),
            method,
            radius: None,
        }
    }

    pub fn value_f64(&self) -> f64 {
        self.value.to_f64()
    }

    pub fn exact_value(&self) -> Option<&BigRational> {
        self.value.exact()
    }

    /// `(value − radius, value + radius)`; degenerate for exact reports.
    pub fn interval(&self) -> (f64, f64) {
        let v = self.value_f64();
        let r = self.radius.unwrap_or(0.0);
        (v - r, v + r)
    }
}

/// Exact honest mass on `M` by enumeration.
pub fn honest_mass(spec: &ProtocolSpec, target: &TargetSet, cap: u128) -> Result<BigRational> {
    let d = enumerate_honest_outputs(spec, cap)?;
    Ok(target
        .iter()
        .filter_map(|&e| d.exact_mass(e))
        .fold(BigRational::zero(), |a, b| a + b))
}

const SAMPLE_BATCH: u64 = 512;

/// Bias of `strategy` toward `M`.
///
/// Exact mode enumerates every honest randomness assignment and runs a fresh
/// clone of the strategy on each, seeded with a fixed adversary seed, so
/// randomised strategies are evaluated for that one seed. Sampled mode uses
/// common random numbers: run `i` of the adversarial and of the honest
/// experiment share the honest seed `sample_seed(seed, i)`, so a strategy that
/// never corrupts has measured value exactly 0. The reported radius is the sum
/// of the two Chernoff radii at confidence `1 − (1 − c)/2` each.
pub fn value_of<S>(
    spec: &ProtocolSpec,
    strategy: &S,
    sec: &SecurityParams,
    mode: ValueMode,
    cap: u128,
) -> Result<ValueReport>
where
    S: AdversaryStrategy + Clone + Sync,
{
    sec.check_against(spec)?;
    match mode {
        ValueMode::Exact => {
            let honest = honest_mass(spec, &sec.target, cap)?;
            let mut hits = BigUint::zero();
            let mut total = BigUint::zero();
            let mut failure = None;
            let adversary_seed = RngSeed(0).child(tag::ADVERSARY);
            for_each_honest_grid(spec, cap, |grid| {
                if failure.is_some() {
                    return;
                }
                let mut s = strategy.clone();
                match run_with_source(
                    spec,
                    &mut s,
                    sec.t,
                    &GridSource(grid.to_vec()),
                    adversary_seed,
                ) {
                    Ok(run) => {
                        total += 1u32;
                        if sec.target.contains(run.output.to_u64().expect("m ≤ 64")) {
                            hits += 1u32;
                        }
                    }
                    Err(e) => failure = Some(e),
                }
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            let adversarial = BigRational::new(BigInt::from(hits), BigInt::from(total));
            Ok(ValueReport::exact(
                adversarial,
                honest,
                ValueMethod::ExactEnumeration,
            ))
        }
        ValueMode::Sampled {
            samples,
            seed,
            confidence,
        } => {
            if samples == 0 {
                return Err(Error::InvalidParams("B ≥ 1 required".into()));
            }
            if !(confidence > 0.0 && confidence < 1.0) {
                return Err(Error::InvalidParams("confidence must lie in (0, 1)".into()));
            }
            let batches = samples.div_ceil(SAMPLE_BATCH);
            let parts: Vec<Result<(u64, u64)>> = (0..batches)
                .into_par_iter()
                .map(|b| {
                    let mut adv_hits = 0u64;
                    let mut honest_hits = 0u64;
                    for i in b * SAMPLE_BATCH..((b + 1) * SAMPLE_BATCH).min(samples) {
                        let run_seed = sample_seed(seed, i);
                        let honest = run_honest(spec, run_seed);
                        honest_hits +=
                            sec.target.contains(honest.output.to_u64().expect("m ≤ 64")) as u64;
                        let mut s = strategy.clone();
                        let adv = run_with_adversary(spec, &mut s, sec.t, run_seed)?;
                        adv_hits +=
                            sec.target.contains(adv.output.to_u64().expect("m ≤ 64")) as u64;
                    }
                    Ok((adv_hits, honest_hits))
                })
                .collect();
            let (mut adv, mut hon) = (0u64, 0u64);
            for part in parts {
                let (a, h) = part?;
                adv += a;
                hon += h;
            }
            let b = samples as f64;
            let (pa, ph) = (adv as f64 / b, hon as f64 / b);
            let per_side = 1.0 - (1.0 - confidence) / 2.0;
            Ok(ValueReport {
                value: Prob::Approx(pa - ph),
                adversarial_mass: Prob::Approx(pa),
                honest_mass: Prob::Approx(ph),
                method: ValueMethod::MonteCarlo {
                    samples,
                    confidence,
                },
                radius: Some(2.0 * chernoff_radius(samples, per_side)),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{Deterministic, GreedyMajority, LastSpeakerForcer, Passive};
    use crate::protocols::{make_majority_coin, make_xor_coin};
    use crate::DEFAULT_ENUMERATION_CAP as CAP;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn sec(t: usize, width: usize, m: &[u64]) -> SecurityParams {
        SecurityParams::new(
            t,
            TargetSet::new(width, m.iter().copied()).unwrap(),
            r(0, 1),
        )
        .unwrap()
    }

    #[test]
    fn target_set_validation() {
        assert!(TargetSet::new(1, [2]).is_err());
        assert!(TargetSet::new(2, [1, 1]).is_err());
        assert!(TargetSet::new(2, []).is_err());
        let m = TargetSet::parse(2, &["10", "01"]).unwrap();
        assert_eq!(m.iter().copied().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(m.bit_strings(), vec!["10", "01"]);
        assert!(TargetSet::parse(2, &["1"]).is_err());
    }

    #[test]
    fn passive_value_is_zero() {
        let spec = make_majority_coin(3).unwrap();
        let rep = value_of(
            &spec,
            &Deterministic(Passive),
            &sec(1, 1, &[1]),
            ValueMode::Exact,
            CAP,
        )
        .unwrap();
        assert_eq!(rep.exact_value(), Some(&r(0, 1)));
    }

    #[test]
    fn forcer_on_xor_has_value_half() {
        let spec = make_xor_coin(2, 1, 1).unwrap();
        let s = sec(1, 1, &[0]);
        let f = Deterministic(LastSpeakerForcer::new(spec.clone(), s.target.clone()));
        let rep = value_of(&spec, &f, &s, ValueMode::Exact, CAP).unwrap();
        assert_eq!(rep.exact_value(), Some(&r(1, 2)));
        assert_eq!(rep.adversarial_mass, Prob::Exact(r(1, 1)));
    }

    #[test]
    fn greedy_majority_three_parties() {
        // Fails only when the first two honest bits are both 0.
        let spec = make_majority_coin(3).unwrap();
        let rep = value_of(
            &spec,
            &GreedyMajority::new(true),
            &sec(1, 1, &[1]),
            ValueMode::Exact,
            CAP,
        )
        .unwrap();
        assert_eq!(rep.exact_value(), Some(&r(1, 4)));
    }

    #[test]
    fn sampled_mode_is_consistent() {
        let spec = make_majority_coin(3).unwrap();
        let mode = ValueMode::Sampled {
            samples: 20_000,
            seed: RngSeed(5),
            confidence: 0.95,
        };
        let rep = value_of(
            &spec,
            &GreedyMajority::new(true),
            &sec(1, 1, &[1]),
            mode,
            CAP,
        )
        .unwrap();
        let (lo, hi) = rep.interval();
        assert!(lo <= 0.25 && 0.25 <= hi, "{rep:?}");
        let passive =
            value_of(&spec, &Deterministic(Passive), &sec(1, 1, &[1]), mode, CAP).unwrap();
        assert_eq!(passive.value, Prob::Approx(0.0));
    }

    #[test]
    fn mismatched_target_width() {
        let spec = make_xor_coin(2, 1, 1).unwrap();
        let err = value_of(
            &spec,
            &Deterministic(Passive),
            &sec(0, 2, &[0]),
            ValueMode::Exact,
            CAP,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidTargetSet(_)));
    }
}
