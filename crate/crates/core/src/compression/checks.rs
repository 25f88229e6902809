//! Desk-scale checks: how well `Π_H` simulates `Π` across matrices, how the
//! optimal adversary's value moves under compression, and whether the
//! reduction adversary keeps the bias of the strategies it is built from.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use itertools::Itertools;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;
use smallvec::SmallVec;

use super::compressed::compressed_protocol;
use super::hybrid::{ideal_distribution, reduction_distribution};
use super::matrix::{enumerate_family, sample_matrices, MatrixH};
use super::params::{mu_star, CompressionParams, SlackBudget};
use super::reduction::{run_reduction, Family};
use crate::adversary::{
    optimal_adaptive_value, value_of, Deterministic, SecurityParams, ValueMode,
};
use crate::bits::BitString;
use crate::engine::{enumerate_honest_outputs, run_honest};
use crate::error::{Error, Result};
use crate::model::{ProtocolSpec, Transcript};
use crate::rng::RngSeed;
use crate::stats::{
    chernoff_radius, ratio_to_f64, sample_seed, statistical_distance, wilson_interval,
    Distribution, Prob, Z95,
};

/// Which matrices a check runs over.
#[derive(Debug, Clone)]
pub enum MatrixSource {
    /// The whole family, in enumeration order.
    All,
    /// `count` uniform matrices; matrix `k` from `seed.path([MATRIX, k])`.
    Sampled {
        count: usize,
        seed: RngSeed,
    },
    /// Every matrix with bijective rows (requires `ell = L`).
    Bijective,
    Explicit(Vec<MatrixH>),
}

impl MatrixSource {
    pub fn label(&self) -> &'static str {
        match self {
            MatrixSource::All => "all",
            MatrixSource::Sampled { .. } => "sampled",
            MatrixSource::Bijective => "bijective",
            MatrixSource::Explicit(_) => "explicit",
        }
    }

    pub fn matrices(&self, cp: &CompressionParams, cap: u128) -> Result<Vec<MatrixH>> {
        match self {
            MatrixSource::All => Ok(enumerate_family(cp, cap)?.collect()),
            MatrixSource::Sampled { count, seed } => sample_matrices(cp, *count, *seed),
            MatrixSource::Bijective => bijective_family(cp, cap),
            MatrixSource::Explicit(list) => {
                if list.iter().any(|h| h.params() != cp) {
                    return Err(Error::ShapeMismatch(
                        "explicit matrix of the wrong shape".into(),
                    ));
                }
                Ok(list.clone())
            }
        }
    }
}

/// Every matrix whose rows are permutations of `{0,1}^L` (so `ell = L`),
/// the first row varying slowest.
pub fn bijective_family(cp: &CompressionParams, cap: u128) -> Result<Vec<MatrixH>> {
    if cp.ell != cp.base.message_bits {
        return Err(Error::InvalidParams("bijective rows need ell = L".into()));
    }
    let n = cp.row_len();
    if n > 8 {
        return Err(Error::cap(
            "bijective rows",
            (1..=n).map(|x| x as f64).product(),
            cap,
        ));
    }
    let perms: Vec<Vec<u64>> = (0..n as u64).permutations(n).collect();
    let count = (perms.len() as f64).powi(cp.rows() as i32);
    if count > cap as f64 {
        return Err(Error::cap("bijective family", count, cap));
    }
    let rows = cp.rows();
    let mut out = Vec::with_capacity(count as usize);
    for code in 0..count as usize {
        let mut entries = Vec::with_capacity(rows * n);
        for r in 0..rows {
            let digit = code / perms.len().pow((rows - 1 - r) as u32) % perms.len();
            entries.extend_from_slice(&perms[digit]);
        }
        out.push(MatrixH::from_entries(*cp, entries)?);
    }
    Ok(out)
}

/// Largest `L·d·n` for which base outputs are tabulated for every grid.
const TABLE_BITS: usize = 20;

/// Base outputs indexed by `Σ_slot message << (L·slot)`, with dense output
/// counts when the output has at most [`DENSE_OUTPUT_BITS`] bits.
struct OutputTable {
    outputs: Vec<u64>,
    base_counts: Option<Vec<u64>>,
}

const DENSE_OUTPUT_BITS: usize = 16;

impl OutputTable {
    fn build(spec: &ProtocolSpec) -> Option<Self> {
        let p = spec.params();
        let bits = p.message_bits * p.slots();
        if bits > TABLE_BITS {
            return None;
        }
        let mask = (1u64 << p.message_bits) - 1;
        let outputs: Vec<u64> = (0..1u64 << bits)
            .into_par_iter()
            .map(|index| {
                let grid = (0..p.slots())
                    .map(|s| {
                        BitString::from_u64((index >> (p.message_bits * s)) & mask, p.message_bits)
                    })
                    .collect();
                spec.output_value(&Transcript::from_grid(p.parties, p.rounds, grid))
            })
            .collect();
        let base_counts = (p.output_bits <= DENSE_OUTPUT_BITS).then(|| {
            let mut c = vec![0u64; 1 << p.output_bits];
            for &o in &outputs {
                c[o as usize] += 1;
            }
            c
        });
        Some(OutputTable {
            outputs,
            base_counts,
        })
    }

    /// Calls `visit` with the base output of every short grid of `Π_H`.
    fn walk(&self, h: &MatrixH, mut visit: impl FnMut(u64)) {
        let cp = h.params();
        let l = cp.base.message_bits;
        let shifted: Vec<Vec<u64>> = (0..cp.rows())
            .map(|s| {
                h.row(s / cp.base.parties, s % cp.base.parties)
                    .iter()
                    .map(|&v| v << (l * s))
                    .collect()
            })
            .collect();
        fn nest(rows: &[Vec<u64>], acc: u64, outputs: &[u64], visit: &mut dyn FnMut(u64)) {
            match rows.split_first() {
                None => visit(outputs[acc as usize]),
                Some((row, rest)) => {
                    for &v in row {
                        nest(rest, acc | v, outputs, visit);
                    }
                }
            }
        }
        nest(&shifted, 0, &self.outputs, &mut visit);
    }

    /// Output distribution of `Π_H` by walking all short grids.
    fn compressed(&self, h: &MatrixH) -> Distribution {
        let cp = h.params();
        let mut counts: HashMap<u64, u64> = HashMap::new();
        self.walk(h, |o| *counts.entry(o).or_default() += 1);
        let counts: BTreeMap<u64, BigUint> = counts
            .into_iter()
            .map(|(k, v)| (k, BigUint::from(v)))
            .collect();
        Distribution::exact_from_counts(
            cp.base.output_bits as u32,
            counts,
            BigUint::one() << (cp.ell * cp.rows()),
        )
    }

    /// `SD(out_{Π_H}, out_Π)` in integer arithmetic, when outputs are dense.
    #[cfg(test)]
    fn distance(&self, h: &MatrixH) -> Option<BigRational> {
        let numer = self.distance_numer(h)?;
        Some(BigRational::new(
            BigInt::from(numer),
            BigInt::from(Self::distance_denom(h.params())),
        ))
    }

    fn distance_denom(cp: &CompressionParams) -> u128 {
        2u128 << (cp.ell * cp.rows() + cp.base.message_bits * cp.rows())
    }

    /// Numerator of [`Self::distance`] over [`Self::distance_denom`].
    fn distance_numer(&self, h: &MatrixH) -> Option<u128> {
        let base = self.base_counts.as_ref()?;
        let cp = h.params();
        let mut counts = vec![0u64; base.len()];
        self.walk(h, |o| counts[o as usize] += 1);
        let short_total = 1u128 << (cp.ell * cp.rows());
        let long_total = 1u128 << (cp.base.message_bits * cp.rows());
        let numer: u128 = counts
            .iter()
            .zip(base)
            .map(|(&c, &b)| (c as u128 * long_total).abs_diff(b as u128 * short_total))
            .sum();
        Some(numer)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdFraction {
    pub threshold: f64,
    pub count: usize,
    pub fraction: f64,
    /// Wilson 95% interval.
    pub ci: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub protocol: String,
    pub ell: usize,
    pub source: &'static str,
    pub matrices: usize,
    /// Exact `SD(out_{Π_H}, out_Π)` per matrix, in source order.
    pub sds: Vec<Prob>,
    /// Mean of the middle one or two values.
    pub median: Prob,
    /// The `⌈2k/3⌉`-th smallest of `k` values.
    pub two_thirds_quantile: Prob,
    pub mean: f64,
    pub max: Prob,
    pub thresholds: Vec<ThresholdFraction>,
}

impl SimulationReport {
    pub fn all_zero(&self) -> bool {
        self.sds
            .iter()
            .all(|p| p.exact().is_some_and(Zero::is_zero))
    }
}

/// Sorted rows of `h`, packed `L` bits per entry.
fn row_multiset_key(h: &MatrixH) -> SmallVec<[u64; 4]> {
    let cp = h.params();
    let l = cp.base.message_bits;
    let mut key = SmallVec::new();
    let (mut word, mut used) = (0u64, 0);
    let mut row = SmallVec::<[u64; 16]>::new();
    for chunk in h.entries().chunks(cp.row_len()) {
        row.clear();
        row.extend_from_slice(chunk);
        row.sort_unstable();
        for &e in &row {
            if used + l > 64 {
                key.push(word);
                (word, used) = (0, 0);
            }
            word |= e << used;
            used += l;
        }
    }
    key.push(word);
    key
}

fn exact(p: Prob) -> BigRational {
    p.exact().cloned().expect("both distributions are exact")
}

/// Exact `SD(out_{Π_H}, out_Π)` for every matrix of `source`.
pub fn simulation_check(
    spec: &ProtocolSpec,
    cp: &CompressionParams,
    source: &MatrixSource,
    thresholds: &[f64],
    cap: u128,
) -> Result<SimulationReport> {
    if cp.base != *spec.params() {
        return Err(Error::ShapeMismatch(
            "compression parameters do not match the protocol".into(),
        ));
    }
    let short_states = (cp.row_len() as f64).powi(cp.rows() as i32);
    if short_states > cap as f64 {
        return Err(Error::cap("short honest randomness", short_states, cap));
    }
    let base = enumerate_honest_outputs(spec, cap)?;
    let matrices = source.matrices(cp, cap)?;
    let table = OutputTable::build(spec);
    let dense = table.as_ref().filter(|t| t.base_counts.is_some());
    let sds: Vec<BigRational> = if let Some(t) = dense {
        let denom = BigInt::from(OutputTable::distance_denom(cp));
        // The output distribution of Π_H depends only on the multiset of
        // entries in each row, so matrices sharing sorted rows share an SD.
        let keys: Vec<SmallVec<[u64; 4]>> = matrices.par_iter().map(row_multiset_key).collect();
        let mut slot_of: HashMap<&SmallVec<[u64; 4]>, usize> = HashMap::new();
        let mut reps = Vec::new();
        let slots: Vec<usize> = keys
            .iter()
            .enumerate()
            .map(|(i, key)| {
                *slot_of.entry(key).or_insert_with(|| {
                    reps.push(i);
                    reps.len() - 1
                })
            })
            .collect();
        let numers: Vec<u128> = reps
            .par_iter()
            .map(|&i| t.distance_numer(&matrices[i]).expect("dense"))
            .collect();
        slots
            .into_iter()
            .map(|slot| numers[slot])
            .map(|n| {
                if n == 0 {
                    BigRational::zero()
                } else {
                    BigRational::new(BigInt::from(n), denom.clone())
                }
            })
            .collect()
    } else {
        matrices
            .par_iter()
            .map(|h| {
                let out = match &table {
                    Some(t) => t.compressed(h),
                    None => enumerate_honest_outputs(&compressed_protocol(spec, h)?, cap)?,
                };
                Ok(exact(statistical_distance(&out, &base)?))
            })
            .collect::<Result<_>>()?
    };
    if sds.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let mut sorted = sds.clone();
    sorted.sort();
    let k = sorted.len();
    let median = if k % 2 == 1 {
        sorted[k / 2].clone()
    } else {
        (&sorted[k / 2 - 1] + &sorted[k / 2]) / BigInt::from(2)
    };
    let quantile = sorted[(2 * k).div_ceil(3) - 1].clone();
    let floats: Vec<f64> = sds.iter().map(ratio_to_f64).collect();
    let thresholds = thresholds
        .iter()
        .map(|&threshold| {
            let count = floats.iter().filter(|&&x| x <= threshold).count();
            ThresholdFraction {
                threshold,
                count,
                fraction: count as f64 / k as f64,
                ci: wilson_interval(count as u64, k as u64, Z95),
            }
        })
        .collect();
    Ok(SimulationReport {
        protocol: spec.label().to_string(),
        ell: cp.ell,
        source: source.label(),
        matrices: k,
        mean: floats.iter().sum::<f64>() / k as f64,
        max: Prob::Exact(sorted[k - 1].clone()),
        median: Prob::Exact(median),
        two_thirds_quantile: Prob::Exact(quantile),
        sds: sds.into_iter().map(Prob::Exact).collect(),
        thresholds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CdfPoint {
    /// `val(Π_H) − val(Π)`.
    pub difference: Prob,
    /// Fraction of matrices with difference at most this value.
    pub fraction: Prob,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlackFraction {
    pub slack: Prob,
    pub count: usize,
    pub fraction: Prob,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub protocol: String,
    pub ell: usize,
    pub t: usize,
    pub target: Vec<String>,
    pub matrices: usize,
    pub base_value: Prob,
    /// Optimal adaptive value of `Π_H` per matrix, in source order.
    pub values: Vec<Prob>,
    pub cdf: Vec<CdfPoint>,
    pub slack: Vec<SlackFraction>,
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep reports serialize") + "\n"
    }
}

/// Exact optimal adaptive values of `Π` and of `Π_H` for every matrix of
/// `source`, with the distribution of their differences.
pub fn security_sweep(
    spec: &ProtocolSpec,
    cp: &CompressionParams,
    sec: &SecurityParams,
    source: &MatrixSource,
    slack_levels: &[BigRational],
    cap: u128,
) -> Result<SweepReport> {
    if cp.base != *spec.params() {
        return Err(Error::ShapeMismatch(
            "compression parameters do not match the protocol".into(),
        ));
    }
    let base = optimal_adaptive_value(spec, sec, cap)?.report.value;
    let base = exact(base);
    let matrices = source.matrices(cp, cap)?;
    let values: Vec<BigRational> = matrices
        .par_iter()
        .map(|h| {
            Ok(exact(
                optimal_adaptive_value(&compressed_protocol(spec, h)?, sec, cap)?
                    .report
                    .value,
            ))
        })
        .collect::<Result<_>>()?;
    let k = values.len();
    let frac = |c: usize| Prob::Exact(BigRational::new(BigInt::from(c), BigInt::from(k.max(1))));
    let mut diffs: Vec<BigRational> = values.iter().map(|v| v - &base).collect();
    diffs.sort();
    let mut cdf: Vec<CdfPoint> = Vec::new();
    for (i, d) in diffs.iter().enumerate() {
        if diffs.get(i + 1) != Some(d) {
            cdf.push(CdfPoint {
                difference: Prob::Exact(d.clone()),
                fraction: frac(i + 1),
            });
        }
    }
    let slack = slack_levels
        .iter()
        .map(|s| {
            let count = diffs.iter().filter(|d| *d <= s).count();
            SlackFraction {
                slack: Prob::Exact(s.clone()),
                count,
                fraction: frac(count),
            }
        })
        .collect();
    Ok(SweepReport {
        protocol: spec.label().to_string(),
        ell: cp.ell,
        t: sec.t,
        target: sec.target.bit_strings(),
        matrices: k,
        base_value: Prob::Exact(base),
        values: values.into_iter().map(Prob::Exact).collect(),
        cdf,
        slack,
    })
}

/// Default slack levels: 0, 1/16, 1/8, 1/4, 1/2.
pub fn default_slack_levels() -> Vec<BigRational> {
    [0, 16, 8, 4, 2]
        .into_iter()
        .map(|d| {
            if d == 0 {
                BigRational::zero()
            } else {
                BigRational::new(BigInt::one(), BigInt::from(d))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct SoundnessReport {
    pub family_size: usize,
    /// `min_H val(Π_H, A^H)`.
    pub min_member_value: Prob,
    pub mean_member_value: f64,
    /// Exact value of the reduction adversary on `Π`, halted runs included.
    pub exact_value: Prob,
    /// Exact value conditioned on the run not halting.
    pub exact_value_unhalted: Option<Prob>,
    pub halted_mass: Prob,
    /// `SD(Trans_A, Trans_ideal)`, exact.
    pub measured_slack: Prob,
    pub budget: SlackBudget,
    pub runs: u64,
    pub halted_runs: u64,
    pub halt_fraction: f64,
    /// Monte Carlo value over `runs` seeded runs, halted runs included.
    pub sampled_value: f64,
    pub radius: f64,
    /// `sampled_value ≥ min_member_value − measured_slack`.
    pub holds: bool,
}

/// Builds the reduction adversary from `family` and measures its value
/// toward `sec.target` on `Π`, exactly and over `runs` seeded runs.
pub fn reduction_soundness(
    family: &Arc<Family>,
    sec: &SecurityParams,
    runs: u64,
    seed: RngSeed,
    confidence: f64,
    cap: u128,
) -> Result<SoundnessReport> {
    let base = family.base();
    if runs == 0 {
        return Err(Error::InvalidParams("at least one run required".into()));
    }
    let member_values: Vec<BigRational> = family
        .members()
        .par_iter()
        .map(|m| {
            let short = compressed_protocol(base, &m.matrix)?;
            let report = value_of(
                &short,
                &Deterministic(m.strategy.clone()),
                sec,
                ValueMode::Exact,
                cap,
            )?;
            Ok(exact(report.value))
        })
        .collect::<Result<_>>()?;
    let min = member_values
        .iter()
        .min()
        .cloned()
        .expect("families are nonempty");
    let mean = member_values.iter().map(ratio_to_f64).sum::<f64>() / member_values.len() as f64;

    let honest = crate::adversary::honest_mass(base, &sec.target, cap)?;
    let reduction = reduction_distribution(family, sec.t, cap)?;
    let ideal = ideal_distribution(family, sec.t, cap)?;
    let slack = reduction.distance(&ideal);
    let (hit, hit_unhalted) = reduction.target_mass(base, &sec.target);

    const BATCH: u64 = 512;
    let parts: Vec<Result<(u64, u64, u64)>> = (0..runs.div_ceil(BATCH))
        .into_par_iter()
        .map(|b| {
            let (mut adv, mut hon, mut halted) = (0, 0, 0);
            for i in b * BATCH..((b + 1) * BATCH).min(runs) {
                let s = sample_seed(seed, i);
                let run = run_reduction(family, sec.t, s)?;
                adv += sec
                    .target
                    .contains(run.execution.output.to_u64().expect("m ≤ 64"))
                    as u64;
                halted += run.halted as u64;
                hon += sec
                    .target
                    .contains(run_honest(base, s).output.to_u64().expect("m ≤ 64"))
                    as u64;
            }
            Ok((adv, hon, halted))
        })
        .collect();
    let (mut adv, mut hon, mut halted) = (0u64, 0u64, 0u64);
    for p in parts {
        let (a, h, x) = p?;
        adv += a;
        hon += h;
        halted += x;
    }
    let sampled_value = (adv as f64 - hon as f64) / runs as f64;
    let radius = 2.0 * chernoff_radius(runs, 1.0 - (1.0 - confidence) / 2.0);
    let p = base.params();
    let budget = mu_star(p.parties as u64, p.rounds as u64)
        .unwrap_or(SlackBudget {
            epsilon: 1.0,
            mu_star: f64::INFINITY,
            vacuous: true,
            measured_slack: None,
        })
        .with_measured(ratio_to_f64(&slack));
    Ok(SoundnessReport {
        family_size: family.len(),
        holds: sampled_value >= ratio_to_f64(&(&min - &slack)),
        min_member_value: Prob::Exact(min),
        mean_member_value: mean,
        exact_value: Prob::Exact(&hit - &honest),
        exact_value_unhalted: hit_unhalted.map(|h| Prob::Exact(h - &honest)),
        halted_mass: Prob::Exact(reduction.halted_mass()),
        measured_slack: Prob::Exact(slack),
        budget,
        runs,
        halted_runs: halted,
        halt_fraction: halted as f64 / runs as f64,
        sampled_value,
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{LastSpeakerForcer, TargetSet};
    use crate::model::ProtocolParams;
    use crate::protocols::{make_majority_coin, make_xor_coin};

    fn cp(n: usize, d: usize, l: usize, ell: usize) -> CompressionParams {
        CompressionParams::new(ProtocolParams::new(n, d, l, 1), ell).unwrap()
    }

    #[test]
    fn bijective_rows_give_zero_distance() {
        let spec = make_xor_coin(2, 1, 2).unwrap();
        let c = cp(2, 1, 2, 2);
        let family = bijective_family(&c, 1 << 20).unwrap();
        assert_eq!(family.len(), 24 * 24);
        assert!(family.iter().all(MatrixH::has_injective_rows));
        let report =
            simulation_check(&spec, &c, &MatrixSource::Explicit(family), &[0.0], 1 << 20).unwrap();
        assert!(report.all_zero());
        assert_eq!(report.thresholds[0].fraction, 1.0);
    }

    #[test]
    fn table_path_matches_generic_enumeration() {
        let spec = make_majority_coin(3).unwrap();
        let c = CompressionParams::new(*spec.params(), 1).unwrap();
        let table = OutputTable::build(&spec).unwrap();
        for h in sample_matrices(&cp(3, 1, 1, 1), 1, RngSeed(0))
            .unwrap()
            .into_iter()
            .chain(enumerate_family(&c, 1 << 20).unwrap())
        {
            let generic =
                enumerate_honest_outputs(&compressed_protocol(&spec, &h).unwrap(), 1 << 20)
                    .unwrap();
            assert_eq!(table.compressed(&h), generic);
            let sd = exact(
                statistical_distance(&generic, &enumerate_honest_outputs(&spec, 1 << 20).unwrap())
                    .unwrap(),
            );
            assert_eq!(table.distance(&h), Some(sd));
        }
    }

    #[test]
    fn row_key_ignores_order_within_rows_only() {
        let c = cp(2, 1, 2, 1);
        let key = |rows: &[&[&str]]| row_multiset_key(&MatrixH::from_rows(c, rows).unwrap());
        let a = key(&[&["00", "11"], &["10", "01"]]);
        assert_eq!(a, key(&[&["11", "00"], &["01", "10"]]));
        assert_ne!(a, key(&[&["10", "01"], &["00", "11"]]));
        assert_ne!(a, key(&[&["00", "00"], &["10", "01"]]));
    }

    #[test]
    fn shared_row_multisets_reuse_one_distance() {
        let spec = make_xor_coin(2, 1, 2).unwrap();
        let c = cp(2, 1, 2, 2);
        let table = OutputTable::build(&spec).unwrap();
        let family = sample_matrices(&c, 200, RngSeed(5)).unwrap();
        let report = simulation_check(
            &spec,
            &c,
            &MatrixSource::Explicit(family.clone()),
            &[],
            1 << 20,
        )
        .unwrap();
        for (h, sd) in family.iter().zip(&report.sds) {
            assert_eq!(table.distance(h).as_ref(), sd.exact());
        }
    }

    #[test]
    fn order_statistics() {
        let spec = make_xor_coin(2, 1, 2).unwrap();
        let c = cp(2, 1, 2, 1);
        let report =
            simulation_check(&spec, &c, &MatrixSource::All, &[0.0, 0.25, 0.5], 1 << 20).unwrap();
        assert_eq!(report.matrices, 256);
        let mut v: Vec<f64> = report.sds.iter().map(Prob::to_f64).collect();
        v.sort_by(f64::total_cmp);
        assert_eq!(report.median.to_f64(), (v[127] + v[128]) / 2.0);
        // ⌈2·256/3⌉ = 171
        assert_eq!(report.two_thirds_quantile.to_f64(), v[170]);
        assert_eq!(report.thresholds[2].fraction, 1.0);
    }

    #[test]
    fn sweep_on_one_bit_xor() {
        let spec = make_xor_coin(2, 1, 1).unwrap();
        let c = cp(2, 1, 1, 1);
        let sec =
            SecurityParams::new(1, TargetSet::new(1, [0]).unwrap(), BigRational::zero()).unwrap();
        let report = security_sweep(
            &spec,
            &c,
            &sec,
            &MatrixSource::All,
            &default_slack_levels(),
            1 << 20,
        )
        .unwrap();
        assert_eq!(report.matrices, 16);
        assert_eq!(
            report.base_value,
            Prob::Exact(BigRational::new(1.into(), 2.into()))
        );
        assert_eq!(report.slack[0].fraction, Prob::Exact(BigRational::one()));

        let none = security_sweep(
            &spec,
            &c,
            &sec.with_budget(0),
            &MatrixSource::All,
            &default_slack_levels(),
            1 << 20,
        )
        .unwrap();
        assert!(none.values.iter().all(|v| v.exact().unwrap().is_zero()));
        assert_eq!(none.slack[0].fraction, Prob::Exact(BigRational::one()));
    }

    #[test]
    fn soundness_on_small_family() {
        let base = make_xor_coin(2, 1, 2).unwrap();
        let target = TargetSet::new(1, [0]).unwrap();
        let family = Arc::new(
            Family::build(
                &base,
                enumerate_family(&cp(2, 1, 2, 1), 1 << 20).unwrap(),
                |s| LastSpeakerForcer::new(s, target.clone()),
            )
            .unwrap(),
        );
        let sec = SecurityParams::new(1, target.clone(), BigRational::zero()).unwrap();
        let r = reduction_soundness(&family, &sec, 2000, RngSeed(5), 0.95, 1 << 24).unwrap();
        assert_eq!(r.halted_runs, 0);
        assert!(r.measured_slack.to_f64() <= 0.05);
        assert!((r.sampled_value - r.exact_value.to_f64()).abs() <= r.radius);
        assert!(r.holds, "{r:?}");
    }
}
