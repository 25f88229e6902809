//! Protocols whose parties keep private randomness, and their transformation
//! into public-coin protocols with the same output distribution.
//!
//! In a [`GeneralProtocolSpec`] party `j` draws `r_j` of `ell_r` bits once and
//! sends `f(i, j, Trans_{i−1}, r_j)` in round `i`. The transformed protocol
//! has every party send a uniformly random ordering of all `2^{ell_r}` strings
//! instead; the output map replays the original protocol, taking for each
//! party the first listed string consistent with what that party has said so
//! far.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_bigint::BigUint;
use serde::Serialize;

use crate::bits::BitString;
use crate::engine::enumerate_honest_outputs;
use crate::error::{Error, Result};
use crate::model::{MessageSpace, ProtocolParams, ProtocolSpec, Transcript};
use crate::stats::{statistical_distance, Distribution, Prob};

/// Default bound on `ell_r`; transformed messages have `2^{ell_r}·ell_r` bits.
pub const DEFAULT_RANDOMNESS_CAP: usize = 8;

/// Messages of all completed rounds, indexed `[round][party]`.
pub type History = [Vec<BitString>];

pub type MessageFn = dyn Fn(usize, usize, &History, &BitString) -> BitString + Send + Sync;

/// A protocol in which party `j` holds private randomness `r_j`.
#[derive(Clone)]
pub struct GeneralProtocolSpec {
    label: String,
    params: ProtocolParams,
    randomness_bits: usize,
    message: Arc<MessageFn>,
    output: Arc<crate::model::OutputFn>,
}

impl GeneralProtocolSpec {
    /// `message(round, party, history, r)` must return `params.message_bits` bits.
    pub fn new<M, O>(
        label: impl Into<String>,
        params: ProtocolParams,
        randomness_bits: usize,
        message: M,
        output: O,
    ) -> Result<Self>
    where
        M: Fn(usize, usize, &History, &BitString) -> BitString + Send + Sync + 'static,
        O: Fn(&Transcript) -> BitString + Send + Sync + 'static,
    {
        params.check()?;
        if randomness_bits == 0 || randomness_bits > 16 {
            return Err(Error::InvalidParams(format!(
                "ell_r = {randomness_bits} outside 1..=16"
            )));
        }
        Ok(GeneralProtocolSpec {
            label: label.into(),
            params,
            randomness_bits,
            message: Arc::new(message),
            output: Arc::new(output),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn randomness_bits(&self) -> usize {
        self.randomness_bits
    }

    pub fn message(
        &self,
        round: usize,
        party: usize,
        history: &History,
        r: &BitString,
    ) -> BitString {
        (self.message)(round, party, history, r)
    }

    pub fn output(&self, transcript: &Transcript) -> BitString {
        (self.output)(transcript)
    }

    /// Runs the protocol honestly with the given randomness, one string per party.
    pub fn run(&self, randomness: &[BitString]) -> Transcript {
        let p = self.params;
        let mut history: Vec<Vec<BitString>> = Vec::with_capacity(p.rounds);
        for round in 0..p.rounds {
            let row = (0..p.parties)
                .map(|j| self.message(round, j, &history, &randomness[j]))
                .collect();
            history.push(row);
        }
        Transcript::from_grid(p.parties, p.rounds, history.into_iter().flatten().collect())
    }

    /// Exact honest output distribution over all `2^{n·ell_r}` randomness choices.
    pub fn output_distribution(&self, cap: u128) -> Result<Distribution> {
        let p = self.params;
        let bits = p.parties * self.randomness_bits;
        if bits > 64 || (bits as f64).exp2() > cap as f64 {
            return Err(Error::cap(
                "private randomness enumeration",
                (bits as f64).exp2(),
                cap,
            ));
        }
        let mut counts: BTreeMap<u64, BigUint> = BTreeMap::new();
        for code in 0..1u64 << bits {
            let randomness: Vec<BitString> = (0..p.parties)
                .map(|j| {
                    BitString::from_u64(
                        (code >> (j * self.randomness_bits)) & ((1 << self.randomness_bits) - 1),
                        self.randomness_bits,
                    )
                })
                .collect();
            let out = self
                .output(&self.run(&randomness))
                .to_u64()
                .expect("m ≤ 64");
            *counts.entry(out).or_default() += 1u32;
        }
        Ok(Distribution::exact_from_counts(
            p.output_bits as u32,
            counts,
            BigUint::from(1u64) << bits,
        ))
    }
}

impl fmt::Debug for GeneralProtocolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralProtocolSpec")
            .field("label", &self.label)
            .field("params", &self.params)
            .field("randomness_bits", &self.randomness_bits)
            .finish_non_exhaustive()
    }
}

/// True iff replaying `party`'s message functions with `r` reproduces every
/// message the party sent in `history`.
pub fn is_good_randomness(
    g: &GeneralProtocolSpec,
    history: &History,
    party: usize,
    r: &BitString,
) -> bool {
    (0..history.len())
        .all(|round| g.message(round, party, &history[..round], r) == history[round][party])
}

/// Original-protocol transcript recovered from a transformed one.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub transcript: Transcript,
    /// Slots where no listed string was good and the all-zero message was used.
    pub fallbacks: usize,
}

/// Reconstructs the original messages from the listed strings of a
/// transformed transcript.
pub fn decode(g: &GeneralProtocolSpec, transformed: &Transcript) -> Decoded {
    let p = *g.params();
    let k = g.randomness_bits();
    let mut history: Vec<Vec<BitString>> = Vec::with_capacity(p.rounds);
    let mut fallbacks = 0;
    for round in 0..p.rounds {
        let mut row = Vec::with_capacity(p.parties);
        for party in 0..p.parties {
            let listed = transformed
                .message(round, party)
                .expect("complete transcript");
            let good = (0..listed.len() / k)
                .map(|e| listed.slice(e * k, k))
                .find(|r| is_good_randomness(g, &history, party, r));
            row.push(match good {
                Some(r) => g.message(round, party, &history, &r),
                None => {
                    fallbacks += 1;
                    BitString::zeros(p.message_bits)
                }
            });
        }
        history.push(row);
    }
    let transcript =
        Transcript::from_grid(p.parties, p.rounds, history.into_iter().flatten().collect());
    Decoded {
        transcript,
        fallbacks,
    }
}

/// The public-coin version of `g`. Its messages are permutations of all
/// `ell_r`-bit strings; `fallbacks` counts decodes that hit the all-zero rule.
pub fn public_coin_transform(
    g: &GeneralProtocolSpec,
    randomness_cap: usize,
) -> Result<(ProtocolSpec, Arc<AtomicU64>)> {
    let k = g.randomness_bits();
    if k > randomness_cap {
        return Err(Error::cap(
            "transformed message bits",
            ((1usize << k) * k) as f64,
            ((1usize << randomness_cap) * randomness_cap) as u128,
        ));
    }
    let p = *g.params();
    let params = ProtocolParams {
        message_bits: (1 << k) * k,
        ..p
    };
    let fallbacks = Arc::new(AtomicU64::new(0));
    let counter = fallbacks.clone();
    let inner = g.clone();
    let spec = ProtocolSpec::new(format!("{}'", g.label()), params, move |t| {
        let d = decode(&inner, t);
        if d.fallbacks > 0 {
            counter.fetch_add(d.fallbacks as u64, Ordering::Relaxed);
        }
        inner.output(&d.transcript)
    })
    .with_message_space(MessageSpace::Permutations { entry_bits: k });
    Ok((spec, fallbacks))
}

#[derive(Debug, Clone, Serialize)]
pub struct PublicCoinReport {
    pub protocol: String,
    pub randomness_bits: usize,
    pub transformed_message_bits: usize,
    pub rounds_preserved: bool,
    pub sd: Prob,
    pub original: serde_json::Value,
    pub transformed: serde_json::Value,
    pub fallbacks: u64,
}

/// Exact comparison of the honest output distributions of `g` and its transform.
pub fn public_coin_check(g: &GeneralProtocolSpec, cap: u128) -> Result<PublicCoinReport> {
    let (spec, fallbacks) = public_coin_transform(g, DEFAULT_RANDOMNESS_CAP)?;
    let original = g.output_distribution(cap)?;
    let transformed = enumerate_honest_outputs(&spec, cap)?;
    Ok(PublicCoinReport {
        protocol: g.label().to_string(),
        randomness_bits: g.randomness_bits(),
        transformed_message_bits: spec.params().message_bits,
        rounds_preserved: spec.params().rounds == g.params().rounds,
        sd: statistical_distance(&original, &transformed)?,
        original: original.to_json(),
        transformed: transformed.to_json(),
        fallbacks: fallbacks.load(Ordering::Relaxed),
    })
}

/// Exact distribution of one transformed slot's message over the sampler's
/// random choices: every Fisher–Yates choice sequence is enumerated once.
/// Returns counts per encoded message and the number of sequences.
pub fn slot_message_counts(entry_bits: usize) -> Result<(BTreeMap<BitString, u64>, u64)> {
    let k = 1usize << entry_bits;
    if k > 8 {
        return Err(Error::cap(
            "permutation choice sequences",
            (1..=k).map(|x| x as f64).product(),
            40320,
        ));
    }
    let ranges: Vec<usize> = (1..k).rev().collect();
    let total: usize = ranges.iter().map(|i| i + 1).product();
    let mut counts = BTreeMap::new();
    for code in 0..total {
        let mut c = code;
        let choices: Vec<usize> = ranges
            .iter()
            .map(|&i| {
                let j = c % (i + 1);
                c /= i + 1;
                j
            })
            .collect();
        let perm = crate::model::permutation_from_choices(k, &choices);
        *counts
            .entry(crate::model::encode_permutation(&perm, entry_bits))
            .or_default() += 1;
    }
    Ok((counts, total as u64))
}

fn bit(b: bool) -> BitString {
    BitString::from_u64(b as u64, 1)
}

/// Built-in protocols with private randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneralBuiltin {
    /// Two parties, two rounds, one private bit each: both send their bit,
    /// then party 1 announces the AND of the two and that is the output.
    And,
    /// Already public coin: in round `i` each party sends bit `i` of its
    /// randomness; the output is the XOR of everything sent.
    FreshCoin,
    /// Two parties, two private bits each. Round 1 sends the XOR of the two
    /// bits, round 2 reveals the first; the output mixes both rounds.
    CommitReveal,
}

impl GeneralBuiltin {
    pub const NAMES: [&'static str; 3] = ["and", "fresh_coin", "commit_reveal"];

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "and" => Some(GeneralBuiltin::And),
            "fresh_coin" => Some(GeneralBuiltin::FreshCoin),
            "commit_reveal" => Some(GeneralBuiltin::CommitReveal),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GeneralBuiltin::And => "and",
            GeneralBuiltin::FreshCoin => "fresh_coin",
            GeneralBuiltin::CommitReveal => "commit_reveal",
        }
    }

    pub fn build(&self) -> GeneralProtocolSpec {
        let result = match self {
            GeneralBuiltin::And => GeneralProtocolSpec::new(
                "and",
                ProtocolParams::new(2, 2, 1, 1),
                1,
                |round, party, history, r| match (round, party) {
                    (0, _) => r.clone(),
                    (_, 0) => bit(history[0][0].bit(0) && history[0][1].bit(0)),
                    _ => BitString::zeros(1),
                },
                |t| t.message(1, 0).expect("complete").clone(),
            ),
            GeneralBuiltin::FreshCoin => GeneralProtocolSpec::new(
                "fresh_coin",
                ProtocolParams::new(2, 2, 1, 1),
                2,
                |round, _, _, r| r.slice(round, 1),
                |t| {
                    bit(t
                        .entries()
                        .iter()
                        .fold(false, |acc, e| acc ^ e.message.bit(0)))
                },
            ),
            GeneralBuiltin::CommitReveal => GeneralProtocolSpec::new(
                "commit_reveal",
                ProtocolParams::new(2, 2, 1, 1),
                2,
                |round, _, _, r| {
                    if round == 0 {
                        bit(r.bit(0) ^ r.bit(1))
                    } else {
                        r.slice(0, 1)
                    }
                },
                |t| {
                    let m = |i, j| t.message(i, j).expect("complete").bit(0);
                    bit(m(1, 0) ^ m(1, 1) ^ (m(0, 0) && m(0, 1)))
                },
            ),
        };
        result.expect("built-in parameters are valid")
    }
}

impl fmt::Display for GeneralBuiltin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use num_rational::BigRational;
    use num_traits::Zero;
    use proptest::prelude::*;

    use super::*;
    use crate::engine::run_honest;
    use crate::rng::RngSeed;

    fn bs(s: &str) -> BitString {
        BitString::parse(s).unwrap()
    }

    #[test]
    fn and_protocol_distribution() {
        let g = GeneralBuiltin::And.build();
        let report = public_coin_check(&g, 1 << 24).unwrap();
        assert_eq!(report.sd.exact().unwrap(), &BigRational::zero());
        let (spec, _) = public_coin_transform(&g, 8).unwrap();
        let d = enumerate_honest_outputs(&spec, 1 << 24).unwrap();
        assert_eq!(
            d.exact_mass(0).unwrap(),
            BigRational::new(3.into(), 4.into())
        );
        assert_eq!(
            d.exact_mass(1).unwrap(),
            BigRational::new(1.into(), 4.into())
        );
        assert!(report.rounds_preserved);
        assert_eq!(report.fallbacks, 0);
    }

    #[test]
    fn every_builtin_is_preserved() {
        for b in [
            GeneralBuiltin::And,
            GeneralBuiltin::FreshCoin,
            GeneralBuiltin::CommitReveal,
        ] {
            let report = public_coin_check(&b.build(), 1 << 24).unwrap();
            assert!(report.sd.exact().unwrap().is_zero(), "{b}");
            assert_eq!(report.fallbacks, 0);
        }
    }

    #[test]
    fn good_randomness_examples() {
        let g = GeneralBuiltin::CommitReveal.build();
        assert!(is_good_randomness(&g, &[], 0, &bs("01")));
        let r0 = bs("10");
        let sent = g.message(0, 1, &[], &r0);
        let history = vec![vec![BitString::zeros(1), sent.clone()]];
        assert!(is_good_randomness(&g, &history, 1, &r0));
        // "11" has XOR 0 but r0 = "10" has XOR 1.
        assert!(!is_good_randomness(&g, &history, 1, &bs("11")));
    }

    #[test]
    fn malformed_lists_fall_back_to_zero() {
        let g = GeneralBuiltin::CommitReveal.build();
        // Round-1 messages XOR to 1; a round-2 list of only "11" strings has no good entry.
        let one = bs("10001000");
        let bad = bs("11111111");
        let t = Transcript::from_grid(2, 2, vec![one.clone(), one, bad.clone(), bad]);
        let d = decode(&g, &t);
        assert_eq!(d.fallbacks, 2);
        assert_eq!(d.transcript.message(1, 0), Some(&BitString::zeros(1)));
    }

    #[test]
    fn slot_messages_are_exactly_uniform() {
        for bits in [1, 2] {
            let (counts, total) = slot_message_counts(bits).unwrap();
            let k = 1usize << bits;
            assert_eq!(counts.len(), (1..=k).product::<usize>());
            assert!(counts.values().all(|&c| c * counts.len() as u64 == total));
        }
    }

    #[test]
    fn sampled_slot_messages_pass_chi_square() {
        let (spec, _) = public_coin_transform(&GeneralBuiltin::CommitReveal.build(), 8).unwrap();
        let mut counts: BTreeMap<BitString, u64> = BTreeMap::new();
        let samples = 24_000;
        for s in 0..samples {
            let run = run_honest(&spec, RngSeed(s));
            *counts
                .entry(run.transcript.message(0, 0).unwrap().clone())
                .or_default() += 1;
        }
        assert_eq!(counts.len(), 24);
        let e = samples as f64 / 24.0;
        let chi: f64 = counts.values().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 0.999 quantile of chi-square with 23 degrees of freedom.
        assert!(chi < 49.7, "{chi}");
    }

    #[test]
    fn ell_r_cap() {
        let g = GeneralProtocolSpec::new(
            "wide",
            ProtocolParams::new(1, 1, 1, 1),
            9,
            |_, _, _, r| r.slice(0, 1),
            |t| t.message(0, 0).unwrap().clone(),
        )
        .unwrap();
        assert!(public_coin_transform(&g, DEFAULT_RANDOMNESS_CAP)
            .unwrap_err()
            .is_cap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        /// Random one-round-lookahead protocols over two parties with one-bit
        /// randomness: round-2 messages are arbitrary tables of the round-1
        /// messages and the party's bit.
        #[test]
        fn random_tables_are_preserved(table in any::<u64>(), out_table in any::<u16>()) {
            let g = GeneralProtocolSpec::new(
                "table",
                ProtocolParams::new(2, 2, 1, 1),
                1,
                move |round, party, history, r| {
                    if round == 0 {
                        return bit(r.bit(0) ^ ((table >> party) & 1 == 1));
                    }
                    let idx = party * 8 + (history[0][0].bit(0) as usize) * 4 + (history[0][1].bit(0) as usize) * 2 + r.bit(0) as usize;
                    bit((table >> (2 + idx)) & 1 == 1)
                },
                move |t| {
                    let idx = t.entries().iter().enumerate().fold(0usize, |acc, (i, e)| acc | (e.message.bit(0) as usize) << i);
                    bit((out_table >> idx) & 1 == 1)
                },
            ).unwrap();
            let report = public_coin_check(&g, 1 << 24).unwrap();
            prop_assert!(report.sd.exact().unwrap().is_zero());
            prop_assert_eq!(report.fallbacks, 0);
        }
    }
}
