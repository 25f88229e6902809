//! Protocol model: parameters, honest message spaces, transcripts and specs.
//!
//! Rounds and parties are zero-based everywhere in the API; they are
//! displayed one-based (`P1`, round 1).

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::party::PartySet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub parties: usize,
    pub rounds: usize,
    pub message_bits: usize,
    pub output_bits: usize,
}

impl ProtocolParams {
    pub fn new(parties: usize, rounds: usize, message_bits: usize, output_bits: usize) -> Self {
        ProtocolParams {
            parties,
            rounds,
            message_bits,
            output_bits,
        }
    }

    /// Number of message slots in a complete run.
    pub fn slots(&self) -> usize {
        self.parties * self.rounds
    }

    pub fn check(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(problems.join("; ")))
        }
    }

    pub(crate) fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.parties == 0 {
            out.push("n ≥ 1 required".to_string());
        }
        if self.rounds == 0 {
            out.push("d ≥ 1 required".to_string());
        }
        if self.message_bits == 0 {
            out.push("L ≥ 1 required".to_string());
        }
        if self.output_bits == 0 {
            out.push("m ≥ 1 required".to_string());
        }
        if self.output_bits > 64 {
            out.push("m ≤ 64 required".to_string());
        }
        out
    }
}

/// Distribution of an honest party's message in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum MessageSpace {
    /// A fresh uniform string of `message_bits` bits.
    UniformBits,
    /// A uniformly random ordering of all `entry_bits`-bit strings, listed
    /// as consecutive little-endian entries.
    Permutations { entry_bits: usize },
}

impl MessageSpace {
    /// Number of distinct honest messages per slot, as a float (may be huge).
    pub fn size(&self, message_bits: usize) -> f64 {
        match *self {
            MessageSpace::UniformBits => 2f64.powi(message_bits as i32),
            MessageSpace::Permutations { entry_bits } => {
                let k = 1u64 << entry_bits;
                (1..=k).map(|x| x as f64).product()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, message_bits: usize, rng: &mut R) -> BitString {
        match *self {
            MessageSpace::UniformBits => BitString::random(message_bits, rng),
            MessageSpace::Permutations { entry_bits } => {
                let k = 1usize << entry_bits;
                let choices: Vec<usize> = (1..k).rev().map(|i| rng.gen_range(0..=i)).collect();
                encode_permutation(&permutation_from_choices(k, &choices), entry_bits)
            }
        }
    }

    /// Every honest message in a fixed order. Each is equally likely.
    pub fn enumerate(&self, message_bits: usize) -> Vec<BitString> {
        match *self {
            MessageSpace::UniformBits => {
                assert!(message_bits <= 24, "enumerating more than 2^24 messages");
                (0..1u64 << message_bits)
                    .map(|v| BitString::from_u64(v, message_bits))
                    .collect()
            }
            MessageSpace::Permutations { entry_bits } => {
                use itertools::Itertools;
                let k = 1usize << entry_bits;
                assert!(k <= 8, "enumerating more than 8! permutations");
                (0..k)
                    .permutations(k)
                    .map(|p| encode_permutation(&p, entry_bits))
                    .collect()
            }
        }
    }
}

/// Fisher–Yates shuffle of `0..k` driven by explicit choices: the `s`-th
/// choice (for `i = k-1, k-2, …, 1`) picks the index in `0..=i` swapped into
/// position `i`.
pub fn permutation_from_choices(k: usize, choices: &[usize]) -> Vec<usize> {
    assert_eq!(choices.len(), k.saturating_sub(1));
    let mut perm: Vec<usize> = (0..k).collect();
    for (step, &j) in choices.iter().enumerate() {
        let i = k - 1 - step;
        assert!(j <= i);
        perm.swap(i, j);
    }
    perm
}

pub fn encode_permutation(perm: &[usize], entry_bits: usize) -> BitString {
    let parts: Vec<BitString> = perm
        .iter()
        .map(|&v| BitString::from_u64(v as u64, entry_bits))
        .collect();
    BitString::concat(&parts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeakerStatus {
    Honest,
    Corrupted,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub round: usize,
    pub party: usize,
    pub message: BitString,
    pub status: SpeakerStatus,
}

/// Record of who spoke when and what they sent, in actual send order.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Transcript {
    parties: usize,
    rounds: usize,
    entries: Vec<TranscriptEntry>,
    slot_index: Vec<Option<u32>>,
}

impl Transcript {
    pub fn new(parties: usize, rounds: usize) -> Self {
        Transcript {
            parties,
            rounds,
            entries: Vec::new(),
            slot_index: vec![None; parties * rounds],
        }
    }

    /// Complete transcript in default order: round by round, ascending party,
    /// all speakers honest. `messages` is indexed by `round * n + party`.
    pub fn from_grid(parties: usize, rounds: usize, messages: Vec<BitString>) -> Self {
        assert_eq!(messages.len(), parties * rounds);
        let mut t = Transcript::new(parties, rounds);
        for (slot, message) in messages.into_iter().enumerate() {
            t.entries.push(TranscriptEntry {
                round: slot / parties,
                party: slot % parties,
                message,
                status: SpeakerStatus::Honest,
            });
            t.slot_index[slot] = Some(slot as u32);
        }
        t
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.entries.len() == self.parties * self.rounds
    }

    /// Round of the next slot, `None` once complete.
    pub fn current_round(&self) -> Option<usize> {
        (!self.is_complete()).then(|| self.entries.len() / self.parties)
    }

    pub fn has_spoken(&self, round: usize, party: usize) -> bool {
        self.slot_index[round * self.parties + party].is_some()
    }

    /// Parties that have not yet spoken in the current round.
    pub fn pending(&self) -> PartySet {
        match self.current_round() {
            Some(r) => (0..self.parties)
                .filter(|&p| !self.has_spoken(r, p))
                .collect(),
            None => PartySet::new(),
        }
    }

    pub fn message(&self, round: usize, party: usize) -> Option<&BitString> {
        self.slot_index[round * self.parties + party].map(|i| &self.entries[i as usize].message)
    }

    pub fn push(&mut self, entry: TranscriptEntry) -> Result<()> {
        let round = self
            .current_round()
            .ok_or_else(|| Error::IllegalAction("transcript already complete".into()))?;
        if entry.round != round || entry.party >= self.parties {
            return Err(Error::IllegalAction(format!(
                "entry for round {} party {} does not fit slot in round {}",
                entry.round + 1,
                entry.party + 1,
                round + 1
            )));
        }
        if self.has_spoken(round, entry.party) {
            return Err(Error::ScheduleViolation {
                round,
                party: entry.party,
            });
        }
        self.slot_index[round * self.parties + entry.party] = Some(self.entries.len() as u32);
        self.entries.push(entry);
        Ok(())
    }

    /// The first `k` entries.
    pub fn prefix(&self, k: usize) -> Transcript {
        let mut t = Transcript::new(self.parties, self.rounds);
        for e in &self.entries[..k] {
            t.push(e.clone())
                .expect("prefix of a valid transcript is valid");
        }
        t
    }

    /// Ordered `(party, message)` pairs, ignoring speaker status.
    pub fn key(&self) -> Vec<(usize, BitString)> {
        self.entries
            .iter()
            .map(|e| (e.party, e.message.clone()))
            .collect()
    }
}

impl fmt::Debug for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut l = f.debug_list();
        for e in &self.entries {
            let mark = if e.status == SpeakerStatus::Corrupted {
                "*"
            } else {
                ""
            };
            l.entry(&format_args!(
                "r{}:P{}{}={}",
                e.round + 1,
                e.party + 1,
                mark,
                e.message
            ));
        }
        l.finish()
    }
}

impl Serialize for Transcript {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.entries.iter())
    }
}

pub type OutputFn = dyn Fn(&Transcript) -> BitString + Send + Sync;

/// A synchronous protocol in which every party speaks once per round.
#[derive(Clone)]
pub struct ProtocolSpec {
    label: String,
    params: ProtocolParams,
    messages: MessageSpace,
    output: Arc<OutputFn>,
}

impl ProtocolSpec {
    pub fn new<F>(label: impl Into<String>, params: ProtocolParams, output: F) -> Self
    where
        F: Fn(&Transcript) -> BitString + Send + Sync + 'static,
    {
        ProtocolSpec {
            label: label.into(),
            params,
            messages: MessageSpace::UniformBits,
            output: Arc::new(output),
        }
    }

    pub fn with_message_space(mut self, messages: MessageSpace) -> Self {
        self.messages = messages;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn message_space(&self) -> MessageSpace {
        self.messages
    }

    /// True when honest messages are fresh uniform strings.
    pub fn is_public_coin(&self) -> bool {
        self.messages == MessageSpace::UniformBits
    }

    pub fn output(&self, transcript: &Transcript) -> BitString {
        (self.output)(transcript)
    }

    /// Output as an element of the `m`-bit universe.
    pub fn output_value(&self, transcript: &Transcript) -> u64 {
        self.output(transcript)
            .to_u64()
            .expect("output width is at most 64 bits")
    }

    pub fn sample_message<R: Rng + ?Sized>(&self, rng: &mut R) -> BitString {
        self.messages.sample(self.params.message_bits, rng)
    }

    /// Number of honest randomness assignments over a whole run.
    pub fn honest_state_count(&self) -> f64 {
        self.messages
            .size(self.params.message_bits)
            .powi(self.params.slots() as i32)
    }
}

impl fmt::Debug for ProtocolSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProtocolSpec")
            .field("label", &self.label)
            .field("params", &self.params)
            .field("messages", &self.messages)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transcript_rejects_repeat_speaker() {
        let mut t = Transcript::new(2, 1);
        let e = TranscriptEntry {
            round: 0,
            party: 1,
            message: BitString::zeros(1),
            status: SpeakerStatus::Honest,
        };
        t.push(e.clone()).unwrap();
        assert_eq!(t.pending().to_vec(), vec![0]);
        assert_eq!(
            t.push(e),
            Err(Error::ScheduleViolation { round: 0, party: 1 })
        );
    }

    #[test]
    fn grid_transcript_is_complete_and_ordered() {
        let msgs = (0..4).map(|v| BitString::from_u64(v, 2)).collect();
        let t = Transcript::from_grid(2, 2, msgs);
        assert!(t.is_complete());
        assert_eq!(t.message(1, 0), Some(&BitString::from_u64(2, 2)));
        assert_eq!(
            t.entries()
                .iter()
                .map(|e| (e.round, e.party))
                .collect::<Vec<_>>(),
            vec![(0, 0), (0, 1), (1, 0), (1, 1)]
        );
        assert_eq!(t.current_round(), None);
    }

    #[test]
    fn fisher_yates_choices_cover_every_permutation_once() {
        use std::collections::BTreeMap;
        for entry_bits in [1usize, 2] {
            let k = 1usize << entry_bits;
            let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
            let ranges: Vec<usize> = (1..k).rev().collect();
            let total: usize = ranges.iter().map(|i| i + 1).product();
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
                *counts
                    .entry(permutation_from_choices(k, &choices))
                    .or_default() += 1;
            }
            let factorial: usize = (1..=k).product();
            assert_eq!(counts.len(), factorial);
            assert!(counts.values().all(|&c| c == 1));
        }
    }

    #[test]
    fn permutation_space_enumeration_matches_size() {
        let space = MessageSpace::Permutations { entry_bits: 2 };
        let all = space.enumerate(8);
        assert_eq!(all.len() as f64, space.size(8));
        assert_eq!(all[0].to_string(), "00100111");
    }
}
