use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{AdversaryAction, View, ViewPolicy};
use crate::error::{Error, Result};
use crate::model::{ProtocolParams, Transcript};
use crate::party::PartySet;

/// Canonical hash of a view: the parameters, the ordered `(round, party,
/// message)` entries and the corrupted set. Speaker statuses are left out;
/// they never influence what can happen next.
pub fn view_key(view: &View<'_>) -> String {
    hex_digest(&state_digest(view.params, view.transcript, view.corrupted))
}

pub(crate) fn state_digest(
    params: &ProtocolParams,
    transcript: &Transcript,
    corrupted: &PartySet,
) -> [u8; 32] {
    let mut h = Sha256::new();
    for x in [
        params.parties,
        params.rounds,
        params.message_bits,
        params.output_bits,
    ] {
        h.update((x as u64).to_le_bytes());
    }
    h.update((transcript.len() as u64).to_le_bytes());
    for e in transcript.entries() {
        h.update((e.round as u32).to_le_bytes());
        h.update((e.party as u32).to_le_bytes());
        h.update(e.message.to_string().as_bytes());
        h.update(*b";");
    }
    h.update(b"corrupted");
    for p in corrupted.iter() {
        h.update((p as u32).to_le_bytes());
    }
    h.finalize().into()
}

pub(crate) fn hex_digest(d: &[u8; 32]) -> String {
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// A deterministic adversary given by a table from view hash to action.
/// Views missing from the table get the passive action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyTable {
    pub protocol: String,
    pub params: ProtocolParams,
    pub budget: usize,
    pub actions: BTreeMap<String, AdversaryAction>,
}

impl PolicyTable {
    pub fn new(protocol: impl Into<String>, params: ProtocolParams, budget: usize) -> Self {
        PolicyTable {
            protocol: protocol.into(),
            params,
            budget,
            actions: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("policy tables serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Malformed(format!("policy table: {e}")))
    }
}

impl ViewPolicy for PolicyTable {
    fn decide(&self, view: &View<'_>) -> AdversaryAction {
        match self.actions.get(&view_key(view)) {
            Some(a) => a.clone(),
            None => view.passive_action(),
        }
    }
}
