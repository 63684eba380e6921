use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::seed::fnv1a;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    PartyToServer,
    ServerToParty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Feature,
    FeatureGrad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Discriminator,
    Generator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub iteration: usize,
    pub phase: Phase,
    pub direction: Direction,
    pub party: usize,
    pub kind: MessageKind,
    /// Rows × columns of the payload.
    pub dims: (usize, usize),
    /// Hash of the whole payload.
    pub hash: u64,
    /// One hash per payload row (kept only when payloads are recorded).
    pub row_hashes: Vec<u64>,
    #[serde(skip)]
    pub payload: Option<Array2<f64>>,
}

/// Hash of the bit patterns of `values`.
pub fn hash_values<'a>(values: impl IntoIterator<Item = &'a f64>) -> u64 {
    let bytes: Vec<u8> = values.into_iter().flat_map(|v| v.to_bits().to_le_bytes()).collect();
    fnv1a(&bytes)
}

/// Append-only record of everything that crosses the party/server boundary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MessageLog {
    messages: Vec<Message>,
    record_payloads: bool,
}

impl MessageLog {
    pub fn new(record_payloads: bool) -> Self {
        Self { messages: Vec::new(), record_payloads }
    }

    pub fn record(
        &mut self,
        iteration: usize,
        phase: Phase,
        direction: Direction,
        party: usize,
        kind: MessageKind,
        payload: &Array2<f64>,
    ) {
        let row_hashes = if self.record_payloads {
            payload.rows().into_iter().map(|r| hash_values(r.iter())).collect()
        } else {
            Vec::new()
        };
        self.messages.push(Message {
            iteration,
            phase,
            direction,
            party,
            kind,
            dims: payload.dim(),
            hash: hash_values(payload.iter()),
            row_hashes,
            payload: self.record_payloads.then(|| payload.clone()),
        });
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Drops stored payload copies and row hashes, keeping the headers.
    pub fn compact(&mut self) {
        for m in &mut self.messages {
            m.payload = None;
            m.row_hashes = Vec::new();
        }
    }
}
