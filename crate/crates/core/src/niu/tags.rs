// Copyright 2026 The nocsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Tag assignment and the pending-transaction lookup table.
//!
//! The table is the NIU state that remembers which requests still wait for
//! a response. A tag names one slot; under the per-stream policy a slot may
//! queue several same-target transactions of one stream, whose responses
//! come back in order because they share a path and a target.

use std::collections::{BTreeMap, VecDeque};

use crate::niu::packet::{NiuId, Tag};
use crate::transaction::{Channel, SocketOrderKey, Status, TransactionRequest};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TagPolicy {
    SingleOutstanding,
    PerStream { streams: u8 },
    Pooled { capacity: u8 },
}

/// Dense stream number of a key: the thread id, or `2 * tid + channel` for
/// ID-based keys. The per-stream policy uses it as the dedicated tag.
pub fn stream_index(key: SocketOrderKey) -> u8 {
    match key {
        SocketOrderKey::Single => 0,
        SocketOrderKey::Thread(t) => t,
        SocketOrderKey::TxnId { tid, channel } => tid.wrapping_mul(2) + u8::from(channel == Channel::Write),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PendingEntry {
    /// Per-master issue sequence number.
    pub txn: u64,
    pub request: TransactionRequest,
    pub issued_at: u64,
    pub target: NiuId,
    pub fragments: u16,
    pub received: u16,
    /// Fabric-endian read data, assembled by fragment.
    pub data: Vec<u8>,
    pub status: Status,
}

impl PendingEntry {
    pub fn key(&self) -> SocketOrderKey {
        self.request.order_key
    }
}

#[derive(Clone, Debug)]
pub struct PendingTable {
    slots: BTreeMap<Tag, VecDeque<PendingEntry>>,
    capacity: usize,
    tag_limit: u16,
    len: usize,
}

impl PendingTable {
    pub fn new(capacity: usize, tag_bits: u32) -> Self {
        PendingTable { slots: BTreeMap::new(), capacity, tag_limit: 1 << tag_bits, len: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len >= self.capacity
    }

    pub fn is_live(&self, tag: Tag) -> bool {
        self.slots.contains_key(&tag)
    }

    pub fn live_tags(&self) -> impl Iterator<Item = Tag> + '_ {
        self.slots.keys().copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (Tag, &PendingEntry)> {
        self.slots.iter().flat_map(|(t, q)| q.iter().map(move |e| (*t, e)))
    }

    /// Oldest transaction waiting on `tag`.
    pub fn front_mut(&mut self, tag: Tag) -> Option<&mut PendingEntry> {
        self.slots.get_mut(&tag).and_then(|q| q.front_mut())
    }

    /// Retires the oldest transaction on `tag`, freeing the tag when none
    /// remain.
    pub fn retire(&mut self, tag: Tag) -> Option<PendingEntry> {
        let q = self.slots.get_mut(&tag)?;
        let entry = q.pop_front();
        if q.is_empty() {
            self.slots.remove(&tag);
        }
        if entry.is_some() {
            self.len -= 1;
        }
        entry
    }

    fn insert(&mut self, tag: Tag, entry: PendingEntry) {
        self.slots.entry(tag).or_default().push_back(entry);
        self.len += 1;
    }
}

/// The NIU could not take the transaction this cycle and retries later.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stall;

/// Picks a tag for `entry` and records it live in `pending`.
pub fn assign_tag(policy: TagPolicy, entry: PendingEntry, pending: &mut PendingTable) -> Result<Tag, Stall> {
    let tag = match policy {
        TagPolicy::SingleOutstanding => {
            if !pending.is_empty() {
                return Err(Stall);
            }
            0
        }
        TagPolicy::PerStream { .. } => {
            if pending.is_full() {
                return Err(Stall);
            }
            let tag = stream_index(entry.key());
            if let Some(live) = pending.slots.get(&tag) {
                // several in flight only while they all go to one target
                if live.iter().any(|e| e.target != entry.target) {
                    return Err(Stall);
                }
            }
            tag
        }
        TagPolicy::Pooled { capacity } => {
            let limit = u16::from(capacity).min(pending.tag_limit);
            if pending.is_full() {
                return Err(Stall);
            }
            match (0..limit).map(|t| t as Tag).find(|t| !pending.is_live(*t)) {
                Some(t) => t,
                None => return Err(Stall),
            }
        }
    };
    pending.insert(tag, entry);
    Ok(tag)
}
