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

//! Initiator-side NIU: request packing, tag policy and response release.

use crate::niu::decode::{AddressMap, Decoded};
use crate::niu::endian::{endianness_convert, Endianness};
use crate::niu::packet::{
    Command, LockMarker, NiuId, Packet, PacketHeader, PacketKind, SlvAddr, Tag, UserBits, DEFAULT_TAG_BITS,
};
use crate::niu::reorder::ResponseReorder;
use crate::niu::tags::{assign_tag, PendingEntry, PendingTable, TagPolicy};
use crate::niu::NiuError;
use crate::transaction::{
    needs_response, validate_request, Address, Opcode, SocketFamily, SocketOrderKey, Status, TransactionRequest,
    TransactionResponse,
};

pub const DEFAULT_MAX_PAYLOAD: u32 = 32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InitiatorConfig {
    pub id: NiuId,
    pub family: SocketFamily,
    /// Threads (threaded) or transaction IDs (ID-based) the socket uses.
    pub streams: u8,
    pub tag_policy: TagPolicy,
    pub capacity: usize,
    pub max_payload: u32,
    pub endianness: Endianness,
    pub priority: u8,
    pub tag_bits: u32,
}

impl InitiatorConfig {
    pub fn new(id: NiuId, family: SocketFamily) -> Self {
        InitiatorConfig {
            id,
            family,
            streams: 1,
            tag_policy: TagPolicy::SingleOutstanding,
            capacity: 1,
            max_payload: DEFAULT_MAX_PAYLOAD,
            endianness: Endianness::Little,
            priority: 0,
            tag_bits: DEFAULT_TAG_BITS,
        }
    }

    pub fn supports(&self, key: SocketOrderKey) -> bool {
        if key.family() != self.family {
            return false;
        }
        match key {
            SocketOrderKey::Single => true,
            SocketOrderKey::Thread(t) => t < self.streams,
            SocketOrderKey::TxnId { tid, .. } => tid < self.streams,
        }
    }

    /// Checks the configuration for internal consistency.
    pub fn validate(&self) -> Result<(), String> {
        let tags = 1usize << self.tag_bits;
        if self.streams == 0 {
            return Err("streams must be at least 1".into());
        }
        if self.family == SocketFamily::FullyOrdered && self.streams != 1 {
            return Err("a fully-ordered socket has exactly one stream".into());
        }
        if self.max_payload == 0 {
            return Err("max_payload must be at least 1".into());
        }
        if self.priority > 7 {
            return Err(format!("priority {} outside 0..=7", self.priority));
        }
        if self.capacity == 0 {
            return Err("capacity must be at least 1".into());
        }
        match self.tag_policy {
            TagPolicy::SingleOutstanding if self.capacity != 1 => {
                Err("single-outstanding policy requires capacity 1".into())
            }
            TagPolicy::PerStream { streams } => {
                let needed = match self.family {
                    SocketFamily::FullyOrdered => 1,
                    SocketFamily::Threaded => usize::from(self.streams),
                    SocketFamily::IdBased => 2 * usize::from(self.streams),
                };
                if usize::from(streams) < needed || usize::from(streams) > tags {
                    Err(format!("per-stream policy needs {needed} dedicated tags (at most {tags}), has {streams}"))
                } else {
                    Ok(())
                }
            }
            TagPolicy::Pooled { capacity } if capacity == 0 || usize::from(capacity) > tags => {
                Err(format!("pooled capacity {capacity} outside 1..={tags}"))
            }
            _ => Ok(()),
        }
    }
}

/// Outcome of presenting one transaction to an initiator NIU.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ingress {
    Packets {
        tag: Tag,
        packets: Vec<Packet>,
    },
    /// No tag available this cycle.
    Stall,
    /// Answered locally without touching the fabric.
    Local(Status),
}

/// Converts a socket transaction to request packets, recording it in
/// `pending` under a freshly assigned tag.
pub fn ingress_pack(
    req: &TransactionRequest,
    cfg: &InitiatorConfig,
    map: &AddressMap,
    pending: &mut PendingTable,
    txn: u64,
    now: u64,
    fabric: Endianness,
) -> Result<Ingress, NiuError> {
    let violations = validate_request(req);
    if !violations.is_empty() {
        return Err(NiuError::InvalidRequest(violations));
    }
    if !cfg.supports(req.order_key) {
        return Err(NiuError::KeyNotSupported { niu: cfg.id, key: req.order_key });
    }
    let len = req.byte_len();
    let (target, offset) = match map.decode_range(req.address, len) {
        Decoded::Hit { target, offset } => (target, offset),
        Decoded::Miss => return Ok(Ingress::Local(Status::ErrorDecode)),
    };
    // atomic accesses are never chopped
    if req.opcode.is_atomic() && len > cfg.max_payload {
        return Ok(Ingress::Local(Status::ErrorSlave));
    }
    let data = if req.opcode.is_write() {
        endianness_convert(&req.data, usize::from(req.beat_size), cfg.endianness, fabric)?
    } else {
        Vec::new()
    };
    let chunk = cfg.max_payload;
    let fragments = len.div_ceil(chunk) as u16;
    let entry = PendingEntry {
        txn,
        request: req.clone(),
        issued_at: now,
        target,
        fragments,
        received: 0,
        data: if req.opcode.is_read() { vec![0; len as usize] } else { Vec::new() },
        status: Status::Okay,
    };
    let tag = match assign_tag(cfg.tag_policy, entry, pending) {
        Ok(tag) => tag,
        Err(_) => return Ok(Ingress::Stall),
    };
    let lock_marker = match req.opcode {
        Opcode::ReadEx => LockMarker::Acquire,
        Opcode::StoreLockedRelease => LockMarker::Release,
        _ => LockMarker::None,
    };
    let packets = (0..fragments)
        .map(|i| {
            let start = u32::from(i) * chunk;
            let frag_len = chunk.min(len - start);
            let payload = if req.opcode.is_write() {
                data[start as usize..(start + frag_len) as usize].to_vec()
            } else {
                Vec::new()
            };
            Packet {
                header: PacketHeader {
                    slv_addr: SlvAddr { target, offset: offset + start },
                    mst_addr: cfg.id,
                    tag,
                    command: Command::Request(req.opcode),
                    priority: cfg.priority,
                    user_bits: UserBits::default().with_exclusive(req.exclusive),
                    lock_marker,
                    payload_len: frag_len,
                    fragment: i,
                    last_fragment: i + 1 == fragments,
                },
                payload,
            }
        })
        .collect();
    Ok(Ingress::Packets { tag, packets })
}

/// A transaction whose last response fragment has arrived.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompletedTxn {
    pub txn: u64,
    pub tag: Tag,
    pub request: TransactionRequest,
    pub issued_at: u64,
    pub response: TransactionResponse,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Unpacked {
    Incomplete,
    Complete(Box<CompletedTxn>),
}

fn severity(s: Status) -> u8 {
    match s {
        Status::Okay | Status::ExOkay => 0,
        Status::ExFail => 1,
        Status::ErrorSlave => 2,
        Status::ErrorDecode => 3,
    }
}

/// Folds one response fragment into its pending entry.
pub fn egress_unpack(
    packet: &Packet,
    pending: &mut PendingTable,
    cfg: &InitiatorConfig,
    fabric: Endianness,
) -> Result<Unpacked, NiuError> {
    let h = &packet.header;
    let Command::Response(status) = h.command else {
        return Err(NiuError::WrongPacketKind(cfg.id));
    };
    let orphan = NiuError::OrphanResponse { mst: h.mst_addr, tag: h.tag };
    let entry = pending.front_mut(h.tag).ok_or(orphan.clone())?;
    if h.fragment >= entry.fragments {
        return Err(orphan);
    }
    if entry.request.opcode.is_read() {
        let start = usize::from(h.fragment) * cfg.max_payload as usize;
        let end = start + packet.payload.len();
        if end > entry.data.len() {
            return Err(orphan);
        }
        entry.data[start..end].copy_from_slice(&packet.payload);
    }
    if severity(status) > severity(entry.status) || entry.received == 0 {
        entry.status = status;
    }
    entry.received += 1;
    if entry.received < entry.fragments {
        return Ok(Unpacked::Incomplete);
    }
    let entry = pending.retire(h.tag).expect("front entry exists");
    let data = if entry.request.opcode.is_read() {
        endianness_convert(&entry.data, usize::from(entry.request.beat_size), fabric, cfg.endianness)?
    } else {
        Vec::new()
    };
    Ok(Unpacked::Complete(Box::new(CompletedTxn {
        txn: entry.txn,
        tag: h.tag,
        response: TransactionResponse {
            master_id: entry.request.master_id,
            order_key: entry.request.order_key,
            status: entry.status,
            data,
        },
        issued_at: entry.issued_at,
        request: entry.request,
    })))
}

/// A response handed to the socket.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Released {
    pub txn: u64,
    pub opcode: Opcode,
    pub address: Address,
    pub issued_at: u64,
    pub response: TransactionResponse,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Offer {
    Accepted { txn: u64, tag: Option<Tag>, packets: Vec<Packet>, released: Vec<Released> },
    Stall,
}

/// Result of feeding one response packet to the NIU.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Received {
    /// `(txn, tag)` when the packet completed a transaction and freed its
    /// slot.
    pub freed: Option<(u64, Tag)>,
    pub released: Vec<Released>,
}

/// An initiator NIU with its lookup table and response release stage.
#[derive(Clone, Debug)]
pub struct InitiatorNiu {
    pub cfg: InitiatorConfig,
    pub pending: PendingTable,
    reorder: ResponseReorder<Released>,
    next_txn: u64,
}

impl InitiatorNiu {
    pub fn new(cfg: InitiatorConfig) -> Self {
        let capacity = match cfg.tag_policy {
            TagPolicy::SingleOutstanding => 1,
            TagPolicy::Pooled { capacity } => usize::from(capacity).min(cfg.capacity),
            TagPolicy::PerStream { .. } => cfg.capacity,
        };
        InitiatorNiu {
            pending: PendingTable::new(capacity, cfg.tag_bits),
            cfg,
            reorder: ResponseReorder::new(),
            next_txn: 0,
        }
    }

    pub fn id(&self) -> NiuId {
        self.cfg.id
    }

    /// Transactions accepted but not yet finished at the socket or fabric.
    pub fn is_idle(&self) -> bool {
        self.pending.is_empty() && self.reorder.outstanding() == 0
    }

    pub fn outstanding(&self) -> usize {
        self.reorder.outstanding()
    }

    pub fn offer(
        &mut self,
        req: &TransactionRequest,
        now: u64,
        map: &AddressMap,
        fabric: Endianness,
    ) -> Result<Offer, NiuError> {
        let txn = self.next_txn;
        let ingress = ingress_pack(req, &self.cfg, map, &mut self.pending, txn, now, fabric)?;
        let (tag, packets, local) = match ingress {
            Ingress::Stall => return Ok(Offer::Stall),
            Ingress::Packets { tag, packets } => (Some(tag), packets, None),
            Ingress::Local(status) => (None, Vec::new(), Some(status)),
        };
        self.next_txn += 1;
        if needs_response(req.opcode) {
            self.reorder.expect(req.order_key, txn);
        }
        let mut released = Vec::new();
        if let Some(status) = local {
            if needs_response(req.opcode) {
                let data = if req.opcode.is_read() { vec![0; req.byte_len() as usize] } else { Vec::new() };
                let rel = Released {
                    txn,
                    opcode: req.opcode,
                    address: req.address,
                    issued_at: now,
                    response: TransactionResponse { master_id: req.master_id, order_key: req.order_key, status, data },
                };
                released = self.reorder.complete(req.order_key, txn, rel).into_iter().map(|(_, r)| r).collect();
            }
        }
        Ok(Offer::Accepted { txn, tag, packets, released })
    }

    pub fn receive(&mut self, packet: &Packet, fabric: Endianness) -> Result<Received, NiuError> {
        if packet.kind() != PacketKind::Response {
            return Err(NiuError::WrongPacketKind(self.cfg.id));
        }
        match egress_unpack(packet, &mut self.pending, &self.cfg, fabric)? {
            Unpacked::Incomplete => Ok(Received::default()),
            Unpacked::Complete(done) => {
                let done = *done;
                let freed = Some((done.txn, done.tag));
                if !needs_response(done.request.opcode) {
                    return Ok(Received { freed, released: Vec::new() });
                }
                let key = done.request.order_key;
                let rel = Released {
                    txn: done.txn,
                    opcode: done.request.opcode,
                    address: done.request.address,
                    issued_at: done.issued_at,
                    response: done.response,
                };
                let released = self.reorder.complete(key, done.txn, rel).into_iter().map(|(_, r)| r).collect();
                Ok(Received { freed, released })
            }
        }
    }

    /// Live transactions, for timeout reports.
    pub fn stuck(&self) -> Vec<(Tag, &PendingEntry)> {
        self.pending.entries().collect()
    }
}
