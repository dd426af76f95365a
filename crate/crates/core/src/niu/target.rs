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

//! Target-side NIU serving request packets from a flat memory.

use crate::niu::monitor::{ExclusiveMonitorSet, MonitorChange, MonitorEvent, DEFAULT_GRANULE};
use crate::niu::packet::{Command, LockMarker, NiuId, Packet, PacketHeader, UserBits};
use crate::niu::NiuError;
use crate::transaction::{Address, MasterId, Opcode, Status};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetConfig {
    pub id: NiuId,
    pub base: Address,
    /// Size of the decoded region.
    pub size: u64,
    /// Backing memory; offsets past it answer `ERROR_SLAVE`.
    pub mem_size: u32,
    pub granule: u32,
}

impl TargetConfig {
    pub fn new(id: NiuId, base: Address, size: u32) -> Self {
        TargetConfig { id, base, size: u64::from(size), mem_size: size, granule: DEFAULT_GRANULE }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Handled {
    pub response: Packet,
    pub monitor_changes: Vec<MonitorChange>,
    /// Outcome of a store-exclusive: `Some(true)` when it won.
    pub exclusive_won: Option<bool>,
}

/// Serves one request packet and builds its response.
///
/// Posted stores still get a response packet; the initiator NIU consumes it
/// as an internal completion.
pub fn target_handle(
    packet: &Packet,
    memory: &mut [u8],
    monitors: &mut ExclusiveMonitorSet,
) -> Result<Handled, NiuError> {
    let h = &packet.header;
    let Command::Request(opcode) = h.command else {
        return Err(NiuError::WrongPacketKind(h.slv_addr.target));
    };
    let master = MasterId(h.mst_addr.0);
    let offset = h.slv_addr.offset;
    let len = h.payload_len;
    let in_bounds = u64::from(offset) + u64::from(len) <= memory.len() as u64;
    let range = offset as usize..(offset + len) as usize;

    let mut changes = Vec::new();
    let mut exclusive_won = None;
    let mut data = Vec::new();
    let status = if !in_bounds {
        if opcode.is_read() {
            data = vec![0; len as usize];
        }
        Status::ErrorSlave
    } else {
        match opcode {
            Opcode::Load | Opcode::ReadEx => {
                data = memory[range].to_vec();
                Status::Okay
            }
            Opcode::LoadExclusive => {
                data = memory[range].to_vec();
                changes.extend(monitors.update(MonitorEvent::LoadExclusive { master, address: offset }));
                Status::ExOkay
            }
            Opcode::Store | Opcode::StorePosted | Opcode::StoreLockedRelease => {
                memory[range].copy_from_slice(&packet.payload);
                changes.extend(monitors.update(MonitorEvent::Store { master, address: offset, len }));
                Status::Okay
            }
            Opcode::StoreExclusive => {
                let won = monitors.is_armed(master, offset);
                if won {
                    memory[range].copy_from_slice(&packet.payload);
                    changes.extend(monitors.update(MonitorEvent::Store { master, address: offset, len }));
                }
                changes.extend(monitors.update(MonitorEvent::StoreExclusiveResolved { master, success: won }));
                exclusive_won = Some(won);
                if won {
                    Status::ExOkay
                } else {
                    Status::ExFail
                }
            }
        }
    };
    let response = Packet {
        header: PacketHeader {
            slv_addr: h.slv_addr,
            mst_addr: h.mst_addr,
            tag: h.tag,
            command: Command::Response(status),
            priority: h.priority,
            user_bits: UserBits(h.user_bits.0).with_exclusive(status.is_exclusive()),
            lock_marker: LockMarker::None,
            payload_len: data.len() as u32,
            fragment: h.fragment,
            last_fragment: h.last_fragment,
        },
        payload: data,
    };
    Ok(Handled { response, monitor_changes: changes, exclusive_won })
}

#[derive(Clone, Debug)]
pub struct TargetNiu {
    pub cfg: TargetConfig,
    pub memory: Vec<u8>,
    pub monitors: ExclusiveMonitorSet,
}

impl TargetNiu {
    pub fn new(cfg: TargetConfig) -> Self {
        TargetNiu { memory: vec![0; cfg.mem_size as usize], monitors: ExclusiveMonitorSet::new(cfg.granule), cfg }
    }

    pub fn handle(&mut self, packet: &Packet) -> Result<Handled, NiuError> {
        target_handle(packet, &mut self.memory, &mut self.monitors)
    }
}
