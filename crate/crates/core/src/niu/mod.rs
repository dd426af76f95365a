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

//! Network Interface Units.
//!
//! An initiator NIU turns socket transactions into request packets and
//! response packets back into socket responses; a target NIU serves request
//! packets against a memory model. Socket-specific behavior lives entirely
//! in two places: the pending-transaction table (NIU state) and the packet
//! header fields (`tag`, user bits). The fabric sees neither.

pub mod decode;
pub mod endian;
pub mod initiator;
pub mod monitor;
pub mod packet;
pub mod reorder;
pub mod tags;
pub mod target;

use thiserror::Error;

use crate::transaction::{SocketOrderKey, Violation};

pub use decode::{address_decode, AddressMap, Decoded, Region};
pub use endian::{endianness_convert, Endianness};
pub use initiator::{egress_unpack, ingress_pack, Ingress, InitiatorConfig, InitiatorNiu, Offer, Released, Unpacked};
pub use monitor::{exclusive_monitor_update, ExclusiveMonitorSet, MonitorChange, MonitorEvent};
pub use packet::{Command, LockMarker, NiuId, Packet, PacketHeader, PacketKind, SlvAddr, Tag, UserBits};
pub use reorder::{response_release_order, ResponseReorder};
pub use tags::{assign_tag, stream_index, PendingEntry, PendingTable, Stall, TagPolicy};
pub use target::{target_handle, Handled, TargetConfig, TargetNiu};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NiuError {
    #[error("orphan response: {mst} has no live transaction on tag {tag}")]
    OrphanResponse { mst: NiuId, tag: Tag },
    #[error("ragged beat: {len} bytes is not a multiple of beat size {beat_size}")]
    RaggedBeat { len: usize, beat_size: usize },
    #[error("invalid request: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidRequest(Vec<Violation>),
    #[error("order key {key} not supported by {niu}")]
    KeyNotSupported { niu: NiuId, key: SocketOrderKey },
    #[error("{0} received a packet of the wrong kind")]
    WrongPacketKind(NiuId),
}
