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

//! Uniform transport packets exchanged between NIUs.

use std::fmt;

use crate::transaction::{Opcode, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NiuId(pub u16);

impl fmt::Display for NiuId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N{}", self.0)
    }
}

pub type Tag = u8;

/// Default tag width; bounds outstanding transactions per initiator.
pub const DEFAULT_TAG_BITS: u32 = 4;

/// Packet destination: the target NIU and the offset inside its region.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SlvAddr {
    pub target: NiuId,
    pub offset: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PacketKind {
    Request,
    Response,
}

/// Opcode for requests, status for responses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    Request(Opcode),
    Response(Status),
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Request(op) => op.fmt(f),
            Command::Response(st) => st.fmt(f),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum LockMarker {
    #[default]
    None,
    Acquire,
    Release,
}

/// Optional per-packet service bits. Bit 0 marks exclusive access.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct UserBits(pub u8);

impl UserBits {
    pub const EXCLUSIVE: u8 = 1 << 0;

    pub fn exclusive(self) -> bool {
        self.0 & Self::EXCLUSIVE != 0
    }

    pub fn with_exclusive(self, on: bool) -> Self {
        if on {
            UserBits(self.0 | Self::EXCLUSIVE)
        } else {
            UserBits(self.0 & !Self::EXCLUSIVE)
        }
    }
}

/// Everything a head flit carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PacketHeader {
    pub slv_addr: SlvAddr,
    pub mst_addr: NiuId,
    pub tag: Tag,
    pub command: Command,
    pub priority: u8,
    pub user_bits: UserBits,
    pub lock_marker: LockMarker,
    /// Bytes moved by this fragment; for read requests, the bytes requested.
    pub payload_len: u32,
    /// Chop index within the transaction.
    pub fragment: u16,
    pub last_fragment: bool,
}

impl PacketHeader {
    pub fn kind(&self) -> PacketKind {
        match self.command {
            Command::Request(_) => PacketKind::Request,
            Command::Response(_) => PacketKind::Response,
        }
    }

    /// Bytes physically carried after the header. Read requests only ask
    /// for data and carry none.
    pub fn carried_len(&self) -> u32 {
        match self.command {
            Command::Request(op) if op.is_read() => 0,
            _ => self.payload_len,
        }
    }

    /// The NIU a packet is routed toward.
    pub fn destination(&self) -> NiuId {
        match self.kind() {
            PacketKind::Request => self.slv_addr.target,
            PacketKind::Response => self.mst_addr,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Packet {
    pub header: PacketHeader,
    pub payload: Vec<u8>,
}

impl Packet {
    pub fn kind(&self) -> PacketKind {
        self.header.kind()
    }
}
