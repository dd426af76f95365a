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

//! Socket-neutral transaction vocabulary.
//!
//! Every socket family (fully-ordered, threaded, ID-based) reduces its
//! requests and responses to the types in this module before an NIU turns
//! them into packets. Nothing here knows about packets, switches or flits.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Width of the simulated address space, in bits.
pub const ADDRESS_BITS: u32 = 32;

pub type Address = u32;

/// Identifies an initiator socket. Each initiator NIU hosts exactly one
/// master, so the value doubles as the NIU id used for `MstAddr`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MasterId(pub u16);

impl fmt::Display for MasterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Opcode {
    Load,
    Store,
    StorePosted,
    /// Locked read; captures the fabric path until the matching release.
    ReadEx,
    StoreLockedRelease,
    LoadExclusive,
    StoreExclusive,
}

impl Opcode {
    pub const ALL: [Opcode; 7] = [
        Opcode::Load,
        Opcode::Store,
        Opcode::StorePosted,
        Opcode::ReadEx,
        Opcode::StoreLockedRelease,
        Opcode::LoadExclusive,
        Opcode::StoreExclusive,
    ];

    /// True for opcodes that return data from the target.
    pub fn is_read(self) -> bool {
        matches!(self, Opcode::Load | Opcode::ReadEx | Opcode::LoadExclusive)
    }

    pub fn is_write(self) -> bool {
        !self.is_read()
    }

    pub fn is_exclusive(self) -> bool {
        matches!(self, Opcode::LoadExclusive | Opcode::StoreExclusive)
    }

    pub fn is_locked(self) -> bool {
        matches!(self, Opcode::ReadEx | Opcode::StoreLockedRelease)
    }

    /// Exclusive and locked opcodes travel as one unchopped packet.
    pub fn is_atomic(self) -> bool {
        self.is_exclusive() || self.is_locked()
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Load => "LOAD",
            Opcode::Store => "STORE",
            Opcode::StorePosted => "STORE_POSTED",
            Opcode::ReadEx => "READEX",
            Opcode::StoreLockedRelease => "STORE_LOCKED_RELEASE",
            Opcode::LoadExclusive => "LOAD_EXCLUSIVE",
            Opcode::StoreExclusive => "STORE_EXCLUSIVE",
        }
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

impl FromStr for Opcode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Opcode::ALL
            .into_iter()
            .find(|op| op.mnemonic().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown opcode `{s}`"))
    }
}

/// Only posted writes complete silently at the socket.
pub fn needs_response(opcode: Opcode) -> bool {
    opcode != Opcode::StorePosted
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Read,
    Write,
}

impl Channel {
    pub fn for_opcode(opcode: Opcode) -> Channel {
        if opcode.is_read() {
            Channel::Read
        } else {
            Channel::Write
        }
    }
}

/// The socket-side ordering handle carried by a transaction.
///
/// Fully-ordered sockets use `Single`, threaded sockets `Thread`, and
/// ID-based sockets `TxnId`. Two transactions of one master must keep their
/// response order iff their keys are equal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SocketOrderKey {
    Single,
    Thread(u8),
    TxnId { tid: u8, channel: Channel },
}

impl SocketOrderKey {
    pub fn family(self) -> SocketFamily {
        match self {
            SocketOrderKey::Single => SocketFamily::FullyOrdered,
            SocketOrderKey::Thread(_) => SocketFamily::Threaded,
            SocketOrderKey::TxnId { .. } => SocketFamily::IdBased,
        }
    }
}

impl fmt::Display for SocketOrderKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SocketOrderKey::Single => f.write_str("single"),
            SocketOrderKey::Thread(t) => write!(f, "T{t}"),
            SocketOrderKey::TxnId { tid, channel } => {
                let c = match channel {
                    Channel::Read => 'R',
                    Channel::Write => 'W',
                };
                write!(f, "ID{tid}{c}")
            }
        }
    }
}

impl FromStr for SocketOrderKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("bad order key `{s}` (expected single, T<n> or ID<n>R/ID<n>W)");
        if s.eq_ignore_ascii_case("single") {
            return Ok(SocketOrderKey::Single);
        }
        if let Some(rest) = s.strip_prefix("ID") {
            let (num, ch) = rest.split_at(rest.len().saturating_sub(1));
            let channel = match ch {
                "R" => Channel::Read,
                "W" => Channel::Write,
                _ => return Err(bad()),
            };
            let tid = num.parse().map_err(|_| bad())?;
            return Ok(SocketOrderKey::TxnId { tid, channel });
        }
        if let Some(rest) = s.strip_prefix('T') {
            return rest.parse().map(SocketOrderKey::Thread).map_err(|_| bad());
        }
        Err(bad())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SocketFamily {
    FullyOrdered,
    Threaded,
    IdBased,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderClass {
    SameStream,
    Independent,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransactionError {
    #[error("heterogeneous order keys: {0} vs {1}")]
    HeterogeneousKeys(SocketOrderKey, SocketOrderKey),
}

/// Decides whether responses for `a` then `b` must come back in issue order.
pub fn order_class(a: SocketOrderKey, b: SocketOrderKey) -> Result<OrderClass, TransactionError> {
    if a.family() != b.family() {
        return Err(TransactionError::HeterogeneousKeys(a, b));
    }
    Ok(if a == b { OrderClass::SameStream } else { OrderClass::Independent })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransactionRequest {
    pub master_id: MasterId,
    pub opcode: Opcode,
    pub address: Address,
    pub data: Vec<u8>,
    pub burst_len: u16,
    pub beat_size: u16,
    pub order_key: SocketOrderKey,
    pub exclusive: bool,
}

impl TransactionRequest {
    /// A well-formed request; store data defaults to zero bytes.
    pub fn new(
        master_id: MasterId,
        opcode: Opcode,
        address: Address,
        burst_len: u16,
        beat_size: u16,
        order_key: SocketOrderKey,
    ) -> Self {
        let len = usize::from(burst_len) * usize::from(beat_size);
        TransactionRequest {
            master_id,
            opcode,
            address,
            data: if opcode.is_write() { vec![0; len] } else { Vec::new() },
            burst_len,
            beat_size,
            order_key,
            exclusive: opcode.is_exclusive(),
        }
    }

    pub fn with_data(mut self, data: Vec<u8>) -> Self {
        self.data = data;
        self
    }

    /// Total bytes moved by the transaction.
    pub fn byte_len(&self) -> u32 {
        u32::from(self.burst_len) * u32::from(self.beat_size)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    DataLengthMismatch { expected: usize, actual: usize },
    ExclusiveFlagInconsistent,
    Misaligned { address: Address, beat_size: u16 },
    BeatSizeNotPowerOfTwo(u16),
    ZeroBurst,
    AddressOverflow,
    KeyChannelMismatch,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DataLengthMismatch { expected, actual } => {
                write!(f, "data length mismatch: expected {expected} bytes, got {actual}")
            }
            Violation::ExclusiveFlagInconsistent => f.write_str("exclusive flag inconsistent"),
            Violation::Misaligned { address, beat_size } => {
                write!(f, "address {address:#x} not aligned to beat size {beat_size}")
            }
            Violation::BeatSizeNotPowerOfTwo(b) => write!(f, "beat size {b} not a power of two"),
            Violation::ZeroBurst => f.write_str("burst length is zero"),
            Violation::AddressOverflow => f.write_str("transaction wraps the address space"),
            Violation::KeyChannelMismatch => f.write_str("order key channel does not match opcode direction"),
        }
    }
}

/// Lists every invariant a request breaks. An empty list means the request
/// is acceptable to an NIU.
pub fn validate_request(req: &TransactionRequest) -> Vec<Violation> {
    let mut out = Vec::new();
    if req.burst_len == 0 {
        out.push(Violation::ZeroBurst);
    }
    if !req.beat_size.is_power_of_two() {
        out.push(Violation::BeatSizeNotPowerOfTwo(req.beat_size));
    } else if !req.address.is_multiple_of(u32::from(req.beat_size)) {
        out.push(Violation::Misaligned { address: req.address, beat_size: req.beat_size });
    }
    let expected = if req.opcode.is_write() { req.byte_len() as usize } else { 0 };
    if req.data.len() != expected {
        out.push(Violation::DataLengthMismatch { expected, actual: req.data.len() });
    }
    if req.exclusive != req.opcode.is_exclusive() {
        out.push(Violation::ExclusiveFlagInconsistent);
    }
    if u64::from(req.address) + u64::from(req.byte_len()) > 1u64 << ADDRESS_BITS {
        out.push(Violation::AddressOverflow);
    }
    if let SocketOrderKey::TxnId { channel, .. } = req.order_key {
        if channel != Channel::for_opcode(req.opcode) {
            out.push(Violation::KeyChannelMismatch);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Status {
    Okay,
    ExOkay,
    ExFail,
    ErrorDecode,
    ErrorSlave,
}

impl Status {
    pub const ALL: [Status; 5] =
        [Status::Okay, Status::ExOkay, Status::ExFail, Status::ErrorDecode, Status::ErrorSlave];

    pub fn is_exclusive(self) -> bool {
        matches!(self, Status::ExOkay | Status::ExFail)
    }

    pub fn is_error(self) -> bool {
        matches!(self, Status::ErrorDecode | Status::ErrorSlave)
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            Status::Okay => "OKAY",
            Status::ExOkay => "EXOKAY",
            Status::ExFail => "EXFAIL",
            Status::ErrorDecode => "ERROR_DECODE",
            Status::ErrorSlave => "ERROR_SLAVE",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

impl FromStr for Status {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Status::ALL.into_iter().find(|st| st.mnemonic() == s).ok_or_else(|| format!("unknown status `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransactionResponse {
    pub master_id: MasterId,
    pub order_key: SocketOrderKey,
    pub status: Status,
    pub data: Vec<u8>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(burst: u16, beat: u16, addr: u32) -> TransactionRequest {
        TransactionRequest::new(MasterId(0), Opcode::Load, addr, burst, beat, SocketOrderKey::Single)
    }

    #[test]
    fn only_posted_stores_are_silent() {
        assert!(!needs_response(Opcode::StorePosted));
        assert!(needs_response(Opcode::Load));
        assert!(needs_response(Opcode::StoreExclusive));
        let silent: Vec<_> = Opcode::ALL.into_iter().filter(|op| !needs_response(*op)).collect();
        assert_eq!(silent, vec![Opcode::StorePosted]);
    }

    #[test]
    fn well_formed_load_validates() {
        assert!(validate_request(&load(4, 4, 0x100)).is_empty());
    }

    #[test]
    fn short_store_data_is_flagged() {
        let req = TransactionRequest::new(MasterId(0), Opcode::Store, 0x100, 2, 4, SocketOrderKey::Single)
            .with_data(vec![0; 7]);
        let v = validate_request(&req);
        assert_eq!(v, vec![Violation::DataLengthMismatch { expected: 8, actual: 7 }]);
        assert!(v[0].to_string().starts_with("data length mismatch"));
    }

    #[test]
    fn exclusive_flag_must_follow_opcode() {
        let mut req = TransactionRequest::new(MasterId(0), Opcode::LoadExclusive, 0x100, 1, 4, SocketOrderKey::Single);
        req.exclusive = false;
        let v = validate_request(&req);
        assert_eq!(v, vec![Violation::ExclusiveFlagInconsistent]);
        assert_eq!(v[0].to_string(), "exclusive flag inconsistent");
    }

    #[test]
    fn misaligned_and_ragged_requests() {
        assert!(matches!(validate_request(&load(1, 4, 0x102))[..], [Violation::Misaligned { .. }]));
        assert!(matches!(validate_request(&load(1, 3, 0x102))[..], [Violation::BeatSizeNotPowerOfTwo(3)]));
        assert!(validate_request(&load(0, 4, 0)).contains(&Violation::ZeroBurst));
        assert!(validate_request(&load(2, 4, 0xFFFF_FFFC)).contains(&Violation::AddressOverflow));
    }

    #[test]
    fn id_channel_follows_direction() {
        let mut req = load(1, 4, 0);
        req.order_key = SocketOrderKey::TxnId { tid: 1, channel: Channel::Write };
        assert_eq!(validate_request(&req), vec![Violation::KeyChannelMismatch]);
    }

    #[test]
    fn order_class_examples() {
        use SocketOrderKey::*;
        assert_eq!(order_class(Single, Single), Ok(OrderClass::SameStream));
        assert_eq!(order_class(Thread(0), Thread(1)), Ok(OrderClass::Independent));
        assert_eq!(order_class(Thread(2), Thread(2)), Ok(OrderClass::SameStream));
        let r = TxnId { tid: 3, channel: Channel::Read };
        let w = TxnId { tid: 3, channel: Channel::Write };
        assert_eq!(order_class(r, w), Ok(OrderClass::Independent));
        assert_eq!(order_class(r, r), Ok(OrderClass::SameStream));
        assert!(order_class(Single, Thread(0)).is_err());
    }

    #[test]
    fn key_text_round_trips() {
        for key in [
            SocketOrderKey::Single,
            SocketOrderKey::Thread(7),
            SocketOrderKey::TxnId { tid: 12, channel: Channel::Write },
            SocketOrderKey::TxnId { tid: 0, channel: Channel::Read },
        ] {
            assert_eq!(key.to_string().parse::<SocketOrderKey>(), Ok(key));
        }
        assert!("X1".parse::<SocketOrderKey>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_key() -> impl Strategy<Value = SocketOrderKey> {
            prop_oneof![
                Just(SocketOrderKey::Single),
                (0u8..4).prop_map(SocketOrderKey::Thread),
                (0u8..4, any::<bool>()).prop_map(|(tid, w)| SocketOrderKey::TxnId {
                    tid,
                    channel: if w { Channel::Write } else { Channel::Read },
                }),
            ]
        }

        proptest! {
            #[test]
            fn order_class_is_symmetric_and_reflexive(a in any_key(), b in any_key()) {
                prop_assert_eq!(order_class(a, b), order_class(b, a).map_err(|_| {
                    TransactionError::HeterogeneousKeys(a, b)
                }));
                prop_assert_eq!(order_class(a, a), Ok(OrderClass::SameStream));
            }
        }
    }
}
