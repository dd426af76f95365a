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

//! Physical layer: flit framing and link timing.
//!
//! A packet crosses a link as one head flit followed by payload slices. The
//! timing knobs here (slice width, latency, clock ratio) only ever change
//! when things happen, never what is delivered.

use std::collections::VecDeque;

use thiserror::Error;

use crate::niu::packet::{Packet, PacketHeader};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Flit {
    Head(PacketHeader),
    Body(Vec<u8>),
    Tail(Vec<u8>),
    /// Header-only packet.
    HeadTail(PacketHeader),
}

impl Flit {
    pub fn header(&self) -> Option<&PacketHeader> {
        match self {
            Flit::Head(h) | Flit::HeadTail(h) => Some(h),
            _ => None,
        }
    }

    pub fn is_tail(&self) -> bool {
        matches!(self, Flit::Tail(_) | Flit::HeadTail(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinkParams {
    pub flit_payload_width: u32,
    pub latency: u32,
    /// Integer slowdown: at most one flit every `rate_ratio` cycles.
    pub rate_ratio: u32,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams { flit_payload_width: 8, latency: 1, rate_ratio: 1 }
    }
}

impl LinkParams {
    pub fn is_valid(&self) -> bool {
        self.flit_payload_width >= 1 && self.latency >= 1 && self.rate_ratio >= 1
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinkError {
    #[error("framing violation: {0}")]
    Framing(&'static str),
}

/// Number of flits `header` occupies at the given slice width.
pub fn flit_count(header: &PacketHeader, width: u32) -> usize {
    1 + header.carried_len().div_ceil(width) as usize
}

pub fn serialize(packet: &Packet, params: &LinkParams) -> Vec<Flit> {
    let width = params.flit_payload_width as usize;
    if packet.payload.is_empty() {
        return vec![Flit::HeadTail(packet.header)];
    }
    let mut flits = Vec::with_capacity(1 + packet.payload.len().div_ceil(width));
    flits.push(Flit::Head(packet.header));
    let mut chunks = packet.payload.chunks(width).peekable();
    while let Some(chunk) = chunks.next() {
        if chunks.peek().is_some() {
            flits.push(Flit::Body(chunk.to_vec()));
        } else {
            flits.push(Flit::Tail(chunk.to_vec()));
        }
    }
    flits
}

/// Reassembles exactly one packet from its flits.
pub fn deserialize<I>(flits: I) -> Result<Packet, LinkError>
where
    I: IntoIterator<Item = Flit>,
{
    let mut it = flits.into_iter();
    let header = match it.next() {
        Some(Flit::HeadTail(h)) => {
            if it.next().is_some() {
                return Err(LinkError::Framing("flits after tail"));
            }
            if h.carried_len() != 0 {
                return Err(LinkError::Framing("header-only packet announces payload"));
            }
            return Ok(Packet { header: h, payload: Vec::new() });
        }
        Some(Flit::Head(h)) => h,
        Some(_) => return Err(LinkError::Framing("packet does not start with a head flit")),
        None => return Err(LinkError::Framing("empty flit sequence")),
    };
    let mut payload = Vec::with_capacity(header.carried_len() as usize);
    loop {
        match it.next() {
            Some(Flit::Body(b)) => payload.extend_from_slice(&b),
            Some(Flit::Tail(b)) => {
                payload.extend_from_slice(&b);
                break;
            }
            Some(Flit::Head(_)) | Some(Flit::HeadTail(_)) => {
                return Err(LinkError::Framing("head flit inside a packet"))
            }
            None => return Err(LinkError::Framing("missing tail flit")),
        }
    }
    if it.next().is_some() {
        return Err(LinkError::Framing("flits after tail"));
    }
    if payload.len() != header.carried_len() as usize {
        return Err(LinkError::Framing("payload length disagrees with header"));
    }
    Ok(Packet { header, payload })
}

/// One direction of a physical link: a fixed-latency pipeline with a rate
/// limiter. Flits of several buffer classes share it.
#[derive(Clone, Debug)]
pub struct Channel<T> {
    pub params: LinkParams,
    in_flight: VecDeque<(u64, T)>,
    next_send: u64,
    pub flits_sent: u64,
}

impl<T> Channel<T> {
    pub fn new(params: LinkParams) -> Self {
        Channel { params, in_flight: VecDeque::new(), next_send: 0, flits_sent: 0 }
    }

    pub fn can_send(&self, now: u64) -> bool {
        now >= self.next_send
    }

    pub fn send(&mut self, now: u64, item: T) {
        debug_assert!(self.can_send(now));
        self.in_flight.push_back((now + u64::from(self.params.latency), item));
        self.next_send = now + u64::from(self.params.rate_ratio);
        self.flits_sent += 1;
    }

    /// Pops the next item whose latency has elapsed by `now`.
    pub fn arrive(&mut self, now: u64) -> Option<T> {
        match self.in_flight.front() {
            Some((at, _)) if *at <= now => self.in_flight.pop_front().map(|(_, t)| t),
            _ => None,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.in_flight.is_empty()
    }
}
