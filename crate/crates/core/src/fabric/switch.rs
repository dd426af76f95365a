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

//! Input-buffered switch with per-class FIFOs.
//!
//! Every input port has one FIFO per buffer class. A flit that arrived in
//! cycle `t` may leave in cycle `t + 1` at the earliest. Under wormhole
//! switching a head may go as soon as it is buffered; under store-and-forward
//! the whole packet must be buffered first. Either way the output stays
//! granted to one input until the tail has passed, so packets never
//! interleave on a link within a class. The two classes share each output
//! link and take turns when both have a flit ready.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fabric::arbiter::{arbitrate, lock_handle, ArbiterState, LockTransition};
use crate::fabric::routing::{route_packet, RoutingTable};
use crate::fabric::topology::{Port, SwitchId};
use crate::fabric::FabricError;
use crate::link::Flit;
use crate::niu::{PacketHeader, PacketKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportMode {
    #[default]
    Wormhole,
    StoreAndForward,
}

impl TransportMode {
    pub const ALL: [TransportMode; 2] = [TransportMode::Wormhole, TransportMode::StoreAndForward];

    pub fn name(self) -> &'static str {
        match self {
            TransportMode::Wormhole => "wormhole",
            TransportMode::StoreAndForward => "store_and_forward",
        }
    }
}

impl fmt::Display for TransportMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransportMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "wormhole" | "wh" => Ok(TransportMode::Wormhole),
            "store_and_forward" | "saf" => Ok(TransportMode::StoreAndForward),
            _ => Err(format!("unknown transport mode `{s}` (expected wormhole or store_and_forward)")),
        }
    }
}

/// Virtual buffer class. Requests and responses never share buffers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BufferClass {
    Request = 0,
    Response = 1,
}

pub const CLASSES: usize = 2;

impl BufferClass {
    pub const ALL: [BufferClass; CLASSES] = [BufferClass::Request, BufferClass::Response];

    pub fn of(header: &PacketHeader) -> BufferClass {
        match header.kind() {
            PacketKind::Request => BufferClass::Request,
            PacketKind::Response => BufferClass::Response,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            BufferClass::Request => "req",
            BufferClass::Response => "resp",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BufferedFlit {
    pub flit: Flit,
    pub arrived: u64,
}

/// One input FIFO.
#[derive(Clone, Debug, Default)]
pub struct InputBuffer {
    fifo: VecDeque<BufferedFlit>,
    /// Arrival cycle of every buffered tail, oldest first.
    tails: VecDeque<u64>,
    /// Output the front packet has been granted, while it is in progress.
    bound: Option<Port>,
}

impl InputBuffer {
    pub fn push(&mut self, flit: Flit, now: u64) {
        if flit.is_tail() {
            self.tails.push_back(now);
        }
        self.fifo.push_back(BufferedFlit { flit, arrived: now });
    }

    pub fn len(&self) -> usize {
        self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fifo.is_empty()
    }

    pub fn front(&self) -> Option<&BufferedFlit> {
        self.fifo.front()
    }

    fn pop(&mut self) -> BufferedFlit {
        let f = self.fifo.pop_front().expect("pop from empty input buffer");
        if f.flit.is_tail() {
            self.tails.pop_front();
        }
        f
    }

    /// Header of the front packet if its head may compete for an output
    /// this cycle.
    fn ready_head(&self, mode: TransportMode, now: u64) -> Option<&PacketHeader> {
        if self.bound.is_some() {
            return None;
        }
        let front = self.fifo.front()?;
        let header = front.flit.header()?;
        let ready = match mode {
            TransportMode::Wormhole => front.arrived < now,
            TransportMode::StoreAndForward => self.tails.front().is_some_and(|t| *t < now),
        };
        ready.then_some(header)
    }
}

#[derive(Clone, Debug)]
pub struct OutputPort {
    pub arbiters: [ArbiterState; CLASSES],
    /// Input currently holding this output, per class.
    pub holder: [Option<Port>; CLASSES],
    last_class: usize,
}

impl OutputPort {
    fn new(inputs: usize) -> Self {
        OutputPort {
            arbiters: [ArbiterState::new(inputs), ArbiterState::new(inputs)],
            holder: [None; CLASSES],
            last_class: CLASSES - 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Switch {
    pub id: SwitchId,
    pub inputs: Vec<[InputBuffer; CLASSES]>,
    pub outputs: Vec<OutputPort>,
}

impl Switch {
    pub fn new(id: SwitchId, ports: u8) -> Self {
        let n = usize::from(ports);
        Switch {
            id,
            inputs: (0..n).map(|_| Default::default()).collect(),
            outputs: (0..n).map(|_| OutputPort::new(n)).collect(),
        }
    }

    pub fn accept(&mut self, port: Port, class: BufferClass, flit: Flit, now: u64) {
        self.inputs[usize::from(port)][class.index()].push(flit, now);
    }

    pub fn buffered(&self) -> usize {
        self.inputs.iter().flatten().map(InputBuffer::len).sum()
    }

    pub fn lock_owner(&self, port: Port) -> Option<crate::niu::NiuId> {
        self.outputs[usize::from(port)].arbiters[BufferClass::Request.index()].lock_owner
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Forward {
    pub input: Port,
    pub output: Port,
    pub class: BufferClass,
    pub flit: Flit,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepOutcome {
    pub forwards: Vec<Forward>,
    /// `(output, transition)` for every lock change this cycle.
    pub locks: Vec<(Port, LockTransition)>,
    /// Outputs where waiting request heads were all shut out by a lock.
    pub lock_blocked: Vec<Port>,
}

/// Advances one switch by one cycle.
///
/// `can_send(output, class)` reports whether the downstream link accepts a
/// flit of that class now (rate limit and credit). At most one flit leaves
/// each output per cycle.
pub fn switch_step(
    sw: &mut Switch,
    mode: TransportMode,
    now: u64,
    table: &RoutingTable,
    can_send: impl Fn(Port, BufferClass) -> bool,
) -> Result<StepOutcome, FabricError> {
    let ports = sw.outputs.len();
    // heads waiting for each (output, class)
    let mut waiting: Vec<[Vec<(usize, PacketHeader)>; CLASSES]> = vec![Default::default(); ports];
    for (inp, bufs) in sw.inputs.iter().enumerate() {
        for class in BufferClass::ALL {
            if let Some(h) = bufs[class.index()].ready_head(mode, now) {
                let out = route_packet(table, sw.id, h)?;
                if usize::from(out) >= ports {
                    return Err(FabricError::Unroutable { target: h.destination(), switch: sw.id });
                }
                waiting[usize::from(out)][class.index()].push((inp, *h));
            }
        }
    }

    let mut outcome = StepOutcome::default();
    for (out, waiting_here) in waiting.iter().enumerate() {
        let port = out as Port;
        // the input that would send on each class this cycle
        let mut pick: [Option<usize>; CLASSES] = [None; CLASSES];
        for class in BufferClass::ALL {
            let c = class.index();
            if !can_send(port, class) {
                continue;
            }
            let op = &sw.outputs[out];
            if let Some(inp) = op.holder[c] {
                let front = sw.inputs[usize::from(inp)][c].front();
                if front.is_some_and(|f| f.arrived < now) {
                    pick[c] = Some(usize::from(inp));
                }
            } else if !waiting_here[c].is_empty() {
                let cands: Vec<(usize, &PacketHeader)> = waiting_here[c].iter().map(|(i, h)| (*i, h)).collect();
                let mut probe = op.arbiters[c].clone();
                pick[c] = arbitrate(&cands, &mut probe);
                if pick[c].is_none() {
                    outcome.lock_blocked.push(port);
                }
            }
        }
        let op = &mut sw.outputs[out];
        let class = match pick {
            [Some(_), Some(_)] => BufferClass::ALL[(op.last_class + 1) % CLASSES],
            [Some(_), None] => BufferClass::Request,
            [None, Some(_)] => BufferClass::Response,
            [None, None] => continue,
        };
        let c = class.index();
        let inp = pick[c].expect("class chosen with a pick");
        if op.holder[c].is_none() {
            let cands: Vec<(usize, &PacketHeader)> = waiting_here[c].iter().map(|(i, h)| (*i, h)).collect();
            let won = arbitrate(&cands, &mut op.arbiters[c]);
            debug_assert_eq!(won, Some(inp));
            let header = &waiting_here[c].iter().find(|(i, _)| *i == inp).expect("winner waits").1;
            if class == BufferClass::Request {
                if let Some(t) = lock_handle(header, &mut op.arbiters[c])? {
                    outcome.locks.push((port, t));
                }
            }
            op.holder[c] = Some(inp as Port);
            sw.inputs[inp][c].bound = Some(port);
        }
        op.last_class = c;
        let buf = &mut sw.inputs[inp][c];
        let flit = buf.pop().flit;
        if flit.is_tail() {
            op.holder[c] = None;
            buf.bound = None;
        }
        outcome.forwards.push(Forward { input: inp as Port, output: port, class, flit });
    }
    Ok(outcome)
}
