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

//! The cycle engine.
//!
//! Every cycle runs the same phases in the same order. The order is part
//! of the simulator's contract: traces depend on it.
//!
//! 1. Initiators, in NIU id order: the master offers at most one request
//!    to its NIU, then the NIU sends at most one request flit.
//! 2. Links: flits whose latency has elapsed land in receiver buffers.
//! 3. Switches, in id order: arbitration and forwarding.
//! 4. Targets, in NIU id order: a completely received request packet is
//!    served and its response queued, then at most one response flit is
//!    sent.
//! 5. Initiators, in NIU id order: a completely received response packet
//!    is unpacked and whatever the release stage frees goes to the master.
//! 6. Buffer slots drained during the cycle return their credits.
//!
//! A run ends at the start of the first cycle in which every master has
//! nothing left to issue and every initiator NIU is idle.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::fabric::{
    credit_flow, switch_step, BufferClass, CreditAction, CreditCounter, Endpoint, FabricError, LockTransition, Port,
    Switch, SwitchId, CLASSES,
};
use crate::link::{deserialize, flit_count, serialize, Channel, Flit, LinkError, LinkParams};
use crate::niu::{
    Command, InitiatorNiu, MonitorChange, NiuError, NiuId, Offer, Packet, PacketHeader, Released, Tag, TargetNiu,
};
use crate::sim::master::Master;
use crate::sim::random::RNG_ALGORITHM;
use crate::sim::scenario::Scenario;
use crate::sim::stats::Stats;
use crate::sim::trace::{EventKind, Trace, TraceEvent};
use crate::transaction::{Address, MasterId, Opcode, SocketOrderKey, Status};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error(transparent)]
    Niu(#[from] NiuError),
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Link(#[from] LinkError),
}

/// A transaction that had not finished when the run gave up.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StuckTxn {
    pub master: MasterId,
    /// `None` for a request the master never got to issue.
    pub txn: Option<u64>,
    pub key: SocketOrderKey,
    pub op: Opcode,
    pub address: Address,
    pub tag: Option<Tag>,
    pub issued_at: Option<u64>,
}

impl fmt::Display for StuckTxn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {:#x} key {}", self.master, self.op, self.address, self.key)?;
        match (self.txn, self.tag, self.issued_at) {
            (Some(txn), Some(tag), Some(at)) => write!(f, " txn {txn} tag {tag} issued at cycle {at}"),
            _ => f.write_str(" waiting to issue"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MasterSummary {
    pub id: MasterId,
    pub completed_iterations: u32,
    pub exfails: u32,
    pub errors: u32,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub cycles: u64,
    pub trace: Trace,
    /// Final contents of every target memory, in fabric byte order.
    pub memories: BTreeMap<NiuId, Vec<u8>>,
    pub stats: Stats,
    pub masters: Vec<MasterSummary>,
    /// Every response handed to each socket, in delivery order.
    pub responses: BTreeMap<MasterId, Vec<Released>>,
}

#[derive(Clone, Debug)]
pub enum FailureReason {
    Timeout { stuck: Vec<StuckTxn> },
    Fault(SimError),
}

/// A run that did not complete. The partial output is kept for
/// diagnosis.
#[derive(Clone, Debug)]
pub struct RunFailure {
    pub reason: FailureReason,
    pub output: Box<RunOutput>,
}

impl RunFailure {
    pub fn is_timeout(&self) -> bool {
        matches!(self.reason, FailureReason::Timeout { .. })
    }

    pub fn stuck(&self) -> &[StuckTxn] {
        match &self.reason {
            FailureReason::Timeout { stuck } => stuck,
            FailureReason::Fault(_) => &[],
        }
    }
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.reason {
            FailureReason::Timeout { stuck } => {
                write!(f, "timeout after {} cycles with {} stuck transaction(s)", self.output.cycles, stuck.len())?;
                for s in stuck {
                    write!(f, "\n  {s}")?;
                }
                Ok(())
            }
            FailureReason::Fault(e) => write!(f, "simulation fault at cycle {}: {e}", self.output.cycles),
        }
    }
}

impl std::error::Error for RunFailure {}

struct Wire {
    name: String,
    to: Endpoint,
    chan: Channel<(BufferClass, Flit)>,
    credits: [CreditCounter; CLASSES],
    returns: [u32; CLASSES],
    class_flits: [u64; CLASSES],
}

struct Initiator {
    niu: InitiatorNiu,
    master: Option<Master>,
    wire: usize,
    tx: VecDeque<Flit>,
    rx: Vec<Flit>,
    stalled: bool,
    stall_cycles: u64,
    stall_episodes: u64,
    issued: u64,
    latencies: Vec<u64>,
    released: Vec<Released>,
}

struct Target {
    niu: TargetNiu,
    wire: usize,
    tx: VecDeque<Flit>,
    rx: Vec<Flit>,
    served: u64,
}

enum Slot {
    Initiator(usize),
    Target(usize),
}

struct Engine<'a> {
    sc: &'a Scenario,
    now: u64,
    framing: LinkParams,
    wires: Vec<Wire>,
    switches: Vec<Switch>,
    sw_out: Vec<Vec<Option<usize>>>,
    sw_in: Vec<Vec<Option<usize>>>,
    inits: Vec<Initiator>,
    targets: Vec<Target>,
    trace: Trace,
    lock_blocked: BTreeMap<(SwitchId, Port), u64>,
}

fn niu_site(id: NiuId) -> String {
    id.to_string()
}

fn port_site(s: SwitchId, p: Port) -> String {
    format!("{s}.p{p}")
}

/// Trace event describing a packet at a site.
fn packet_event(now: u64, site: String, kind: EventKind, h: &PacketHeader) -> TraceEvent {
    let e = TraceEvent::new(now, site, kind).master(MasterId(h.mst_addr.0)).tag(h.tag);
    let e = match h.command {
        Command::Request(op) => e.op(op),
        Command::Response(st) => e.status(st),
    };
    e.info(format!("dst={} off={:#x} frag={}", h.destination(), h.slv_addr.offset, h.fragment))
}

impl<'a> Engine<'a> {
    fn new(sc: &'a Scenario) -> Self {
        let depth_floor = sc.max_packet_flits();
        let framing = LinkParams { flit_payload_width: sc.flit_width, ..LinkParams::default() };
        let switches: Vec<Switch> = sc.topology.switches.iter().map(|s| Switch::new(s.id, s.ports)).collect();
        let mut sw_out: Vec<Vec<Option<usize>>> = switches.iter().map(|s| vec![None; s.outputs.len()]).collect();
        let mut sw_in = sw_out.clone();
        let mut niu_out = BTreeMap::new();
        let mut wires = Vec::new();
        for l in &sc.topology.links {
            let depth = l.depth.max(depth_floor);
            for (from, to) in [(l.a, l.b), (l.b, l.a)] {
                let idx = wires.len();
                wires.push(Wire {
                    name: format!("{from}>{to}"),
                    to,
                    chan: Channel::new(l.params),
                    credits: [CreditCounter::new(depth); CLASSES],
                    returns: [0; CLASSES],
                    class_flits: [0; CLASSES],
                });
                match from {
                    Endpoint::Switch(s, p) => sw_out[usize::from(s.0)][usize::from(p)] = Some(idx),
                    Endpoint::Niu(n) => {
                        niu_out.insert(n, idx);
                    }
                }
                if let Endpoint::Switch(s, p) = to {
                    sw_in[usize::from(s.0)][usize::from(p)] = Some(idx);
                }
            }
        }
        let masters: BTreeMap<MasterId, Master> = sc.masters.iter().map(|m| (m.id, Master::new(m))).collect();
        let mut masters = masters;
        let mut inits: Vec<Initiator> = sc
            .initiators
            .iter()
            .map(|cfg| Initiator {
                niu: InitiatorNiu::new(cfg.clone()),
                master: masters.remove(&MasterId(cfg.id.0)),
                wire: niu_out[&cfg.id],
                tx: VecDeque::new(),
                rx: Vec::new(),
                stalled: false,
                stall_cycles: 0,
                stall_episodes: 0,
                issued: 0,
                latencies: Vec::new(),
                released: Vec::new(),
            })
            .collect();
        inits.sort_by_key(|i| i.niu.id());
        let mut targets: Vec<Target> = sc
            .targets
            .iter()
            .map(|cfg| Target {
                niu: TargetNiu::new(cfg.clone()),
                wire: niu_out[&cfg.id],
                tx: VecDeque::new(),
                rx: Vec::new(),
                served: 0,
            })
            .collect();
        targets.sort_by_key(|t| t.niu.cfg.id);
        Engine {
            sc,
            now: 0,
            framing,
            wires,
            switches,
            sw_out,
            sw_in,
            inits,
            targets,
            trace: Trace::default(),
            lock_blocked: BTreeMap::new(),
        }
    }

    fn finished(&self) -> bool {
        self.inits.iter().all(|i| i.master.as_ref().is_none_or(Master::is_done) && i.niu.is_idle())
    }

    fn step(&mut self, slots: &BTreeMap<NiuId, Slot>) -> Result<(), SimError> {
        for i in 0..self.inits.len() {
            self.initiator_issue(i)?;
            self.initiator_inject(i)?;
        }
        self.arrivals(slots);
        for s in 0..self.switches.len() {
            self.switch(s)?;
        }
        for t in 0..self.targets.len() {
            self.target_serve(t)?;
            self.target_inject(t)?;
        }
        for i in 0..self.inits.len() {
            self.initiator_receive(i)?;
        }
        for w in &mut self.wires {
            for c in 0..CLASSES {
                for _ in 0..std::mem::take(&mut w.returns[c]) {
                    credit_flow(&mut w.credits[c], CreditAction::Return)?;
                }
            }
        }
        Ok(())
    }

    fn initiator_issue(&mut self, i: usize) -> Result<(), SimError> {
        let now = self.now;
        let init = &mut self.inits[i];
        let Some(master) = init.master.as_mut() else {
            return Ok(());
        };
        let Some(req) = master.peek() else {
            return Ok(());
        };
        let (key, op, address) = (req.order_key, req.opcode, req.address);
        let site = niu_site(init.niu.id());
        match init.niu.offer(req, now, &self.sc.address_map, self.sc.fabric_endianness)? {
            Offer::Stall => {
                init.stall_cycles += 1;
                if !init.stalled {
                    init.stalled = true;
                    init.stall_episodes += 1;
                    self.trace.push(
                        TraceEvent::new(now, site, EventKind::Stall)
                            .master(master.id)
                            .key(key)
                            .op(op)
                            .address(address)
                            .info("no tag"),
                    );
                }
            }
            Offer::Accepted { txn, tag, packets, released } => {
                init.stalled = false;
                init.issued += 1;
                let mut e = TraceEvent::new(now, site, EventKind::ReqIssued)
                    .master(master.id)
                    .key(key)
                    .op(op)
                    .address(address)
                    .txn(txn);
                match tag {
                    Some(t) => e = e.tag(t),
                    None => e = e.info("local"),
                }
                self.trace.push(e);
                master.accepted();
                for p in &packets {
                    init.tx.extend(serialize(p, &self.framing));
                }
                for r in released {
                    emit_response(&mut self.trace, init, r, now);
                }
            }
        }
        Ok(())
    }

    fn initiator_inject(&mut self, i: usize) -> Result<(), SimError> {
        let init = &mut self.inits[i];
        let site = niu_site(init.niu.id());
        inject(
            &mut init.tx,
            &mut self.wires[init.wire],
            BufferClass::Request,
            self.now,
            site,
            self.framing.flit_payload_width,
            &mut self.trace,
        )
    }

    fn arrivals(&mut self, slots: &BTreeMap<NiuId, Slot>) {
        let now = self.now;
        for w in &mut self.wires {
            while let Some((class, flit)) = w.chan.arrive(now) {
                match w.to {
                    Endpoint::Switch(s, p) => self.switches[usize::from(s.0)].accept(p, class, flit, now),
                    Endpoint::Niu(n) => {
                        match slots[&n] {
                            Slot::Initiator(i) => self.inits[i].rx.push(flit),
                            Slot::Target(t) => self.targets[t].rx.push(flit),
                        }
                        // NIUs drain their receive buffer in the same cycle
                        w.returns[class.index()] += 1;
                    }
                }
            }
        }
    }

    fn switch(&mut self, s: usize) -> Result<(), SimError> {
        let now = self.now;
        let outs = &self.sw_out[s];
        let wires = &self.wires;
        let outcome = switch_step(&mut self.switches[s], self.sc.mode, now, &self.sc.routes, |port, class| {
            outs[usize::from(port)]
                .is_some_and(|w| wires[w].chan.can_send(now) && wires[w].credits[class.index()].can_send())
        })?;
        let sid = self.switches[s].id;
        for f in outcome.forwards {
            let c = f.class.index();
            if let Some(h) = f.flit.header() {
                let mut e = packet_event(now, port_site(sid, f.output), EventKind::PktForwarded, h);
                e.info = format!("{} in=p{}", e.info, f.input);
                self.trace.push(e);
            }
            let w = self.sw_out[s][usize::from(f.output)].expect("forwarded to a linked port");
            let wire = &mut self.wires[w];
            credit_flow(&mut wire.credits[c], CreditAction::Consume)?;
            wire.class_flits[c] += 1;
            wire.chan.send(now, (f.class, f.flit));
            let back = self.sw_in[s][usize::from(f.input)].expect("flits arrive over links");
            self.wires[back].returns[c] += 1;
        }
        for (port, t) in outcome.locks {
            let (kind, owner) = match t {
                LockTransition::Set(o) => (EventKind::LockSet, o),
                LockTransition::Cleared(o) => (EventKind::LockCleared, o),
            };
            self.trace.push(TraceEvent::new(now, port_site(sid, port), kind).master(MasterId(owner.0)));
        }
        for port in outcome.lock_blocked {
            *self.lock_blocked.entry((sid, port)).or_default() += 1;
        }
        Ok(())
    }

    fn target_serve(&mut self, t: usize) -> Result<(), SimError> {
        let now = self.now;
        let tg = &mut self.targets[t];
        let Some(pos) = tg.rx.iter().position(Flit::is_tail) else {
            return Ok(());
        };
        let packet: Packet = deserialize(tg.rx.drain(..=pos))?;
        let site = niu_site(tg.niu.cfg.id);
        self.trace.push(packet_event(now, site.clone(), EventKind::PktDelivered, &packet.header));
        let handled = tg.niu.handle(&packet)?;
        let base = tg.niu.cfg.base;
        let master = MasterId(packet.header.mst_addr.0);
        if let Some(won) = handled.exclusive_won {
            let granule = tg.niu.monitors.granule_of(packet.header.slv_addr.offset);
            let status = if won { Status::ExOkay } else { Status::ExFail };
            self.trace.push(
                TraceEvent::new(now, site.clone(), EventKind::ExclResolved)
                    .master(master)
                    .status(status)
                    .address(base.wrapping_add(granule)),
            );
        }
        for ch in handled.monitor_changes {
            let (kind, m, granule) = match ch {
                MonitorChange::Armed { master, granule } => (EventKind::MonitorArmed, master, granule),
                MonitorChange::Cleared { master, granule } => (EventKind::MonitorCleared, master, granule),
            };
            self.trace.push(TraceEvent::new(now, site.clone(), kind).master(m).address(base.wrapping_add(granule)));
        }
        tg.tx.extend(serialize(&handled.response, &self.framing));
        tg.served += 1;
        Ok(())
    }

    fn target_inject(&mut self, t: usize) -> Result<(), SimError> {
        let tg = &mut self.targets[t];
        let site = niu_site(tg.niu.cfg.id);
        inject(
            &mut tg.tx,
            &mut self.wires[tg.wire],
            BufferClass::Response,
            self.now,
            site,
            self.framing.flit_payload_width,
            &mut self.trace,
        )
    }

    fn initiator_receive(&mut self, i: usize) -> Result<(), SimError> {
        let now = self.now;
        let init = &mut self.inits[i];
        let Some(pos) = init.rx.iter().position(Flit::is_tail) else {
            return Ok(());
        };
        let packet = deserialize(init.rx.drain(..=pos))?;
        let site = niu_site(init.niu.id());
        self.trace.push(packet_event(now, site.clone(), EventKind::PktDelivered, &packet.header));
        let received = init.niu.receive(&packet, self.sc.fabric_endianness)?;
        if let Some((txn, tag)) = received.freed {
            self.trace.push(
                TraceEvent::new(now, site, EventKind::TagFreed)
                    .master(MasterId(packet.header.mst_addr.0))
                    .tag(tag)
                    .txn(txn),
            );
        }
        for r in received.released {
            emit_response(&mut self.trace, init, r, now);
        }
        Ok(())
    }

    fn stuck(&self) -> Vec<StuckTxn> {
        let mut out = Vec::new();
        for init in &self.inits {
            let mut live: Vec<_> = init.niu.stuck();
            live.sort_by_key(|(_, e)| e.txn);
            for (tag, e) in live {
                out.push(StuckTxn {
                    master: e.request.master_id,
                    txn: Some(e.txn),
                    key: e.request.order_key,
                    op: e.request.opcode,
                    address: e.request.address,
                    tag: Some(tag),
                    issued_at: Some(e.issued_at),
                });
            }
            if let Some(req) = init.master.as_ref().and_then(Master::peek) {
                out.push(StuckTxn {
                    master: req.master_id,
                    txn: None,
                    key: req.order_key,
                    op: req.opcode,
                    address: req.address,
                    tag: None,
                    issued_at: None,
                });
            }
        }
        out
    }

    fn finish(mut self) -> RunOutput {
        let now = self.now;
        for w in &self.wires {
            for class in BufferClass::ALL {
                let c = class.index();
                if w.class_flits[c] == 0 {
                    continue;
                }
                let (min, max) = w.credits[c].observed();
                self.trace.push(TraceEvent::new(now, w.name.clone(), EventKind::CreditSummary).info(format!(
                    "class={} min={min} max={max} depth={}",
                    class.name(),
                    w.credits[c].depth()
                )));
            }
        }
        let stats = self.stats();
        let memories = self.targets.iter().map(|t| (t.niu.cfg.id, t.niu.memory.clone())).collect();
        let masters = self
            .inits
            .iter()
            .filter_map(|i| i.master.as_ref())
            .map(|m| MasterSummary {
                id: m.id,
                completed_iterations: m.completed,
                exfails: m.exfails,
                errors: m.errors,
            })
            .collect();
        let responses =
            self.inits.iter_mut().map(|i| (MasterId(i.niu.id().0), std::mem::take(&mut i.released))).collect();
        RunOutput { responses, cycles: now, trace: self.trace, memories, stats, masters }
    }

    fn stats(&self) -> Stats {
        let mut st = Stats::default();
        let cycles = self.now;
        st.set("run.mode", self.sc.mode);
        st.set("run.seed", self.sc.seed);
        st.set("run.rng", RNG_ALGORITHM);
        st.set("run.cycles", cycles);
        let issued: u64 = self.inits.iter().map(|i| i.issued).sum();
        let responses: usize = self.inits.iter().map(|i| i.latencies.len()).sum();
        st.set("transactions.issued", issued);
        st.set("transactions.responses", responses);
        st.set(
            "transactions.posted",
            issued - responses as u64 - self.inits.iter().map(|i| i.niu.outstanding() as u64).sum::<u64>(),
        );
        for init in &self.inits {
            let m = format!("master.M{}", init.niu.id().0);
            st.set(format!("{m}.issued"), init.issued);
            st.set(format!("{m}.responses"), init.latencies.len());
            if let (Some(min), Some(max)) = (init.latencies.iter().min(), init.latencies.iter().max()) {
                let mean = init.latencies.iter().sum::<u64>() as f64 / init.latencies.len() as f64;
                st.set(format!("{m}.latency.min"), min);
                st.set(format!("{m}.latency.mean"), format!("{mean:.3}"));
                st.set(format!("{m}.latency.max"), max);
            }
            st.set(format!("{m}.stall_cycles"), init.stall_cycles);
            st.set(format!("{m}.stall_episodes"), init.stall_episodes);
            if let Some(master) = &init.master {
                if master.completed + master.exfails > 0 {
                    st.set(format!("{m}.loop.completed"), master.completed);
                    st.set(format!("{m}.loop.exfails"), master.exfails);
                }
            }
        }
        for t in &self.targets {
            st.set(format!("target.{}.requests", t.niu.cfg.id), t.served);
        }
        for w in &self.wires {
            let util = if cycles == 0 { 0.0 } else { w.chan.flits_sent as f64 / cycles as f64 };
            st.set(format!("link.{}.flits", w.name), w.chan.flits_sent);
            st.set(format!("link.{}.utilization", w.name), format!("{util:.4}"));
        }
        for ((s, p), n) in &self.lock_blocked {
            st.set(format!("switch.{}.lock_blocked_cycles", port_site(*s, *p)), n);
        }
        st
    }
}

fn emit_response(trace: &mut Trace, init: &mut Initiator, r: Released, now: u64) {
    trace.push(
        TraceEvent::new(now, niu_site(init.niu.id()), EventKind::RespEmitted)
            .master(r.response.master_id)
            .key(r.response.order_key)
            .op(r.opcode)
            .status(r.response.status)
            .address(r.address)
            .txn(r.txn),
    );
    init.latencies.push(now - r.issued_at);
    if let Some(m) = init.master.as_mut() {
        m.on_response(&r);
    }
    init.released.push(r);
}

#[allow(clippy::too_many_arguments)]
fn inject(
    tx: &mut VecDeque<Flit>,
    wire: &mut Wire,
    class: BufferClass,
    now: u64,
    site: String,
    width: u32,
    trace: &mut Trace,
) -> Result<(), SimError> {
    let c = class.index();
    if tx.is_empty() || !wire.chan.can_send(now) || !wire.credits[c].can_send() {
        return Ok(());
    }
    let flit = tx.pop_front().expect("checked non-empty");
    if let Some(h) = flit.header() {
        let mut e = packet_event(now, site, EventKind::PktInjected, h);
        e.info = format!("{} flits={}", e.info, flit_count(h, width));
        trace.push(e);
    }
    credit_flow(&mut wire.credits[c], CreditAction::Consume)?;
    wire.class_flits[c] += 1;
    wire.chan.send(now, (class, flit));
    Ok(())
}

/// Runs a scenario to completion, timeout or fault.
pub fn run(scenario: &Scenario) -> Result<RunOutput, RunFailure> {
    let mut engine = Engine::new(scenario);
    let mut slots = BTreeMap::new();
    for (i, init) in engine.inits.iter().enumerate() {
        slots.insert(init.niu.id(), Slot::Initiator(i));
    }
    for (t, tg) in engine.targets.iter().enumerate() {
        slots.insert(tg.niu.cfg.id, Slot::Target(t));
    }
    loop {
        if engine.finished() {
            return Ok(engine.finish());
        }
        if engine.now >= scenario.max_cycles {
            let stuck = engine.stuck();
            return Err(RunFailure { reason: FailureReason::Timeout { stuck }, output: Box::new(engine.finish()) });
        }
        if let Err(e) = engine.step(&slots) {
            return Err(RunFailure { reason: FailureReason::Fault(e), output: Box::new(engine.finish()) });
        }
        engine.now += 1;
    }
}
