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

//! Scenario files.
//!
//! A scenario is a TOML document with four sections:
//!
//! ```toml
//! [run]
//! mode = "wormhole"            # or "store_and_forward"
//! max_cycles = 100000
//! seed = 7
//! fabric_endianness = "little"
//!
//! [topology]
//! routing = "auto"             # or "table" with [[topology.routes]]
//! switches = [4, 4]            # port count of S0, S1, ...
//! link_defaults = { flit_width = 8, latency = 1, rate_ratio = 1, depth = 4 }
//! links = [{ a = "S0.0", b = "S1.0" }]
//!
//! [[nius]]
//! id = 0
//! role = "initiator"
//! switch = 0
//! port = 1
//! family = "threaded"          # fully_ordered | threaded | id_based
//! streams = 2
//! tag_policy = "pooled"        # single_outstanding | per_stream | pooled
//! capacity = 4
//!
//! [[nius]]
//! id = 1
//! role = "target"
//! switch = 1
//! port = 1
//! base = 0x0
//! size = 0x1000
//!
//! [[workload]]
//! master = 0
//! kind = "script"              # script | increment | random
//! ops = [{ op = "STORE", addr = 0x10, beats = 2, beat_size = 4, key = "T1" }]
//! ```
//!
//! Master `n` is the socket behind initiator NIU `n`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fabric::{
    auto_routes, validate_routes, Endpoint, FabricError, LinkSpec, Port, RoutingTable, SwitchId, SwitchSpec, Topology,
    TransportMode,
};
use crate::link::LinkParams;
use crate::niu::initiator::DEFAULT_MAX_PAYLOAD;
use crate::niu::monitor::DEFAULT_GRANULE;
use crate::niu::packet::DEFAULT_TAG_BITS;
use crate::niu::{AddressMap, Endianness, InitiatorConfig, NiuId, Region, TagPolicy, TargetConfig};
use crate::sim::random::{expand_random_workload, RandomWorkload};
use crate::transaction::{
    validate_request, Address, Channel, MasterId, Opcode, SocketFamily, SocketOrderKey, TransactionRequest,
};

pub const DEFAULT_MAX_CYCLES: u64 = 100_000;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub run: RunSection,
    pub topology: TopologySection,
    #[serde(default)]
    pub nius: Vec<NiuSection>,
    #[serde(default)]
    pub workload: Vec<WorkloadSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub mode: TransportMode,
    pub max_cycles: u64,
    pub seed: u64,
    pub fabric_endianness: Endianness,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            mode: TransportMode::Wormhole,
            max_cycles: DEFAULT_MAX_CYCLES,
            seed: 0,
            fabric_endianness: Endianness::Little,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingMode {
    #[default]
    Auto,
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkDefaults {
    /// Payload bytes per flit, shared by every link.
    pub flit_width: u32,
    pub latency: u32,
    pub rate_ratio: u32,
    pub depth: u32,
}

impl Default for LinkDefaults {
    fn default() -> Self {
        LinkDefaults { flit_width: 8, latency: 1, rate_ratio: 1, depth: 4 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    #[serde(default)]
    pub routing: RoutingMode,
    #[serde(default)]
    pub link_defaults: LinkDefaults,
    pub switches: Vec<u8>,
    #[serde(default)]
    pub links: Vec<LinkSection>,
    #[serde(default)]
    pub routes: Vec<RouteSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub a: String,
    pub b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_ratio: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSection {
    pub switch: u16,
    pub target: u16,
    pub port: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Initiator,
    Target,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagPolicyName {
    SingleOutstanding,
    PerStream,
    Pooled,
}

/// One NIU. Initiator-only and target-only keys are rejected on the other
/// role.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NiuSection {
    pub id: u16,
    pub role: Role,
    pub switch: u16,
    pub port: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<SocketFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub streams: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag_policy: Option<TagPolicyName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_payload: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endianness: Option<Endianness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag_bits: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mem_size: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granule: Option<u32>,
}

impl NiuSection {
    pub fn initiator(id: u16, switch: u16, port: u8, family: SocketFamily) -> Self {
        NiuSection {
            id,
            role: Role::Initiator,
            switch,
            port,
            family: Some(family),
            streams: None,
            tag_policy: None,
            capacity: None,
            max_payload: None,
            endianness: None,
            priority: None,
            tag_bits: None,
            base: None,
            size: None,
            mem_size: None,
            granule: None,
        }
    }

    pub fn target(id: u16, switch: u16, port: u8, base: u32, size: u64) -> Self {
        NiuSection {
            role: Role::Target,
            family: None,
            base: Some(base),
            size: Some(size),
            ..NiuSection::initiator(id, switch, port, SocketFamily::FullyOrdered)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadKind {
    Script,
    Increment,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncrementFlavor {
    /// LOAD_EXCLUSIVE / STORE_EXCLUSIVE with retry on failure.
    Exclusive,
    /// READEX / STORE_LOCKED_RELEASE.
    Lock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpSection {
    pub op: String,
    pub addr: u32,
    #[serde(default = "one")]
    pub beats: u16,
    #[serde(default = "four")]
    pub beat_size: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Vec<u8>>,
}

fn one() -> u16 {
    1
}

fn four() -> u16 {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    pub master: u16,
    pub kind: WorkloadKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ops: Vec<OpSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flavor: Option<IncrementFlavor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomWorkload>,
}

impl WorkloadSection {
    pub fn script(master: u16, ops: Vec<OpSection>) -> Self {
        WorkloadSection {
            master,
            kind: WorkloadKind::Script,
            ops,
            flavor: None,
            address: None,
            iterations: None,
            key: None,
            random: None,
        }
    }

    pub fn increment(master: u16, flavor: IncrementFlavor, address: u32, iterations: u32) -> Self {
        WorkloadSection {
            kind: WorkloadKind::Increment,
            flavor: Some(flavor),
            address: Some(address),
            iterations: Some(iterations),
            ..WorkloadSection::script(master, Vec::new())
        }
    }

    pub fn random(master: u16, params: RandomWorkload) -> Self {
        WorkloadSection {
            kind: WorkloadKind::Random,
            random: Some(params),
            ..WorkloadSection::script(master, Vec::new())
        }
    }
}

/// A retry loop adding one to a 32-bit counter `iterations` times.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncrementSpec {
    pub flavor: IncrementFlavor,
    pub address: Address,
    pub iterations: u32,
    /// Key for the load half; the store half uses the write channel for
    /// ID-based sockets.
    pub key: SocketOrderKey,
    pub endianness: Endianness,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Program {
    Script(Vec<TransactionRequest>),
    Increment(IncrementSpec),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MasterSpec {
    pub id: MasterId,
    pub program: Program,
}

/// A validated scenario, ready to run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub mode: TransportMode,
    pub max_cycles: u64,
    pub seed: u64,
    pub fabric_endianness: Endianness,
    pub topology: Topology,
    pub routes: RoutingTable,
    pub flit_width: u32,
    pub address_map: AddressMap,
    pub initiators: Vec<InitiatorConfig>,
    pub targets: Vec<TargetConfig>,
    pub masters: Vec<MasterSpec>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("{0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("{0}")]
    Fabric(#[from] FabricError),
}

fn field_err(field: impl fmt::Display, message: impl fmt::Display) -> ScenarioError {
    ScenarioError::Field { field: field.to_string(), message: message.to_string() }
}

/// Parses `S<n>.<port>` or `S<n>.p<port>`.
pub fn parse_switch_port(s: &str) -> Result<(SwitchId, Port), String> {
    let bad = || format!("bad switch port `{s}` (expected S<switch>.<port>)");
    let rest = s.strip_prefix('S').ok_or_else(bad)?;
    let (sw, port) = rest.split_once('.').ok_or_else(bad)?;
    let port = port.strip_prefix('p').unwrap_or(port);
    Ok((SwitchId(sw.parse().map_err(|_| bad())?), port.parse().map_err(|_| bad())?))
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string().trim_end().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialize")
    }

    /// Applies the same link parameters to every link.
    pub fn with_uniform_links(mut self, flit_width: u32, latency: u32, rate_ratio: u32) -> Self {
        let d = &mut self.topology.link_defaults;
        d.flit_width = flit_width;
        d.latency = latency;
        d.rate_ratio = rate_ratio;
        for l in &mut self.topology.links {
            l.latency = None;
            l.rate_ratio = None;
        }
        self
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        Scenario::build(ScenarioFile::parse(text)?)
    }

    pub fn with_mode(mut self, mode: TransportMode) -> Self {
        self.mode = mode;
        self.file.run.mode = mode;
        self
    }

    pub fn with_max_cycles(mut self, max_cycles: u64) -> Self {
        self.max_cycles = max_cycles;
        self.file.run.max_cycles = max_cycles;
        self
    }

    pub fn initiator(&self, id: NiuId) -> Option<&InitiatorConfig> {
        self.initiators.iter().find(|c| c.id == id)
    }

    pub fn target(&self, id: NiuId) -> Option<&TargetConfig> {
        self.targets.iter().find(|c| c.id == id)
    }

    /// Largest packet, in flits, any NIU can emit.
    pub fn max_packet_flits(&self) -> u32 {
        let payload = self.initiators.iter().map(|c| c.max_payload).max().unwrap_or(0);
        1 + payload.div_ceil(self.flit_width)
    }

    pub fn build(file: ScenarioFile) -> Result<Self, ScenarioError> {
        let run = &file.run;
        if run.max_cycles == 0 {
            return Err(field_err("run.max_cycles", "must be at least 1"));
        }
        let topo_sec = &file.topology;
        let d = topo_sec.link_defaults;
        let default_params =
            LinkParams { flit_payload_width: d.flit_width, latency: d.latency, rate_ratio: d.rate_ratio };
        if !default_params.is_valid() || d.depth == 0 {
            return Err(field_err(
                "topology.link_defaults",
                "flit_width, latency, rate_ratio and depth must all be at least 1",
            ));
        }
        if topo_sec.switches.is_empty() {
            return Err(field_err("topology.switches", "at least one switch is required"));
        }
        let switches: Vec<SwitchSpec> = topo_sec
            .switches
            .iter()
            .enumerate()
            .map(|(i, &ports)| SwitchSpec { id: SwitchId(i as u16), ports })
            .collect();
        let mut links = Vec::new();
        for (i, l) in topo_sec.links.iter().enumerate() {
            let field = format!("topology.links[{i}]");
            let (sa, pa) = parse_switch_port(&l.a).map_err(|m| field_err(format!("{field}.a"), m))?;
            let (sb, pb) = parse_switch_port(&l.b).map_err(|m| field_err(format!("{field}.b"), m))?;
            let params = LinkParams {
                latency: l.latency.unwrap_or(d.latency),
                rate_ratio: l.rate_ratio.unwrap_or(d.rate_ratio),
                ..default_params
            };
            links.push(LinkSpec {
                a: Endpoint::Switch(sa, pa),
                b: Endpoint::Switch(sb, pb),
                params,
                depth: l.depth.unwrap_or(d.depth),
            });
        }

        let mut initiators = Vec::new();
        let mut targets = Vec::new();
        let mut regions = Vec::new();
        let mut ids = BTreeSet::new();
        for (i, n) in file.nius.iter().enumerate() {
            let field = format!("nius[{i}]");
            if !ids.insert(n.id) {
                return Err(field_err(format!("{field}.id"), format!("duplicate NIU id {}", n.id)));
            }
            links.push(LinkSpec {
                a: Endpoint::Niu(NiuId(n.id)),
                b: Endpoint::Switch(SwitchId(n.switch), n.port),
                params: default_params,
                depth: d.depth,
            });
            match n.role {
                Role::Initiator => {
                    let cfg = initiator_config(n).map_err(|(k, m)| field_err(format!("{field}.{k}"), m))?;
                    initiators.push(cfg);
                }
                Role::Target => {
                    let cfg = target_config(n).map_err(|(k, m)| field_err(format!("{field}.{k}"), m))?;
                    regions.push(Region { base: cfg.base, size: cfg.size, target: cfg.id });
                    targets.push(cfg);
                }
            }
        }
        let address_map = AddressMap::new(regions).map_err(|m| field_err("nius", m))?;
        let topology = Topology { switches, links };
        topology.validate()?;
        let routes = match topo_sec.routing {
            RoutingMode::Auto => {
                if !topo_sec.routes.is_empty() {
                    return Err(field_err("topology.routes", "explicit routes require routing = \"table\""));
                }
                auto_routes(&topology)
            }
            RoutingMode::Table => {
                let mut t = RoutingTable::new(topology.switches.len());
                for (i, r) in topo_sec.routes.iter().enumerate() {
                    if usize::from(r.switch) >= topology.switches.len() {
                        return Err(field_err(
                            format!("topology.routes[{i}].switch"),
                            format!("no switch S{}", r.switch),
                        ));
                    }
                    t.insert(SwitchId(r.switch), NiuId(r.target), r.port);
                }
                t
            }
        };
        validate_routes(&topology, &routes)?;

        let mut scenario = Scenario {
            mode: run.mode,
            max_cycles: run.max_cycles,
            seed: run.seed,
            fabric_endianness: run.fabric_endianness,
            topology,
            routes,
            flit_width: d.flit_width,
            address_map,
            initiators,
            targets,
            masters: Vec::new(),
            file: file.clone(),
        };
        let mut seen = BTreeSet::new();
        for (i, w) in file.workload.iter().enumerate() {
            let field = format!("workload[{i}]");
            let Some(cfg) = scenario.initiator(NiuId(w.master)).cloned() else {
                return Err(field_err(format!("{field}.master"), format!("no initiator NIU with id {}", w.master)));
            };
            if !seen.insert(w.master) {
                return Err(field_err(
                    format!("{field}.master"),
                    format!("master {} already has a workload", w.master),
                ));
            }
            let program =
                build_program(&scenario, &cfg, w, i).map_err(|(k, m)| field_err(format!("{field}.{k}"), m))?;
            scenario.masters.push(MasterSpec { id: MasterId(w.master), program });
        }
        scenario.masters.sort_by_key(|m| m.id);
        Ok(scenario)
    }
}

type FieldResult<T> = Result<T, (String, String)>;

fn fe<T>(key: &str, message: impl Into<String>) -> FieldResult<T> {
    Err((key.to_string(), message.into()))
}

fn initiator_config(n: &NiuSection) -> FieldResult<InitiatorConfig> {
    for (k, set) in [
        ("base", n.base.is_some()),
        ("size", n.size.is_some()),
        ("mem_size", n.mem_size.is_some()),
        ("granule", n.granule.is_some()),
    ] {
        if set {
            return fe(k, "only valid on target NIUs");
        }
    }
    let Some(family) = n.family else {
        return fe("family", "initiators need a socket family");
    };
    let mut cfg = InitiatorConfig::new(NiuId(n.id), family);
    cfg.streams = n.streams.unwrap_or(1);
    cfg.max_payload = n.max_payload.unwrap_or(DEFAULT_MAX_PAYLOAD);
    cfg.endianness = n.endianness.unwrap_or_default();
    cfg.priority = n.priority.unwrap_or(0);
    cfg.tag_bits = n.tag_bits.unwrap_or(DEFAULT_TAG_BITS);
    if !(1..=8).contains(&cfg.tag_bits) {
        return fe("tag_bits", "must be within 1..=8");
    }
    let policy = n.tag_policy.unwrap_or(TagPolicyName::SingleOutstanding);
    let capacity = n.capacity.unwrap_or(match policy {
        TagPolicyName::SingleOutstanding => 1,
        _ => 4,
    });
    cfg.capacity = usize::from(capacity);
    cfg.tag_policy = match policy {
        TagPolicyName::SingleOutstanding => TagPolicy::SingleOutstanding,
        TagPolicyName::PerStream => TagPolicy::PerStream {
            streams: match family {
                SocketFamily::FullyOrdered => 1,
                SocketFamily::Threaded => cfg.streams,
                SocketFamily::IdBased => cfg.streams.saturating_mul(2),
            },
        },
        TagPolicyName::Pooled => TagPolicy::Pooled { capacity },
    };
    cfg.validate().map_err(|m| ("tag_policy".to_string(), m))?;
    Ok(cfg)
}

fn target_config(n: &NiuSection) -> FieldResult<TargetConfig> {
    for (k, set) in [
        ("family", n.family.is_some()),
        ("streams", n.streams.is_some()),
        ("tag_policy", n.tag_policy.is_some()),
        ("capacity", n.capacity.is_some()),
        ("max_payload", n.max_payload.is_some()),
        ("endianness", n.endianness.is_some()),
        ("priority", n.priority.is_some()),
        ("tag_bits", n.tag_bits.is_some()),
    ] {
        if set {
            return fe(k, "only valid on initiator NIUs");
        }
    }
    let Some(base) = n.base else {
        return fe("base", "targets need a base address");
    };
    let Some(size) = n.size else {
        return fe("size", "targets need a region size");
    };
    if size == 0 {
        return fe("size", "must be at least 1");
    }
    let mem_size = match n.mem_size {
        Some(m) if u64::from(m) > size => return fe("mem_size", "larger than the decoded region"),
        Some(m) => m,
        None => u32::try_from(size).or_else(|_| fe("size", "region too large for a backing memory; set mem_size"))?,
    };
    let granule = n.granule.unwrap_or(DEFAULT_GRANULE);
    if !granule.is_power_of_two() {
        return fe("granule", "must be a power of two");
    }
    Ok(TargetConfig { id: NiuId(n.id), base, size, mem_size, granule })
}

/// Key used when a script op or loop names none.
fn default_key(family: SocketFamily, opcode: Opcode) -> SocketOrderKey {
    match family {
        SocketFamily::FullyOrdered => SocketOrderKey::Single,
        SocketFamily::Threaded => SocketOrderKey::Thread(0),
        SocketFamily::IdBased => SocketOrderKey::TxnId { tid: 0, channel: Channel::for_opcode(opcode) },
    }
}

fn parse_key(s: Option<&str>, cfg: &InitiatorConfig, opcode: Opcode) -> Result<SocketOrderKey, String> {
    let key = match s {
        None => default_key(cfg.family, opcode),
        Some(s) => s.parse::<SocketOrderKey>()?,
    };
    if !cfg.supports(key) {
        return Err(format!("key {key} not usable on a {:?} socket with {} stream(s)", cfg.family, cfg.streams));
    }
    Ok(key)
}

fn build_program(
    scenario: &Scenario,
    cfg: &InitiatorConfig,
    w: &WorkloadSection,
    index: usize,
) -> FieldResult<Program> {
    let master = MasterId(w.master);
    match w.kind {
        WorkloadKind::Script => {
            let mut reqs = Vec::with_capacity(w.ops.len());
            for (j, op) in w.ops.iter().enumerate() {
                let key_field = format!("ops[{j}]");
                let opcode: Opcode = op.op.parse().map_err(|m| (format!("{key_field}.op"), m))?;
                let key = parse_key(op.key.as_deref(), cfg, opcode).map_err(|m| (format!("{key_field}.key"), m))?;
                let mut req = TransactionRequest::new(master, opcode, op.addr, op.beats, op.beat_size, key);
                if let Some(data) = &op.data {
                    if opcode.is_read() {
                        return fe(&format!("{key_field}.data"), "loads carry no data");
                    }
                    req = req.with_data(data.clone());
                }
                let v = validate_request(&req);
                if !v.is_empty() {
                    let msg = v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
                    return fe(&key_field, msg);
                }
                reqs.push(req);
            }
            check_lock_pairs(&reqs).map_err(|(j, m)| (format!("ops[{j}]"), m))?;
            Ok(Program::Script(reqs))
        }
        WorkloadKind::Increment => {
            let Some(flavor) = w.flavor else { return fe("flavor", "increment loops need a flavor") };
            let Some(address) = w.address else { return fe("address", "increment loops need an address") };
            let Some(iterations) = w.iterations else {
                return fe("iterations", "increment loops need an iteration count");
            };
            if address % 4 != 0 {
                return fe("address", "counter must be 4-byte aligned");
            }
            let load_op = match flavor {
                IncrementFlavor::Exclusive => Opcode::LoadExclusive,
                IncrementFlavor::Lock => Opcode::ReadEx,
            };
            let key = parse_key(w.key.as_deref(), cfg, load_op).map_err(|m| ("key".to_string(), m))?;
            if let SocketOrderKey::TxnId { channel: Channel::Write, .. } = key {
                return fe("key", "the loop key names the read channel");
            }
            Ok(Program::Increment(IncrementSpec { flavor, address, iterations, key, endianness: cfg.endianness }))
        }
        WorkloadKind::Random => {
            let Some(params) = &w.random else {
                return fe("random", "random workloads need a [workload.random] table");
            };
            let seed = params.seed.unwrap_or_else(|| scenario.seed ^ ((index as u64 + 1) << 32) ^ u64::from(w.master));
            let reqs = expand_random_workload(params, seed, cfg, scenario).map_err(|m| ("random".to_string(), m))?;
            Ok(Program::Script(reqs))
        }
    }
}

/// Every READEX must be followed by a STORE_LOCKED_RELEASE of the same
/// address and size before the next READEX; a release needs an open READEX.
pub fn check_lock_pairs(reqs: &[TransactionRequest]) -> Result<(), (usize, String)> {
    let mut open: Option<(usize, &TransactionRequest)> = None;
    for (j, r) in reqs.iter().enumerate() {
        match (r.opcode, open) {
            (Opcode::ReadEx, Some((k, _))) => {
                return Err((j, format!("READEX while the READEX of op {k} is still unreleased")));
            }
            (Opcode::ReadEx, None) => open = Some((j, r)),
            (Opcode::StoreLockedRelease, None) => {
                return Err((j, "STORE_LOCKED_RELEASE without a preceding READEX".into()));
            }
            (Opcode::StoreLockedRelease, Some((k, rx))) => {
                if rx.address != r.address || rx.byte_len() != r.byte_len() {
                    return Err((j, format!("release must match the address and size of the READEX in op {k}")));
                }
                open = None;
            }
            _ => {}
        }
    }
    match open {
        Some((k, _)) => Err((k, "READEX never released".into())),
        None => Ok(()),
    }
}

/// Per-target byte ranges each master may write, for generators that keep
/// writers apart: target memory split evenly among the initiators, in
/// initiator id order, aligned to 64 bytes.
pub fn private_windows(scenario: &Scenario, master: MasterId) -> BTreeMap<NiuId, (Address, u32)> {
    let count = scenario.initiators.len() as u32;
    let index = scenario.initiators.iter().position(|c| c.id.0 == master.0).expect("master is an initiator") as u32;
    scenario
        .targets
        .iter()
        .filter_map(|t| {
            let slice = (t.mem_size / count) & !63;
            (slice > 0).then(|| (t.id, (t.base + index * slice, slice)))
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
[run]
seed = 3

[topology]
switches = [3, 3]
links = [{ a = "S0.0", b = "S1.0" }]

[[nius]]
id = 0
role = "initiator"
switch = 0
port = 1
family = "threaded"
streams = 2
tag_policy = "pooled"
capacity = 4

[[nius]]
id = 1
role = "target"
switch = 1
port = 1
base = 0x1000
size = 0x100

[[workload]]
master = 0
kind = "script"
ops = [
  { op = "STORE", addr = 0x1010, beats = 2, key = "T1", data = [1, 2, 3, 4, 5, 6, 7, 8] },
  { op = "LOAD", addr = 0x1010, beats = 2 },
]
"#;

    #[test]
    fn minimal_scenario_builds() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(s.seed, 3);
        assert_eq!(s.mode, TransportMode::Wormhole);
        assert_eq!(s.max_cycles, DEFAULT_MAX_CYCLES);
        assert_eq!(s.topology.links.len(), 3);
        let Program::Script(ops) = &s.masters[0].program else { panic!() };
        assert_eq!(ops[0].order_key, SocketOrderKey::Thread(1));
        assert_eq!(ops[1].order_key, SocketOrderKey::Thread(0));
        assert_eq!(s.max_packet_flits(), 5);
    }

    #[test]
    fn file_round_trips_through_toml() {
        let f = ScenarioFile::parse(MINIMAL).unwrap();
        assert_eq!(ScenarioFile::parse(&f.to_toml()).unwrap(), f);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let bad = MINIMAL.replace("capacity = 4", "capacity = \"four\"");
        let e = Scenario::from_toml(&bad).unwrap_err().to_string();
        assert!(e.contains("line"), "{e}");
        let bad = MINIMAL.replace("streams = 2", "streams = 2\ncolour = 1");
        let e = Scenario::from_toml(&bad).unwrap_err().to_string();
        assert!(e.contains("colour"), "{e}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let bad = MINIMAL.replace("key = \"T1\"", "key = \"T5\"");
        let e = Scenario::from_toml(&bad).unwrap_err().to_string();
        assert!(e.starts_with("workload[0].ops[0].key"), "{e}");
        let bad = MINIMAL.replace("beats = 2, key", "beats = 3, key");
        let e = Scenario::from_toml(&bad).unwrap_err().to_string();
        assert!(e.contains("data length mismatch"), "{e}");
        let bad = MINIMAL.replace("port = 1\nbase", "port = 7\nbase");
        assert!(Scenario::from_toml(&bad).is_err());
    }

    #[test]
    fn missing_table_route_names_target_and_switch() {
        let text = MINIMAL.replace(
            "links = [{ a = \"S0.0\", b = \"S1.0\" }]",
            "links = [{ a = \"S0.0\", b = \"S1.0\" }]\nrouting = \"table\"\nroutes = [\n { switch = 0, target = 0, port = 1 },\n { switch = 1, target = 0, port = 0 },\n { switch = 1, target = 1, port = 1 },\n]",
        );
        let e = Scenario::from_toml(&text).unwrap_err().to_string();
        assert_eq!(e, "unroutable target N1 at switch S0");
    }

    #[test]
    fn lock_pairs_are_checked() {
        let m = MasterId(0);
        let k = SocketOrderKey::Single;
        let rx = TransactionRequest::new(m, Opcode::ReadEx, 0x10, 1, 4, k);
        let rel = TransactionRequest::new(m, Opcode::StoreLockedRelease, 0x10, 1, 4, k);
        let other = TransactionRequest::new(m, Opcode::StoreLockedRelease, 0x14, 1, 4, k);
        assert!(check_lock_pairs(&[rx.clone(), rel.clone()]).is_ok());
        assert!(check_lock_pairs(&[rx.clone(), other]).is_err());
        assert!(check_lock_pairs(&[rx.clone(), rx.clone()]).is_err());
        assert!(check_lock_pairs(&[rel]).is_err());
        assert!(check_lock_pairs(&[rx]).is_err());
    }

    #[test]
    fn switch_port_syntax() {
        assert_eq!(parse_switch_port("S2.3"), Ok((SwitchId(2), 3)));
        assert_eq!(parse_switch_port("S2.p3"), Ok((SwitchId(2), 3)));
        assert!(parse_switch_port("N2").is_err());
    }
}
