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

//! Seeded random workloads and scenarios.
//!
//! All randomness comes from ChaCha8 streams seeded with a `u64`, so one
//! seed always yields the same scenario within a build. Generated writes
//! only touch the writing master's private window of each target and
//! loads read either that window or memory no master writes. Final memory
//! contents and every response are therefore independent of timing.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fabric::TransportMode;
use crate::niu::{Endianness, InitiatorConfig, NiuId};
use crate::sim::scenario::{
    private_windows, LinkDefaults, LinkSection, NiuSection, RoutingMode, RunSection, Scenario, ScenarioFile,
    TagPolicyName, TopologySection, WorkloadSection,
};
use crate::transaction::{Address, Channel, MasterId, Opcode, SocketFamily, SocketOrderKey, TransactionRequest};

/// Identifier of the generator algorithm, recorded in run statistics.
pub const RNG_ALGORITHM: &str = "chacha8";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomWorkload {
    /// Number of transactions.
    pub count: u32,
    /// Defaults to a value derived from the run seed and master id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_max_beats")]
    pub max_beats: u16,
    /// Include READEX / STORE_LOCKED_RELEASE pairs.
    #[serde(default = "yes")]
    pub locked: bool,
    /// Include LOAD_EXCLUSIVE / STORE_EXCLUSIVE pairs.
    #[serde(default = "yes")]
    pub exclusive: bool,
    #[serde(default = "yes")]
    pub posted: bool,
    /// Include accesses that miss the address map or the backing memory.
    #[serde(default = "yes")]
    pub errors: bool,
}

fn default_max_beats() -> u16 {
    4
}

fn yes() -> bool {
    true
}

impl RandomWorkload {
    pub fn new(count: u32) -> Self {
        RandomWorkload {
            count,
            seed: None,
            max_beats: default_max_beats(),
            locked: true,
            exclusive: true,
            posted: true,
            errors: true,
        }
    }
}

fn random_key(rng: &mut ChaCha8Rng, cfg: &InitiatorConfig, opcode: Opcode) -> SocketOrderKey {
    match cfg.family {
        SocketFamily::FullyOrdered => SocketOrderKey::Single,
        SocketFamily::Threaded => SocketOrderKey::Thread(rng.gen_range(0..cfg.streams)),
        SocketFamily::IdBased => {
            SocketOrderKey::TxnId { tid: rng.gen_range(0..cfg.streams), channel: Channel::for_opcode(opcode) }
        }
    }
}

fn aligned_in(rng: &mut ChaCha8Rng, start: Address, span: u32, len: u32, align: u32) -> Option<Address> {
    if span < len {
        return None;
    }
    let slots = (span - len) / align;
    Some(start + rng.gen_range(0..=slots) * align)
}

#[derive(Clone, Copy)]
enum Pick {
    Load,
    Store,
    Posted,
    ExclusivePair,
    LockPair,
    DecodeMiss,
    SlaveError,
}

/// Expands a random workload into a script for master `cfg.id`.
pub fn expand_random_workload(
    params: &RandomWorkload,
    seed: u64,
    cfg: &InitiatorConfig,
    scenario: &Scenario,
) -> Result<Vec<TransactionRequest>, String> {
    let master = MasterId(cfg.id.0);
    let windows: Vec<(NiuId, (Address, u32))> = private_windows(scenario, master).into_iter().collect();
    if windows.is_empty() {
        return Err("targets are too small to give every master a private window".into());
    }
    if params.max_beats == 0 {
        return Err("max_beats must be at least 1".into());
    }
    let targets = &scenario.targets;
    let miss_base = scenario
        .address_map
        .regions()
        .iter()
        .map(|r| r.end())
        .max()
        .filter(|end| end + 64 <= 1u64 << 32)
        .map(|end| (end as u32 + 63) & !63);
    // backing memory past every private window: never written
    let initiators = scenario.initiators.len() as u32;
    let shared_tails: Vec<(Address, u32)> = targets
        .iter()
        .filter_map(|t| {
            let used = ((t.mem_size / initiators) & !63) * initiators;
            (t.mem_size > used).then(|| (t.base + used, t.mem_size - used))
        })
        .collect();
    let short_targets: Vec<_> = targets.iter().filter(|t| u64::from(t.mem_size) + 64 <= t.size).collect();

    let mut menu = vec![(Pick::Load, 30), (Pick::Store, 25)];
    if params.posted {
        menu.push((Pick::Posted, 10));
    }
    if params.exclusive {
        menu.push((Pick::ExclusivePair, 8));
    }
    if params.locked {
        menu.push((Pick::LockPair, 5));
    }
    if params.errors {
        if miss_base.is_some() {
            menu.push((Pick::DecodeMiss, 3));
        }
        if !short_targets.is_empty() {
            menu.push((Pick::SlaveError, 3));
        }
    }

    let mut rng = rng(seed);
    let count = params.count as usize;
    let mut reqs = Vec::with_capacity(count);
    while reqs.len() < count {
        let pick = menu.choose_weighted(&mut rng, |(_, w)| *w).expect("menu is non-empty").0;
        let beat_size: u16 = *[1u16, 2, 4, 8].choose(&mut rng).unwrap();
        let beats: u16 = rng.gen_range(1..=params.max_beats);
        let len = u32::from(beat_size) * u32::from(beats);
        let (_, (wbase, wsize)) = *windows.choose(&mut rng).unwrap();
        let room = count - reqs.len();
        let mut push = |rng: &mut ChaCha8Rng, op: Opcode, address: Address, beats: u16, beat_size: u16| {
            let key = random_key(rng, cfg, op);
            let mut r = TransactionRequest::new(master, op, address, beats, beat_size, key);
            if op.is_write() {
                r.data = (0..r.byte_len()).map(|_| rng.gen()).collect();
            }
            reqs.push(r);
        };
        match pick {
            Pick::Load => {
                // loads stay where no other master writes, so their data
                // does not depend on timing
                let area = match shared_tails.choose(&mut rng) {
                    Some(tail) if rng.gen_bool(0.25) => *tail,
                    _ => (wbase, wsize),
                };
                if let Some(a) = aligned_in(&mut rng, area.0, area.1, len, u32::from(beat_size)) {
                    push(&mut rng, Opcode::Load, a, beats, beat_size);
                }
            }
            Pick::Store | Pick::Posted => {
                let op = if matches!(pick, Pick::Store) { Opcode::Store } else { Opcode::StorePosted };
                if let Some(a) = aligned_in(&mut rng, wbase, wsize, len, u32::from(beat_size)) {
                    push(&mut rng, op, a, beats, beat_size);
                }
            }
            Pick::ExclusivePair | Pick::LockPair => {
                let (first, second) = match pick {
                    Pick::ExclusivePair => (Opcode::LoadExclusive, Opcode::StoreExclusive),
                    _ => (Opcode::ReadEx, Opcode::StoreLockedRelease),
                };
                let size: u16 = *[4u16, 8].choose(&mut rng).unwrap();
                if room < 2 || u32::from(size) > cfg.max_payload {
                    continue;
                }
                if let Some(a) = aligned_in(&mut rng, wbase, wsize, u32::from(size), u32::from(size)) {
                    push(&mut rng, first, a, 1, size);
                    push(&mut rng, second, a, 1, size);
                }
            }
            Pick::DecodeMiss => {
                let base = miss_base.expect("only offered with a gap");
                let op = if rng.gen_bool(0.5) { Opcode::Load } else { Opcode::Store };
                push(&mut rng, op, base, 1, 4);
            }
            Pick::SlaveError => {
                let t = short_targets.choose(&mut rng).unwrap();
                let span = (t.size - u64::from(t.mem_size)).min(u64::from(u32::MAX)) as u32;
                if let Some(a) = aligned_in(&mut rng, t.base + t.mem_size, span, len, u32::from(beat_size)) {
                    let op = if rng.gen_bool(0.5) { Opcode::Load } else { Opcode::Store };
                    push(&mut rng, op, a, beats, beat_size);
                }
            }
        }
    }
    Ok(reqs)
}

/// A random but always valid scenario: 2-6 switches wired as a random tree
/// plus at most one extra link, 2-8 initiators of mixed socket families and
/// tag policies, 1-3 targets, and 200-1000 random transactions in total.
pub fn random_scenario(seed: u64) -> ScenarioFile {
    let mut rng = rng(seed ^ 0x5eed_0f5c_e4a2_10aa);
    let switches = rng.gen_range(2..=6usize);
    let mut next_port = vec![0u8; switches];
    let mut take = |s: usize| {
        let p = next_port[s];
        next_port[s] += 1;
        p
    };
    let mut edges: Vec<(usize, usize)> = (1..switches).map(|i| (rng.gen_range(0..i), i)).collect();
    if switches >= 3 && rng.gen_bool(0.5) {
        let a = rng.gen_range(0..switches);
        let b = rng.gen_range(0..switches);
        if a != b && !edges.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a)) {
            edges.push((a.min(b), a.max(b)));
        }
    }
    let links: Vec<LinkSection> = edges
        .iter()
        .map(|&(a, b)| LinkSection {
            a: format!("S{a}.{}", take(a)),
            b: format!("S{b}.{}", take(b)),
            latency: None,
            rate_ratio: None,
            depth: None,
        })
        .collect();

    let initiators = rng.gen_range(2..=8u16);
    let target_count = rng.gen_range(1..=3u16);
    let mut nius = Vec::new();
    for i in 0..initiators {
        let s = rng.gen_range(0..switches);
        let family =
            *[SocketFamily::FullyOrdered, SocketFamily::Threaded, SocketFamily::IdBased].choose(&mut rng).unwrap();
        let mut n = NiuSection::initiator(i, s as u16, take(s), family);
        let streams = match family {
            SocketFamily::FullyOrdered => 1,
            SocketFamily::Threaded => rng.gen_range(1..=4),
            SocketFamily::IdBased => rng.gen_range(1..=3),
        };
        n.streams = Some(streams);
        let policy = *[TagPolicyName::SingleOutstanding, TagPolicyName::PerStream, TagPolicyName::Pooled]
            .choose(&mut rng)
            .unwrap();
        n.tag_policy = Some(policy);
        n.capacity = Some(match policy {
            TagPolicyName::SingleOutstanding => 1,
            _ => rng.gen_range(2..=8),
        });
        n.max_payload = Some(*[16u32, 32, 64].choose(&mut rng).unwrap());
        n.endianness = Some(if rng.gen_bool(0.3) { Endianness::Big } else { Endianness::Little });
        n.priority = Some(rng.gen_range(0..=7));
        nius.push(n);
    }
    for t in 0..target_count {
        let s = rng.gen_range(0..switches);
        let size: u64 = *[0x1000u64, 0x2000].choose(&mut rng).unwrap();
        let mut n = NiuSection::target(initiators + t, s as u16, take(s), 0x1_0000 * u32::from(t), size);
        if rng.gen_bool(0.5) {
            n.mem_size = Some((size / 2) as u32);
        }
        nius.push(n);
    }

    let total = rng.gen_range(200..=1000u32);
    let per = total / u32::from(initiators);
    let extra = total % u32::from(initiators);
    let workload = (0..initiators)
        .map(|i| {
            let mut w = RandomWorkload::new(per + u32::from(u32::from(i) < extra));
            w.seed = Some(rng.gen());
            WorkloadSection::random(i, w)
        })
        .collect();

    ScenarioFile {
        run: RunSection { mode: TransportMode::Wormhole, seed, ..RunSection::default() },
        topology: TopologySection {
            routing: RoutingMode::Auto,
            link_defaults: LinkDefaults {
                flit_width: 8,
                latency: rng.gen_range(1..=2),
                rate_ratio: 1,
                depth: rng.gen_range(2..=4),
            },
            switches: next_port,
            links,
            routes: Vec::new(),
        },
        nius,
        workload,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::Program;
    use crate::transaction::validate_request;

    #[test]
    fn generated_scenarios_validate_and_respect_bounds() {
        for seed in 0..40 {
            let file = random_scenario(seed);
            let s = Scenario::build(file.clone()).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            assert!((2..=6).contains(&s.topology.switches.len()));
            assert!((2..=8).contains(&s.initiators.len()));
            let mut total = 0;
            for m in &s.masters {
                let Program::Script(reqs) = &m.program else { panic!() };
                total += reqs.len();
                for r in reqs {
                    assert!(validate_request(r).is_empty(), "{r:?}");
                }
            }
            assert!((200..=1000).contains(&total), "seed {seed}: {total}");
            // generation is a pure function of the seed
            assert_eq!(random_scenario(seed), file);
        }
    }

    #[test]
    fn writes_stay_in_private_windows() {
        for seed in 0..20 {
            let s = Scenario::build(random_scenario(seed)).unwrap();
            for m in &s.masters {
                let windows = private_windows(&s, m.id);
                let Program::Script(reqs) = &m.program else { panic!() };
                for r in reqs.iter().filter(|r| r.opcode.is_write()) {
                    let inside = windows.values().any(|&(b, n)| r.address >= b && r.address + r.byte_len() <= b + n);
                    let mapped_memory = s
                        .targets
                        .iter()
                        .any(|t| r.address >= t.base && u64::from(r.address - t.base) < u64::from(t.mem_size));
                    assert!(inside || !mapped_memory, "seed {seed}: {r:?}");
                }
            }
        }
    }
}
