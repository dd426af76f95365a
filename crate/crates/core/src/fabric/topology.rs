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

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use crate::fabric::FabricError;
use crate::link::LinkParams;
use crate::niu::NiuId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SwitchId(pub u16);

impl fmt::Display for SwitchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

pub type Port = u8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Switch(SwitchId, Port),
    Niu(NiuId),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Switch(s, p) => write!(f, "{s}.p{p}"),
            Endpoint::Niu(n) => n.fmt(f),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinkSpec {
    pub a: Endpoint,
    pub b: Endpoint,
    pub params: LinkParams,
    /// Receiver buffer depth in flits, per buffer class, at both ends.
    pub depth: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SwitchSpec {
    pub id: SwitchId,
    pub ports: u8,
}

/// Switches, the links between them, and the links attaching NIUs.
///
/// Switch ids are dense: switch `i` sits at index `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    pub switches: Vec<SwitchSpec>,
    pub links: Vec<LinkSpec>,
}

impl Topology {
    /// NIU id → (switch, port) it attaches to.
    pub fn niu_attachments(&self) -> BTreeMap<NiuId, (SwitchId, Port)> {
        self.links
            .iter()
            .filter_map(|l| match (l.a, l.b) {
                (Endpoint::Niu(n), Endpoint::Switch(s, p)) | (Endpoint::Switch(s, p), Endpoint::Niu(n)) => {
                    Some((n, (s, p)))
                }
                _ => None,
            })
            .collect()
    }

    /// For each switch, port → neighbouring switch over switch-to-switch
    /// links, in port order.
    pub fn switch_neighbors(&self) -> Vec<Vec<(Port, SwitchId)>> {
        let mut adj = vec![Vec::new(); self.switches.len()];
        for l in &self.links {
            if let (Endpoint::Switch(sa, pa), Endpoint::Switch(sb, pb)) = (l.a, l.b) {
                adj[usize::from(sa.0)].push((pa, sb));
                adj[usize::from(sb.0)].push((pb, sa));
            }
        }
        for v in &mut adj {
            v.sort();
        }
        adj
    }

    /// Checks structural invariants: dense switch ids, ports in range and
    /// used once, each NIU attached to exactly one switch port, and a
    /// connected switch graph.
    pub fn validate(&self) -> Result<(), FabricError> {
        let bad = |m: String| Err(FabricError::Topology(m));
        if self.switches.is_empty() {
            return bad("topology has no switches".into());
        }
        for (i, s) in self.switches.iter().enumerate() {
            if usize::from(s.id.0) != i {
                return bad(format!("switch ids must be dense from 0; found {} at position {i}", s.id));
            }
            if s.ports == 0 {
                return bad(format!("{} has no ports", s.id));
            }
        }
        let mut used: BTreeMap<Endpoint, usize> = BTreeMap::new();
        let mut niu_links: BTreeMap<NiuId, usize> = BTreeMap::new();
        for (li, l) in self.links.iter().enumerate() {
            if !l.params.is_valid() {
                return bad(format!("link {li} has a zero parameter"));
            }
            if l.depth == 0 {
                return bad(format!("link {li} has zero buffer depth"));
            }
            for ep in [l.a, l.b] {
                match ep {
                    Endpoint::Switch(s, p) => {
                        let Some(spec) = self.switches.get(usize::from(s.0)) else {
                            return bad(format!("link {li} references unknown switch {s}"));
                        };
                        if p >= spec.ports {
                            return bad(format!("link {li}: port {p} out of range for {s} ({} ports)", spec.ports));
                        }
                    }
                    Endpoint::Niu(n) => *niu_links.entry(n).or_default() += 1,
                }
                if let Some(prev) = used.insert(ep, li) {
                    return bad(format!("{ep} used by links {prev} and {li}"));
                }
            }
            if matches!((l.a, l.b), (Endpoint::Niu(_), Endpoint::Niu(_))) {
                return bad(format!("link {li} joins two NIUs"));
            }
        }
        if let Some((n, c)) = niu_links.iter().find(|(_, c)| **c != 1) {
            return bad(format!("{n} attaches to {c} switch ports"));
        }
        // connectivity over switch-to-switch links
        let adj = self.switch_neighbors();
        let mut seen = vec![false; self.switches.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(s) = queue.pop_front() {
            for &(_, n) in &adj[s] {
                let n = usize::from(n.0);
                if !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return bad(format!("topology not connected: {} unreachable from S0", self.switches[i].id));
        }
        Ok(())
    }
}
