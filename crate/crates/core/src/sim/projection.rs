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

//! The socket-visible outcome of a run.
//!
//! Two runs are transaction-equivalent when every master issued the same
//! requests in the same order and every ordering stream saw the same
//! responses in the same order. Timing and the interleaving of unrelated
//! streams are ignored.

use std::collections::BTreeMap;
use std::fmt;

use crate::sim::engine::RunOutput;
use crate::sim::trace::{EventKind, Trace};
use crate::transaction::{Address, MasterId, Opcode, SocketOrderKey, Status};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IssuedRequest {
    pub key: SocketOrderKey,
    pub op: Opcode,
    pub address: Address,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SocketResponse {
    pub txn: u64,
    pub op: Opcode,
    pub address: Address,
    pub status: Status,
    pub data: Vec<u8>,
}

impl fmt::Display for SocketResponse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "txn {} {} {:#x} {} data {:02x?}", self.txn, self.op, self.address, self.status, self.data)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MasterProjection {
    pub issued: Vec<IssuedRequest>,
    pub streams: BTreeMap<SocketOrderKey, Vec<SocketResponse>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Projection {
    pub masters: BTreeMap<MasterId, MasterProjection>,
}

/// Where two projections first disagree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    pub master: MasterId,
    /// `None` when the issue sequences differ.
    pub key: Option<SocketOrderKey>,
    pub index: usize,
    pub left: String,
    pub right: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.key {
            Some(k) => write!(f, "{} stream {k} response #{}", self.master, self.index)?,
            None => write!(f, "{} request #{}", self.master, self.index)?,
        }
        write!(f, ": {} vs {}", self.left, self.right)
    }
}

fn issued_from_trace(trace: &Trace) -> BTreeMap<MasterId, Vec<IssuedRequest>> {
    let mut out: BTreeMap<MasterId, Vec<IssuedRequest>> = BTreeMap::new();
    for e in trace.of_kind(EventKind::ReqIssued) {
        if let (Some(m), Some(key), Some(op), Some(address)) = (e.master, e.key, e.op, e.address) {
            out.entry(m).or_default().push(IssuedRequest { key, op, address });
        }
    }
    out
}

pub fn transaction_projection(out: &RunOutput) -> Projection {
    let mut p = Projection::default();
    for (m, issued) in issued_from_trace(&out.trace) {
        p.masters.entry(m).or_default().issued = issued;
    }
    for (m, released) in &out.responses {
        let mp = p.masters.entry(*m).or_default();
        for r in released {
            mp.streams.entry(r.response.order_key).or_default().push(SocketResponse {
                txn: r.txn,
                op: r.opcode,
                address: r.address,
                status: r.response.status,
                data: r.response.data.clone(),
            });
        }
    }
    p
}

fn show<T: fmt::Display>(x: Option<&T>) -> String {
    x.map_or_else(|| "nothing".to_string(), T::to_string)
}

fn first_mismatch<T: PartialEq>(a: &[T], b: &[T]) -> Option<usize> {
    (0..a.len().max(b.len())).find(|&i| a.get(i) != b.get(i))
}

impl fmt::Display for IssuedRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:#x} key {}", self.op, self.address, self.key)
    }
}

/// First point at which two projections differ, or `None` when they are
/// equivalent.
pub fn first_divergence(a: &Projection, b: &Projection) -> Option<Divergence> {
    let empty = MasterProjection::default();
    let masters: std::collections::BTreeSet<_> = a.masters.keys().chain(b.masters.keys()).collect();
    for m in masters {
        let (x, y) = (a.masters.get(m).unwrap_or(&empty), b.masters.get(m).unwrap_or(&empty));
        if let Some(i) = first_mismatch(&x.issued, &y.issued) {
            return Some(Divergence {
                master: *m,
                key: None,
                index: i,
                left: show(x.issued.get(i)),
                right: show(y.issued.get(i)),
            });
        }
        let keys: std::collections::BTreeSet<_> = x.streams.keys().chain(y.streams.keys()).collect();
        for k in keys {
            let (sx, sy) =
                (x.streams.get(k).map_or(&[][..], Vec::as_slice), y.streams.get(k).map_or(&[][..], Vec::as_slice));
            if let Some(i) = first_mismatch(sx, sy) {
                return Some(Divergence {
                    master: *m,
                    key: Some(*k),
                    index: i,
                    left: show(sx.get(i)),
                    right: show(sy.get(i)),
                });
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::TransportMode;
    use crate::sim::engine::run;
    use crate::sim::random::random_scenario;
    use crate::sim::scenario::Scenario;

    #[test]
    fn modes_agree_on_a_random_scenario() {
        let sc = Scenario::build(random_scenario(4)).unwrap();
        let a = run(&sc.clone().with_mode(TransportMode::Wormhole)).unwrap();
        let b = run(&sc.with_mode(TransportMode::StoreAndForward)).unwrap();
        assert_ne!(a.cycles, b.cycles);
        let (pa, pb) = (transaction_projection(&a), transaction_projection(&b));
        assert_eq!(first_divergence(&pa, &pb), None);
        assert_eq!(pa, pb);
    }

    #[test]
    fn swapped_responses_are_reported() {
        let sc = Scenario::build(random_scenario(4)).unwrap();
        let out = run(&sc).unwrap();
        let p = transaction_projection(&out);
        let mut q = p.clone();
        let (m, stream) = q
            .masters
            .iter_mut()
            .flat_map(|(m, mp)| mp.streams.iter_mut().map(move |(_, s)| (*m, s)))
            .find(|(_, s)| s.len() >= 2 && s[0] != s[1])
            .expect("some stream has two distinct responses");
        stream.swap(0, 1);
        let d = first_divergence(&p, &q).unwrap();
        assert_eq!((d.master, d.index), (m, 0));
        assert!(d.to_string().contains("response #0"));

        let mut r = p.clone();
        r.masters.values_mut().next().unwrap().issued.pop();
        let d = first_divergence(&p, &r).unwrap();
        assert_eq!(d.key, None);
        assert!(d.right.contains("nothing"));
    }
}
