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

//! Trace checkers for the invariants every run must satisfy.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::niu::Tag;
use crate::sim::scenario::{Program, Scenario};
use crate::sim::trace::{EventKind, Trace, TraceEvent};
use crate::transaction::{MasterId, Opcode, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rule {
    StreamOrder,
    Conservation,
    TagLiveness,
    LockWindow,
    ExclusiveSafety,
    CreditBounds,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::StreamOrder => "stream order",
            Rule::Conservation => "conservation",
            Rule::TagLiveness => "tag liveness",
            Rule::LockWindow => "lock window",
            Rule::ExclusiveSafety => "exclusive safety",
            Rule::CreditBounds => "credit bounds",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub rule: Rule,
    pub cycle: Option<u64>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violation", self.rule.name())?;
        if let Some(c) = self.cycle {
            write!(f, " at cycle {c}")?;
        }
        write!(f, ": {}", self.message)
    }
}

fn violation(rule: Rule, e: Option<&TraceEvent>, message: String) -> Violation {
    Violation { rule, cycle: e.map(|e| e.cycle), message }
}

fn needs_response(op: Opcode) -> bool {
    op != Opcode::StorePosted
}

/// Checks every invariant, including the ones that only hold once a run
/// has drained.
pub fn check_invariants(trace: &Trace, scenario: &Scenario) -> Vec<Violation> {
    let mut v = check_safety(trace);
    v.extend(check_completion(trace, scenario));
    v
}

/// Invariants that hold at every prefix of a trace, finished or not.
pub fn check_safety(trace: &Trace) -> Vec<Violation> {
    let mut v = Vec::new();
    stream_order(trace, &mut v);
    responses_match_requests(trace, &mut v);
    tag_liveness(trace, &mut v);
    lock_windows(trace, &mut v);
    exclusive_safety(trace, &mut v);
    credit_bounds(trace, &mut v);
    v
}

fn stream_order(trace: &Trace, v: &mut Vec<Violation>) {
    let mut last = BTreeMap::new();
    for e in trace.of_kind(EventKind::RespEmitted) {
        let (Some(m), Some(k), Some(txn)) = (e.master, e.key, e.txn) else {
            continue;
        };
        if let Some(prev) = last.insert((m, k), txn) {
            if prev >= txn {
                v.push(violation(
                    Rule::StreamOrder,
                    Some(e),
                    format!("{m} stream {k}: response for txn {txn} after txn {prev}"),
                ));
            }
        }
    }
}

fn responses_match_requests(trace: &Trace, v: &mut Vec<Violation>) {
    let mut issued = BTreeMap::new();
    let mut answered = BTreeSet::new();
    for e in &trace.events {
        let (Some(m), Some(txn)) = (e.master, e.txn) else {
            continue;
        };
        match e.kind {
            EventKind::ReqIssued => {
                if issued.insert((m, txn), (e.key, e.op, e.address)).is_some() {
                    v.push(violation(Rule::Conservation, Some(e), format!("{m} txn {txn} issued twice")));
                }
            }
            EventKind::RespEmitted => match issued.get(&(m, txn)) {
                None => {
                    v.push(violation(Rule::Conservation, Some(e), format!("{m} txn {txn} answered but never issued")))
                }
                Some(req) => {
                    if *req != (e.key, e.op, e.address) || e.op.is_some_and(|op| !needs_response(op)) {
                        v.push(violation(
                            Rule::Conservation,
                            Some(e),
                            format!("{m} txn {txn} response does not match its request"),
                        ));
                    }
                    if !answered.insert((m, txn)) {
                        v.push(violation(Rule::Conservation, Some(e), format!("{m} txn {txn} answered twice")));
                    }
                }
            },
            _ => {}
        }
    }
}

/// Every issued request needing a response got exactly one, every
/// script request was issued, and no tag is still held.
pub fn check_completion(trace: &Trace, scenario: &Scenario) -> Vec<Violation> {
    let mut v = Vec::new();
    let mut pending: BTreeMap<(MasterId, u64), Opcode> = BTreeMap::new();
    let mut issued: BTreeMap<MasterId, usize> = BTreeMap::new();
    for e in &trace.events {
        let (Some(m), Some(txn)) = (e.master, e.txn) else {
            continue;
        };
        match e.kind {
            EventKind::ReqIssued => {
                *issued.entry(m).or_default() += 1;
                if let Some(op) = e.op.filter(|op| needs_response(*op)) {
                    pending.insert((m, txn), op);
                }
            }
            EventKind::RespEmitted => {
                pending.remove(&(m, txn));
            }
            _ => {}
        }
    }
    for ((m, txn), op) in pending {
        v.push(violation(Rule::Conservation, None, format!("{m} txn {txn} ({op}) never answered")));
    }
    for spec in &scenario.masters {
        if let Program::Script(reqs) = &spec.program {
            let got = issued.get(&spec.id).copied().unwrap_or(0);
            if got != reqs.len() {
                v.push(violation(
                    Rule::Conservation,
                    None,
                    format!("{} issued {got} of {} requests", spec.id, reqs.len()),
                ));
            }
        }
    }
    for ((m, tag), n) in live_tags(trace, &mut Vec::new()) {
        if n > 0 {
            v.push(violation(Rule::TagLiveness, None, format!("{m} tag {tag} still held at end of run")));
        }
    }
    v
}

fn live_tags(trace: &Trace, v: &mut Vec<Violation>) -> BTreeMap<(MasterId, Tag), u32> {
    let mut live: BTreeMap<(MasterId, Tag), u32> = BTreeMap::new();
    for e in &trace.events {
        let (Some(m), Some(tag)) = (e.master, e.tag) else {
            continue;
        };
        let n = live.entry((m, tag)).or_default();
        match e.kind {
            EventKind::ReqIssued => *n += 1,
            EventKind::TagFreed => {
                if *n == 0 {
                    v.push(violation(Rule::TagLiveness, Some(e), format!("{m} tag {tag} freed while not in use")));
                } else {
                    *n -= 1;
                }
            }
            EventKind::PktInjected | EventKind::PktForwarded | EventKind::PktDelivered if *n == 0 => {
                v.push(violation(
                    Rule::TagLiveness,
                    Some(e),
                    format!("packet for {m} tag {tag} at {} while the tag is free", e.site),
                ));
            }
            _ => {}
        }
    }
    live
}

fn tag_liveness(trace: &Trace, v: &mut Vec<Violation>) {
    live_tags(trace, v);
}

fn lock_windows(trace: &Trace, v: &mut Vec<Violation>) {
    let mut owner: BTreeMap<&str, MasterId> = BTreeMap::new();
    for e in &trace.events {
        match e.kind {
            EventKind::LockSet => {
                let Some(m) = e.master else { continue };
                if let Some(prev) = owner.insert(&e.site, m) {
                    v.push(violation(
                        Rule::LockWindow,
                        Some(e),
                        format!("{} locked by {m} while held by {prev}", e.site),
                    ));
                }
            }
            EventKind::LockCleared => {
                if owner.remove(e.site.as_str()) != e.master {
                    v.push(violation(Rule::LockWindow, Some(e), format!("{} cleared by a non-owner", e.site)));
                }
            }
            // request packets carry an opcode, responses a status
            EventKind::PktForwarded if e.op.is_some() => {
                if let (Some(o), Some(m)) = (owner.get(e.site.as_str()), e.master) {
                    if *o != m {
                        v.push(violation(
                            Rule::LockWindow,
                            Some(e),
                            format!("{m} request forwarded at {} inside {o}'s lock", e.site),
                        ));
                    }
                }
            }
            _ => {}
        }
    }
}

/// A store-exclusive may only win with a reservation that no write has
/// broken since it was taken.
fn exclusive_safety(trace: &Trace, v: &mut Vec<Violation>) {
    let mut armed: BTreeSet<(&str, u32, MasterId)> = BTreeSet::new();
    for e in &trace.events {
        let (Some(m), Some(g)) = (e.master, e.address) else {
            continue;
        };
        match e.kind {
            EventKind::MonitorArmed => {
                armed.retain(|(s, _, x)| !(*s == e.site && *x == m));
                armed.insert((&e.site, g, m));
            }
            EventKind::MonitorCleared => {
                armed.remove(&(e.site.as_str(), g, m));
            }
            EventKind::ExclResolved if e.status == Some(Status::ExOkay) => {
                if !armed.contains(&(e.site.as_str(), g, m)) {
                    v.push(violation(
                        Rule::ExclusiveSafety,
                        Some(e),
                        format!("{m} won an exclusive at {} {g:#x} without a live reservation", e.site),
                    ));
                }
                // the winning write breaks every other reservation on the granule
                armed.retain(|(s, x, _)| !(*s == e.site && *x == g));
            }
            _ => {}
        }
    }
}

fn credit_bounds(trace: &Trace, v: &mut Vec<Violation>) {
    for e in trace.of_kind(EventKind::CreditSummary) {
        let fields: BTreeMap<&str, &str> = e.info.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
        let num = |k: &str| fields.get(k).and_then(|x| x.parse::<u64>().ok());
        match (num("min"), num("max"), num("depth")) {
            (Some(min), Some(max), Some(depth)) if min <= max && max <= depth => {}
            _ => v.push(violation(Rule::CreditBounds, Some(e), format!("{}: {}", e.site, e.info))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::engine::run;
    use crate::sim::random::random_scenario;

    fn clean_run(seed: u64) -> (Scenario, Trace) {
        let sc = Scenario::build(random_scenario(seed)).unwrap();
        let out = run(&sc).unwrap();
        (sc, out.trace)
    }

    fn rules(v: &[Violation]) -> BTreeSet<Rule> {
        v.iter().map(|x| x.rule).collect()
    }

    #[test]
    fn clean_runs_pass() {
        for seed in 0..5 {
            let (sc, trace) = clean_run(seed);
            let v = check_invariants(&trace, &sc);
            assert!(v.is_empty(), "seed {seed}: {}", v[0]);
        }
    }

    #[test]
    fn swapped_responses_break_stream_order() {
        let (sc, mut trace) = clean_run(2);
        let resp: Vec<usize> =
            (0..trace.events.len()).filter(|&i| trace.events[i].kind == EventKind::RespEmitted).collect();
        // find two responses of one stream and swap their transaction ids
        let (i, j) = resp
            .iter()
            .flat_map(|&i| resp.iter().map(move |&j| (i, j)))
            .find(|&(i, j)| {
                let (a, b) = (&trace.events[i], &trace.events[j]);
                i < j && a.master == b.master && a.key == b.key
            })
            .unwrap();
        let (ta, tb) = (trace.events[i].txn, trace.events[j].txn);
        trace.events[i].txn = tb;
        trace.events[j].txn = ta;
        let v = check_invariants(&trace, &sc);
        assert!(rules(&v).contains(&Rule::StreamOrder));
        assert!(v.iter().any(|x| x.to_string().starts_with("stream order violation")));
    }

    #[test]
    fn missing_request_breaks_conservation() {
        let (sc, mut trace) = clean_run(3);
        let i = trace.events.iter().position(|e| e.kind == EventKind::ReqIssued && e.op == Some(Opcode::Load)).unwrap();
        trace.events.remove(i);
        let v = check_invariants(&trace, &sc);
        assert!(rules(&v).contains(&Rule::Conservation));
        assert!(v.iter().any(|x| x.to_string().starts_with("conservation violation")));
    }

    #[test]
    fn lock_and_exclusive_and_credit_faults() {
        let mut t = Trace::default();
        let (a, b) = (MasterId(0), MasterId(1));
        t.push(TraceEvent::new(1, "S0.p1", EventKind::LockSet).master(a));
        t.push(TraceEvent::new(2, "S0.p1", EventKind::PktForwarded).master(b).tag(0).op(Opcode::Load));
        t.push(TraceEvent::new(3, "S0.p1", EventKind::PktForwarded).master(b).tag(0).status(Status::Okay));
        t.push(TraceEvent::new(4, "N5", EventKind::MonitorArmed).master(a).address(0x40));
        t.push(TraceEvent::new(5, "N5", EventKind::ExclResolved).master(a).status(Status::ExOkay).address(0x40));
        t.push(TraceEvent::new(6, "N5", EventKind::ExclResolved).master(b).status(Status::ExOkay).address(0x40));
        t.push(TraceEvent::new(7, "N0>S0.p1", EventKind::CreditSummary).info("class=req min=0 max=5 depth=4"));
        let v = check_safety(&t);
        let lock: Vec<_> = v.iter().filter(|x| x.rule == Rule::LockWindow).collect();
        assert_eq!(lock.len(), 1, "only the request is fenced");
        assert_eq!(lock[0].cycle, Some(2));
        let ex: Vec<_> = v.iter().filter(|x| x.rule == Rule::ExclusiveSafety).collect();
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].cycle, Some(6));
        assert!(rules(&v).contains(&Rule::CreditBounds));
    }

    #[test]
    fn leaked_tag_is_reported() {
        let (sc, mut trace) = clean_run(1);
        let i = trace.events.iter().position(|e| e.kind == EventKind::TagFreed).unwrap();
        trace.events.remove(i);
        assert!(rules(&check_invariants(&trace, &sc)).contains(&Rule::TagLiveness));
    }
}
