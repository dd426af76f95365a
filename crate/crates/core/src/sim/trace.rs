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

//! Timestamped event log.
//!
//! CSV layout, one event per line after the header:
//!
//! ```text
//! cycle,site,kind,master,key,tag,op,status,address,txn,info
//! ```
//!
//! Empty fields mean "not applicable". `site` is an NIU (`N3`), a switch
//! output port (`S1.p2`) or a link direction (`S0.p1>N3`). `txn` is the
//! per-master issue sequence number. `info` never contains commas.

use std::fmt;
use std::str::FromStr;

use crate::niu::Tag;
use crate::transaction::{Address, MasterId, Opcode, SocketOrderKey, Status};

pub const CSV_HEADER: &str = "cycle,site,kind,master,key,tag,op,status,address,txn,info";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    ReqIssued,
    PktInjected,
    PktForwarded,
    PktDelivered,
    RespEmitted,
    TagFreed,
    LockSet,
    LockCleared,
    MonitorArmed,
    MonitorCleared,
    ExclResolved,
    Stall,
    CreditSummary,
}

impl EventKind {
    pub const ALL: [EventKind; 13] = [
        EventKind::ReqIssued,
        EventKind::PktInjected,
        EventKind::PktForwarded,
        EventKind::PktDelivered,
        EventKind::RespEmitted,
        EventKind::TagFreed,
        EventKind::LockSet,
        EventKind::LockCleared,
        EventKind::MonitorArmed,
        EventKind::MonitorCleared,
        EventKind::ExclResolved,
        EventKind::Stall,
        EventKind::CreditSummary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EventKind::ReqIssued => "REQ_ISSUED",
            EventKind::PktInjected => "PKT_INJECTED",
            EventKind::PktForwarded => "PKT_FORWARDED",
            EventKind::PktDelivered => "PKT_DELIVERED",
            EventKind::RespEmitted => "RESP_EMITTED",
            EventKind::TagFreed => "TAG_FREED",
            EventKind::LockSet => "LOCK_SET",
            EventKind::LockCleared => "LOCK_CLEARED",
            EventKind::MonitorArmed => "MONITOR_ARMED",
            EventKind::MonitorCleared => "MONITOR_CLEARED",
            EventKind::ExclResolved => "EXCL_RESOLVED",
            EventKind::Stall => "STALL",
            EventKind::CreditSummary => "CREDIT_SUMMARY",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown event kind `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub cycle: u64,
    pub site: String,
    pub kind: EventKind,
    pub master: Option<MasterId>,
    pub key: Option<SocketOrderKey>,
    pub tag: Option<Tag>,
    pub op: Option<Opcode>,
    pub status: Option<Status>,
    pub address: Option<Address>,
    pub txn: Option<u64>,
    pub info: String,
}

impl TraceEvent {
    pub fn new(cycle: u64, site: impl Into<String>, kind: EventKind) -> Self {
        TraceEvent {
            cycle,
            site: site.into(),
            kind,
            master: None,
            key: None,
            tag: None,
            op: None,
            status: None,
            address: None,
            txn: None,
            info: String::new(),
        }
    }

    pub fn master(mut self, m: MasterId) -> Self {
        self.master = Some(m);
        self
    }

    pub fn key(mut self, k: SocketOrderKey) -> Self {
        self.key = Some(k);
        self
    }

    pub fn tag(mut self, t: Tag) -> Self {
        self.tag = Some(t);
        self
    }

    pub fn op(mut self, op: Opcode) -> Self {
        self.op = Some(op);
        self
    }

    pub fn status(mut self, s: Status) -> Self {
        self.status = Some(s);
        self
    }

    pub fn address(mut self, a: Address) -> Self {
        self.address = Some(a);
        self
    }

    pub fn txn(mut self, t: u64) -> Self {
        self.txn = Some(t);
        self
    }

    pub fn info(mut self, info: impl Into<String>) -> Self {
        self.info = info.into();
        self
    }

    pub fn to_csv_line(&self) -> String {
        fn opt<T: fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map(ToString::to_string).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.cycle,
            self.site,
            self.kind,
            self.master.map(|m| m.0.to_string()).unwrap_or_default(),
            opt(&self.key),
            opt(&self.tag),
            opt(&self.op),
            opt(&self.status),
            self.address.map(|a| format!("{a:#x}")).unwrap_or_default(),
            opt(&self.txn),
            self.info,
        )
    }

    pub fn from_csv_line(line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(format!("expected 11 fields, found {}", f.len()));
        }
        fn opt<T>(s: &str, parse: impl FnOnce(&str) -> Result<T, String>) -> Result<Option<T>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                parse(s).map(Some)
            }
        }
        let num = |what: &'static str| move |s: &str| s.parse::<u64>().map_err(|e| format!("{what}: {e}"));
        Ok(TraceEvent {
            cycle: num("cycle")(f[0])?,
            site: f[1].to_string(),
            kind: f[2].parse()?,
            master: opt(f[3], |s| s.parse().map(MasterId).map_err(|e| format!("master: {e}")))?,
            key: opt(f[4], str::parse)?,
            tag: opt(f[5], |s| s.parse().map_err(|e| format!("tag: {e}")))?,
            op: opt(f[6], str::parse)?,
            status: opt(f[7], str::parse)?,
            address: opt(f[8], |s| {
                let hex = s.trim_start_matches("0x");
                Address::from_str_radix(hex, 16).map_err(|e| format!("address: {e}"))
            })?,
            txn: opt(f[9], num("txn"))?,
            info: f[10].to_string(),
        })
    }
}

/// An ordered event log.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn push(&mut self, e: TraceEvent) {
        debug_assert!(!e.info.contains(','), "info must not contain commas");
        debug_assert!(self.events.last().is_none_or(|l| l.cycle <= e.cycle));
        self.events.push(e);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.events.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for e in &self.events {
            out.push_str(&e.to_csv_line());
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == CSV_HEADER => {}
            _ => return Err("missing or unexpected trace header".into()),
        }
        let events = lines
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(i, l)| TraceEvent::from_csv_line(l).map_err(|e| format!("line {}: {e}", i + 2)))
            .collect::<Result<_, _>>()?;
        Ok(Trace { events })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transaction::Channel;

    #[test]
    fn csv_round_trip() {
        let mut t = Trace::default();
        t.push(
            TraceEvent::new(3, "N0", EventKind::ReqIssued)
                .master(MasterId(0))
                .key(SocketOrderKey::TxnId { tid: 2, channel: Channel::Write })
                .tag(4)
                .op(Opcode::StoreExclusive)
                .address(0x1f0)
                .txn(9),
        );
        t.push(TraceEvent::new(5, "S0.p1", EventKind::PktForwarded).status(Status::ExFail).info("in=p0 class=resp"));
        t.push(TraceEvent::new(5, "S0.p1>N2", EventKind::CreditSummary).info("class=req min=0 max=4 depth=4"));
        let text = t.to_csv();
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(Trace::from_csv(&text).unwrap(), t);
    }

    #[test]
    fn bad_rows_are_reported_with_line_numbers() {
        let text = format!("{CSV_HEADER}\n1,N0,REQ_ISSUED,,,,,,,,\n2,N0,NOPE,,,,,,,,\n");
        let err = Trace::from_csv(&text).unwrap_err();
        assert!(err.contains("line 3"), "{err}");
    }
}
