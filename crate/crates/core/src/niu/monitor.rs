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

//! Target-side exclusive monitors. One reservation per master.

use std::collections::BTreeMap;

use crate::transaction::MasterId;

pub const DEFAULT_GRANULE: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Monitor {
    granule: u32,
    armed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MonitorEvent {
    LoadExclusive {
        master: MasterId,
        address: u32,
    },
    /// Any successful write of `len` bytes at `address`.
    Store {
        master: MasterId,
        address: u32,
        len: u32,
    },
    StoreExclusiveResolved {
        master: MasterId,
        success: bool,
    },
}

/// Observable monitor transitions, reported for tracing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MonitorChange {
    Armed { master: MasterId, granule: u32 },
    Cleared { master: MasterId, granule: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExclusiveMonitorSet {
    monitors: BTreeMap<MasterId, Monitor>,
    granule: u32,
}

impl Default for ExclusiveMonitorSet {
    fn default() -> Self {
        Self::new(DEFAULT_GRANULE)
    }
}

impl ExclusiveMonitorSet {
    pub fn new(granule: u32) -> Self {
        assert!(granule.is_power_of_two(), "granule must be a power of two");
        ExclusiveMonitorSet { monitors: BTreeMap::new(), granule }
    }

    pub fn granule_size(&self) -> u32 {
        self.granule
    }

    pub fn granule_of(&self, address: u32) -> u32 {
        address & !(self.granule - 1)
    }

    pub fn is_armed(&self, master: MasterId, address: u32) -> bool {
        let g = self.granule_of(address);
        self.monitors.get(&master).is_some_and(|m| m.armed && m.granule == g)
    }

    pub fn armed_masters(&self) -> impl Iterator<Item = (MasterId, u32)> + '_ {
        self.monitors.iter().filter(|(_, m)| m.armed).map(|(id, m)| (*id, m.granule))
    }

    pub fn update(&mut self, event: MonitorEvent) -> Vec<MonitorChange> {
        exclusive_monitor_update(event, self)
    }
}

pub fn exclusive_monitor_update(event: MonitorEvent, set: &mut ExclusiveMonitorSet) -> Vec<MonitorChange> {
    let mut changes = Vec::new();
    match event {
        MonitorEvent::LoadExclusive { master, address } => {
            let granule = set.granule_of(address);
            set.monitors.insert(master, Monitor { granule, armed: true });
            changes.push(MonitorChange::Armed { master, granule });
        }
        MonitorEvent::Store { master, address, len } => {
            let first = set.granule_of(address);
            let last = set.granule_of(address + len.max(1) - 1);
            for (id, m) in set.monitors.iter_mut() {
                if *id != master && m.armed && m.granule >= first && m.granule <= last {
                    m.armed = false;
                    changes.push(MonitorChange::Cleared { master: *id, granule: m.granule });
                }
            }
        }
        MonitorEvent::StoreExclusiveResolved { master, success } => {
            if success {
                if let Some(m) = set.monitors.get_mut(&master) {
                    if m.armed {
                        m.armed = false;
                        changes.push(MonitorChange::Cleared { master, granule: m.granule });
                    }
                }
            }
        }
    }
    changes
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: MasterId = MasterId(0);
    const B: MasterId = MasterId(1);

    fn arm(set: &mut ExclusiveMonitorSet, m: MasterId, address: u32) {
        set.update(MonitorEvent::LoadExclusive { master: m, address });
    }

    fn store(set: &mut ExclusiveMonitorSet, m: MasterId, address: u32) {
        set.update(MonitorEvent::Store { master: m, address, len: 4 });
    }

    #[test]
    fn foreign_store_disarms() {
        let mut s = ExclusiveMonitorSet::new(8);
        arm(&mut s, A, 0x100);
        store(&mut s, B, 0x100);
        assert!(!s.is_armed(A, 0x100));
    }

    #[test]
    fn store_to_other_granule_leaves_armed() {
        let mut s = ExclusiveMonitorSet::new(8);
        arm(&mut s, A, 0x100);
        store(&mut s, B, 0x200);
        assert!(s.is_armed(A, 0x100));
        // own plain store does not disarm
        store(&mut s, A, 0x104);
        assert!(s.is_armed(A, 0x100));
    }

    #[test]
    fn winning_store_exclusive_disarms_everyone() {
        let mut s = ExclusiveMonitorSet::new(8);
        arm(&mut s, A, 0x100);
        arm(&mut s, B, 0x100);
        assert!(s.is_armed(A, 0x100));
        store(&mut s, A, 0x100);
        s.update(MonitorEvent::StoreExclusiveResolved { master: A, success: true });
        assert!(!s.is_armed(A, 0x100));
        assert!(!s.is_armed(B, 0x100));
    }

    #[test]
    fn failed_resolution_changes_nothing() {
        let mut s = ExclusiveMonitorSet::new(8);
        arm(&mut s, A, 0x100);
        let before = s.clone();
        let changes = s.update(MonitorEvent::StoreExclusiveResolved { master: B, success: false });
        assert!(changes.is_empty());
        assert_eq!(s, before);
    }

    #[test]
    fn wide_store_covers_every_granule() {
        let mut s = ExclusiveMonitorSet::new(8);
        arm(&mut s, A, 0x108);
        arm(&mut s, B, 0x118);
        s.update(MonitorEvent::Store { master: MasterId(9), address: 0x100, len: 16 });
        assert!(!s.is_armed(A, 0x108));
        assert!(s.is_armed(B, 0x118));
    }

    /// Every interleaving of two masters' loadex/storeex pairs on one
    /// granule. A winner's reservation window never contains another win,
    /// so overlapping windows have at most one winner, and some master
    /// always wins.
    #[test]
    fn two_master_interleavings_have_at_most_one_winner() {
        for mask in (0u8..16).filter(|m| m.count_ones() == 2) {
            let mut s = ExclusiveMonitorSet::new(8);
            let mut pc = [0usize; 2];
            let mut loaded_at = [0usize; 2];
            let mut wins: Vec<(usize, usize, usize)> = Vec::new(); // (master, load step, store step)
            for step in 0..4 {
                let who = usize::from(mask & (1 << step) != 0);
                let m = MasterId(who as u16);
                if pc[who] == 0 {
                    arm(&mut s, m, 0x40);
                    loaded_at[who] = step;
                } else {
                    let ok = s.is_armed(m, 0x40);
                    if ok {
                        store(&mut s, m, 0x40);
                        wins.push((who, loaded_at[who], step));
                    }
                    s.update(MonitorEvent::StoreExclusiveResolved { master: m, success: ok });
                }
                pc[who] += 1;
            }
            assert!(!wins.is_empty(), "schedule {mask:04b}");
            for &(w, l, st) in &wins {
                let intruders = wins.iter().filter(|(o, _, ost)| *o != w && *ost > l && *ost < st).count();
                assert_eq!(intruders, 0, "schedule {mask:04b}");
            }
            let overlapping = loaded_at[0].max(loaded_at[1]) < 2;
            if overlapping {
                assert_eq!(wins.len(), 1, "schedule {mask:04b}");
            }
        }
    }
}
