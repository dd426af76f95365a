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

//! A zero-latency reference bus.
//!
//! Masters take turns in id order, one whole operation per turn, against
//! flat memories. There is no network, no tag and no reordering, so every
//! response is known as soon as its request is. An increment loop counts
//! as one read-modify-write per turn.

use std::collections::BTreeMap;

use crate::niu::{Endianness, NiuId};
use crate::sim::engine::RunOutput;
use crate::sim::projection::SocketResponse;
use crate::sim::scenario::{private_windows, Program, Scenario};
use crate::transaction::{Address, MasterId, Opcode, SocketOrderKey, Status, TransactionRequest};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleOutput {
    pub memories: BTreeMap<NiuId, Vec<u8>>,
    /// Per master and stream, the responses of script requests.
    pub responses: BTreeMap<MasterId, BTreeMap<SocketOrderKey, Vec<SocketResponse>>>,
}

struct Mem {
    id: NiuId,
    base: u64,
    size: u64,
    bytes: Vec<u8>,
    granule: u32,
    /// master → reserved granule
    reservations: BTreeMap<MasterId, u32>,
}

impl Mem {
    fn clear_others(&mut self, master: MasterId, offset: u32, len: u32) {
        let g = self.granule;
        let (lo, hi) = (offset / g, (offset + len.max(1) - 1) / g);
        self.reservations.retain(|m, r| *m == master || *r / g < lo || *r / g > hi);
    }
}

fn swap_lanes(data: &[u8], beat: usize, from: Endianness, to: Endianness) -> Vec<u8> {
    if from == to {
        return data.to_vec();
    }
    let mut out = data.to_vec();
    for b in out.chunks_mut(beat) {
        b.reverse();
    }
    out
}

struct Bus {
    mems: Vec<Mem>,
    fabric: Endianness,
}

impl Bus {
    /// Performs one request; returns its status and read data.
    fn access(&mut self, req: &TransactionRequest, max_payload: u32, socket: Endianness) -> (Status, Vec<u8>) {
        let len = u32::from(req.burst_len) * u32::from(req.beat_size);
        let beat = usize::from(req.beat_size);
        let start = u64::from(req.address);
        let Some(mem) = self.mems.iter_mut().find(|m| start >= m.base && start + u64::from(len) <= m.base + m.size)
        else {
            return (Status::ErrorDecode, if req.opcode.is_read() { vec![0; len as usize] } else { Vec::new() });
        };
        let atomic = matches!(
            req.opcode,
            Opcode::ReadEx | Opcode::StoreLockedRelease | Opcode::LoadExclusive | Opcode::StoreExclusive
        );
        if atomic && len > max_payload {
            return (Status::ErrorSlave, if req.opcode.is_read() { vec![0; len as usize] } else { Vec::new() });
        }
        let offset = (start - mem.base) as u32;
        let master = req.master_id;
        let wdata = swap_lanes(&req.data, beat, socket, self.fabric);
        let mut rdata = vec![0u8; if req.opcode.is_read() { len as usize } else { 0 }];
        let mut status = if req.opcode.is_exclusive() { Status::ExOkay } else { Status::Okay };
        let mut done = 0u32;
        while done < len {
            let n = max_payload.min(len - done);
            let o = offset + done;
            let range = o as usize..(o + n) as usize;
            if (o + n) as usize > mem.bytes.len() {
                status = Status::ErrorSlave;
                done += n;
                continue;
            }
            match req.opcode {
                Opcode::Load | Opcode::ReadEx => {
                    rdata[done as usize..(done + n) as usize].copy_from_slice(&mem.bytes[range]);
                }
                Opcode::LoadExclusive => {
                    rdata[done as usize..(done + n) as usize].copy_from_slice(&mem.bytes[range]);
                    mem.reservations.insert(master, o / mem.granule * mem.granule);
                }
                Opcode::Store | Opcode::StorePosted | Opcode::StoreLockedRelease => {
                    mem.bytes[range].copy_from_slice(&wdata[done as usize..(done + n) as usize]);
                    mem.clear_others(master, o, n);
                }
                Opcode::StoreExclusive => {
                    if mem.reservations.get(&master) == Some(&(o / mem.granule * mem.granule)) {
                        mem.bytes[range].copy_from_slice(&wdata[done as usize..(done + n) as usize]);
                        mem.clear_others(master, o, n);
                        mem.reservations.remove(&master);
                    } else {
                        status = Status::ExFail;
                    }
                }
            }
            done += n;
        }
        (status, swap_lanes(&rdata, beat, self.fabric, socket))
    }
}

pub fn sequential_oracle(scenario: &Scenario) -> OracleOutput {
    let mut bus = Bus {
        mems: scenario
            .targets
            .iter()
            .map(|t| Mem {
                id: t.id,
                base: u64::from(t.base),
                size: t.size,
                bytes: vec![0; t.mem_size as usize],
                granule: t.granule,
                reservations: BTreeMap::new(),
            })
            .collect(),
        fabric: scenario.fabric_endianness,
    };
    let mut masters: Vec<_> = scenario.masters.iter().collect();
    masters.sort_by_key(|m| m.id);
    let mut cursor = vec![0u32; masters.len()];
    let mut out = OracleOutput::default();
    loop {
        let mut progressed = false;
        for (i, spec) in masters.iter().enumerate() {
            let cfg = scenario.initiator(NiuId(spec.id.0)).expect("master has an initiator");
            match &spec.program {
                Program::Script(reqs) => {
                    let Some(req) = reqs.get(cursor[i] as usize) else { continue };
                    let txn = u64::from(cursor[i]);
                    let (status, data) = bus.access(req, cfg.max_payload, cfg.endianness);
                    if req.opcode != Opcode::StorePosted {
                        out.responses
                            .entry(spec.id)
                            .or_default()
                            .entry(req.order_key)
                            .or_default()
                            .push(SocketResponse { txn, op: req.opcode, address: req.address, status, data });
                    }
                }
                Program::Increment(inc) => {
                    if cursor[i] >= inc.iterations {
                        continue;
                    }
                    increment(&mut bus, inc.address);
                }
            }
            cursor[i] += 1;
            progressed = true;
        }
        if !progressed {
            break;
        }
    }
    for m in bus.mems {
        out.memories.insert(m.id, m.bytes);
    }
    out
}

/// One atomic add to a 32-bit counter. Socket and fabric byte swaps
/// cancel, so the counter lives in fabric byte order.
fn increment(bus: &mut Bus, address: Address) {
    let a = u64::from(address);
    let fabric = bus.fabric;
    let Some(mem) = bus.mems.iter_mut().find(|m| a >= m.base && a + 4 <= m.base + m.size) else {
        return;
    };
    let o = (a - mem.base) as usize;
    if o + 4 > mem.bytes.len() {
        return;
    }
    let raw: [u8; 4] = mem.bytes[o..o + 4].try_into().expect("four bytes");
    let v = match fabric {
        Endianness::Little => u32::from_le_bytes(raw),
        Endianness::Big => u32::from_be_bytes(raw),
    }
    .wrapping_add(1);
    let raw = match fabric {
        Endianness::Little => v.to_le_bytes(),
        Endianness::Big => v.to_be_bytes(),
    };
    mem.bytes[o..o + 4].copy_from_slice(&raw);
}

/// Compares a finished run against the reference bus. Read data is only
/// compared where no other master writes, since it otherwise depends on
/// timing.
pub fn compare_with_oracle(scenario: &Scenario, run: &RunOutput, oracle: &OracleOutput) -> Result<(), String> {
    for (id, mem) in &oracle.memories {
        let got = run.memories.get(id).ok_or_else(|| format!("{id}: no memory image"))?;
        if let Some(i) = (0..mem.len()).find(|&i| got.get(i) != mem.get(i)) {
            return Err(format!("{id} byte {i:#x}: simulated {:?}, reference {:?}", got.get(i), mem.get(i)));
        }
    }
    let windows: BTreeMap<MasterId, Vec<(Address, u32)>> = scenario
        .initiators
        .iter()
        .map(|c| {
            let m = MasterId(c.id.0);
            (m, private_windows(scenario, m).into_values().collect())
        })
        .collect();
    let inside =
        |w: &(Address, u32), a: u64, len: u64| a >= u64::from(w.0) && a + len <= u64::from(w.0) + u64::from(w.1);
    let touches =
        |w: &(Address, u32), a: u64, len: u64| a < u64::from(w.0) + u64::from(w.1) && u64::from(w.0) < a + len;
    for (m, streams) in &oracle.responses {
        let got = run.responses.get(m).map(Vec::as_slice).unwrap_or(&[]);
        for (key, expect) in streams {
            let sim: Vec<_> = got.iter().filter(|r| r.response.order_key == *key).collect();
            if sim.len() != expect.len() {
                return Err(format!("{m} stream {key}: {} responses, reference {}", sim.len(), expect.len()));
            }
            for (i, (s, e)) in sim.iter().zip(expect).enumerate() {
                if (s.opcode, s.address, s.response.status) != (e.op, e.address, e.status) {
                    return Err(format!(
                        "{m} stream {key} response #{i}: simulated {} {:#x} {}, reference {e}",
                        s.opcode, s.address, s.response.status
                    ));
                }
                let (a, len) = (u64::from(e.address), e.data.len() as u64);
                let own = windows[m].iter().any(|w| inside(w, a, len));
                let foreign =
                    windows.iter().filter(|(x, _)| *x != m).any(|(_, ws)| ws.iter().any(|w| touches(w, a, len)));
                if (own || !foreign) && s.response.data != e.data {
                    return Err(format!(
                        "{m} stream {key} response #{i} data: simulated {:02x?}, reference {e}",
                        s.response.data
                    ));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::engine::run;
    use crate::sim::random::random_scenario;
    use crate::sim::scenario::tests::MINIMAL;

    #[test]
    fn lane_swap_examples() {
        use Endianness::*;
        assert_eq!(swap_lanes(&[1, 2, 3, 4, 5, 6], 2, Big, Little), vec![2, 1, 4, 3, 6, 5]);
        assert_eq!(swap_lanes(&[1, 2], 2, Big, Big), vec![1, 2]);
    }

    #[test]
    fn minimal_store_then_load() {
        let sc = Scenario::from_toml(MINIMAL).unwrap();
        let o = sequential_oracle(&sc);
        assert_eq!(&o.memories[&NiuId(1)][0x10..0x18], &[1, 2, 3, 4, 5, 6, 7, 8]);
        let loads: Vec<_> = o.responses[&MasterId(0)].values().flatten().filter(|r| r.op == Opcode::Load).collect();
        assert_eq!(loads[0].data, vec![1, 2, 3, 4, 5, 6, 7, 8]);
        compare_with_oracle(&sc, &run(&sc).unwrap(), &o).unwrap();
    }

    #[test]
    fn random_scenarios_match_the_simulator() {
        for seed in 10..16 {
            let sc = Scenario::build(random_scenario(seed)).unwrap();
            let out = run(&sc).unwrap();
            compare_with_oracle(&sc, &out, &sequential_oracle(&sc)).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        }
    }

    #[test]
    fn corrupted_memory_is_caught() {
        let sc = Scenario::build(random_scenario(11)).unwrap();
        let mut out = run(&sc).unwrap();
        let o = sequential_oracle(&sc);
        let (_, mem) = out.memories.iter_mut().find(|(_, m)| m.iter().any(|b| *b != 0)).unwrap();
        let i = mem.iter().position(|b| *b != 0).unwrap();
        mem[i] ^= 0xff;
        assert!(compare_with_oracle(&sc, &out, &o).unwrap_err().contains("byte"));
    }
}
