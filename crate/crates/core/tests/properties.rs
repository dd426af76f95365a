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

use std::collections::BTreeSet;

use nocsim::fabric::{arbitrate, ArbiterState, TransportMode};
use nocsim::niu::{response_release_order, Command, LockMarker, NiuId, PacketHeader, SlvAddr, UserBits};
use nocsim::sim::random::random_scenario;
use nocsim::sim::{
    check_invariants, compare_with_oracle, first_divergence, run, sequential_oracle, transaction_projection, Scenario,
    Trace,
};
use nocsim::transaction::{Channel, Opcode, SocketOrderKey};
use proptest::prelude::*;

fn key_strategy() -> impl Strategy<Value = SocketOrderKey> {
    prop_oneof![
        Just(SocketOrderKey::Single),
        (0u8..3).prop_map(SocketOrderKey::Thread),
        (0u8..2, any::<bool>()).prop_map(|(tid, w)| SocketOrderKey::TxnId {
            tid,
            channel: if w { Channel::Write } else { Channel::Read },
        }),
    ]
}

/// Oracle: after each completion, release every transaction whose
/// same-stream elders have all completed, oldest first.
fn greedy_release(issued: &[(u64, SocketOrderKey)], completions: &[u64]) -> Vec<u64> {
    let mut done = BTreeSet::new();
    let mut released = BTreeSet::new();
    let mut order = Vec::new();
    for c in completions {
        done.insert(*c);
        for &(t, k) in issued {
            let ready = issued.iter().filter(|(u, j)| *j == k && *u <= t).all(|(u, _)| done.contains(u));
            if ready && released.insert(t) {
                order.push(t);
            }
        }
    }
    order
}

fn header(port_priority: u8, mst: u16) -> PacketHeader {
    PacketHeader {
        slv_addr: SlvAddr { target: NiuId(0), offset: 0 },
        mst_addr: NiuId(mst),
        tag: 0,
        command: Command::Request(Opcode::Load),
        priority: port_priority,
        user_bits: UserBits::default(),
        lock_marker: LockMarker::None,
        payload_len: 4,
        fragment: 0,
        last_fragment: true,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn release_order_matches_greedy_oracle(
        keys in prop::collection::vec(key_strategy(), 1..16),
        perm_seed in any::<u64>(),
    ) {
        let issued: Vec<(u64, SocketOrderKey)> = keys.into_iter().enumerate().map(|(i, k)| (i as u64, k)).collect();
        let mut completions: Vec<u64> = issued.iter().map(|(t, _)| *t).collect();
        // deterministic Fisher-Yates from the seed
        let mut s = perm_seed | 1;
        for i in (1..completions.len()).rev() {
            s ^= s << 13; s ^= s >> 7; s ^= s << 17;
            completions.swap(i, (s % (i as u64 + 1)) as usize);
        }
        let got = response_release_order(&issued, &completions);
        prop_assert_eq!(got, greedy_release(&issued, &completions));
    }

    #[test]
    fn arbiter_grants_a_top_priority_requester(
        prios in prop::collection::vec(proptest::option::of(0u8..8), 1..8),
        cursor in 0usize..8,
    ) {
        let n = prios.len();
        let hs: Vec<(usize, PacketHeader)> =
            prios.iter().enumerate().filter_map(|(i, p)| p.map(|p| (i, header(p, i as u16)))).collect();
        let cands: Vec<(usize, &PacketHeader)> = hs.iter().map(|(i, h)| (*i, h)).collect();
        let mut st = ArbiterState::new(n).with_cursor(cursor);
        match arbitrate(&cands, &mut st) {
            None => prop_assert!(cands.is_empty()),
            Some(w) => {
                let top = cands.iter().map(|(_, h)| h.priority).max().unwrap();
                prop_assert_eq!(prios[w], Some(top));
                prop_assert_eq!(st.cursor(), (w + 1) % n);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Any generated scenario runs clean under both modes, agrees with
    /// the reference bus, and its trace survives a CSV round trip.
    #[test]
    fn random_scenarios_hold_every_invariant(seed in any::<u64>()) {
        let sc = Scenario::build(random_scenario(seed)).unwrap();
        let wh = run(&sc.clone().with_mode(TransportMode::Wormhole)).unwrap();
        let saf = run(&sc.clone().with_mode(TransportMode::StoreAndForward)).unwrap();
        for out in [&wh, &saf] {
            let v = check_invariants(&out.trace, &sc);
            prop_assert!(v.is_empty(), "{}", v[0]);
        }
        prop_assert_eq!(first_divergence(&transaction_projection(&wh), &transaction_projection(&saf)), None);
        prop_assert_eq!(&wh.memories, &saf.memories);
        prop_assert_eq!(compare_with_oracle(&sc, &wh, &sequential_oracle(&sc)), Ok(()));
        let back = Trace::from_csv(&wh.trace.to_csv()).unwrap();
        prop_assert_eq!(back, wh.trace.clone());
    }
}
