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

//! Output-port arbitration: priority first, then round-robin.

use crate::fabric::FabricError;
use crate::niu::{LockMarker, NiuId, PacketHeader};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArbiterState {
    inputs: usize,
    cursor: usize,
    /// Set while a locked sequence owns this output.
    pub lock_owner: Option<NiuId>,
}

impl ArbiterState {
    pub fn new(inputs: usize) -> Self {
        ArbiterState { inputs: inputs.max(1), cursor: 0, lock_owner: None }
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn with_cursor(mut self, cursor: usize) -> Self {
        self.cursor = cursor % self.inputs;
        self
    }
}

/// Picks the winning input port among `candidates`, all of which want this
/// output. Only priority and source address are looked at.
pub fn arbitrate(candidates: &[(usize, &PacketHeader)], state: &mut ArbiterState) -> Option<usize> {
    let eligible = |h: &PacketHeader| state.lock_owner.is_none_or(|owner| h.mst_addr == owner);
    let top = candidates.iter().filter(|(_, h)| eligible(h)).map(|(_, h)| h.priority).max()?;
    let n = state.inputs;
    let winner = candidates
        .iter()
        .filter(|(_, h)| eligible(h) && h.priority == top)
        .map(|(port, _)| *port)
        .min_by_key(|port| (port + n - state.cursor) % n)?;
    state.cursor = (winner + 1) % n;
    Some(winner)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LockTransition {
    Set(NiuId),
    Cleared(NiuId),
}

/// Applies the lock marker of a packet that has just been granted the
/// output port.
pub fn lock_handle(header: &PacketHeader, state: &mut ArbiterState) -> Result<Option<LockTransition>, FabricError> {
    let mst = header.mst_addr;
    match header.lock_marker {
        LockMarker::None => Ok(None),
        LockMarker::Acquire => match state.lock_owner {
            None => {
                state.lock_owner = Some(mst);
                Ok(Some(LockTransition::Set(mst)))
            }
            Some(owner) => Err(FabricError::LockProtocol { owner: Some(owner), requester: mst }),
        },
        LockMarker::Release => match state.lock_owner {
            Some(owner) if owner == mst => {
                state.lock_owner = None;
                Ok(Some(LockTransition::Cleared(mst)))
            }
            owner => Err(FabricError::LockProtocol { owner, requester: mst }),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::niu::{Command, SlvAddr, UserBits};
    use crate::transaction::Opcode;

    fn header(mst: u16, priority: u8) -> PacketHeader {
        PacketHeader {
            slv_addr: SlvAddr { target: NiuId(9), offset: 0 },
            mst_addr: NiuId(mst),
            tag: 0,
            command: Command::Request(Opcode::Load),
            priority,
            user_bits: UserBits::default(),
            lock_marker: LockMarker::None,
            payload_len: 4,
            fragment: 0,
            last_fragment: true,
        }
    }

    #[test]
    fn highest_priority_wins() {
        let (a, b) = (header(0, 2), header(1, 5));
        let mut st = ArbiterState::new(2);
        assert_eq!(arbitrate(&[(0, &a), (1, &b)], &mut st), Some(1));
    }

    #[test]
    fn round_robin_from_cursor() {
        let hs = [header(0, 1), header(1, 1), header(2, 1)];
        let mut st = ArbiterState::new(3).with_cursor(1);
        let c: Vec<_> = hs.iter().enumerate().collect();
        assert_eq!(arbitrate(&c, &mut st), Some(1));
        assert_eq!(st.cursor(), 2);
        assert_eq!(arbitrate(&c, &mut st), Some(2));
        assert_eq!(arbitrate(&c, &mut st), Some(0));
    }

    #[test]
    fn empty_and_locked_out() {
        let mut st = ArbiterState::new(2);
        assert_eq!(arbitrate(&[], &mut st), None);
        st.lock_owner = Some(NiuId(7));
        let a = header(0, 7);
        assert_eq!(arbitrate(&[(0, &a)], &mut st), None);
        let owner = header(7, 0);
        assert_eq!(arbitrate(&[(0, &a), (1, &owner)], &mut st), Some(1));
    }

    /// Counting oracle: with every input permanently requesting at equal
    /// priority, round-robin hands out grants in strict rotation.
    #[test]
    fn saturated_round_robin_is_exactly_fair() {
        let hs = [header(0, 3), header(1, 3), header(2, 3)];
        let c: Vec<_> = hs.iter().enumerate().collect();
        let mut st = ArbiterState::new(3);
        let mut wins = [0usize; 3];
        for _ in 0..300 {
            wins[arbitrate(&c, &mut st).unwrap()] += 1;
        }
        assert_eq!(wins, [100, 100, 100]);
    }

    #[test]
    fn lock_lifecycle() {
        let mut st = ArbiterState::new(2);
        let mut acq = header(3, 0);
        acq.lock_marker = LockMarker::Acquire;
        assert_eq!(lock_handle(&acq, &mut st), Ok(Some(LockTransition::Set(NiuId(3)))));
        let mut foreign = header(4, 0);
        foreign.lock_marker = LockMarker::Release;
        assert!(lock_handle(&foreign, &mut st).is_err());
        let mut rel = header(3, 0);
        rel.lock_marker = LockMarker::Release;
        assert_eq!(lock_handle(&rel, &mut st), Ok(Some(LockTransition::Cleared(NiuId(3)))));
        assert_eq!(st.lock_owner, None);
        assert!(lock_handle(&rel, &mut st).is_err());
    }
}
