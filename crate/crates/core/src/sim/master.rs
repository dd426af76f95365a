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

//! Socket-side traffic sources.

use crate::niu::{Endianness, Released};
use crate::sim::scenario::{IncrementFlavor, IncrementSpec, MasterSpec, Program};
use crate::transaction::{Channel, MasterId, Opcode, SocketOrderKey, Status, TransactionRequest};

#[derive(Clone, Debug, PartialEq, Eq)]
enum LoopState {
    /// `next` holds the load half.
    Load,
    AwaitLoad,
    /// `next` holds the store half.
    Store,
    AwaitStore,
    Done,
}

#[derive(Clone, Debug)]
pub struct Master {
    pub id: MasterId,
    program: Program,
    cursor: usize,
    state: LoopState,
    next: Option<TransactionRequest>,
    /// Loop iterations that stored successfully.
    pub completed: u32,
    /// Store-exclusive attempts that lost.
    pub exfails: u32,
    /// Responses with an error status seen by a loop (which then stops).
    pub errors: u32,
}

fn encode(v: u32, e: Endianness) -> Vec<u8> {
    match e {
        Endianness::Little => v.to_le_bytes().to_vec(),
        Endianness::Big => v.to_be_bytes().to_vec(),
    }
}

fn decode(data: &[u8], e: Endianness) -> u32 {
    let bytes: [u8; 4] = data[..4].try_into().expect("counter loads are 4 bytes");
    match e {
        Endianness::Little => u32::from_le_bytes(bytes),
        Endianness::Big => u32::from_be_bytes(bytes),
    }
}

fn store_key(key: SocketOrderKey) -> SocketOrderKey {
    match key {
        SocketOrderKey::TxnId { tid, .. } => SocketOrderKey::TxnId { tid, channel: Channel::Write },
        k => k,
    }
}

impl Master {
    pub fn new(spec: &MasterSpec) -> Self {
        let mut m = Master {
            id: spec.id,
            program: spec.program.clone(),
            cursor: 0,
            state: LoopState::Done,
            next: None,
            completed: 0,
            exfails: 0,
            errors: 0,
        };
        if let Program::Increment(inc) = &m.program {
            if inc.iterations > 0 {
                m.next = Some(m.load_request(inc));
                m.state = LoopState::Load;
            }
        }
        m
    }

    fn load_request(&self, inc: &IncrementSpec) -> TransactionRequest {
        let op = match inc.flavor {
            IncrementFlavor::Exclusive => Opcode::LoadExclusive,
            IncrementFlavor::Lock => Opcode::ReadEx,
        };
        TransactionRequest::new(self.id, op, inc.address, 1, 4, inc.key)
    }

    /// The request this master wants to issue now, if any.
    pub fn peek(&self) -> Option<&TransactionRequest> {
        match &self.program {
            Program::Script(ops) => ops.get(self.cursor),
            Program::Increment(_) => match self.state {
                LoopState::Load | LoopState::Store => self.next.as_ref(),
                _ => None,
            },
        }
    }

    /// The NIU took the request returned by [`Master::peek`].
    pub fn accepted(&mut self) {
        match &self.program {
            Program::Script(_) => self.cursor += 1,
            Program::Increment(_) => {
                self.state = match self.state {
                    LoopState::Load => LoopState::AwaitLoad,
                    LoopState::Store => LoopState::AwaitStore,
                    ref s => unreachable!("accepted in state {s:?}"),
                };
                self.next = None;
            }
        }
    }

    pub fn on_response(&mut self, r: &Released) {
        let Program::Increment(inc) = &self.program else {
            return;
        };
        let inc = inc.clone();
        let status = r.response.status;
        if status.is_error() {
            self.errors += 1;
            self.state = LoopState::Done;
            return;
        }
        match self.state {
            LoopState::AwaitLoad => {
                let v = decode(&r.response.data, inc.endianness);
                let op = match inc.flavor {
                    IncrementFlavor::Exclusive => Opcode::StoreExclusive,
                    IncrementFlavor::Lock => Opcode::StoreLockedRelease,
                };
                let req = TransactionRequest::new(self.id, op, inc.address, 1, 4, store_key(inc.key))
                    .with_data(encode(v.wrapping_add(1), inc.endianness));
                self.next = Some(req);
                self.state = LoopState::Store;
            }
            LoopState::AwaitStore => {
                if status == Status::ExFail {
                    self.exfails += 1;
                } else {
                    self.completed += 1;
                }
                if self.completed == inc.iterations {
                    self.state = LoopState::Done;
                } else {
                    self.next = Some(self.load_request(&inc));
                    self.state = LoopState::Load;
                }
            }
            ref s => unreachable!("response in state {s:?}"),
        }
    }

    /// Nothing left to issue. Outstanding responses are tracked by the NIU.
    pub fn is_done(&self) -> bool {
        match &self.program {
            Program::Script(ops) => self.cursor == ops.len(),
            Program::Increment(_) => self.state == LoopState::Done,
        }
    }

    pub fn remaining(&self) -> Vec<TransactionRequest> {
        match &self.program {
            Program::Script(ops) => ops[self.cursor..].to_vec(),
            Program::Increment(_) => self.next.iter().cloned().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transaction::TransactionResponse;

    fn released(m: MasterId, status: Status, data: Vec<u8>) -> Released {
        Released {
            txn: 0,
            opcode: Opcode::Load,
            address: 0,
            issued_at: 0,
            response: TransactionResponse { master_id: m, order_key: SocketOrderKey::Single, status, data },
        }
    }

    #[test]
    fn exclusive_loop_retries_until_success() {
        let spec = MasterSpec {
            id: MasterId(1),
            program: Program::Increment(IncrementSpec {
                flavor: IncrementFlavor::Exclusive,
                address: 0x40,
                iterations: 1,
                key: SocketOrderKey::TxnId { tid: 0, channel: Channel::Read },
                endianness: Endianness::Big,
            }),
        };
        let mut m = Master::new(&spec);
        assert_eq!(m.peek().unwrap().opcode, Opcode::LoadExclusive);
        m.accepted();
        assert!(m.peek().is_none());
        m.on_response(&released(m.id, Status::ExOkay, vec![0, 0, 0, 9]));
        let st = m.peek().unwrap();
        assert_eq!((st.opcode, st.data.clone()), (Opcode::StoreExclusive, vec![0, 0, 0, 10]));
        assert_eq!(st.order_key, SocketOrderKey::TxnId { tid: 0, channel: Channel::Write });
        m.accepted();
        m.on_response(&released(m.id, Status::ExFail, vec![]));
        assert_eq!(m.exfails, 1);
        assert_eq!(m.peek().unwrap().opcode, Opcode::LoadExclusive);
        m.accepted();
        m.on_response(&released(m.id, Status::ExOkay, vec![0, 0, 0, 11]));
        m.accepted();
        m.on_response(&released(m.id, Status::ExOkay, vec![]));
        assert!(m.is_done());
        assert_eq!(m.completed, 1);
    }

    #[test]
    fn script_walks_in_order() {
        let k = SocketOrderKey::Single;
        let ops = vec![
            TransactionRequest::new(MasterId(0), Opcode::Store, 0, 1, 4, k),
            TransactionRequest::new(MasterId(0), Opcode::Load, 0, 1, 4, k),
        ];
        let mut m = Master::new(&MasterSpec { id: MasterId(0), program: Program::Script(ops) });
        assert_eq!(m.peek().unwrap().opcode, Opcode::Store);
        m.accepted();
        assert_eq!(m.remaining().len(), 1);
        m.accepted();
        assert!(m.is_done() && m.peek().is_none());
    }
}
