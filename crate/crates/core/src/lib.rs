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

//! A cycle-driven network-on-chip simulator.
//!
//! The crate is split along the layers of the interconnect:
//!
//! * [`transaction`]: socket-neutral requests, responses and ordering keys.
//! * [`niu`]: network interface units translating transactions to packets.
//! * [`fabric`]: switches, routing, arbitration and flow control.
//! * [`link`]: flit framing and link timing.
//! * [`sim`]: the engine, scenarios, traces and checkers.

pub mod fabric;
pub mod link;
pub mod niu;
pub mod sim;
pub mod transaction;
