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

//! Transport layer: topology, routing, arbitration, flow control and
//! switches.
//!
//! Nothing here looks at opcodes, payloads, tags or user bits. Routing uses
//! the destination NIU, arbitration uses priority and source, and the only
//! transaction-related decision is the lock gate driven by the lock marker.

pub mod arbiter;
pub mod credit;
pub mod routing;
pub mod switch;
pub mod topology;

use thiserror::Error;

use crate::niu::NiuId;

pub use arbiter::{arbitrate, lock_handle, ArbiterState, LockTransition};
pub use credit::{credit_flow, CreditAction, CreditCounter};
pub use routing::{auto_routes, route, route_packet, spanning_tree, validate_routes, RoutingTable};
pub use switch::{
    switch_step, BufferClass, Forward, InputBuffer, OutputPort, StepOutcome, Switch, TransportMode, CLASSES,
};
pub use topology::{Endpoint, LinkSpec, Port, SwitchId, SwitchSpec, Topology};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FabricError {
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("unroutable target {target} at switch {switch}")]
    Unroutable { target: NiuId, switch: SwitchId },
    #[error("routing loop toward {target} starting at {switch}")]
    RoutingLoop { target: NiuId, switch: SwitchId },
    #[error("lock protocol violation: {requester} vs owner {}", .owner.map_or("none".to_string(), |o| o.to_string()))]
    LockProtocol { owner: Option<NiuId>, requester: NiuId },
    #[error("credit accounting: {0}")]
    CreditAccounting(&'static str),
}
