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

//! Scenario loading, the cycle engine, traces and checkers.

pub mod check;
pub mod engine;
pub mod master;
pub mod oracle;
pub mod projection;
pub mod random;
pub mod scenario;
pub mod stats;
pub mod trace;

pub use check::{check_invariants, check_safety, Rule, Violation};
pub use engine::{run, FailureReason, MasterSummary, RunFailure, RunOutput, SimError, StuckTxn};
pub use oracle::{compare_with_oracle, sequential_oracle, OracleOutput};
pub use projection::{first_divergence, transaction_projection, Divergence, Projection};
pub use scenario::{Scenario, ScenarioError, ScenarioFile};
pub use stats::Stats;
pub use trace::{EventKind, Trace, TraceEvent};
