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

use std::path::PathBuf;

use nocsim::sim::{check_invariants, compare_with_oracle, run, sequential_oracle, Scenario, ScenarioError};

fn scenarios_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn load(rel: &str) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(scenarios_dir().join(rel)).unwrap();
    Scenario::from_toml(&text)
}

#[test]
fn shipped_scenarios_verify() {
    let mut seen = 0;
    for entry in std::fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|x| x != "toml") {
            continue;
        }
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let sc = load(&name).unwrap_or_else(|e| panic!("{name}: {e}"));
        let out = run(&sc).unwrap_or_else(|f| panic!("{name}: {f}"));
        let v = check_invariants(&out.trace, &sc);
        assert!(v.is_empty(), "{name}: {}", v[0]);
        compare_with_oracle(&sc, &out, &sequential_oracle(&sc)).unwrap_or_else(|e| panic!("{name}: {e}"));
        seen += 1;
    }
    assert!(seen >= 5);
}

#[test]
fn unroutable_scenario_names_the_target() {
    let err = load("bad/unroutable.toml").unwrap_err();
    assert_eq!(err.to_string(), "unroutable target N1 at switch S0");
}

#[test]
fn deadlock_scenario_times_out() {
    let sc = load("bad/deadlock.toml").unwrap();
    let f = run(&sc).unwrap_err();
    assert!(f.is_timeout());
    assert_eq!(f.output.cycles, sc.max_cycles);
    let text = f.to_string();
    assert!(text.contains("M0 LOAD") && text.contains("M2 LOAD"), "{text}");
}

#[test]
fn counters_match_the_reference_bus() {
    for name in ["exclusive_counter.toml", "lock_counter.toml"] {
        let sc = load(name).unwrap();
        let out = run(&sc).unwrap();
        let mem = &out.memories.values().next().unwrap()[0x40..0x44];
        assert_eq!(u32::from_le_bytes(mem.try_into().unwrap()), 200, "{name}");
        assert_eq!(out.memories, sequential_oracle(&sc).memories, "{name}");
    }
}
