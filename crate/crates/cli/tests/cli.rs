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
use std::process::{Command, Output};

fn nocsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nocsim")).args(args).output().expect("binary runs")
}

fn scenario(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(rel).to_string_lossy().into_owned()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn run_writes_trace_stats_and_memory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = nocsim(&["run", &scenario("minimal.toml"), "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("cycle,site,kind,"));
    assert!(trace.lines().count() > 1);
    let stats = std::fs::read_to_string(dir.path().join("stats.txt")).unwrap();
    assert!(stats.contains("run.rng = chacha8"));
    assert!(stats.contains("master.M0.latency.mean"));
    let mem = std::fs::read(dir.path().join("memory/N1.bin")).unwrap();
    assert_eq!(&mem[0x10..0x18], &[1, 2, 3, 4, 5, 6, 7, 8]);
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = nocsim(&["run", &scenario("minimal.toml"), "--out", out, "--mode", "store_and_forward", "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let stats = std::fs::read_to_string(dir.path().join("stats.txt")).unwrap();
    assert!(stats.contains("run.mode = store_and_forward"));
    assert!(stats.contains("run.seed = 9"));
}

#[test]
fn unroutable_target_is_a_config_error() {
    let o = nocsim(&["run", &scenario("bad/unroutable.toml"), "--out", "unused"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("unroutable target N1 at switch S0"), "{}", text(&o));
}

#[test]
fn malformed_file_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, "[topology]\nswitches = [2\n").unwrap();
    let o = nocsim(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("line"), "{}", text(&o));
}

#[test]
fn bad_flag_is_a_config_error() {
    let o = nocsim(&["run", &scenario("minimal.toml"), "--mode", "teleport"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn deadlock_times_out_with_stuck_list() {
    let dir = tempfile::tempdir().unwrap();
    let o =
        nocsim(&["run", &scenario("bad/deadlock.toml"), "--out", dir.path().to_str().unwrap(), "--max-cycles", "300"]);
    assert_eq!(o.status.code(), Some(2));
    let t = text(&o);
    assert!(t.contains("timeout after 300 cycles") && t.contains("M0 LOAD"), "{t}");
    assert!(dir.path().join("trace.csv").exists());
}

#[test]
fn compare_modes_equal_seeds() {
    let o = nocsim(&["compare-modes", &scenario("random_42.toml"), "--leg-seeds", "5,5"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("EQUIVALENT"));
}

#[test]
fn compare_modes_refuses_different_seeds() {
    let o = nocsim(&["compare-modes", &scenario("random_42.toml"), "--leg-seeds", "1,2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o).contains("seeds must match"));
}

#[test]
fn compare_modes_reports_a_corrupted_leg() {
    let o = nocsim(&["compare-modes", &scenario("random_42.toml"), "--corrupt"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(text(&o).contains("first divergence"), "{}", text(&o));
}

#[test]
fn compare_links_sweeps() {
    let o = nocsim(&["compare-links", &scenario("minimal.toml")]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert_eq!(text(&o).matches("OK width=").count(), 12);
}

#[test]
fn verify_directory_and_failures() {
    let o = nocsim(&["verify", &scenario("")]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).matches("PASS").count() >= 5);
    let o = nocsim(&["verify", &scenario("bad")]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    let o = nocsim(&["verify", &scenario("bad/deadlock.toml"), "--max-cycles", "200"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn generate_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gen.toml");
    let o = nocsim(&["generate", "--seed", "77", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = nocsim(&["verify", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
}
