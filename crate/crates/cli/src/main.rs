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

//! Command-line front end.
//!
//! Exit codes: 0 clean, 1 configuration error, 2 timeout, 3 invariant
//! violation, 4 comparison mismatch.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nocsim::fabric::TransportMode;
use nocsim::sim::random::random_scenario;
use nocsim::sim::{
    check_invariants, compare_with_oracle, first_divergence, run, sequential_oracle, transaction_projection,
    FailureReason, Projection, RunOutput, Scenario, ScenarioFile,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Exit {
    Clean = 0,
    Config = 1,
    Timeout = 2,
    Invariant = 3,
    Mismatch = 4,
}

type Outcome<T> = Result<T, Exit>;

#[derive(Parser)]
#[command(name = "nocsim", version, about = "Cycle-level network-on-chip transaction simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Replace the scenario's run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the scenario's transport mode (wormhole or store_and_forward).
    #[arg(long)]
    mode: Option<TransportMode>,
    /// Replace the scenario's cycle budget.
    #[arg(long)]
    max_cycles: Option<u64>,
    /// Directory for traces, stats and memory images.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its trace, stats and memory images.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
    /// Run every scenario in a directory (or one file) and check invariants
    /// and the reference model.
    Verify {
        path: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
    /// Run a scenario under both transport modes and compare what the
    /// sockets saw.
    CompareModes {
        scenario: PathBuf,
        #[command(flatten)]
        o: Overrides,
        /// Seeds for the wormhole and store-and-forward legs; they must match.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        leg_seeds: Option<Vec<u64>>,
        /// Corrupt the second leg before comparing (tests the comparator).
        #[arg(long, hide = true)]
        corrupt: bool,
    },
    /// Sweep link parameters and check every point gives the same
    /// transactions and memory.
    CompareLinks {
        scenario: PathBuf,
        #[command(flatten)]
        o: Overrides,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
        widths: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "1,3")]
        latencies: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        rates: Vec<u32>,
    },
    /// Print a random scenario.
    Generate {
        #[arg(long)]
        seed: u64,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors; help and version are not
            return ExitCode::from(if e.use_stderr() { Exit::Config as u8 } else { 0 });
        }
    };
    let result = match cli.cmd {
        Cmd::Run { scenario, o } => cmd_run(&scenario, &o),
        Cmd::Verify { path, o } => cmd_verify(&path, &o),
        Cmd::CompareModes { scenario, o, leg_seeds, corrupt } => {
            cmd_compare_modes(&scenario, &o, leg_seeds.as_deref(), corrupt)
        }
        Cmd::CompareLinks { scenario, o, widths, latencies, rates } => {
            cmd_compare_links(&scenario, &o, &widths, &latencies, &rates)
        }
        Cmd::Generate { seed, out } => cmd_generate(seed, out.as_deref()),
    };
    ExitCode::from(result.err().unwrap_or(Exit::Clean) as u8)
}

fn config_error(msg: impl std::fmt::Display) -> Exit {
    eprintln!("error: {msg}");
    Exit::Config
}

fn load_file(path: &Path, o: &Overrides) -> Outcome<ScenarioFile> {
    let text = fs::read_to_string(path).map_err(|e| config_error(format_args!("{}: {e}", path.display())))?;
    let mut file = ScenarioFile::parse(&text).map_err(|e| config_error(format_args!("{}: {e}", path.display())))?;
    if let Some(seed) = o.seed {
        file.run.seed = seed;
    }
    if let Some(mode) = o.mode {
        file.run.mode = mode;
    }
    if let Some(max) = o.max_cycles {
        file.run.max_cycles = max;
    }
    Ok(file)
}

fn build(path: &Path, file: ScenarioFile) -> Outcome<Scenario> {
    Scenario::build(file).map_err(|e| config_error(format_args!("{}: {e}", path.display())))
}

fn load(path: &Path, o: &Overrides) -> Outcome<Scenario> {
    build(path, load_file(path, o)?)
}

fn write_output(dir: &Path, out: &RunOutput) -> Outcome<()> {
    let io = |e: std::io::Error| config_error(format_args!("{}: {e}", dir.display()));
    fs::create_dir_all(dir.join("memory")).map_err(io)?;
    fs::write(dir.join("trace.csv"), out.trace.to_csv()).map_err(io)?;
    fs::write(dir.join("stats.txt"), out.stats.to_text()).map_err(io)?;
    for (id, mem) in &out.memories {
        fs::write(dir.join("memory").join(format!("{id}.bin")), mem).map_err(io)?;
    }
    Ok(())
}

/// Runs a scenario; timeouts and faults are reported and mapped to exit
/// codes. Outputs (partial on failure) go to `dir` when given.
fn execute(sc: &Scenario, dir: Option<&Path>, label: &str) -> Outcome<RunOutput> {
    match run(sc) {
        Ok(out) => {
            if let Some(d) = dir {
                write_output(d, &out)?;
            }
            Ok(out)
        }
        Err(f) => {
            if let Some(d) = dir {
                write_output(d, &f.output)?;
            }
            eprintln!("{label}: {f}");
            Err(match f.reason {
                FailureReason::Timeout { .. } => Exit::Timeout,
                FailureReason::Fault(_) => Exit::Invariant,
            })
        }
    }
}

fn check(sc: &Scenario, out: &RunOutput, label: &str) -> Outcome<()> {
    let v = check_invariants(&out.trace, sc);
    if v.is_empty() {
        return Ok(());
    }
    for x in &v {
        eprintln!("{label}: {x}");
    }
    Err(Exit::Invariant)
}

fn cmd_run(path: &Path, o: &Overrides) -> Outcome<()> {
    let sc = load(path, o)?;
    let dir = o.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let label = path.display().to_string();
    let out = execute(&sc, Some(&dir), &label)?;
    check(&sc, &out, &label)?;
    println!(
        "{label}: {} mode, {} cycles, {} events, output in {}",
        sc.mode,
        out.cycles,
        out.trace.len(),
        dir.display()
    );
    Ok(())
}

fn scenario_files(path: &Path) -> Outcome<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = fs::read_dir(path).map_err(|e| config_error(format_args!("{}: {e}", path.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(config_error(format_args!("{}: no .toml scenarios", path.display())));
    }
    Ok(files)
}

fn verify_one(path: &Path, o: &Overrides) -> Outcome<u64> {
    let sc = load(path, o)?;
    let label = path.display().to_string();
    let dir = o.out.as_ref().map(|d| d.join(path.file_stem().unwrap_or_default()));
    let out = execute(&sc, dir.as_deref(), &label)?;
    check(&sc, &out, &label)?;
    compare_with_oracle(&sc, &out, &sequential_oracle(&sc)).map_err(|e| {
        eprintln!("{label}: reference model mismatch: {e}");
        Exit::Mismatch
    })?;
    Ok(out.cycles)
}

/// Exit code is the lowest failing code over all scenarios.
fn cmd_verify(path: &Path, o: &Overrides) -> Outcome<()> {
    let mut worst: Option<Exit> = None;
    for f in scenario_files(path)? {
        match verify_one(&f, o) {
            Ok(cycles) => println!("PASS {} ({cycles} cycles)", f.display()),
            Err(e) => {
                println!("FAIL {} (exit {})", f.display(), e as u8);
                worst = Some(worst.map_or(e, |w| w.min(e)));
            }
        }
    }
    worst.map_or(Ok(()), Err)
}

/// Swaps two different responses of one stream, or drops a request when
/// no stream has two.
fn corrupt_projection(p: &mut Projection) {
    for mp in p.masters.values_mut() {
        for s in mp.streams.values_mut() {
            if let Some(i) = (1..s.len()).find(|&i| s[i] != s[i - 1]) {
                s.swap(i - 1, i);
                return;
            }
        }
    }
    if let Some(mp) = p.masters.values_mut().find(|m| !m.issued.is_empty()) {
        mp.issued.pop();
    }
}

fn cmd_compare_modes(path: &Path, o: &Overrides, leg_seeds: Option<&[u64]>, corrupt: bool) -> Outcome<()> {
    let mut o = o.clone();
    if let Some(seeds) = leg_seeds {
        match seeds {
            [a, b] if a == b => o.seed = Some(*a),
            [_, _] => {
                return Err(config_error(format_args!(
                    "leg seeds must match (got {}); both modes run the same workload",
                    seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
                )))
            }
            _ => return Err(config_error("--leg-seeds takes exactly two seeds")),
        }
    }
    let sc = load(path, &o)?;
    let legs: Vec<(TransportMode, Outcome<RunOutput>)> = std::thread::scope(|s| {
        let handles: Vec<_> = TransportMode::ALL
            .into_iter()
            .map(|mode| {
                let leg = sc.clone().with_mode(mode);
                let dir = o.out.as_ref().map(|d| d.join(mode.name()));
                s.spawn(move || {
                    let label = format!("{} [{mode}]", path.display());
                    let out = execute(&leg, dir.as_deref(), &label)?;
                    check(&leg, &out, &label)?;
                    Ok(out)
                })
            })
            .collect();
        TransportMode::ALL.into_iter().zip(handles).map(|(m, h)| (m, h.join().expect("leg thread panicked"))).collect()
    });
    let mut outs = Vec::new();
    for (mode, r) in legs {
        outs.push((mode, r?));
    }
    let (ma, a) = &outs[0];
    let (mb, b) = &outs[1];
    let pa = transaction_projection(a);
    let mut pb = transaction_projection(b);
    if corrupt {
        corrupt_projection(&mut pb);
    }
    if let Some(d) = first_divergence(&pa, &pb) {
        println!("MISMATCH first divergence at {d}");
        println!("  {ma}: {}", d.left);
        println!("  {mb}: {}", d.right);
        return Err(Exit::Mismatch);
    }
    if a.memories != b.memories {
        println!("MISMATCH final memory images differ");
        return Err(Exit::Mismatch);
    }
    println!("EQUIVALENT {}: {ma} {} cycles, {mb} {} cycles", path.display(), a.cycles, b.cycles);
    Ok(())
}

fn cmd_compare_links(path: &Path, o: &Overrides, widths: &[u32], latencies: &[u32], rates: &[u32]) -> Outcome<()> {
    let file = load_file(path, o)?;
    let mut base: Option<(String, Projection, RunOutput)> = None;
    for &w in widths {
        for &lat in latencies {
            for &rate in rates {
                let label = format!("width={w} latency={lat} rate={rate}");
                let sc = build(path, file.clone().with_uniform_links(w, lat, rate))?;
                let dir = o.out.as_ref().map(|d| d.join(format!("w{w}-l{lat}-r{rate}")));
                let out = execute(&sc, dir.as_deref(), &label)?;
                check(&sc, &out, &label)?;
                let p = transaction_projection(&out);
                match &base {
                    None => base = Some((label.clone(), p, out.clone())),
                    Some((bl, bp, bo)) => {
                        if let Some(d) = first_divergence(bp, &p) {
                            println!("MISMATCH {label} vs {bl}: first divergence at {d}");
                            return Err(Exit::Mismatch);
                        }
                        if bo.memories != out.memories {
                            println!("MISMATCH {label} vs {bl}: final memory images differ");
                            return Err(Exit::Mismatch);
                        }
                    }
                }
                println!("OK {label}: {} cycles", out.cycles);
            }
        }
    }
    println!("EQUIVALENT {}", path.display());
    Ok(())
}

fn cmd_generate(seed: u64, out: Option<&Path>) -> Outcome<()> {
    let text = random_scenario(seed).to_toml();
    match out {
        Some(p) => fs::write(p, text).map_err(|e| config_error(format_args!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
