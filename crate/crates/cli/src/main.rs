use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use thiserror::Error;

use rtgames::gadget::{compile_files, CompiledArena, Sidecar, Target};
use rtgames::generate::{random_game_doc, GenParams};
use rtgames::harness::{
    check_encoding, check_time_ledger, faithful_achilles, playout, slots_at, tortoise_skip_all, tortoise_verify_at,
    trace_jsonl, Deviation, Outcome, Verdict, DEFAULT_STEP_BOUND,
};
use rtgames::rha::{classify, is_glitch_free, RhaDoc};
use rtgames::rsm::{solve_reachability_game, solve_termination_game, RsmDoc, RsmGame};
use rtgames::tcm::{tcm_run, TwoCounterMachine};
use rtgames::Rational;

/// Recursive timed games: run two-counter machines, compile them into
/// timed/stopwatch arenas, play them out, and solve RSM games.
#[derive(Parser)]
#[command(name = "rtgames", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a two-counter machine from (L0, 0, 0).
    TcmRun {
        file: PathBuf,
        #[arg(long, default_value_t = 1000)]
        max_steps: usize,
    },
    /// Compile a machine into an arena; also writes `<stem>.sidecar.json` next to `--out`.
    Compile {
        file: PathBuf,
        #[arg(long, value_enum)]
        target: TargetArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Play faithful Achilles against a scripted Tortoise.
    Simulate {
        arena: PathBuf,
        machine: PathBuf,
        /// `skip` or `verify:STEP:SLOT`.
        #[arg(long, default_value = "skip")]
        tortoise: String,
        /// `STEP:OFFSET` (first slot of that step) or `STEP:SLOT:OFFSET`.
        #[arg(long)]
        deviate: Option<String>,
        /// Write the run as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Sidecar path; defaults to `<arena stem>.sidecar.json`.
        #[arg(long)]
        sidecar: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_STEP_BOUND)]
        max_moves: usize,
        /// Defaults to the sidecar's bound (HALT bound when skipping, smiley bound when verifying).
        #[arg(long)]
        time_bound: Option<Rational>,
    },
    /// Solve a reachability or termination game on an RSM.
    RsmSolve {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = ObjectiveArg::Reach)]
        objective: ObjectiveArg,
    },
    /// Check anchor encodings and the time ledger of a faithful skip-all run.
    Check {
        arena: PathBuf,
        machine: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        deviate: Option<String>,
        #[arg(long)]
        sidecar: Option<PathBuf>,
    },
    /// Print a random RSM game document.
    GenRsm {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        components: usize,
        /// Allow cyclic call graphs.
        #[arg(long)]
        recursive: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Rta3,
    Rsa4,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Target {
        match t {
            TargetArg::Rta3 => Target::Rta3,
            TargetArg::Rsa4 => Target::Rsa4,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObjectiveArg {
    Reach,
    Terminate,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Input(String),
    /// Carries the JSON already printed.
    #[error("check failed")]
    Violated,
}

impl CliError {
    fn input(e: impl std::fmt::Display) -> CliError {
        CliError::Input(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn print(v: &Value) {
    use std::io::Write;
    // a closed pipe is not an error worth reporting
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(v).expect("json values serialize"));
}

fn read_machine(path: &Path) -> Result<TwoCounterMachine, CliError> {
    TwoCounterMachine::parse(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn sidecar_path(arena: &Path) -> PathBuf {
    let stem = arena.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    arena.with_file_name(format!("{stem}.sidecar.json"))
}

fn load_arena(arena: &Path, sidecar: Option<&Path>) -> Result<CompiledArena, CliError> {
    let doc: RhaDoc = read_json(arena)?;
    let side: Sidecar = read_json(&sidecar.map(Path::to_path_buf).unwrap_or_else(|| sidecar_path(arena)))?;
    CompiledArena::from_parts(&doc, &side).map_err(CliError::input)
}

fn parse_deviation(arena: &CompiledArena, text: &str) -> Result<Deviation, CliError> {
    let bad = || CliError::Input(format!("--deviate expects STEP:OFFSET or STEP:SLOT:OFFSET, got {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    let step: usize = parts[0].parse().map_err(|_| bad())?;
    let (slot, offset) = match parts[..] {
        [_, off] => {
            let first = slots_at(arena, step)
                .map_err(CliError::input)?
                .into_iter()
                .find(|s| s != "branch")
                .ok_or_else(|| CliError::Input(format!("step {step} has no delay slot")))?;
            (first, off)
        }
        [_, slot, off] => (slot.to_string(), off),
        _ => return Err(bad()),
    };
    let offset: Rational = offset.parse().map_err(|_| bad())?;
    if !slots_at(arena, step).map_err(CliError::input)?.contains(&slot) {
        return Err(CliError::Input(format!("step {step} has no slot {slot:?}")));
    }
    Ok(Deviation { step, slot, offset })
}

fn verdict_json(arena: &CompiledArena, v: &Verdict) -> Value {
    let s = arena.model.structure();
    let (outcome, location, kind) = match &v.outcome {
        Outcome::ReachedFinal { location } => {
            let kind = if Some(*location) == arena.halt {
                "HALT"
            } else if arena.smileys.contains(location) {
                "smiley"
            } else {
                "final"
            };
            ("ReachedFinal", Some(s.location_name(*location)), Some(kind))
        }
        Outcome::Stuck => ("Stuck", Some(s.location_name(v.run.last().location)), None),
        Outcome::Exhausted => ("Exhausted", None, None),
        Outcome::TimeExceeded => ("TimeExceeded", Some(s.location_name(v.run.last().location)), None),
    };
    json!({
        "outcome": outcome,
        "location": location,
        "final": kind,
        "elapsed": v.elapsed,
        "moves": v.run.len(),
        "anchors": v.anchor_hits,
        "verifiedAt": v.verified_at,
    })
}

fn tcm_run_cmd(file: &Path, max_steps: usize) -> CliResult {
    let m = read_machine(file)?;
    let run = tcm_run(&m, max_steps).map_err(CliError::input)?;
    print(&json!({
        "status": if run.halted { "halted" } else { "exhausted" },
        "steps": run.steps(),
        "last": run.last(),
        "trace": run.trace,
    }));
    Ok(())
}

fn compile_cmd(file: &Path, target: Target, out: &Path) -> CliResult {
    let m = read_machine(file)?;
    let (doc, side) = compile_files(&m, target).map_err(CliError::input)?;
    let arena = CompiledArena::from_parts(&doc, &side).map_err(CliError::input)?;
    let side_path = sidecar_path(out);
    write(out, &serde_json::to_string_pretty(&doc).expect("documents serialize"))?;
    write(&side_path, &serde_json::to_string_pretty(&side).expect("documents serialize"))?;
    let s = arena.model.structure();
    print(&json!({
        "arena": out,
        "sidecar": side_path,
        "target": target,
        "classification": classify(&arena.model),
        "glitchFree": is_glitch_free(&arena.model),
        "components": s.components().len(),
        "start": s.location_name(arena.start),
        "halt": arena.halt.map(|l| s.location_name(l)),
    }));
    Ok(())
}

struct SimulateArgs<'a> {
    tortoise: &'a str,
    deviate: Option<&'a str>,
    trace: Option<&'a Path>,
    max_moves: usize,
    time_bound: Option<Rational>,
}

fn simulate_cmd(arena: &CompiledArena, machine: &TwoCounterMachine, a: SimulateArgs) -> CliResult {
    let mut ach = faithful_achilles(machine, arena).map_err(CliError::input)?;
    if let Some(d) = a.deviate {
        ach = ach.with_deviation(parse_deviation(arena, d)?);
    }
    let (mut tor, default_bound) = match a.tortoise.split(':').collect::<Vec<_>>()[..] {
        ["skip"] => (tortoise_skip_all(), &arena.time_bound),
        ["verify", step, slot] => {
            let step: usize = step.parse().map_err(|_| CliError::Input(format!("bad step {step:?}")))?;
            (tortoise_verify_at(arena, step, slot).map_err(CliError::input)?, &arena.smiley_time_bound)
        }
        _ => return Err(CliError::Input(format!("--tortoise expects skip or verify:STEP:SLOT, got {:?}", a.tortoise))),
    };
    let bound = a.time_bound.unwrap_or_else(|| default_bound.clone());
    let v = playout(arena, &mut ach, &mut tor, a.max_moves, &bound).map_err(CliError::input)?;
    if let Some(path) = a.trace {
        write(path, &trace_jsonl(arena, &v))?;
    }
    let mut out = verdict_json(arena, &v);
    out["deviationApplied"] = json!(ach.deviation_applied());
    print(&out);
    Ok(())
}

fn rsm_solve_cmd(file: &Path, objective: ObjectiveArg) -> CliResult {
    let doc: RsmDoc = read_json(file)?;
    let g = RsmGame::from_doc(&doc).map_err(CliError::input)?;
    let sol = match objective {
        ObjectiveArg::Reach => solve_reachability_game(&g.model, &g.partition, g.start, &g.finals),
        ObjectiveArg::Terminate => solve_termination_game(&g.model, &g.partition, g.start),
    }
    .map_err(CliError::input)?;
    let s = g.model.structure();
    print(&json!({
        "objective": if objective == ObjectiveArg::Reach { "reach" } else { "terminate" },
        "start": s.location_name(rtgames::Location::Node(g.start)),
        "winner": sol.winner,
    }));
    Ok(())
}

fn check_cmd(arena: &CompiledArena, machine: &TwoCounterMachine, deviate: Option<&str>, report: Option<&Path>) -> CliResult {
    let mut ach = faithful_achilles(machine, arena).map_err(CliError::input)?;
    if let Some(d) = deviate {
        ach = ach.with_deviation(parse_deviation(arena, d)?);
    }
    // a deviated run may overshoot, so play without a time cut-off
    let v = playout(arena, &mut ach, &mut tortoise_skip_all(), DEFAULT_STEP_BOUND, &arena.smiley_time_bound)
        .map_err(CliError::input)?;
    let halted = matches!(v.outcome, Outcome::ReachedFinal { location } if Some(location) == arena.halt);
    let encoding = match check_encoding(arena, &v) {
        Ok(n) => json!({ "pass": true, "anchors": n }),
        Err(e) => json!({ "pass": false, "firstMismatch": e }),
    };
    let ledger = match check_time_ledger(&v) {
        Ok(d) => json!({ "pass": true, "durations": d }),
        Err(e) => json!({ "pass": false, "violation": e.0 }),
    };
    let total_ok = v.elapsed < arena.time_bound;
    let pass = halted && encoding["pass"] == true && ledger["pass"] == true && total_ok;
    let out = json!({
        "pass": pass,
        "verdict": verdict_json(arena, &v),
        "encoding": encoding,
        "timeLedger": ledger,
        "totalWithinBound": total_ok,
        "timeBound": arena.time_bound,
    });
    if let Some(path) = report {
        write(path, &serde_json::to_string_pretty(&out).expect("json values serialize"))?;
    }
    print(&out);
    if pass {
        Ok(())
    } else {
        Err(CliError::Violated)
    }
}

fn gen_rsm_cmd(seed: u64, components: usize, recursive: bool) -> CliResult {
    let params = GenParams {
        components,
        hierarchical: !recursive,
        ..GenParams::default()
    };
    print(&serde_json::to_value(random_game_doc(seed, &params)).expect("documents serialize"));
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::TcmRun { file, max_steps } => tcm_run_cmd(&file, max_steps),
        Command::Compile { file, target, out } => compile_cmd(&file, target.into(), &out),
        Command::Simulate {
            arena,
            machine,
            tortoise,
            deviate,
            trace,
            sidecar,
            max_moves,
            time_bound,
        } => {
            let a = load_arena(&arena, sidecar.as_deref())?;
            let m = read_machine(&machine)?;
            let args = SimulateArgs {
                tortoise: &tortoise,
                deviate: deviate.as_deref(),
                trace: trace.as_deref(),
                max_moves,
                time_bound,
            };
            simulate_cmd(&a, &m, args)
        }
        Command::RsmSolve { file, objective } => rsm_solve_cmd(&file, objective),
        Command::Check {
            arena,
            machine,
            report,
            deviate,
            sidecar,
        } => {
            let a = load_arena(&arena, sidecar.as_deref())?;
            let m = read_machine(&machine)?;
            check_cmd(&a, &m, deviate.as_deref(), report.as_deref())
        }
        Command::GenRsm {
            seed,
            components,
            recursive,
        } => gen_rsm_cmd(seed, components, recursive),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Violated) => ExitCode::from(1),
        Err(CliError::Input(msg)) => {
            print(&json!({ "error": msg }));
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
