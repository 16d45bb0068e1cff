//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::{check_pair_case, corpus, oracle_encoding, oracle_run, random_pair_case, unfolded_winner, Objective};
use rtgames::gadget::{build_div, compile, CompiledArena, Target};
use rtgames::generate::{random_game, GenParams};
use rtgames::harness::{
    check_encoding, check_time_ledger, continuation_search, faithful_achilles, playout, slots_at, tortoise_skip_all,
    tortoise_verify_at, Deviation, FaithfulAchilles, Outcome, Verdict, DEFAULT_STEP_BOUND,
};
use rtgames::rational::q;
use rtgames::rha::{classify, is_glitch_free, is_hierarchical, ModelClass, RhaDoc, RhaModel};
use rtgames::rsm::{solve_reachability_game, solve_termination_game};
use rtgames::tcm::TwoCounterMachine;
use rtgames::Rational;

const TARGETS: [Target; 2] = [Target::Rta3, Target::Rsa4];

type Checked = Result<String, String>;
type Criterion = (&'static str, fn() -> Checked);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn skip_playout(m: &TwoCounterMachine, a: &CompiledArena, bound: usize) -> Result<Verdict, String> {
    let mut ach = faithful_achilles(m, a).map_err(|e| e.to_string())?;
    playout(a, &mut ach, &mut tortoise_skip_all(), bound, &a.time_bound).map_err(|e| e.to_string())
}

fn halting() -> Vec<(String, TwoCounterMachine)> {
    corpus("h")
}

fn c1_encoding() -> Checked {
    let start = Instant::now();
    let machines = halting();
    ensure(machines.len() == 10, || format!("{} halting machines", machines.len()))?;
    let mut anchors = 0;
    for (name, m) in &machines {
        let (trace, halted) = oracle_run(m, 20);
        ensure(halted, || format!("{name} does not halt within 20 steps"))?;
        ensure(trace.iter().any(|t| t.1 > 0) && trace.iter().any(|t| t.2 > 0), || {
            format!("{name} leaves a counter untouched")
        })?;
        for target in TARGETS {
            let a = compile(m, target).map_err(|e| e.to_string())?;
            let v = skip_playout(m, &a, DEFAULT_STEP_BOUND)?;
            ensure(v.anchor_hits.len() == trace.len(), || {
                format!("{name}/{target}: {} anchors for {} configurations", v.anchor_hits.len(), trace.len())
            })?;
            for (hit, &(index, c, d)) in v.anchor_hits.iter().zip(&trace) {
                let val = &v.run.configurations().nth(hit.run_index).unwrap().valuation;
                let (x, y) = oracle_encoding(hit.step as u64, c, d);
                ensure(hit.instruction == index && val[0] == x && val[1] == y && val[2].is_zero(), || {
                    format!("{name}/{target} step {}: x={} y={} z={}, expected x={x} y={y} z=0", hit.step, val[0], val[1], val[2])
                })?;
                anchors += 1;
            }
            check_encoding(&a, &v).map_err(|e| format!("{name}/{target}: {e}"))?;
        }
    }
    let took = start.elapsed();
    ensure(took <= Duration::from_secs(10), || format!("took {took:?}"))?;
    Ok(format!("{anchors} anchors exact over 10 machines x 2 targets in {took:.2?}"))
}

fn c2_time_bound() -> Checked {
    let mut worst = Rational::zero();
    let mut segments = 0;
    for (name, m) in &halting() {
        for target in TARGETS {
            let a = compile(m, target).map_err(|e| e.to_string())?;
            let v = skip_playout(m, &a, DEFAULT_STEP_BOUND)?;
            let d = check_time_ledger(&v).map_err(|e| format!("{name}/{target}: {e}"))?;
            // independent restatement of the ledger
            for (k, t) in d.iter().enumerate() {
                let bound = q(2, 1) * oracle_encoding(k as u64, 0, 0).1;
                ensure(*t < bound, || format!("{name}/{target} step {k}: {t} >= {bound}"))?;
            }
            ensure(v.elapsed < q(4, 1), || format!("{name}/{target}: total {}", v.elapsed))?;
            segments += d.len();
            worst = worst.max(v.elapsed.clone());
        }
    }
    Ok(format!("{segments} instruction segments within 2*2^-k; longest run {worst} (~{:.4}) < 4", worst.to_f64_lossy()))
}

fn c3_div_contract() -> Checked {
    let mut cases = 0;
    for target in TARGETS {
        for zeta in [q(1, 1), q(1, 2), q(1, 6)] {
            for n in [2i64, 3, 6, 12] {
                for a in ["x", "y"] {
                    let b = if a == "x" { "y" } else { "x" };
                    let values = [(a.to_string(), zeta.clone()), (b.to_string(), q(1, 1))].into_iter().collect();
                    let arena = build_div(a, n as u32, target)
                        .and_then(|g| g.with_initial(&values).map_err(Into::into))
                        .map_err(|e| e.to_string())?;
                    let ai = arena.model.var_index(a).unwrap();
                    let t = &zeta / q(n, 1);
                    let go = |slot: Option<&str>| -> Result<Verdict, String> {
                        let mut ach = FaithfulAchilles::standalone();
                        let r = match slot {
                            None => playout(&arena, &mut ach, &mut tortoise_skip_all(), DEFAULT_STEP_BOUND, &arena.smiley_time_bound),
                            Some(s) => {
                                let mut tor = tortoise_verify_at(&arena, 0, s).map_err(|e| e.to_string())?;
                                playout(&arena, &mut ach, &mut tor, DEFAULT_STEP_BOUND, &arena.smiley_time_bound)
                            }
                        };
                        r.map_err(|e| e.to_string())
                    };
                    let v = go(None)?;
                    ensure(v.reached_final() && v.run.last().valuation[ai] == t && v.elapsed == q(2, 1) * &t, || {
                        format!("{target} Div{{{a},{n}}} ζ={zeta}: {} with {}={}", v.elapsed, a, v.run.last().valuation[ai])
                    })?;
                    // first check: rta3 measures n(1 − t) after the first delay; rsa4 spends n whole units
                    let first = match target {
                        Target::Rta3 => &t + &(q(n, 1) * (q(1, 1) - &t)),
                        Target::Rsa4 => &t + &q(n, 1),
                    };
                    let v = go(Some("div"))?;
                    ensure(v.reached_final() && v.elapsed == first, || {
                        format!("{target} Div{{{a},{n}}} ζ={zeta} first check: {} vs {first}", v.elapsed)
                    })?;
                    let v = go(Some("div-catchup"))?;
                    let catchup = q(1, 1) + &t;
                    ensure(v.reached_final() && v.elapsed == catchup, || {
                        format!("{target} Div{{{a},{n}}} ζ={zeta} catch-up: {} vs {catchup}", v.elapsed)
                    })?;
                    cases += 1;
                }
            }
        }
    }
    // β = 1: the first Div{y,2} check ends at 2 − β/2
    let arena = build_div("y", 2, Target::Rta3).map_err(|e| e.to_string())?;
    let mut tor = tortoise_verify_at(&arena, 0, "div").map_err(|e| e.to_string())?;
    let v = playout(&arena, &mut FaithfulAchilles::standalone(), &mut tor, DEFAULT_STEP_BOUND, &arena.smiley_time_bound)
        .map_err(|e| e.to_string())?;
    ensure(v.elapsed == q(3, 2), || format!("2 − β/2 case took {}", v.elapsed))?;
    Ok(format!("{cases} (target, ζ, n, var) cases: exit a = ζ/n at 2ζ/n; both check ledgers exact"))
}

fn c4_dichotomy() -> Checked {
    let mut addresses = 0;
    let mut deviations = 0;
    let mut punished = 0;
    for (name, m) in &halting() {
        for target in TARGETS {
            let a = compile(m, target).map_err(|e| e.to_string())?;
            let v = skip_playout(m, &a, DEFAULT_STEP_BOUND)?;
            ensure(matches!(v.outcome, Outcome::ReachedFinal { location } if Some(location) == a.halt), || {
                format!("{name}/{target}: {}", v.describe(&a))
            })?;
            let steps = v.anchor_hits.len() - 1;
            for k in 0..steps {
                for slot in slots_at(&a, k).map_err(|e| e.to_string())? {
                    let mut ach = faithful_achilles(m, &a).map_err(|e| e.to_string())?;
                    let mut tor = tortoise_verify_at(&a, k, &slot).map_err(|e| e.to_string())?;
                    let v = playout(&a, &mut ach, &mut tor, DEFAULT_STEP_BOUND, &a.smiley_time_bound).map_err(|e| e.to_string())?;
                    ensure(matches!(v.outcome, Outcome::ReachedFinal { location } if a.smileys.contains(&location)), || {
                        format!("{name}/{target} verify {k}:{slot}: {}", v.describe(&a))
                    })?;
                    addresses += 1;
                }
            }
            // single-delay deviations in the first instruction
            let slots: Vec<String> = slots_at(&a, 0).map_err(|e| e.to_string())?.into_iter().filter(|s| s != "branch").collect();
            for (i, slot) in slots.iter().enumerate() {
                for offset in [q(1, 64), q(-1, 64), q(1, 8), q(-1, 8)].into_iter().skip(i % 2).step_by(2) {
                    let dev = Deviation {
                        step: 0,
                        slot: slot.clone(),
                        offset,
                    };
                    let mut witness = None;
                    for cand in slots_at(&a, 0).map_err(|e| e.to_string())? {
                        let mut ach = faithful_achilles(m, &a).map_err(|e| e.to_string())?.with_deviation(dev.clone());
                        let mut tor = tortoise_verify_at(&a, 0, &cand).map_err(|e| e.to_string())?;
                        let v = match playout(&a, &mut ach, &mut tor, DEFAULT_STEP_BOUND, &a.smiley_time_bound) {
                            Ok(v) => v,
                            // negative perturbed delay: not a legal deviation
                            Err(rtgames::harness::HarnessError::Deviation(_)) => break,
                            Err(e) => return Err(e.to_string()),
                        };
                        if v.reached_final() {
                            continue;
                        }
                        let from = v.run.configurations().nth(v.verified_at.unwrap_or(v.run.len())).unwrap();
                        let r = continuation_search(&a, from, 40);
                        if !r.final_reachable && r.exhaustive {
                            witness = Some(cand);
                            break;
                        }
                    }
                    let legal = {
                        let mut ach = faithful_achilles(m, &a).map_err(|e| e.to_string())?.with_deviation(dev.clone());
                        playout(&a, &mut ach, &mut tortoise_skip_all(), DEFAULT_STEP_BOUND, &q(100, 1)).is_ok()
                    };
                    if !legal {
                        continue;
                    }
                    deviations += 1;
                    ensure(witness.is_some(), || format!("{name}/{target}: deviation {slot}{:+} unpunished", dev.offset.to_f64_lossy()))?;
                    punished += 1;
                }
            }
        }
    }
    ensure(deviations >= 20, || format!("only {deviations} deviations"))?;
    Ok(format!(
        "HALT vs skip-all on 20 arenas; smiley at all {addresses} verify addresses; {punished}/{deviations} deviations punished (exhaustive, depth 40)"
    ))
}

fn c5_non_halting() -> Checked {
    let machines = corpus("n");
    ensure(machines.len() == 5, || format!("{} non-halting machines", machines.len()))?;
    for (name, m) in &machines {
        let (_, halted) = oracle_run(m, 100_000);
        ensure(!halted, || format!("{name} halts"))?;
        for target in TARGETS {
            let a = compile(m, target).map_err(|e| e.to_string())?;
            let v = skip_playout(m, &a, 10_000)?;
            ensure(v.outcome == Outcome::Exhausted && v.run.len() == 10_000, || format!("{name}/{target}: {}", v.describe(&a)))?;
            let touched = v.run.configurations().any(|c| a.finals.contains(&c.location));
            ensure(!touched, || format!("{name}/{target}: a final was visited"))?;
            check_encoding(&a, &v).map_err(|e| format!("{name}/{target}: {e}"))?;
        }
    }
    Ok("5 machines x 2 targets exhausted at 10000 moves, no HALT or smiley".into())
}

fn c6_rsm_oracle() -> Checked {
    let start = Instant::now();
    let params = GenParams::default();
    let mut n = 0;
    for seed in 0..250u64 {
        let g = random_game(seed, &params).map_err(|e| e.to_string())?;
        let reach = unfolded_winner(&g.model, &g.partition, g.start, Objective::Reach(&g.finals), 8)
            .ok_or_else(|| format!("seed {seed}: unfolding truncated"))?;
        let solved = solve_reachability_game(&g.model, &g.partition, g.start, &g.finals).map_err(|e| e.to_string())?;
        ensure(solved.winner == reach, || format!("seed {seed}: reachability {:?} vs {:?}", solved.winner, reach))?;
        let term = unfolded_winner(&g.model, &g.partition, g.start, Objective::Terminate, 8).unwrap();
        let solved = solve_termination_game(&g.model, &g.partition, g.start).map_err(|e| e.to_string())?;
        ensure(solved.winner == term, || format!("seed {seed}: termination {:?} vs {:?}", solved.winner, term))?;
        n += 1;
    }
    let took = start.elapsed();
    ensure(took <= Duration::from_secs(60), || format!("took {took:?}"))?;
    Ok(format!("{n} hierarchical instances, both objectives agree with unfold+attractor in {took:.2?}"))
}

fn c7_classifiers() -> Checked {
    for (name, m) in &halting() {
        let a = compile(m, Target::Rta3).map_err(|e| e.to_string())?;
        let c = classify(&a.model);
        ensure(c.class == ModelClass::Timed && a.model.variables().len() == 3, || format!("{name}/rta3: {:?}", c.class))?;
        let a = compile(m, Target::Rsa4).map_err(|e| e.to_string())?;
        let c = classify(&a.model);
        ensure(
            c.class == ModelClass::Stopwatch && a.model.variables().len() == 4 && is_glitch_free(&a.model),
            || format!("{name}/rsa4: {:?}", c.class),
        )?;
    }
    let doc: RhaDoc = serde_json::from_str(include_str!("data/self_call.json")).map_err(|e| e.to_string())?;
    let fig = RhaModel::from_doc(&doc).map_err(|e| e.to_string())?;
    ensure(!is_hierarchical(&fig), || "self-calling model classified hierarchical".into())?;
    Ok("rta3 timed |X|=3, rsa4 glitch-free stopwatch |X|=4 on all 10 machines; self-calling model not hierarchical".into())
}

fn c8_round_trip() -> Checked {
    let mut pairs = 0;
    let mut seed = 0u64;
    while pairs < 1000 {
        let case = random_pair_case(seed);
        pairs += check_pair_case(&case).map_err(|e| format!("seed {seed}: {e}"))?;
        seed += 1;
    }
    Ok(format!("{pairs} matched call/return pairs over {seed} random models"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("encoding exactness", c1_encoding),
        ("time bound", c2_time_bound),
        ("Div contract", c3_div_contract),
        ("game dichotomy", c4_dichotomy),
        ("non-halting separation", c5_non_halting),
        ("RSM solver vs oracle", c6_rsm_oracle),
        ("structural classifiers", c7_classifiers),
        ("pass-by-value round trip", c8_round_trip),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
