//! Scripted strategies, playouts and the checks run on their traces.
//!
//! Achilles plays the faithful simulation (optionally with one perturbed
//! delay); Tortoise either never verifies or verifies one addressed slot.
//! A slot is `(step, name)` where `step` counts instruction gadgets entered
//! so far and `name` is `divN`, `divN-catchup` or `branch`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::gadget::{expected_valuation, ChoiceRule, CompiledArena, CLAIM_POS, CLAIM_ZERO};
use crate::lts::Player;
use crate::rational::Rational;
use crate::rha::{available_actions, enabled_delays, timed_step, RhaConfiguration, StepError, TimedAction, TimedRun};
use crate::structure::{BoxId, Location, LocationKind, ModelError, CALL_ACTION, RETURN_ACTION};
use crate::tcm::{tcm_run, tcm_step, Counter, MachineConfig, StepOutcome, TcmError, TwoCounterMachine};

pub const DEFAULT_STEP_BOUND: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("move {index}: {error}")]
    IllegalMove { index: usize, error: StepError },
    #[error("bad address: {0}")]
    Address(String),
    #[error("bad deviation: {0}")]
    Deviation(String),
    #[error("strategy has no move at {0}")]
    NoChoice(String),
    #[error(transparent)]
    Machine(#[from] TcmError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// What a strategy sees: the current configuration, the instruction step
/// and the total elapsed time.
pub struct Position<'a> {
    pub config: &'a RhaConfiguration,
    pub step: usize,
    pub elapsed: &'a Rational,
}

pub trait TimedStrategy {
    fn choose(&mut self, arena: &CompiledArena, pos: &Position<'_>) -> Result<TimedAction, HarnessError>;
}

fn boxes(config: &RhaConfiguration) -> Vec<BoxId> {
    config.context.iter().map(|f| f.boxed).collect()
}

/// The first action with a non-empty delay set, at its earliest delay.
pub fn first_enabled(arena: &CompiledArena, config: &RhaConfiguration) -> Option<TimedAction> {
    available_actions(&arena.model, config).into_iter().find_map(|a| {
        let t = enabled_delays(&arena.model, config, &a).pick()?;
        Some(TimedAction::new(t, a))
    })
}

/// One perturbed delay: the faithful delay of `slot` at `step`, plus `offset`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deviation {
    pub step: usize,
    pub slot: String,
    pub offset: Rational,
}

/// Achilles playing the simulation: exact divisions, equal catch-up
/// delays, true branch claims and valid certificates.
#[derive(Debug, Clone)]
pub struct FaithfulAchilles {
    machine: Option<TwoCounterMachine>,
    trace: Vec<MachineConfig>,
    halted: bool,
    deviation: Option<Deviation>,
    applied: bool,
}

/// Faithful Achilles for `arena`, which must be compiled from `machine`.
pub fn faithful_achilles(machine: &TwoCounterMachine, arena: &CompiledArena) -> Result<FaithfulAchilles, HarnessError> {
    if arena.machine.as_ref() != Some(machine) {
        return Err(HarnessError::Address("arena was not compiled from this machine".into()));
    }
    Ok(FaithfulAchilles {
        machine: Some(machine.clone()),
        trace: vec![MachineConfig::default()],
        halted: false,
        deviation: None,
        applied: false,
    })
}

impl FaithfulAchilles {
    /// For standalone gadgets: branch claims are read off the valuation.
    pub fn standalone() -> FaithfulAchilles {
        FaithfulAchilles {
            machine: None,
            trace: Vec::new(),
            halted: false,
            deviation: None,
            applied: false,
        }
    }

    pub fn with_deviation(mut self, deviation: Deviation) -> FaithfulAchilles {
        self.deviation = Some(deviation);
        self.applied = false;
        self
    }

    pub fn deviation_applied(&self) -> bool {
        self.applied
    }

    fn machine_config(&mut self, step: usize) -> Result<Option<MachineConfig>, HarnessError> {
        let Some(m) = &self.machine else { return Ok(None) };
        while self.trace.len() <= step && !self.halted {
            match tcm_step(m, self.trace.last().unwrap())? {
                StepOutcome::Next(c) => self.trace.push(c),
                StepOutcome::Halted => self.halted = true,
            }
        }
        Ok(self.trace.get(step).copied())
    }
}

/// Counters from `x = 1/(2^(k+c) 3^(k+d))`, `y = 1/2^k`.
pub fn decode_counters(x: &Rational, y: &Rational) -> Option<(u32, u32)> {
    let (tx, hx, restx) = factor23(x)?;
    let (ty, hy, resty) = factor23(y)?;
    if !restx || !resty || hy != 0 || tx < ty || hx < ty {
        return None;
    }
    Some((tx - ty, hx - ty))
}

/// `1/(2^a 3^b)` → `(a, b, true)`.
fn factor23(v: &Rational) -> Option<(u32, u32, bool)> {
    if !v.numer().is_one() {
        return None;
    }
    let mut d: BigInt = v.denom().clone();
    let (mut a, mut b) = (0, 0);
    let two = BigInt::from(2);
    let three = BigInt::from(3);
    while !d.is_zero() && d.is_multiple_of(&two) {
        d /= &two;
        a += 1;
    }
    while !d.is_zero() && d.is_multiple_of(&three) {
        d /= &three;
        b += 1;
    }
    Some((a, b, d.is_one()))
}

fn has_factor(v: &Rational, p: i64) -> bool {
    v.denom().is_multiple_of(&BigInt::from(p))
}

impl TimedStrategy for FaithfulAchilles {
    fn choose(&mut self, arena: &CompiledArena, pos: &Position<'_>) -> Result<TimedAction, HarnessError> {
        let model = &arena.model;
        let config = pos.config;
        let loc = config.location;
        match model.structure().kind(loc) {
            LocationKind::CallPort => return Ok(TimedAction::instant(CALL_ACTION)),
            LocationKind::Exit => return Ok(TimedAction::instant(RETURN_ACTION)),
            LocationKind::Internal => {}
        }
        let top = config.context.last().map(|f| f.boxed);
        let rule = arena.delay_rules.get(&(loc, top)).or_else(|| arena.delay_rules.get(&(loc, None)));
        if let Some(rule) = rule {
            let mut t = rule.faithful_delay(model, &config.valuation)?;
            if let Some(dev) = &self.deviation {
                let slot = arena.slot_of(&boxes(config), rule.phase());
                if !self.applied && dev.step == pos.step && slot.as_deref() == Some(dev.slot.as_str()) {
                    t = &t + &dev.offset;
                    self.applied = true;
                    if t.is_negative() {
                        return Err(HarnessError::Deviation(format!("delay {t} at {}:{} is negative", dev.step, dev.slot)));
                    }
                }
            }
            let action = available_actions(model, config)
                .into_iter()
                .next()
                .ok_or_else(|| HarnessError::NoChoice(model.structure().location_name(loc)))?;
            return Ok(TimedAction::new(t, action));
        }
        match arena.choice_rules.get(&loc) {
            Some(ChoiceRule::BranchClaim { counter }) => {
                let value = match self.machine_config(pos.step)? {
                    Some(c) => c.get(*counter),
                    None => {
                        let (c1, c2) = decode_counters(&config.valuation[0], &config.valuation[1])
                            .ok_or_else(|| HarnessError::NoChoice("valuation does not encode counters".into()))?;
                        match counter {
                            Counter::C1 => c1 as u64,
                            Counter::C2 => c2 as u64,
                        }
                    }
                };
                let claim = if value == 0 { CLAIM_ZERO } else { CLAIM_POS };
                Ok(TimedAction::instant(claim))
            }
            Some(ChoiceRule::Certificate) => {
                let (x, y) = (&config.valuation[0], &config.valuation[1]);
                let avail = available_actions(model, config);
                let has = |a: &str| avail.iter().any(|b| b == a);
                let one = Rational::one();
                let action = if *y < one {
                    "joint"
                } else if *x < one && has_factor(x, 2) && has("mulx2") {
                    "mulx2"
                } else if *x < one && has_factor(x, 3) && has("mulx3") {
                    "mulx3"
                } else {
                    "done"
                };
                if enabled_delays(model, config, action).contains(&Rational::zero()) {
                    Ok(TimedAction::instant(action))
                } else {
                    // no honest certificate move (the claim was false)
                    first_enabled(arena, config).ok_or_else(|| HarnessError::NoChoice(model.structure().location_name(loc)))
                }
            }
            None => first_enabled(arena, config).ok_or_else(|| HarnessError::NoChoice(model.structure().location_name(loc))),
        }
    }
}

/// Tortoise that continues at every decision except possibly one.
#[derive(Debug, Clone)]
pub struct ScriptedTortoise {
    target: Option<(usize, String)>,
    verified: bool,
}

impl ScriptedTortoise {
    pub fn has_verified(&self) -> bool {
        self.verified
    }
}

pub fn tortoise_skip_all() -> ScriptedTortoise {
    ScriptedTortoise {
        target: None,
        verified: false,
    }
}

/// Verify at `(step, slot)`; the address must exist in the arena's run.
pub fn tortoise_verify_at(arena: &CompiledArena, step: usize, slot: &str) -> Result<ScriptedTortoise, HarnessError> {
    let slots = slots_at(arena, step)?;
    if !slots.iter().any(|s| s == slot) {
        return Err(HarnessError::Address(format!(
            "no slot {slot:?} at step {step} (available: {})",
            slots.join(", ")
        )));
    }
    Ok(ScriptedTortoise {
        target: Some((step, slot.to_string())),
        verified: false,
    })
}

/// The addressable slots of the gadget entered at `step`.
pub fn slots_at(arena: &CompiledArena, step: usize) -> Result<Vec<String>, HarnessError> {
    match &arena.machine {
        None if step == 0 => Ok(arena.slots_for(None)),
        None => Err(HarnessError::Address(format!("standalone gadget has only step 0, not {step}"))),
        Some(m) => {
            let run = tcm_run(m, step)?;
            if run.steps() < step || run.last().index == m.halt_index() {
                return Err(HarnessError::Address(format!("the machine executes no instruction at step {step}")));
            }
            let ins = m.instructions()[run.last().index];
            Ok(arena.slots_for(Some(&ins)))
        }
    }
}

/// Every `(step, slot)` address of the first `steps` instructions.
pub fn all_addresses(arena: &CompiledArena, steps: usize) -> Vec<Address> {
    (0..steps)
        .map_while(|k| slots_at(arena, k).ok().map(|s| (k, s)))
        .flat_map(|(k, s)| s.into_iter().map(move |slot| (k, slot)))
        .collect()
}

impl TimedStrategy for ScriptedTortoise {
    fn choose(&mut self, arena: &CompiledArena, pos: &Position<'_>) -> Result<TimedAction, HarnessError> {
        let config = pos.config;
        let Some(&phase) = arena.decisions.get(&config.location) else {
            return first_enabled(arena, config)
                .ok_or_else(|| HarnessError::NoChoice(arena.model.structure().location_name(config.location)));
        };
        let actions = available_actions(&arena.model, config);
        let slot = arena.slot_of(&boxes(config), phase);
        let hit = !self.verified
            && matches!((&self.target, &slot), (Some((k, s)), Some(here)) if *k == pos.step && s == here);
        let action = if hit {
            self.verified = true;
            actions.iter().find(|a| a.starts_with("verify"))
        } else {
            actions.iter().find(|a| !a.starts_with("verify"))
        };
        action
            .map(|a| TimedAction::instant(a.clone()))
            .ok_or_else(|| HarnessError::NoChoice(arena.model.structure().location_name(config.location)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// A final location was reached within the time bound.
    ReachedFinal { location: Location },
    /// The player to move has no legal move.
    Stuck,
    /// The move bound was hit.
    Exhausted,
    /// More time than the bound elapsed.
    TimeExceeded,
}

/// Entry of the top-level node for an instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnchorHit {
    pub step: usize,
    pub instruction: usize,
    pub run_index: usize,
    pub elapsed: Rational,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub outcome: Outcome,
    pub run: TimedRun,
    pub elapsed: Rational,
    pub anchor_hits: Vec<AnchorHit>,
    /// Index in `run` of the configuration right after Tortoise verified.
    pub verified_at: Option<usize>,
}

impl Verdict {
    pub fn reached_final(&self) -> bool {
        matches!(self.outcome, Outcome::ReachedFinal { .. })
    }

    pub fn describe(&self, arena: &CompiledArena) -> String {
        let s = arena.model.structure();
        match &self.outcome {
            Outcome::ReachedFinal { location } => {
                let what = if Some(*location) == arena.halt { "HALT" } else if arena.smileys.contains(location) { "smiley" } else { "final" };
                format!("ReachedFinal {what} {} at t={} after {} moves", s.location_name(*location), self.elapsed, self.run.len())
            }
            Outcome::Stuck => format!(
                "Stuck at {} after {} moves (t={})",
                s.location_name(self.run.last().location),
                self.run.len(),
                self.elapsed
            ),
            Outcome::Exhausted => format!("Exhausted after {} moves (t={})", self.run.len(), self.elapsed),
            Outcome::TimeExceeded => format!("TimeExceeded after {} moves (t={})", self.run.len(), self.elapsed),
        }
    }
}

fn anchor_index(arena: &CompiledArena, config: &RhaConfiguration) -> Option<usize> {
    if !config.context.is_empty() || !arena.is_anchor(config.location) {
        return None;
    }
    arena.anchors.iter().find(|(_, l)| **l == config.location).map(|(i, _)| *i)
}

/// Plays `achilles` against `tortoise` from the arena's start.
pub fn playout(
    arena: &CompiledArena,
    achilles: &mut dyn TimedStrategy,
    tortoise: &mut dyn TimedStrategy,
    step_bound: usize,
    time_bound: &Rational,
) -> Result<Verdict, HarnessError> {
    let start = RhaConfiguration::top(arena.start, arena.initial.clone());
    let mut run = TimedRun::new(start);
    let mut elapsed = Rational::zero();
    let mut hits = Vec::new();
    let mut verified_at = None;
    let mut tortoise_verified = false;
    let record_anchor = |config: &RhaConfiguration, run_index: usize, elapsed: &Rational, hits: &mut Vec<AnchorHit>| {
        if let Some(instruction) = anchor_index(arena, config) {
            hits.push(AnchorHit {
                step: hits.len(),
                instruction,
                run_index,
                elapsed: elapsed.clone(),
            });
        }
    };
    record_anchor(run.last(), 0, &elapsed, &mut hits);
    let outcome = loop {
        let config = run.last().clone();
        if arena.finals.contains(&config.location) {
            break Outcome::ReachedFinal {
                location: config.location,
            };
        }
        if run.len() >= step_bound {
            break Outcome::Exhausted;
        }
        if first_enabled(arena, &config).is_none() {
            break Outcome::Stuck;
        }
        let pos = Position {
            config: &config,
            step: hits.len().saturating_sub(1),
            elapsed: &elapsed,
        };
        let owner = arena.partition.owner(config.location);
        let mv = match owner {
            Player::Achilles => achilles.choose(arena, &pos)?,
            Player::Tortoise => tortoise.choose(arena, &pos)?,
        };
        let next = timed_step(&arena.model, &config, &mv).map_err(|error| HarnessError::IllegalMove {
            index: run.len(),
            error,
        })?;
        if owner == Player::Tortoise && !tortoise_verified && mv.action.starts_with("verify") {
            tortoise_verified = true;
            verified_at = Some(run.len() + 1);
        }
        elapsed += &mv.delay;
        run.steps.push((mv, next.clone()));
        record_anchor(&next, run.len(), &elapsed, &mut hits);
        if elapsed > *time_bound {
            break Outcome::TimeExceeded;
        }
    };
    Ok(Verdict {
        outcome,
        run,
        elapsed,
        anchor_hits: hits,
        verified_at,
    })
}

/// The encoding `x, y, z` at one anchor differs from the machine's run.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("step {step}: {detail}")]
pub struct EncodingMismatch {
    pub step: usize,
    pub detail: String,
}

/// Checks every anchor hit against the machine's configuration; returns
/// the number of anchors checked.
pub fn check_encoding(arena: &CompiledArena, verdict: &Verdict) -> Result<usize, EncodingMismatch> {
    let Some(machine) = &arena.machine else {
        return Ok(0);
    };
    let trace = tcm_run(machine, verdict.anchor_hits.len()).map_err(|e| EncodingMismatch {
        step: 0,
        detail: e.to_string(),
    })?;
    let names = arena.model.variables();
    for hit in &verdict.anchor_hits {
        let Some(mc) = trace.trace.get(hit.step) else {
            return Err(EncodingMismatch {
                step: hit.step,
                detail: "the machine has no configuration at this step".into(),
            });
        };
        if mc.index != hit.instruction {
            return Err(EncodingMismatch {
                step: hit.step,
                detail: format!("entered L{} but the machine is at L{}", hit.instruction, mc.index),
            });
        }
        let expected = expected_valuation(arena.target, hit.step as u32, mc.c1 as u32, mc.c2 as u32);
        let actual = &verdict.run.configurations().nth(hit.run_index).unwrap().valuation;
        for var in 0..3 {
            if actual[var] != expected[var] {
                return Err(EncodingMismatch {
                    step: hit.step,
                    detail: format!(
                        "{} = {}, expected {} for (L{}, {}, {})",
                        names[var], actual[var], expected[var], mc.index, mc.c1, mc.c2
                    ),
                });
            }
        }
    }
    Ok(verdict.anchor_hits.len())
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("time ledger: {0}")]
pub struct TimeLedgerViolation(pub String);

/// Per-instruction durations: instruction `k` takes `< 2·2^-k`, and the
/// whole run `< 4`. Returns the durations.
pub fn check_time_ledger(verdict: &Verdict) -> Result<Vec<Rational>, TimeLedgerViolation> {
    let mut out = Vec::new();
    for w in verdict.anchor_hits.windows(2) {
        let d = &w[1].elapsed - &w[0].elapsed;
        let bound = Rational::from_integer(2) / pow2(w[0].step);
        if d >= bound {
            return Err(TimeLedgerViolation(format!("instruction step {} took {d}, bound {bound}", w[0].step)));
        }
        out.push(d);
    }
    if let Some(last) = verdict.anchor_hits.last() {
        if last.elapsed >= Rational::from_integer(4) {
            return Err(TimeLedgerViolation(format!("simulation took {}", last.elapsed)));
        }
    }
    Ok(out)
}

fn pow2(k: usize) -> Rational {
    Rational::inverse_power_product(k as u32, 0).recip()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SearchResult {
    pub final_reachable: bool,
    /// False if a delay interval had to be sampled or a bound was hit.
    pub exhaustive: bool,
    pub explored: usize,
}

const SEARCH_MOVE_CAP: usize = 10_000;

/// Explores every continuation from `config` for both players. Only
/// configurations with at least two candidate moves count towards
/// `max_depth`. Point delay sets are enumerated exactly; other intervals
/// contribute their least (and closed upper) element.
pub fn continuation_search(arena: &CompiledArena, config: &RhaConfiguration, max_depth: usize) -> SearchResult {
    let mut stack = vec![(config.clone(), 0usize)];
    let mut exhaustive = true;
    let mut explored = 0;
    while let Some((c, depth)) = stack.pop() {
        explored += 1;
        if arena.finals.contains(&c.location) {
            return SearchResult {
                final_reachable: true,
                exhaustive,
                explored,
            };
        }
        if explored >= SEARCH_MOVE_CAP {
            exhaustive = false;
            break;
        }
        let mut moves = Vec::new();
        for a in available_actions(&arena.model, &c) {
            for iv in enabled_delays(&arena.model, &c, &a).intervals() {
                if iv.is_empty() {
                    continue;
                }
                let point = matches!(&iv.hi, Some((hi, true)) if *hi == iv.lo) && iv.lo_closed;
                if let Some(t) = iv.pick() {
                    moves.push(TimedAction::new(t, a.clone()));
                }
                if !point {
                    exhaustive = false;
                    if let Some((hi, true)) = &iv.hi {
                        moves.push(TimedAction::new(hi.clone(), a.clone()));
                    }
                }
            }
        }
        let depth = depth + usize::from(moves.len() >= 2);
        if depth > max_depth {
            exhaustive = false;
            continue;
        }
        for mv in moves {
            if let Ok(next) = timed_step(&arena.model, &c, &mv) {
                stack.push((next, depth));
            }
        }
    }
    SearchResult {
        final_reachable: false,
        exhaustive,
        explored,
    }
}

/// One JSON object per move: the configuration before it, the move, and
/// the elapsed time after it.
pub fn trace_jsonl(arena: &CompiledArena, verdict: &Verdict) -> String {
    let s = arena.model.structure();
    let names = arena.model.variables();
    let mut out = String::new();
    let mut elapsed = Rational::zero();
    let mut before = &verdict.run.start;
    for (i, (mv, after)) in verdict.run.steps.iter().enumerate() {
        elapsed += &mv.delay;
        let valuation: BTreeMap<&str, String> =
            before.valuation.named(names).map(|(n, v)| (n, v.to_string())).collect();
        let line = serde_json::json!({
            "step": i,
            "location": s.location_name(before.location),
            "context_depth": before.context.len(),
            "valuation": valuation,
            "delay": mv.delay.to_string(),
            "action": mv.action,
            "elapsed_total": elapsed.to_string(),
        });
        out.push_str(&line.to_string());
        out.push('\n');
        before = after;
    }
    out
}

/// `(instruction step, slot)`.
pub type Address = (usize, String);

/// Which addresses witness a deviation: verifying there leaves no final
/// reachable.
pub fn punishing_addresses(
    arena: &CompiledArena,
    machine: &TwoCounterMachine,
    deviation: &Deviation,
    candidates: &[Address],
    depth: usize,
) -> Result<Vec<(Address, SearchResult)>, HarnessError> {
    let mut out = Vec::new();
    for (k, slot) in candidates {
        let mut ach = faithful_achilles(machine, arena)?.with_deviation(deviation.clone());
        let mut tor = tortoise_verify_at(arena, *k, slot)?;
        let v = playout(arena, &mut ach, &mut tor, DEFAULT_STEP_BOUND, &arena.smiley_time_bound)?;
        if v.reached_final() {
            continue;
        }
        let from = match v.verified_at {
            Some(i) => v.run.configurations().nth(i).unwrap().clone(),
            None => v.run.last().clone(),
        };
        let r = continuation_search(arena, &from, depth);
        if !r.final_reachable {
            out.push(((*k, slot.clone()), r));
        }
    }
    Ok(out)
}
