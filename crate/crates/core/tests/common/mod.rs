//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rtgames::lts::{attractor, FiniteArena};
use rtgames::rsm::{available_actions, rsm_step, GamePartition, RsmConfiguration, RsmModel};
use rtgames::structure::{Location, NodeId};
use rtgames::Player;

/// Explores every configuration reachable from `(ε, start)` with context
/// length at most `max_depth`. Returns the arena, the state of each
/// configuration, and whether exploration was cut by the depth bound.
pub fn unfold(
    model: &RsmModel,
    partition: &GamePartition,
    start: NodeId,
    max_depth: usize,
) -> (FiniteArena, BTreeMap<RsmConfiguration, usize>, bool) {
    let s = model.structure();
    let mut arena = FiniteArena::new();
    let mut ids: BTreeMap<RsmConfiguration, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    let mut truncated = false;
    let root = RsmConfiguration::top(start);
    let owner = |c: &RsmConfiguration| partition.owner(c.location);
    let name = |c: &RsmConfiguration| {
        let ctx: Vec<String> = c.context.iter().map(|&b| s.box_decl(b).name.clone()).collect();
        format!("<{}> {}", ctx.join(","), s.location_name(c.location))
    };
    ids.insert(root.clone(), arena.add_state(name(&root), owner(&root)));
    queue.push_back(root);
    while let Some(c) = queue.pop_front() {
        let from = ids[&c];
        for a in available_actions(model, &c) {
            let Some(next) = rsm_step(model, &c, &a) else { continue };
            if next.context.len() > max_depth {
                truncated = true;
                continue;
            }
            let to = match ids.get(&next) {
                Some(&id) => id,
                None => {
                    let id = arena.add_state(name(&next), owner(&next));
                    ids.insert(next.clone(), id);
                    queue.push_back(next);
                    id
                }
            };
            arena.add_transition(from, &a, to).unwrap();
        }
    }
    (arena, ids, truncated)
}

pub enum Objective<'a> {
    Reach(&'a BTreeSet<Location>),
    Terminate,
}

/// Winner on the unfolded arena; `None` if the unfolding was truncated.
pub fn unfolded_winner(
    model: &RsmModel,
    partition: &GamePartition,
    start: NodeId,
    objective: Objective<'_>,
    max_depth: usize,
) -> Option<Player> {
    let (arena, ids, truncated) = unfold(model, partition, start, max_depth);
    if truncated {
        return None;
    }
    let s = model.structure();
    let targets: BTreeSet<usize> = ids
        .iter()
        .filter(|(c, _)| match &objective {
            Objective::Reach(f) => f.contains(&c.location),
            Objective::Terminate => c.context.is_empty() && s.is_exit(c.location),
        })
        .map(|(_, &id)| id)
        .collect();
    let attr = attractor(&arena, &targets).unwrap();
    Some(if attr.wins(ids[&RsmConfiguration::top(start)]) {
        Player::Achilles
    } else {
        Player::Tortoise
    })
}

/// Plain breadth-first search over configurations with context length at
/// most `max_depth`: true is definitive, false only up to the bound.
pub fn bounded_reach(model: &RsmModel, start: NodeId, finals: &BTreeSet<Location>, max_depth: usize) -> bool {
    bounded_search(model, start, max_depth, |c| finals.contains(&c.location))
}

pub fn bounded_terminates(model: &RsmModel, start: NodeId, max_depth: usize) -> bool {
    let s = model.structure();
    bounded_search(model, start, max_depth, |c| c.context.is_empty() && s.is_exit(c.location))
}

fn bounded_search(
    model: &RsmModel,
    start: NodeId,
    max_depth: usize,
    goal: impl Fn(&RsmConfiguration) -> bool,
) -> bool {
    let root = RsmConfiguration::top(start);
    let mut seen = BTreeSet::from([root.clone()]);
    let mut queue = VecDeque::from([root]);
    while let Some(c) = queue.pop_front() {
        if goal(&c) {
            return true;
        }
        for a in available_actions(model, &c) {
            if let Some(n) = rsm_step(model, &c, &a) {
                if n.context.len() <= max_depth && seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
    }
    false
}

// ---- two-counter machines ----

use rtgames::tcm::{Counter, Instruction, TwoCounterMachine};
use rtgames::Rational;

/// Machines under `tests/data/machines` whose file name starts with `prefix`.
pub fn corpus(prefix: &str) -> Vec<(String, TwoCounterMachine)> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/machines");
    let mut out: Vec<(String, TwoCounterMachine)> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(prefix))
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, TwoCounterMachine::parse(&text).unwrap())
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// A direct interpreter: `(index, c1, c2)` per step and whether HALT was reached.
pub fn oracle_run(m: &TwoCounterMachine, max_steps: usize) -> (Vec<(usize, u64, u64)>, bool) {
    let ins = m.instructions();
    let mut cur = (0usize, 0u64, 0u64);
    let mut trace = vec![cur];
    for _ in 0..max_steps {
        let (i, c1, c2) = cur;
        let get = |c: Counter| if c == Counter::C1 { c1 } else { c2 };
        let with = |c: Counter, v: u64| if c == Counter::C1 { (v, c2) } else { (c1, v) };
        cur = match ins[i] {
            Instruction::Halt => return (trace, true),
            Instruction::Inc { counter, next } => {
                let (a, b) = with(counter, get(counter) + 1);
                (next, a, b)
            }
            Instruction::Dec { counter, next } => {
                let (a, b) = with(counter, get(counter) - 1);
                (next, a, b)
            }
            Instruction::ZeroCheck {
                counter,
                if_zero,
                if_positive,
            } => (if get(counter) == 0 { if_zero } else { if_positive }, c1, c2),
        };
        trace.push(cur);
    }
    let halted = matches!(ins[cur.0], Instruction::Halt);
    (trace, halted)
}

/// `(1/(2^(k+c) 3^(k+d)), 1/2^k)` computed with plain big integers.
pub fn oracle_encoding(k: u64, c: u64, d: u64) -> (Rational, Rational) {
    use num_bigint::BigInt;
    let pow = |b: u32, e: u64| (0..e).fold(BigInt::from(1), |acc, _| acc * b);
    let x = Rational::from_bigints(BigInt::from(1), pow(2, k + c) * pow(3, k + d));
    let y = Rational::from_bigints(BigInt::from(1), pow(2, k));
    (x, y)
}

// ---- random RHA call/return pairs ----

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtgames::rha::{
    timed_step, RhaBoxDoc, RhaComponentDoc, RhaConfiguration, RhaDoc, RhaModel, RhaTransitionDoc, TimedAction,
};

pub struct PairCase {
    pub model: RhaModel,
    pub start: RhaConfiguration,
    pub moves: Vec<TimedAction>,
    /// Pass-by-value variable indices per box name.
    pub by_value: BTreeMap<String, Vec<usize>>,
}

fn small_rational(rng: &mut ChaCha8Rng) -> Rational {
    Rational::new(rng.gen_range(0..40), rng.gen_range(1..9))
}

/// `C0 --call b0--> C1 (--call b1--> C2)?` with random rates, resets,
/// pass-by-value sets and delays; no guards or invariants so every move
/// is legal.
pub fn random_pair_case(seed: u64) -> PairCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nv = rng.gen_range(1..=4usize);
    let vars: Vec<String> = (0..nv).map(|i| format!("v{i}")).collect();
    let nested = rng.gen_bool(0.5);
    let subset = |rng: &mut ChaCha8Rng| -> Vec<usize> { (0..nv).filter(|_| rng.gen_bool(0.5)).collect() };
    let names = |idx: &[usize]| idx.iter().map(|&i| vars[i].clone()).collect::<Vec<_>>();
    let p0 = subset(&mut rng);
    let p1 = subset(&mut rng);
    let tr = |from: &str, action: &str, to: &str, resets: Vec<String>| RhaTransitionDoc {
        from: from.into(),
        action: action.into(),
        to: to.into(),
        guard: Default::default(),
        resets,
    };
    let rates = [Rational::new(0, 1), Rational::new(1, 1), Rational::new(2, 1), Rational::new(1, 2), Rational::new(3, 1)];
    let flows = |locs: &[&str], rng: &mut ChaCha8Rng| -> BTreeMap<String, BTreeMap<String, Rational>> {
        locs.iter()
            .map(|l| {
                let r = vars.iter().map(|v| (v.clone(), rates[rng.gen_range(0..rates.len())].clone())).collect();
                (l.to_string(), r)
            })
            .collect()
    };
    let mut comps = vec![RhaComponentDoc {
        name: "C0".into(),
        nodes: vec!["a".into(), "e".into()],
        entries: vec!["a".into()],
        exits: vec!["e".into()],
        boxes: vec![RhaBoxDoc {
            name: "b0".into(),
            callee: "C1".into(),
            pass_by_value: names(&p0),
        }],
        transitions: vec![tr("node:a", "go", "call:b0:en", names(&subset(&mut rng))), tr("ret:b0:ex", "fin", "node:e", vec![])],
        invariants: BTreeMap::new(),
        flows: flows(&["node:a"], &mut rng),
    }];
    let mut c1 = RhaComponentDoc {
        name: "C1".into(),
        nodes: vec!["en".into(), "m".into(), "ex".into()],
        entries: vec!["en".into()],
        exits: vec!["ex".into()],
        boxes: vec![],
        transitions: vec![tr("node:en", "s1", "node:m", names(&subset(&mut rng)))],
        invariants: BTreeMap::new(),
        flows: flows(&["node:en", "node:m"], &mut rng),
    };
    if nested {
        c1.boxes.push(RhaBoxDoc {
            name: "b1".into(),
            callee: "C2".into(),
            pass_by_value: names(&p1),
        });
        c1.transitions.push(tr("node:m", "deep", "call:b1:en2", names(&subset(&mut rng))));
        c1.transitions.push(tr("ret:b1:ex2", "up", "node:ex", names(&subset(&mut rng))));
        c1.flows.extend(flows(&["ret:b1:ex2"], &mut rng));
        comps.push(RhaComponentDoc {
            name: "C2".into(),
            nodes: vec!["en2".into(), "ex2".into()],
            entries: vec!["en2".into()],
            exits: vec!["ex2".into()],
            boxes: vec![],
            transitions: vec![tr("node:en2", "t", "node:ex2", names(&subset(&mut rng)))],
            invariants: BTreeMap::new(),
            flows: flows(&["node:en2"], &mut rng),
        });
    } else {
        c1.transitions.push(tr("node:m", "s2", "node:ex", names(&subset(&mut rng))));
    }
    comps.insert(1, c1);
    let doc = RhaDoc {
        variables: vars.clone(),
        components: comps,
        start: None,
        partition: None,
        finals: vec![],
        initial_valuation: None,
    };
    let model = RhaModel::from_doc(&doc).unwrap();
    let initial = rtgames::Valuation::from_values((0..nv).map(|_| small_rational(&mut rng)).collect());
    let start = RhaConfiguration::top(model.structure().parse_location("a").unwrap(), initial);
    let d = |rng: &mut ChaCha8Rng| small_rational(rng);
    let mut moves = vec![TimedAction::new(d(&mut rng), "go"), TimedAction::instant("call"), TimedAction::new(d(&mut rng), "s1")];
    if nested {
        moves.extend([
            TimedAction::new(d(&mut rng), "deep"),
            TimedAction::instant("call"),
            TimedAction::new(d(&mut rng), "t"),
            TimedAction::instant("return"),
            TimedAction::new(d(&mut rng), "up"),
        ]);
    } else {
        moves.push(TimedAction::new(d(&mut rng), "s2"));
    }
    moves.push(TimedAction::instant("return"));
    let by_value = BTreeMap::from([("b0".to_string(), p0), ("b1".to_string(), p1)]);
    PairCase {
        model,
        start,
        moves,
        by_value,
    }
}

/// Plays the moves, checking every return against a shadow stack of call
/// valuations. Returns the number of matched pairs.
pub fn check_pair_case(case: &PairCase) -> Result<usize, String> {
    let s = case.model.structure();
    let mut cur = case.start.clone();
    let mut stack: Vec<(String, rtgames::Valuation)> = Vec::new();
    let mut pairs = 0;
    for mv in &case.moves {
        let next = timed_step(&case.model, &cur, mv).map_err(|e| e.to_string())?;
        match cur.location {
            Location::Call(b, _) => stack.push((s.box_decl(b).name.clone(), cur.valuation.clone())),
            Location::Node(_) if mv.action == "return" => {
                let (b, at_call) = stack.pop().ok_or("return without call")?;
                for i in 0..cur.valuation.len() {
                    let want = if case.by_value[&b].contains(&i) { &at_call[i] } else { &cur.valuation[i] };
                    if next.valuation[i] != *want {
                        return Err(format!("box {b} var {i}: got {}, want {want}", next.valuation[i]));
                    }
                }
                pairs += 1;
            }
            _ => {}
        }
        cur = next;
    }
    if stack.is_empty() {
        Ok(pairs)
    } else {
        Err("unmatched call".into())
    }
}
