//! Component construction. Every component has one entry `en`; node names
//! are `<component>.<local>` so they are globally unique.

use std::collections::{BTreeMap, BTreeSet};

use crate::lts::Player;
use crate::rational::Rational;
use crate::rha::{
    AtomDoc, ConstraintDoc, Rel, RhaBoxDoc, RhaComponentDoc, RhaDoc, RhaTransitionDoc,
};
use crate::tcm::{Counter, Instruction, TwoCounterMachine};

use super::{
    owner_legend, ChoiceRule, ChoiceRuleEntry, CompileError, CompiledArena, DelayRule, DelayRuleEntry, Phase,
    Sidecar, Target, CLAIM_POS, CLAIM_ZERO,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InstructionKind {
    Inc,
    Dec,
    ZeroCheck,
}

impl InstructionKind {
    pub fn of(ins: &Instruction) -> Option<(InstructionKind, Counter)> {
        match *ins {
            Instruction::Inc { counter, .. } => Some((InstructionKind::Inc, counter)),
            Instruction::Dec { counter, .. } => Some((InstructionKind::Dec, counter)),
            Instruction::ZeroCheck { counter, .. } => Some((InstructionKind::ZeroCheck, counter)),
            Instruction::Halt => None,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            InstructionKind::Inc => "inc",
            InstructionKind::Dec => "dec",
            InstructionKind::ZeroCheck => "zc",
        }
    }
}

/// The divisions an instruction gadget performs, in order. `y` is always
/// halved first; the `x` divisors multiply to `2·3 · 2^Δc · 3^Δd`.
pub(crate) fn divisions(kind: InstructionKind, counter: Counter) -> Vec<(&'static str, u32)> {
    use Counter::*;
    use InstructionKind::*;
    let mut v = vec![("y", 2)];
    match (kind, counter) {
        (Inc, C1) => v.push(("x", 12)),
        (Inc, C2) => v.extend([("x", 6), ("x", 3)]),
        (Dec, C1) => v.push(("x", 3)),
        (Dec, C2) => v.push(("x", 2)),
        (ZeroCheck, _) => v.push(("x", 6)),
    }
    v
}

fn other(a: &str) -> &'static str {
    if a == "x" {
        "y"
    } else {
        "x"
    }
}

fn node(name: &str) -> String {
    format!("node:{name}")
}

fn eq(var: &str, bound: i64) -> AtomDoc {
    AtomDoc {
        var: var.to_string(),
        rel: Rel::Eq,
        bound,
    }
}

#[derive(Debug, Clone)]
struct Iface {
    name: String,
    entry: String,
    exits: Vec<String>,
}

/// A placed box: its call port and its return ports, one per callee exit.
struct Placed {
    call: String,
    rets: Vec<String>,
}

impl Placed {
    fn ret(&self) -> &str {
        &self.rets[0]
    }
}

struct Draft {
    name: String,
    doc: RhaComponentDoc,
    /// Locations where time may pass, with the variables ticking there
    /// (the list only matters for stopwatches). Everything else is urgent.
    free: BTreeMap<String, Vec<&'static str>>,
    locations: Vec<String>,
}

impl Draft {
    fn new(name: &str) -> Draft {
        Draft {
            name: name.to_string(),
            doc: RhaComponentDoc {
                name: name.to_string(),
                nodes: Vec::new(),
                entries: Vec::new(),
                exits: Vec::new(),
                boxes: Vec::new(),
                transitions: Vec::new(),
                invariants: BTreeMap::new(),
                flows: BTreeMap::new(),
            },
            free: BTreeMap::new(),
            locations: Vec::new(),
        }
    }

    fn node(&mut self, local: &str) -> String {
        let full = format!("{}.{local}", self.name);
        self.doc.nodes.push(full.clone());
        self.locations.push(node(&full));
        node(&full)
    }

    fn entry(&mut self, local: &str) -> String {
        let loc = self.node(local);
        self.doc.entries.push(loc["node:".len()..].to_string());
        loc
    }

    fn exit(&mut self, local: &str) -> String {
        let loc = self.node(local);
        self.doc.exits.push(loc["node:".len()..].to_string());
        loc
    }

    fn place(&mut self, local: &str, callee: &Iface, pbv: &[&str]) -> Placed {
        let b = format!("{}.{local}", self.name);
        self.doc.boxes.push(RhaBoxDoc {
            name: b.clone(),
            callee: callee.name.clone(),
            pass_by_value: pbv.iter().map(|s| s.to_string()).collect(),
        });
        let call = format!("call:{b}:{}", &callee.entry["node:".len()..]);
        let rets: Vec<String> = callee
            .exits
            .iter()
            .map(|e| format!("ret:{b}:{}", &e["node:".len()..]))
            .collect();
        self.locations.push(call.clone());
        self.locations.extend(rets.iter().cloned());
        Placed { call, rets }
    }

    fn t(&mut self, from: &str, action: &str, to: &str) -> &mut RhaTransitionDoc {
        self.doc.transitions.push(RhaTransitionDoc {
            from: from.to_string(),
            action: action.to_string(),
            to: to.to_string(),
            guard: ConstraintDoc::default(),
            resets: Vec::new(),
        });
        self.doc.transitions.last_mut().unwrap()
    }

    fn free(&mut self, loc: &str, ticks: &[&'static str]) {
        self.free.insert(loc.to_string(), ticks.to_vec());
    }
}

trait TransitionExt {
    fn guard(&mut self, atoms: Vec<AtomDoc>) -> &mut Self;
    fn reset(&mut self, vars: &[&str]) -> &mut Self;
}

impl TransitionExt for RhaTransitionDoc {
    fn guard(&mut self, atoms: Vec<AtomDoc>) -> &mut Self {
        self.guard = ConstraintDoc::Atoms(atoms);
        self
    }
    fn reset(&mut self, vars: &[&str]) -> &mut Self {
        self.resets = vars.iter().map(|s| s.to_string()).collect();
        self
    }
}

struct Builder {
    target: Target,
    comps: Vec<RhaComponentDoc>,
    ifaces: BTreeMap<String, Iface>,
    tortoise: BTreeSet<String>,
    delay_rules: Vec<DelayRuleEntry>,
    choice_rules: Vec<ChoiceRuleEntry>,
    decisions: BTreeMap<String, Phase>,
    smileys: Vec<String>,
    slot_boxes: BTreeMap<String, String>,
}

impl Builder {
    fn new(target: Target) -> Builder {
        Builder {
            target,
            comps: Vec::new(),
            ifaces: BTreeMap::new(),
            tortoise: BTreeSet::new(),
            delay_rules: Vec::new(),
            choice_rules: Vec::new(),
            decisions: BTreeMap::new(),
            smileys: Vec::new(),
            slot_boxes: BTreeMap::new(),
        }
    }

    fn rta(&self) -> bool {
        self.target == Target::Rta3
    }

    /// Pass-by-value sets exist only for the timed target.
    fn pbv<'a>(&self, vars: &[&'a str]) -> Vec<&'a str> {
        if self.rta() {
            vars.to_vec()
        } else {
            Vec::new()
        }
    }

    fn finish(&mut self, mut d: Draft) -> Iface {
        let vars = self.target.variables();
        for loc in &d.locations {
            match d.free.get(loc) {
                Some(ticks) => {
                    if !self.rta() {
                        let rates = vars
                            .iter()
                            .map(|v| (v.to_string(), Rational::from_integer(ticks.contains(v) as i64)))
                            .collect();
                        d.doc.flows.insert(loc.clone(), rates);
                    }
                }
                None => {
                    d.doc.invariants.insert(loc.clone(), ConstraintDoc::Atoms(vec![eq("z", 0)]));
                    if !self.rta() {
                        let rates = vars
                            .iter()
                            .map(|v| (v.to_string(), Rational::from_integer((*v == "z") as i64)))
                            .collect();
                        d.doc.flows.insert(loc.clone(), rates);
                    }
                }
            }
        }
        let iface = Iface {
            name: d.name.clone(),
            entry: d.doc.entries.first().map(|e| node(e)).unwrap_or_default(),
            exits: d.doc.exits.iter().map(|e| node(e)).collect(),
        };
        self.ifaces.insert(d.name.clone(), iface.clone());
        self.comps.push(d.doc);
        iface
    }

    fn cached(&self, name: &str) -> Option<Iface> {
        self.ifaces.get(name).cloned()
    }

    /// Timed target only: a pure delay, the amount chosen by Achilles.
    fn delay(&mut self) -> Iface {
        if let Some(i) = self.cached("delay") {
            return i;
        }
        let mut d = Draft::new("delay");
        let en = d.entry("en");
        let ex = d.exit("ex");
        d.t(&en, "wait", &ex);
        d.free(&en, &[]);
        d.free(&ex, &[]);
        self.finish(d)
    }

    /// One unit of measurement. Timed: wait until `b = 1`, which adds
    /// `1 − b` to every clock not restored by the caller. Stopwatch: add
    /// `1 − v` to `w`, restore `v`, using `s` (zero on entry) as scratch;
    /// takes exactly one time unit.
    fn meas(&mut self, v: &'static str, w: &'static str, s: &'static str) -> Iface {
        let name = if self.rta() {
            format!("meas_{v}")
        } else {
            format!("meas_{v}{w}{s}")
        };
        if let Some(i) = self.cached(&name) {
            return i;
        }
        let mut d = Draft::new(&name);
        let en = d.entry("en");
        let ex = d.exit("ex");
        if self.rta() {
            d.t(&en, "tick", &ex).guard(vec![eq(v, 1)]);
            d.free(&en, &[]);
            d.free(&ex, &[]);
        } else {
            let mid = d.node("mid");
            d.t(&en, "fill", &mid).guard(vec![eq(v, 1)]).reset(&[v]);
            d.t(&mid, "refill", &ex).guard(vec![eq(s, 1)]).reset(&[s]);
            d.free(&en, &[v, w, s]);
            d.free(&mid, &[v, s]);
        }
        self.finish(d)
    }

    /// Both delays equal: `a` and the lead variable reach 1 together.
    fn catch(&mut self, a: &'static str) -> Iface {
        let (name, lead) = if self.rta() {
            ("catch_xy".to_string(), other(a))
        } else {
            (format!("catch_{a}u"), "u")
        };
        if let Some(i) = self.cached(&name) {
            return i;
        }
        let mut d = Draft::new(&name);
        let en = d.entry("en");
        let ex = d.exit("ex");
        let (p, q) = if a < lead { (a, lead) } else { (lead, a) };
        d.t(&en, "meet", &ex).guard(vec![eq(p, 1), eq(q, 1)]);
        d.free(&en, &[a, lead]);
        if self.rta() {
            // z runs inside the callee and is restored by the caller
            d.free(&ex, &[]);
        }
        self.finish(d)
    }

    /// Verifies the first delay `t` of a division (`t = ζ/n`, checked as
    /// `ζ + n(1 − t) = n`) or a multiplication (`t = mζ`, checked as
    /// `t + m(1 − ζ) = m`).
    fn check(&mut self, a: &'static str, n: u32, mul: bool) -> Iface {
        let b = other(a);
        let name = format!("{}check_{a}_{n}", if mul { "m" } else { "" });
        if let Some(i) = self.cached(&name) {
            return i;
        }
        let (leaf, total) = match (self.rta(), mul) {
            (true, false) => (self.meas(b, a, b), a),
            (true, true) => (self.meas(a, b, b), b),
            (false, false) => (self.meas("u", a, b), a),
            (false, true) => (self.meas(a, "u", b), "u"),
        };
        let keep = match (self.rta(), mul) {
            (true, false) => self.pbv(&[b, "z"]),
            (true, true) => self.pbv(&[a, "z"]),
            _ => Vec::new(),
        };
        let mut d = Draft::new(&name);
        let en = d.entry("en");
        let ex = d.exit("ex");
        let mut prev = en.clone();
        for i in 1..=n {
            let p = d.place(&format!("m{i}"), &leaf, &keep);
            let tr = d.t(&prev, "measure", &p.call);
            if i == 1 && !self.rta() {
                tr.reset(&[b]);
            }
            prev = p.ret().to_string();
        }
        d.t(&prev, "compare", &ex).guard(vec![eq(total, n as i64)]);
        self.finish(d)
    }

    /// Divide (or multiply) `a` by `n` with two equal delays, each
    /// followed by a Tortoise decision to continue or verify it.
    fn divmul(&mut self, a: &'static str, n: u32, mul: bool) -> Iface {
        let b = other(a);
        let name = format!("{}_{a}_{n}", if mul { "mul" } else { "div" });
        if let Some(i) = self.cached(&name) {
            return i;
        }
        let check = self.check(a, n, mul);
        let catch = self.catch(a);
        let first = if mul {
            DelayRule::Multiply { var: a.into(), m: n }
        } else {
            DelayRule::Divide { var: a.into(), n }
        };
        let mut d = Draft::new(&name);
        let en = d.entry("en");
        let smiley1 = d.node("smiley1");
        let smiley2 = d.node("smiley2");
        let ex = d.exit("ex");
        let (dec1, dec2);
        let z = self.pbv(&["z"]);
        if self.rta() {
            let delay = self.delay();
            let d1 = d.place("d1", &delay, &[a, "z"]);
            let d2 = d.place("d2", &delay, &[b, "z"]);
            d.t(&en, "start", &d1.call).reset(&[b]);
            dec1 = d1.ret().to_string();
            d.t(&dec1, "continue1", &d2.call).reset(&[a]);
            dec2 = d2.ret().to_string();
            d.t(&dec2, "continue2", &ex);
            let box_of = |p: &Placed| p.call.split(':').nth(1).unwrap().to_string();
            self.delay_rules.push(DelayRuleEntry {
                location: delay.entry.clone(),
                boxed: Some(box_of(&d1)),
                rule: first,
            });
            self.delay_rules.push(DelayRuleEntry {
                location: delay.entry.clone(),
                boxed: Some(box_of(&d2)),
                rule: DelayRule::CatchUp {
                    lead: b.into(),
                    lag: a.into(),
                },
            });
        } else {
            let w1 = d.node("w1");
            let w2 = d.node("w2");
            dec1 = d.node("dec1");
            dec2 = d.node("dec2");
            d.t(&en, "start", &w1).reset(&["u"]);
            d.t(&w1, "wait", &dec1);
            d.t(&dec1, "continue1", &w2).reset(&[a]);
            d.t(&w2, "wait", &dec2);
            d.t(&dec2, "continue2", &ex);
            d.free(&w1, &["u"]);
            d.free(&w2, &[a]);
            self.delay_rules.push(DelayRuleEntry {
                location: w1,
                boxed: None,
                rule: first,
            });
            self.delay_rules.push(DelayRuleEntry {
                location: w2,
                boxed: None,
                rule: DelayRule::CatchUp {
                    lead: "u".into(),
                    lag: a.into(),
                },
            });
        }
        let c1 = d.place("c1", &check, &z);
        let c2 = d.place("c2", &catch, &z);
        d.t(&dec1, "verify1", &c1.call);
        d.t(&dec2, "verify2", &c2.call);
        d.t(c1.ret(), "win", &smiley1);
        d.t(c2.ret(), "win", &smiley2);
        self.tortoise.insert(dec1.clone());
        self.tortoise.insert(dec2.clone());
        self.decisions.insert(dec1, Phase::First);
        self.decisions.insert(dec2, Phase::CatchUp);
        self.smileys.extend([smiley1, smiley2]);
        self.finish(d)
    }

    /// Achilles proves a zero-test claim by multiplying `x` and `y` back
    /// to 1 with verified multiplications. For `c1 = 0` only the factor 3
    /// may be applied to `x` alone, for `c2 = 0` only 2; a positive claim
    /// first spends one factor of its counter.
    fn certificate(&mut self, counter: Counter, zero: bool) -> Iface {
        let name = format!("cert_{counter}_{}", if zero { "zero" } else { "pos" });
        if let Some(i) = self.cached(&name) {
            return i;
        }
        let f = match counter {
            Counter::C1 => 2,
            Counter::C2 => 3,
        };
        let mulx_f = self.divmul("x", f, true);
        let muly2 = self.divmul("y", 2, true);
        let keep_x = self.pbv(&["y", "z"]);
        let keep_y = self.pbv(&["x", "z"]);
        let mut singles = Vec::new();
        if zero {
            singles.push(if counter == Counter::C1 { 3 } else { 2 });
        } else {
            singles.extend([2, 3]);
        }
        let singles: Vec<(u32, Iface)> = singles.into_iter().map(|m| (m, self.divmul("x", m, true))).collect();

        let mut d = Draft::new(&name);
        let en = d.entry("en");
        let pick = d.node("pick");
        let ex = d.exit("ex");
        if zero {
            d.t(&en, "begin", &pick);
        } else {
            let first = d.place("first", &mulx_f, &keep_x);
            d.t(&en, "begin", &first.call);
            d.t(first.ret(), "ready", &pick);
        }
        let jx = d.place("jx", &mulx_f, &keep_x);
        let jy = d.place("jy", &muly2, &keep_y);
        d.t(&pick, "joint", &jx.call);
        d.t(jx.ret(), "then", &jy.call);
        d.t(jy.ret(), "again", &pick);
        for (m, iface) in &singles {
            let p = d.place(&format!("mx{m}"), iface, &keep_x);
            d.t(&pick, &format!("mulx{m}"), &p.call);
            d.t(p.ret(), "again", &pick);
        }
        d.t(&pick, "done", &ex).guard(vec![eq("x", 1), eq("y", 1)]);
        self.choice_rules.push(ChoiceRuleEntry {
            location: pick,
            rule: ChoiceRule::Certificate,
        });
        self.finish(d)
    }

    fn instruction(&mut self, kind: InstructionKind, counter: Counter) -> Iface {
        let name = format!("{}_{counter}", kind.tag());
        if let Some(i) = self.cached(&name) {
            return i;
        }
        let divs: Vec<(&'static str, Iface)> = divisions(kind, counter)
            .into_iter()
            .map(|(a, n)| (a, self.divmul(a, n, false)))
            .collect();
        let certs = (kind == InstructionKind::ZeroCheck)
            .then(|| (self.certificate(counter, true), self.certificate(counter, false)));
        let z = self.pbv(&["z"]);

        let mut d = Draft::new(&name);
        let en = d.entry("en");
        let mut prev = en;
        for (j, (a, iface)) in divs.iter().enumerate() {
            let keep = self.pbv(&[other(a), "z"]);
            let p = d.place(&format!("div{}", j + 1), iface, &keep);
            d.t(&prev, "go", &p.call);
            self.slot_boxes.insert(format!("{name}.div{}", j + 1), format!("div{}", j + 1));
            prev = p.ret().to_string();
        }
        match certs {
            None => {
                let ex = d.exit("ex");
                d.t(&prev, "done", &ex);
            }
            Some((cz, cp)) => {
                let branch = d.node("branch");
                let claim_zero = d.node(CLAIM_ZERO);
                let claim_pos = d.node(CLAIM_POS);
                let smiley_zero = d.node("smiley_zero");
                let smiley_pos = d.node("smiley_pos");
                let ex_zero = d.exit("ex_zero");
                let ex_pos = d.exit("ex_pos");
                d.t(&prev, "go", &branch);
                d.t(&branch, CLAIM_ZERO, &claim_zero);
                d.t(&branch, CLAIM_POS, &claim_pos);
                for (claim, cert, ex, smiley, local) in [
                    (&claim_zero, &cz, &ex_zero, &smiley_zero, "cert_zero"),
                    (&claim_pos, &cp, &ex_pos, &smiley_pos, "cert_pos"),
                ] {
                    let p = d.place(local, cert, &z);
                    d.t(claim, "accept", ex);
                    d.t(claim, "verify", &p.call);
                    d.t(p.ret(), "win", smiley);
                    self.tortoise.insert(claim.clone());
                    self.decisions.insert(claim.clone(), Phase::Branch);
                }
                self.smileys.extend([smiley_zero, smiley_pos]);
                self.choice_rules.push(ChoiceRuleEntry {
                    location: branch,
                    rule: ChoiceRule::BranchClaim { counter },
                });
            }
        }
        self.finish(d)
    }

    fn into_arena(self, top: TopInfo) -> Result<(RhaDoc, Sidecar), CompileError> {
        let vars = self.target.variables();
        let mut partition = BTreeMap::new();
        // Owners: every location of every component; the call/return ports
        // come from the box declarations.
        for comp in &self.comps {
            for n in &comp.nodes {
                partition.insert(node(n), Player::Achilles);
            }
            for b in &comp.boxes {
                let callee = &self.ifaces[&b.callee];
                partition.insert(format!("call:{}:{}", b.name, &callee.entry["node:".len()..]), Player::Achilles);
                for e in &callee.exits {
                    partition.insert(format!("ret:{}:{}", b.name, &e["node:".len()..]), Player::Achilles);
                }
            }
        }
        for t in &self.tortoise {
            partition.insert(t.clone(), Player::Tortoise);
        }
        let mut finals: Vec<String> = self.smileys.clone();
        finals.extend(top.extra_finals.iter().cloned());
        let initial = vars
            .iter()
            .map(|v| {
                let one = *v == "x" || *v == "y";
                (v.to_string(), Rational::from_integer(one as i64))
            })
            .collect();
        let doc = RhaDoc {
            variables: vars.iter().map(|s| s.to_string()).collect(),
            components: self.comps,
            start: Some(top.start),
            partition: Some(partition),
            finals,
            initial_valuation: Some(initial),
        };
        let mut slot_boxes = self.slot_boxes;
        slot_boxes.extend(top.slot_boxes);
        let sidecar = Sidecar {
            target: self.target,
            time_bound: Rational::from_integer(4),
            smiley_time_bound: Rational::from_integer(SMILEY_TIME_BOUND),
            anchors: top.anchors,
            owner_legend: owner_legend(),
            halt: top.halt,
            smileys: self.smileys,
            slot_frame: top.slot_frame,
            slot_boxes,
            delay_rules: self.delay_rules,
            choice_rules: self.choice_rules,
            decisions: self.decisions,
            machine: top.machine,
        };
        Ok((doc, sidecar))
    }
}

/// Simulation path `< 4`, plus the longest verification branch: a
/// division check by 12 (`< 12`) or a zero-test certificate (`< 12`).
const SMILEY_TIME_BOUND: i64 = 18;

struct TopInfo {
    start: String,
    anchors: BTreeMap<usize, String>,
    halt: Option<String>,
    extra_finals: Vec<String>,
    slot_frame: usize,
    slot_boxes: BTreeMap<String, String>,
    machine: Option<TwoCounterMachine>,
}

/// The arena for a machine: top component `main` with one node `main.l{i}`
/// per instruction (the HALT node is its exit) and one box per non-HALT
/// instruction calling the shared gadget of its kind.
pub fn compile_files(machine: &TwoCounterMachine, target: Target) -> Result<(RhaDoc, Sidecar), CompileError> {
    let mut b = Builder::new(target);
    let n = machine.halt_index();
    let mut gadgets = Vec::with_capacity(n);
    for ins in &machine.instructions()[..n] {
        let (kind, counter) = InstructionKind::of(ins)
            .ok_or_else(|| CompileError::Unsupported("HALT before the last instruction".into()))?;
        gadgets.push(b.instruction(kind, counter));
    }
    let mut d = Draft::new("main");
    let labels: Vec<String> = (0..=n)
        .map(|i| if i == n { d.exit(&format!("l{i}")) } else { d.node(&format!("l{i}")) })
        .collect();
    if n > 0 {
        d.doc.entries.push(labels[0]["node:".len()..].to_string());
    }
    for (i, ins) in machine.instructions()[..n].iter().enumerate() {
        let p = d.place(&format!("i{i}"), &gadgets[i], &[]);
        d.t(&labels[i], "enter", &p.call);
        match *ins {
            Instruction::Inc { next, .. } | Instruction::Dec { next, .. } => {
                d.t(p.ret(), "next", &labels[next]);
            }
            Instruction::ZeroCheck {
                if_zero, if_positive, ..
            } => {
                d.t(&p.rets[0], "zero", &labels[if_zero]);
                d.t(&p.rets[1], "pos", &labels[if_positive]);
            }
            Instruction::Halt => unreachable!(),
        }
    }
    b.finish(d);
    let top = TopInfo {
        start: labels[0].clone(),
        anchors: labels.iter().cloned().enumerate().collect(),
        halt: Some(labels[n].clone()),
        extra_finals: vec![labels[n].clone()],
        slot_frame: 1,
        slot_boxes: BTreeMap::new(),
        machine: Some(machine.clone()),
    };
    b.into_arena(top)
}

pub fn compile(machine: &TwoCounterMachine, target: Target) -> Result<CompiledArena, CompileError> {
    let (doc, sidecar) = compile_files(machine, target)?;
    CompiledArena::from_parts(&doc, &sidecar)
}

/// A wrapper `top.start → gadget → top.done*` with the gadget's exits final.
fn standalone(mut b: Builder, gadget: Iface, keep: &[&str], slot_frame: usize, slot: Option<&str>) -> Result<CompiledArena, CompileError> {
    let mut d = Draft::new("top");
    let start = d.entry("start");
    let keep = b.pbv(keep);
    let p = d.place("g", &gadget, &keep);
    d.t(&start, "enter", &p.call);
    let mut dones = Vec::new();
    for (i, r) in p.rets.iter().enumerate() {
        let local = if p.rets.len() == 1 {
            "done".to_string()
        } else {
            let exit = &gadget.exits[i];
            format!("done_{}", exit.rsplit('_').next().unwrap_or("x"))
        };
        let done = d.exit(&local);
        d.t(r, "leave", &done);
        dones.push(done);
    }
    b.finish(d);
    let mut slot_boxes = BTreeMap::new();
    if let Some(s) = slot {
        slot_boxes.insert("top.g".to_string(), s.to_string());
    }
    let top = TopInfo {
        start: start.clone(),
        anchors: BTreeMap::from([(0, start)]),
        halt: None,
        extra_finals: dones,
        slot_frame,
        slot_boxes,
        machine: None,
    };
    let (doc, sidecar) = b.into_arena(top)?;
    CompiledArena::from_parts(&doc, &sidecar)
}

/// A standalone `Div{var, n}` gadget; slots `div` and `div-catchup`.
pub fn build_div(var: &str, n: u32, target: Target) -> Result<CompiledArena, CompileError> {
    let a = divisible_var(var, n)?;
    let mut b = Builder::new(target);
    let g = b.divmul(a, n, false);
    standalone(b, g, &[other(a), "z"], 0, Some("div"))
}

/// A standalone `Mul{var, m}` gadget (used by zero-test certificates).
pub fn build_mul(var: &str, m: u32, target: Target) -> Result<CompiledArena, CompileError> {
    let a = divisible_var(var, m)?;
    let mut b = Builder::new(target);
    let g = b.divmul(a, m, true);
    standalone(b, g, &[other(a), "z"], 0, Some("div"))
}

/// A standalone instruction gadget; slots as in a compiled machine.
pub fn build_instruction(kind: InstructionKind, counter: Counter, target: Target) -> Result<CompiledArena, CompileError> {
    let mut b = Builder::new(target);
    let g = b.instruction(kind, counter);
    standalone(b, g, &[], 1, None)
}

fn divisible_var(var: &str, n: u32) -> Result<&'static str, CompileError> {
    if !(1..=16).contains(&n) {
        return Err(CompileError::Unsupported(format!("factor {n}")));
    }
    match var {
        "x" => Ok("x"),
        "y" => Ok("y"),
        _ => Err(CompileError::Unsupported(format!("variable {var:?}"))),
    }
}
