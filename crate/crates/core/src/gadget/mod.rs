//! Compiler from two-counter machines to time-bounded recursive timed
//! (three clocks) and glitch-free recursive stopwatch (four stopwatches)
//! game arenas.
//!
//! The configuration `(ℓ_k, c, d)` reached after `k` instructions is encoded
//! at the entry of the `k`-th instruction gadget as
//! `x = 1/(2^(k+c) 3^(k+d))`, `y = 1/2^k`, `z = 0`.
//!
//! Besides the automaton the compiler records, per gadget, what the
//! faithful delays are and where Tortoise may start a verification; the
//! harness reads those tables instead of reverse-engineering the model.

mod build;

pub use build::{build_div, build_instruction, build_mul, compile, compile_files, InstructionKind};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;
use crate::rha::{RhaDoc, RhaGame, RhaModel};
use crate::rsm::GamePartition;
use crate::structure::{BoxId, Location, ModelError};
use crate::tcm::{Counter, TcmError, TwoCounterMachine};
use crate::valuation::Valuation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// Unrestricted recursive timed automaton with clocks `x, y, z`.
    Rta3,
    /// Glitch-free recursive stopwatch automaton with `x, y, z, u`.
    Rsa4,
}

impl Target {
    pub fn variables(self) -> &'static [&'static str] {
        match self {
            Target::Rta3 => &["x", "y", "z"],
            Target::Rsa4 => &["x", "y", "z", "u"],
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Rta3 => "rta3",
            Target::Rsa4 => "rsa4",
        })
    }
}

impl FromStr for Target {
    type Err = CompileError;
    fn from_str(s: &str) -> Result<Self, CompileError> {
        match s {
            "rta3" => Ok(Target::Rta3),
            "rsa4" => Ok(Target::Rsa4),
            _ => Err(CompileError::Unsupported(format!("unknown target {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Machine(#[from] TcmError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("sidecar: {0}")]
    Sidecar(String),
}

/// How the faithful Achilles computes a delay from the current valuation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum DelayRule {
    /// `t = ν(var) / n`.
    Divide { var: String, n: u32 },
    /// `t = m · ν(var)`.
    Multiply { var: String, m: u32 },
    /// `t = ν(lead) − ν(lag)`: the second delay, copying the first.
    CatchUp { lead: String, lag: String },
}

impl DelayRule {
    pub fn phase(&self) -> Phase {
        match self {
            DelayRule::CatchUp { .. } => Phase::CatchUp,
            _ => Phase::First,
        }
    }

    pub fn faithful_delay(&self, model: &RhaModel, v: &Valuation) -> Result<Rational, ModelError> {
        Ok(match self {
            DelayRule::Divide { var, n } => &v[model.var_index(var)?] / Rational::from_integer(*n as i64),
            DelayRule::Multiply { var, m } => &v[model.var_index(var)?] * Rational::from_integer(*m as i64),
            DelayRule::CatchUp { lead, lag } => &v[model.var_index(lead)?] - &v[model.var_index(lag)?],
        })
    }

    pub fn is_division(&self) -> bool {
        matches!(self, DelayRule::Divide { .. })
    }
}

/// Non-delay decisions of Achilles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ChoiceRule {
    /// Assert whether `counter` is zero (actions `claim_zero`/`claim_pos`).
    BranchClaim { counter: Counter },
    /// Pick the next multiplication of a zero-test certificate.
    Certificate,
}

/// Which delay a Tortoise decision point is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    First,
    CatchUp,
    Branch,
}

pub const CLAIM_ZERO: &str = "claim_zero";
pub const CLAIM_POS: &str = "claim_pos";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayRuleEntry {
    pub location: String,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub boxed: Option<String>,
    pub rule: DelayRule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceRuleEntry {
    pub location: String,
    pub rule: ChoiceRule,
}

/// Everything about a compiled arena that is not the automaton itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Sidecar {
    pub target: Target,
    pub time_bound: Rational,
    pub smiley_time_bound: Rational,
    /// Instruction index to the top-level location entered for it.
    pub anchors: BTreeMap<usize, String>,
    pub owner_legend: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halt: Option<String>,
    pub smileys: Vec<String>,
    pub slot_frame: usize,
    pub slot_boxes: BTreeMap<String, String>,
    pub delay_rules: Vec<DelayRuleEntry>,
    pub choice_rules: Vec<ChoiceRuleEntry>,
    pub decisions: BTreeMap<String, Phase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub machine: Option<TwoCounterMachine>,
}

/// A compiled game: automaton, owners, finals, bounds and strategy tables.
#[derive(Debug, Clone)]
pub struct CompiledArena {
    pub target: Target,
    pub model: RhaModel,
    pub partition: GamePartition,
    pub finals: BTreeSet<Location>,
    pub smileys: BTreeSet<Location>,
    pub halt: Option<Location>,
    pub start: Location,
    pub initial: Valuation,
    /// Bound on the simulation path (HALT): `2(1 + 1/2 + ...) < 4`.
    pub time_bound: Rational,
    /// Bound for runs ending in a verification branch; checks take time
    /// proportional to the divisor, which exceeds `time_bound`.
    pub smiley_time_bound: Rational,
    pub anchors: BTreeMap<usize, Location>,
    pub machine: Option<TwoCounterMachine>,
    /// Context index whose box names the addressed gadget slot.
    pub slot_frame: usize,
    pub slot_boxes: BTreeMap<BoxId, String>,
    pub delay_rules: BTreeMap<(Location, Option<BoxId>), DelayRule>,
    pub choice_rules: BTreeMap<Location, ChoiceRule>,
    pub decisions: BTreeMap<Location, Phase>,
    anchor_set: BTreeSet<Location>,
}

impl CompiledArena {
    pub fn from_parts(doc: &RhaDoc, sidecar: &Sidecar) -> Result<CompiledArena, CompileError> {
        let game = RhaGame::from_doc(doc)?;
        let s = game.model.structure();
        let loc = |name: &str| s.parse_location(name).map_err(CompileError::from);
        let boxed = |name: &str| {
            s.box_by_name(name)
                .ok_or_else(|| CompileError::Sidecar(format!("unknown box {name:?}")))
        };
        let anchors: BTreeMap<usize, Location> = sidecar
            .anchors
            .iter()
            .map(|(&i, l)| Ok((i, loc(l)?)))
            .collect::<Result<_, CompileError>>()?;
        let smileys = sidecar.smileys.iter().map(|l| loc(l)).collect::<Result<_, _>>()?;
        let halt = sidecar.halt.as_deref().map(loc).transpose()?;
        let slot_boxes = sidecar
            .slot_boxes
            .iter()
            .map(|(b, slot)| Ok((boxed(b)?, slot.clone())))
            .collect::<Result<_, CompileError>>()?;
        let mut delay_rules = BTreeMap::new();
        for e in &sidecar.delay_rules {
            for v in rule_vars(&e.rule) {
                game.model.var_index(v)?;
            }
            let b = e.boxed.as_deref().map(boxed).transpose()?;
            delay_rules.insert((loc(&e.location)?, b), e.rule.clone());
        }
        let choice_rules = sidecar
            .choice_rules
            .iter()
            .map(|e| Ok((loc(&e.location)?, e.rule)))
            .collect::<Result<_, CompileError>>()?;
        let decisions = sidecar
            .decisions
            .iter()
            .map(|(l, &p)| Ok((loc(l)?, p)))
            .collect::<Result<_, CompileError>>()?;
        let anchor_set = anchors.values().copied().collect();
        Ok(CompiledArena {
            target: sidecar.target,
            partition: game.partition,
            finals: game.finals,
            smileys,
            halt,
            start: game.start,
            initial: game.initial,
            time_bound: sidecar.time_bound.clone(),
            smiley_time_bound: sidecar.smiley_time_bound.clone(),
            anchors,
            machine: sidecar.machine.clone(),
            slot_frame: sidecar.slot_frame,
            slot_boxes,
            delay_rules,
            choice_rules,
            decisions,
            anchor_set,
            model: game.model,
        })
    }

    pub fn to_parts(&self) -> (RhaDoc, Sidecar) {
        let s = self.model.structure();
        let name = |l: &Location| s.location_name(*l);
        let game = RhaGame {
            model: self.model.clone(),
            partition: self.partition.clone(),
            start: self.start,
            initial: self.initial.clone(),
            finals: self.finals.clone(),
        };
        let sidecar = Sidecar {
            target: self.target,
            time_bound: self.time_bound.clone(),
            smiley_time_bound: self.smiley_time_bound.clone(),
            anchors: self.anchors.iter().map(|(&i, l)| (i, name(l))).collect(),
            owner_legend: owner_legend(),
            halt: self.halt.as_ref().map(name),
            smileys: self.smileys.iter().map(name).collect(),
            slot_frame: self.slot_frame,
            slot_boxes: self
                .slot_boxes
                .iter()
                .map(|(b, slot)| (s.box_decl(*b).name.clone(), slot.clone()))
                .collect(),
            delay_rules: self
                .delay_rules
                .iter()
                .map(|((l, b), r)| DelayRuleEntry {
                    location: name(l),
                    boxed: b.map(|b| s.box_decl(b).name.clone()),
                    rule: r.clone(),
                })
                .collect(),
            choice_rules: self
                .choice_rules
                .iter()
                .map(|(l, &r)| ChoiceRuleEntry { location: name(l), rule: r })
                .collect(),
            decisions: self.decisions.iter().map(|(l, &p)| (name(l), p)).collect(),
            machine: self.machine.clone(),
        };
        (game.to_doc(), sidecar)
    }

    pub fn is_anchor(&self, loc: Location) -> bool {
        self.anchor_set.contains(&loc)
    }

    /// Replaces the start valuation, e.g. to enter a standalone gadget
    /// with a chosen `ζ`.
    pub fn with_initial(mut self, values: &BTreeMap<String, Rational>) -> Result<Self, ModelError> {
        for (name, v) in values {
            let i = self.model.var_index(name)?;
            self.initial.set(i, v.clone());
        }
        Ok(self)
    }

    /// The slot a decision or delay belongs to, if it is addressable:
    /// `divN`, `divN-catchup` or `branch`.
    pub fn slot_of(&self, context: &[BoxId], phase: Phase) -> Option<String> {
        match phase {
            Phase::Branch => (context.len() == self.slot_frame).then(|| "branch".to_string()),
            Phase::First | Phase::CatchUp => {
                let base = self.slot_boxes.get(context.get(self.slot_frame)?)?;
                Some(match phase {
                    Phase::CatchUp => format!("{base}-catchup"),
                    _ => base.clone(),
                })
            }
        }
    }

    /// Every slot an instruction exposes (or the standalone gadget's slots).
    pub fn slots_for(&self, instruction: Option<&crate::tcm::Instruction>) -> Vec<String> {
        match instruction {
            None => {
                let mut bases: Vec<&String> = self.slot_boxes.values().collect();
                bases.sort();
                bases.dedup();
                bases
                    .into_iter()
                    .flat_map(|b| [b.clone(), format!("{b}-catchup")])
                    .chain(self.decisions.values().any(|p| *p == Phase::Branch).then(|| "branch".to_string()))
                    .collect()
            }
            Some(ins) => {
                let kind = InstructionKind::of(ins);
                let Some(kind) = kind else { return Vec::new() };
                let divs = build::divisions(kind.0, kind.1).len();
                let mut out: Vec<String> = (1..=divs)
                    .flat_map(|j| [format!("div{j}"), format!("div{j}-catchup")])
                    .collect();
                if kind.0 == InstructionKind::ZeroCheck {
                    out.push("branch".into());
                }
                out
            }
        }
    }
}

fn rule_vars(rule: &DelayRule) -> Vec<&str> {
    match rule {
        DelayRule::Divide { var, .. } | DelayRule::Multiply { var, .. } => vec![var],
        DelayRule::CatchUp { lead, lag } => vec![lead, lag],
    }
}

pub(crate) fn owner_legend() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("Achilles".to_string(), "simulation choices: delays and branch claims".to_string()),
        ("Tortoise".to_string(), "verification choices: continue or enter a check".to_string()),
    ])
}

/// `x = 1/(2^(k+c) 3^(k+d))`, `y = 1/2^k`, `z = 0` (and `u = 0`).
pub fn expected_valuation(target: Target, k: u32, c: u32, d: u32) -> Valuation {
    let mut v = Valuation::zero(target.variables().len());
    v.set(0, Rational::inverse_power_product(k + c, k + d));
    v.set(1, Rational::inverse_power_product(k, 0));
    v
}
