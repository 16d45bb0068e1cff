//! Recursive hybrid automata: the RSM skeleton plus variables, flows,
//! invariants, guards, resets and per-box pass-by-value sets.

pub mod constraint;
mod semantics;

pub use constraint::{Atom, Constraint, DelaySet, Interval, Rel, Violation};
pub use semantics::{
    available_actions, enabled_delays, run_duration, timed_step, Frame, RhaConfiguration, StepError, TimedAction,
    TimedRun,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::lts::Player;
use crate::rational::Rational;
use crate::rsm::GamePartition;
use crate::structure::{BoxId, ComponentSpec, Issue, Location, ModelError, Structure, TransitionId};
use crate::valuation::{Valuation, VarSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RhaModel {
    structure: Structure,
    variables: Vec<String>,
    pass_by_value: Vec<VarSet>,
    invariants: HashMap<Location, Constraint>,
    flows: HashMap<Location, Vec<Rational>>,
    guards: Vec<Constraint>,
    resets: Vec<VarSet>,
    issues: Vec<Issue>,
}

/// Per-location rates, per-transition guard and reset, per-box
/// pass-by-value set. Unlisted locations have invariant `true` and rate 1
/// for every variable.
#[derive(Debug, Clone, Default)]
pub struct RhaParts {
    pub variables: Vec<String>,
    pub pass_by_value: Vec<VarSet>,
    pub invariants: HashMap<Location, Constraint>,
    pub flows: HashMap<Location, Vec<Rational>>,
    pub guards: Vec<Constraint>,
    pub resets: Vec<VarSet>,
}

impl RhaModel {
    pub fn new(structure: Structure, parts: RhaParts) -> Result<Self, ModelError> {
        let mut issues = Vec::new();
        if parts.variables.len() > VarSet::MAX_VARS {
            return Err(ModelError::Other(format!("at most {} variables", VarSet::MAX_VARS)));
        }
        let mut seen = BTreeSet::new();
        for v in &parts.variables {
            if !seen.insert(v) {
                issues.push(Issue(format!("duplicate variable {v:?}")));
            }
        }
        if parts.pass_by_value.len() != structure.boxes().len() {
            return Err(ModelError::Other("one pass-by-value set per box required".into()));
        }
        if parts.guards.len() != structure.transitions().len() || parts.resets.len() != structure.transitions().len() {
            return Err(ModelError::Other("one guard and reset per transition required".into()));
        }
        for (loc, rates) in &parts.flows {
            if rates.len() != parts.variables.len() {
                return Err(ModelError::Other("flow must give one rate per variable".into()));
            }
            for (i, r) in rates.iter().enumerate() {
                if r.is_negative() {
                    issues.push(Issue(format!(
                        "negative rate for {} at {}",
                        parts.variables[i],
                        structure.location_name(*loc)
                    )));
                }
            }
        }
        Ok(RhaModel {
            structure,
            variables: parts.variables,
            pass_by_value: parts.pass_by_value,
            invariants: parts.invariants,
            flows: parts.flows,
            guards: parts.guards,
            resets: parts.resets,
            issues,
        })
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn var_index(&self, name: &str) -> Result<usize, ModelError> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| ModelError::UnknownVariable(name.to_string()))
    }

    pub fn var_set(&self, names: &[String]) -> Result<VarSet, ModelError> {
        names.iter().map(|n| self.var_index(n)).collect()
    }

    pub fn var_names(&self, set: VarSet) -> Vec<String> {
        set.iter().map(|i| self.variables[i].clone()).collect()
    }

    pub fn pass_by_value(&self, b: BoxId) -> VarSet {
        self.pass_by_value[b.0 as usize]
    }

    pub fn invariant(&self, loc: Location) -> &Constraint {
        static TRUE: Constraint = Constraint::True;
        self.invariants.get(&loc).unwrap_or(&TRUE)
    }

    pub fn flow(&self, loc: Location) -> Vec<Rational> {
        self.flows
            .get(&loc)
            .cloned()
            .unwrap_or_else(|| vec![Rational::one(); self.variables.len()])
    }

    pub fn guard(&self, t: TransitionId) -> &Constraint {
        &self.guards[t]
    }

    pub fn reset(&self, t: TransitionId) -> VarSet {
        self.resets[t]
    }

    pub fn validate(&self) -> Result<(), Vec<Issue>> {
        let mut issues = self.structure.validate();
        issues.extend(self.issues.iter().cloned());
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }

    pub fn valuation(&self, values: &BTreeMap<String, Rational>) -> Result<Valuation, ModelError> {
        let mut v = Valuation::zero(self.variables.len());
        for (name, value) in values {
            v.set(self.var_index(name)?, value.clone());
        }
        Ok(v)
    }

    pub fn named_valuation(&self, v: &Valuation) -> BTreeMap<String, Rational> {
        v.named(&self.variables).map(|(n, r)| (n.to_string(), r.clone())).collect()
    }

    pub fn from_doc(doc: &RhaDoc) -> Result<RhaModel, ModelError> {
        let specs: Vec<ComponentSpec> = doc
            .components
            .iter()
            .map(|c| ComponentSpec {
                name: c.name.clone(),
                nodes: c.nodes.clone(),
                entries: c.entries.clone(),
                exits: c.exits.clone(),
                boxes: c.boxes.iter().map(|b| (b.name.clone(), b.callee.clone())).collect(),
                transitions: c
                    .transitions
                    .iter()
                    .map(|t| (t.from.clone(), t.action.clone(), t.to.clone()))
                    .collect(),
            })
            .collect();
        let structure = Structure::build(&specs)?;
        let index = |name: &str| {
            doc.variables
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| ModelError::UnknownVariable(name.to_string()))
        };
        let set = |names: &[String]| names.iter().map(|n| index(n)).collect::<Result<VarSet, _>>();
        let constraint = |c: &ConstraintDoc| -> Result<Constraint, ModelError> {
            Ok(match c {
                ConstraintDoc::Const(ConstDoc::True) => Constraint::True,
                ConstraintDoc::Const(ConstDoc::False) => Constraint::False,
                ConstraintDoc::Atoms(atoms) => Constraint::atoms(
                    atoms
                        .iter()
                        .map(|a| Ok(Atom::new(index(&a.var)?, a.rel, a.bound)))
                        .collect::<Result<_, ModelError>>()?,
                ),
            })
        };

        let mut parts = RhaParts {
            variables: doc.variables.clone(),
            ..RhaParts::default()
        };
        for c in &doc.components {
            for b in &c.boxes {
                parts.pass_by_value.push(set(&b.pass_by_value)?);
            }
            for t in &c.transitions {
                parts.guards.push(constraint(&t.guard)?);
                parts.resets.push(set(&t.resets)?);
            }
            for (loc, inv) in &c.invariants {
                parts.invariants.insert(structure.parse_location(loc)?, constraint(inv)?);
            }
            for (loc, rates) in &c.flows {
                let mut r = vec![Rational::one(); doc.variables.len()];
                for (var, rate) in rates {
                    r[index(var)?] = rate.clone();
                }
                parts.flows.insert(structure.parse_location(loc)?, r);
            }
        }
        RhaModel::new(structure, parts)
    }

    pub fn to_doc(&self) -> RhaDoc {
        let s = &self.structure;
        let cdoc = |c: &Constraint| match c {
            Constraint::True => ConstraintDoc::Const(ConstDoc::True),
            Constraint::False => ConstraintDoc::Const(ConstDoc::False),
            Constraint::And(atoms) => ConstraintDoc::Atoms(
                atoms
                    .iter()
                    .map(|a| AtomDoc {
                        var: self.variables[a.var].clone(),
                        rel: a.rel,
                        bound: a.bound,
                    })
                    .collect(),
            ),
        };
        let components = s
            .component_ids()
            .map(|cid| {
                let c = s.component(cid);
                let locs = s.locations_of(cid);
                RhaComponentDoc {
                    name: c.name.clone(),
                    nodes: c.nodes.iter().map(|&n| s.node(n).name.clone()).collect(),
                    entries: c.entries.iter().map(|&n| s.node(n).name.clone()).collect(),
                    exits: c.exits.iter().map(|&n| s.node(n).name.clone()).collect(),
                    boxes: c
                        .boxes
                        .iter()
                        .map(|&b| RhaBoxDoc {
                            name: s.box_decl(b).name.clone(),
                            callee: s.component(s.box_decl(b).callee).name.clone(),
                            pass_by_value: self.var_names(self.pass_by_value(b)),
                        })
                        .collect(),
                    transitions: s
                        .transitions()
                        .iter()
                        .enumerate()
                        .filter(|(_, t)| t.component == cid)
                        .map(|(i, t)| RhaTransitionDoc {
                            from: s.location_name(t.from),
                            action: t.action.clone(),
                            to: s.location_name(t.to),
                            guard: cdoc(&self.guards[i]),
                            resets: self.var_names(self.resets[i]),
                        })
                        .collect(),
                    invariants: locs
                        .iter()
                        .filter_map(|l| self.invariants.get(l).map(|c| (s.location_name(*l), cdoc(c))))
                        .collect(),
                    flows: locs
                        .iter()
                        .filter_map(|l| {
                            self.flows.get(l).map(|r| {
                                let named = self.variables.iter().cloned().zip(r.iter().cloned()).collect();
                                (s.location_name(*l), named)
                            })
                        })
                        .collect(),
                }
            })
            .collect();
        RhaDoc {
            variables: self.variables.clone(),
            components,
            start: None,
            partition: None,
            finals: Vec::new(),
            initial_valuation: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstDoc {
    True,
    False,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomDoc {
    pub var: String,
    pub rel: Rel,
    pub bound: i64,
}

/// `"true"`, `"false"`, or a list of atoms read as their conjunction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstraintDoc {
    Const(ConstDoc),
    Atoms(Vec<AtomDoc>),
}

impl Default for ConstraintDoc {
    fn default() -> Self {
        ConstraintDoc::Const(ConstDoc::True)
    }
}

fn is_true(c: &ConstraintDoc) -> bool {
    matches!(c, ConstraintDoc::Const(ConstDoc::True))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RhaBoxDoc {
    pub name: String,
    pub callee: String,
    #[serde(default)]
    pub pass_by_value: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhaTransitionDoc {
    pub from: String,
    pub action: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "is_true")]
    pub guard: ConstraintDoc,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub resets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhaComponentDoc {
    pub name: String,
    pub nodes: Vec<String>,
    #[serde(default)]
    pub entries: Vec<String>,
    #[serde(default)]
    pub exits: Vec<String>,
    #[serde(default)]
    pub boxes: Vec<RhaBoxDoc>,
    #[serde(default)]
    pub transitions: Vec<RhaTransitionDoc>,
    /// Location name to invariant; unlisted locations are unconstrained.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub invariants: BTreeMap<String, ConstraintDoc>,
    /// Location name to per-variable rate; unlisted rates are 1.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub flows: BTreeMap<String, BTreeMap<String, Rational>>,
}

/// JSON model format for recursive hybrid automata and their games.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RhaDoc {
    pub variables: Vec<String>,
    pub components: Vec<RhaComponentDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<BTreeMap<String, Player>>,
    #[serde(default)]
    pub finals: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_valuation: Option<BTreeMap<String, Rational>>,
}

/// A game on an RHA: model, owners, start configuration and finals.
#[derive(Debug, Clone)]
pub struct RhaGame {
    pub model: RhaModel,
    pub partition: GamePartition,
    pub start: Location,
    pub initial: Valuation,
    pub finals: BTreeSet<Location>,
}

impl RhaGame {
    pub fn from_doc(doc: &RhaDoc) -> Result<RhaGame, ModelError> {
        let model = RhaModel::from_doc(doc)?;
        if let Err(issues) = model.validate() {
            return Err(ModelError::Invalid(issues));
        }
        let s = model.structure();
        let partition = match &doc.partition {
            Some(p) => GamePartition::from_names(s, p)?,
            None => return Err(ModelError::Other("missing partition".into())),
        };
        let start = match &doc.start {
            Some(l) => s.parse_location(l)?,
            None => return Err(ModelError::Other("missing start location".into())),
        };
        let finals = doc.finals.iter().map(|f| s.parse_location(f)).collect::<Result<_, _>>()?;
        let initial = match &doc.initial_valuation {
            Some(v) => model.valuation(v)?,
            None => Valuation::zero(model.variables().len()),
        };
        Ok(RhaGame {
            model,
            partition,
            start,
            initial,
            finals,
        })
    }

    pub fn to_doc(&self) -> RhaDoc {
        let s = self.model.structure();
        let mut doc = self.model.to_doc();
        doc.start = Some(s.location_name(self.start));
        doc.partition = Some(self.partition.to_names(s));
        doc.finals = self.finals.iter().map(|&l| s.location_name(l)).collect();
        doc.initial_valuation = Some(self.model.named_valuation(&self.initial));
        doc
    }
}

/// For every box, `P(b) = X` or `P(b) = ∅`.
pub fn is_glitch_free(model: &RhaModel) -> bool {
    let all = VarSet::all(model.variables().len());
    model
        .structure()
        .box_ids()
        .all(|b| model.pass_by_value(b).is_empty() || model.pass_by_value(b) == all)
}

/// The call graph admits a strict topological order.
pub fn is_hierarchical(model: &RhaModel) -> bool {
    model.structure().callee_first_order().is_some()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarClass {
    Clock,
    Stopwatch,
    General,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelClass {
    Timed,
    Stopwatch,
    General,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub class: ModelClass,
    pub variables: Vec<(String, VarClass)>,
}

/// Clock: rate 1 at every location. Stopwatch: rates in {0, 1}.
pub fn classify(model: &RhaModel) -> Classification {
    let locations = model.structure().all_locations();
    let one = Rational::one();
    let variables: Vec<(String, VarClass)> = model
        .variables()
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let rates: Vec<Rational> = locations.iter().map(|&l| model.flow(l)[i].clone()).collect();
            let class = if rates.iter().all(|r| *r == one) {
                VarClass::Clock
            } else if rates.iter().all(|r| *r == one || r.is_zero()) {
                VarClass::Stopwatch
            } else {
                VarClass::General
            };
            (name.clone(), class)
        })
        .collect();
    let class = if variables.iter().all(|(_, c)| *c == VarClass::Clock) {
        ModelClass::Timed
    } else if variables.iter().all(|(_, c)| *c != VarClass::General) {
        ModelClass::Stopwatch
    } else {
        ModelClass::General
    };
    Classification { class, variables }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn self_call_json() -> &'static str {
        r#"{
          "variables": ["x"],
          "components": [
            {
              "name": "M1",
              "nodes": ["u1", "u2", "u3"],
              "entries": ["u1", "u2"],
              "exits": ["u3"],
              "boxes": [{"name": "b1", "callee": "M2", "passByValue": ["x"]}],
              "transitions": [
                {"from": "node:u1", "action": "a", "to": "call:b1:v1", "guard": [{"var": "x", "rel": "=", "bound": 1}]},
                {"from": "node:u2", "action": "b", "to": "call:b1:v1", "guard": [{"var": "x", "rel": "<", "bound": 1}]},
                {"from": "ret:b1:v2", "action": "c", "to": "node:u3", "guard": [{"var": "x", "rel": "=", "bound": 0}]}
              ]
            },
            {
              "name": "M2",
              "nodes": ["v1", "v2"],
              "entries": ["v1"],
              "exits": ["v2"],
              "boxes": [{"name": "b2", "callee": "M2"}],
              "transitions": [
                {"from": "node:v1", "action": "d", "to": "call:b2:v1", "guard": [{"var": "x", "rel": "=", "bound": 1}]},
                {"from": "ret:b2:v2", "action": "e", "to": "node:v2"},
                {"from": "node:v1", "action": "f", "to": "node:v2", "guard": [{"var": "x", "rel": "=", "bound": 1}], "resets": ["x"]}
              ]
            }
          ]
        }"#
    }

    pub fn self_call() -> RhaModel {
        RhaModel::from_doc(&serde_json::from_str(self_call_json()).unwrap()).unwrap()
    }
}
