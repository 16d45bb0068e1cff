//! Recursive state machines: syntax, the discrete call/return semantics,
//! summary-based reachability and termination, and reachability games.

mod solver;

pub use solver::{solve_reachability_game, solve_termination_game, summary_table, ExitSet, GameSolution, SummaryTable};

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::lts::Player;
use crate::structure::{
    BoxId, ComponentSpec, Issue, Location, LocationKind, ModelError, NodeId, Structure, CALL_ACTION, RETURN_ACTION,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxDoc {
    pub name: String,
    pub callee: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionDoc {
    pub from: String,
    pub action: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RsmComponentDoc {
    pub name: String,
    pub nodes: Vec<String>,
    #[serde(default)]
    pub entries: Vec<String>,
    #[serde(default)]
    pub exits: Vec<String>,
    #[serde(default)]
    pub boxes: Vec<BoxDoc>,
    #[serde(default)]
    pub transitions: Vec<TransitionDoc>,
}

/// JSON model format: `{ components, start, partition, finals }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RsmDoc {
    pub components: Vec<RsmComponentDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<BTreeMap<String, Player>>,
    #[serde(default)]
    pub finals: Vec<String>,
}

/// A recursive state machine `(M_1, ..., M_k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsmModel {
    structure: Structure,
}

impl RsmModel {
    pub fn new(structure: Structure) -> Self {
        RsmModel { structure }
    }

    pub fn from_doc(doc: &RsmDoc) -> Result<RsmModel, ModelError> {
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
        Ok(RsmModel {
            structure: Structure::build(&specs)?,
        })
    }

    pub fn to_doc(&self) -> RsmDoc {
        let s = &self.structure;
        let components = s
            .components()
            .iter()
            .enumerate()
            .map(|(ci, c)| RsmComponentDoc {
                name: c.name.clone(),
                nodes: c.nodes.iter().map(|&n| s.node(n).name.clone()).collect(),
                entries: c.entries.iter().map(|&n| s.node(n).name.clone()).collect(),
                exits: c.exits.iter().map(|&n| s.node(n).name.clone()).collect(),
                boxes: c
                    .boxes
                    .iter()
                    .map(|&b| BoxDoc {
                        name: s.box_decl(b).name.clone(),
                        callee: s.component(s.box_decl(b).callee).name.clone(),
                    })
                    .collect(),
                transitions: s
                    .transitions()
                    .iter()
                    .filter(|t| t.component.0 as usize == ci)
                    .map(|t| TransitionDoc {
                        from: s.location_name(t.from),
                        action: t.action.clone(),
                        to: s.location_name(t.to),
                    })
                    .collect(),
            })
            .collect();
        RsmDoc {
            components,
            start: None,
            partition: None,
            finals: Vec::new(),
        }
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    /// Every violated structural invariant; empty when the model is well formed.
    pub fn validate(&self) -> Result<(), Vec<Issue>> {
        let issues = self.structure.validate();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }

    pub fn node(&self, name: &str) -> Result<NodeId, ModelError> {
        let name = name.strip_prefix("node:").unwrap_or(name);
        self.structure
            .node_by_name(name)
            .ok_or_else(|| ModelError::UnknownNode(name.to_string()))
    }

    pub fn location(&self, text: &str) -> Result<Location, ModelError> {
        self.structure.parse_location(text)
    }

    pub fn locations(&self, texts: &[String]) -> Result<BTreeSet<Location>, ModelError> {
        texts.iter().map(|t| self.location(t)).collect()
    }
}

/// Owner of every location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GamePartition {
    owner: BTreeMap<Location, Player>,
}

impl GamePartition {
    pub fn uniform(structure: &Structure, player: Player) -> Self {
        GamePartition {
            owner: structure.all_locations().into_iter().map(|l| (l, player)).collect(),
        }
    }

    /// Fails unless the map covers all of `Q`.
    pub fn from_map(structure: &Structure, owner: BTreeMap<Location, Player>) -> Result<Self, ModelError> {
        for loc in structure.all_locations() {
            if !owner.contains_key(&loc) {
                return Err(ModelError::PartitionNotTotal(structure.location_name(loc)));
            }
        }
        Ok(GamePartition { owner })
    }

    pub fn from_names(structure: &Structure, names: &BTreeMap<String, Player>) -> Result<Self, ModelError> {
        let owner = names
            .iter()
            .map(|(k, &p)| structure.parse_location(k).map(|l| (l, p)))
            .collect::<Result<BTreeMap<_, _>, _>>()?;
        Self::from_map(structure, owner)
    }

    pub fn owner(&self, loc: Location) -> Player {
        self.owner.get(&loc).copied().unwrap_or(Player::Achilles)
    }

    pub fn set(&mut self, loc: Location, player: Player) {
        self.owner.insert(loc, player);
    }

    pub fn to_names(&self, structure: &Structure) -> BTreeMap<String, Player> {
        self.owner
            .iter()
            .map(|(&l, &p)| (structure.location_name(l), p))
            .collect()
    }
}

/// A fully parsed game instance from an [`RsmDoc`].
#[derive(Debug, Clone)]
pub struct RsmGame {
    pub model: RsmModel,
    pub partition: GamePartition,
    pub start: NodeId,
    pub finals: BTreeSet<Location>,
}

impl RsmGame {
    pub fn from_doc(doc: &RsmDoc) -> Result<RsmGame, ModelError> {
        let model = RsmModel::from_doc(doc)?;
        if let Err(issues) = model.validate() {
            return Err(ModelError::Invalid(issues));
        }
        let partition = match &doc.partition {
            Some(p) => GamePartition::from_names(model.structure(), p)?,
            None => return Err(ModelError::Other("missing partition".into())),
        };
        let start = match &doc.start {
            Some(s) => model.node(s)?,
            None => return Err(ModelError::Other("missing start node".into())),
        };
        let finals = model.locations(&doc.finals)?;
        Ok(RsmGame {
            model,
            partition,
            start,
            finals,
        })
    }

    pub fn to_doc(&self) -> RsmDoc {
        let s = self.model.structure();
        let mut doc = self.model.to_doc();
        doc.start = Some(s.location_name(Location::Node(self.start)));
        doc.partition = Some(self.partition.to_names(s));
        doc.finals = self.finals.iter().map(|&l| s.location_name(l)).collect();
        doc
    }
}

/// A state of the semantics: pending boxes and the current location.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RsmConfiguration {
    pub context: Vec<BoxId>,
    pub location: Location,
}

impl RsmConfiguration {
    pub fn top(node: NodeId) -> Self {
        RsmConfiguration {
            context: Vec::new(),
            location: Location::Node(node),
        }
    }
}

/// Actions available at a configuration, in declaration order.
pub fn available_actions(model: &RsmModel, config: &RsmConfiguration) -> Vec<String> {
    let s = model.structure();
    match s.kind(config.location) {
        LocationKind::CallPort => vec![CALL_ACTION.to_string()],
        LocationKind::Exit if config.context.is_empty() => Vec::new(),
        LocationKind::Exit => vec![RETURN_ACTION.to_string()],
        LocationKind::Internal => s
            .outgoing(config.location)
            .iter()
            .map(|&t| s.transition(t).action.clone())
            .collect(),
    }
}

/// One step of the semantics. `None` when `action` has no successor,
/// including the exit-with-empty-context terminal case.
pub fn rsm_step(model: &RsmModel, config: &RsmConfiguration, action: &str) -> Option<RsmConfiguration> {
    let s = model.structure();
    match config.location {
        Location::Call(b, en) => (action == CALL_ACTION).then(|| {
            let mut context = config.context.clone();
            context.push(b);
            RsmConfiguration {
                context,
                location: Location::Node(en),
            }
        }),
        Location::Node(ex) if s.node(ex).is_exit => {
            if action != RETURN_ACTION {
                return None;
            }
            let (&b, rest) = config.context.split_last()?;
            Some(RsmConfiguration {
                context: rest.to_vec(),
                location: Location::Ret(b, ex),
            })
        }
        loc => s.find_transition(loc, action).map(|t| RsmConfiguration {
            context: config.context.clone(),
            location: s.transition(t).to,
        }),
    }
}

/// Exits reachable from each entry within its own component, using
/// call-to-return summaries for boxes.
pub(crate) fn entry_summaries(s: &Structure) -> Vec<BTreeSet<NodeId>> {
    let mut summaries: Vec<BTreeSet<NodeId>> = vec![BTreeSet::new(); s.nodes_len()];
    loop {
        let mut changed = false;
        for comp in s.components() {
            for &en in &comp.entries {
                let reach = intra_reach(s, &summaries, Location::Node(en));
                for loc in reach {
                    if let Location::Node(n) = loc {
                        if s.node(n).is_exit && summaries[en.0 as usize].insert(n) {
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            return summaries;
        }
    }
}

/// Locations of the same component reachable from `from` without leaving it.
pub(crate) fn intra_reach(s: &Structure, summaries: &[BTreeSet<NodeId>], from: Location) -> BTreeSet<Location> {
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(loc) = queue.pop_front() {
        let next: Vec<Location> = match s.kind(loc) {
            LocationKind::Exit => Vec::new(),
            LocationKind::CallPort => {
                let Location::Call(b, en) = loc else { unreachable!() };
                summaries[en.0 as usize].iter().map(|&ex| Location::Ret(b, ex)).collect()
            }
            LocationKind::Internal => s.outgoing(loc).iter().map(|&t| s.transition(t).to).collect(),
        };
        for n in next {
            if seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen
}

/// Is some configuration with location in `finals` reachable from `(ε, start)`?
pub fn reachable(model: &RsmModel, start: NodeId, finals: &BTreeSet<Location>) -> bool {
    let s = model.structure();
    let summaries = entry_summaries(s);
    let mut entered: HashSet<NodeId> = HashSet::new();
    let mut pending = vec![start];
    let mut first = true;
    while let Some(from) = pending.pop() {
        if !first && !entered.insert(from) {
            continue;
        }
        first = false;
        for loc in intra_reach(s, &summaries, Location::Node(from)) {
            if finals.contains(&loc) {
                return true;
            }
            if let Location::Call(_, en) = loc {
                if !entered.contains(&en) {
                    pending.push(en);
                }
            }
        }
    }
    false
}

/// Can an exit be reached with the empty context from `(ε, start)`?
pub fn terminates(model: &RsmModel, start: NodeId) -> bool {
    let s = model.structure();
    let summaries = entry_summaries(s);
    intra_reach(s, &summaries, Location::Node(start))
        .into_iter()
        .any(|l| s.is_exit(l))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    fn t(from: &str, action: &str, to: &str) -> TransitionDoc {
        TransitionDoc {
            from: from.into(),
            action: action.into(),
            to: to.into(),
        }
    }

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    /// The three-component example machine with boxes b1:M2, b2:M3, c1:M2,
    /// c2:M3 and d:M1.
    pub fn two_level() -> RsmDoc {
        RsmDoc {
            components: vec![
                RsmComponentDoc {
                    name: "M1".into(),
                    nodes: strings(&["u1", "u2", "u3", "u4"]),
                    entries: strings(&["u1", "u2"]),
                    exits: strings(&["u4"]),
                    boxes: vec![
                        BoxDoc {
                            name: "b1".into(),
                            callee: "M2".into(),
                        },
                        BoxDoc {
                            name: "b2".into(),
                            callee: "M3".into(),
                        },
                    ],
                    transitions: vec![
                        t("node:u1", "a", "call:b1:v1"),
                        t("node:u2", "a", "call:b2:w1"),
                        t("node:u3", "a", "node:u4"),
                        t("ret:b2:w2", "a", "node:u3"),
                        t("ret:b1:v3", "a", "node:u4"),
                        t("ret:b1:v4", "a", "call:b1:v2"),
                    ],
                },
                RsmComponentDoc {
                    name: "M2".into(),
                    nodes: strings(&["v1", "v2", "v3", "v4"]),
                    entries: strings(&["v1", "v2"]),
                    exits: strings(&["v3", "v4"]),
                    boxes: vec![
                        BoxDoc {
                            name: "c1".into(),
                            callee: "M2".into(),
                        },
                        BoxDoc {
                            name: "c2".into(),
                            callee: "M3".into(),
                        },
                    ],
                    transitions: vec![
                        t("node:v1", "a", "call:c1:v1"),
                        t("node:v2", "a", "call:c1:v2"),
                        t("node:v2", "b", "call:c2:w1"),
                        t("ret:c1:v3", "a", "node:v4"),
                        t("ret:c1:v4", "a", "node:v3"),
                        t("ret:c2:w2", "a", "node:v4"),
                        t("ret:c2:w2", "b", "call:c1:v2"),
                    ],
                },
                RsmComponentDoc {
                    name: "M3".into(),
                    nodes: strings(&["w1", "w2"]),
                    entries: strings(&["w1"]),
                    exits: strings(&["w2"]),
                    boxes: vec![BoxDoc {
                        name: "d".into(),
                        callee: "M1".into(),
                    }],
                    transitions: vec![
                        t("node:w1", "a", "call:d:u1"),
                        t("ret:d:u4", "a", "node:w2"),
                        t("node:w1", "b", "node:w2"),
                    ],
                },
            ],
            start: Some("u1".into()),
            partition: None,
            finals: strings(&["node:u4"]),
        }
    }
}
