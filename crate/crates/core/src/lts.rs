//! Finite labelled transition systems and two-player reachability games.
//!
//! This is the finite-game layer everything else falls back on: the RSM
//! solver is checked against attractors on unfolded arenas, and the RHA
//! harness reuses [`Player`].

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The two players of a reachability game. Achilles wants to reach the
/// targets, Tortoise wants to avoid them forever.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Player {
    Achilles,
    Tortoise,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Achilles => Player::Tortoise,
            Player::Tortoise => Player::Achilles,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::Achilles => "Achilles",
            Player::Tortoise => "Tortoise",
        })
    }
}

pub type StateId = usize;
pub type ActionId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LtsError {
    #[error("unknown state {0}")]
    UnknownState(StateId),
    #[error("transition function already maps ({state}, {action}) elsewhere")]
    Nondeterministic { state: String, action: String },
    #[error("step {step}: strategy chose {action:?} which is not available at state {state}")]
    Strategy {
        step: usize,
        state: String,
        action: Option<String>,
    },
}

/// A finite game arena: an LTS whose states are partitioned between the
/// players, plus a set of final states.
#[derive(Debug, Clone, Default)]
pub struct FiniteArena {
    names: Vec<String>,
    owner: Vec<Player>,
    actions: Vec<String>,
    action_index: HashMap<String, ActionId>,
    // Per state, sorted by action id.
    edges: Vec<Vec<(ActionId, StateId)>>,
    finals: BTreeSet<StateId>,
}

impl FiniteArena {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_state(&mut self, name: impl Into<String>, owner: Player) -> StateId {
        self.names.push(name.into());
        self.owner.push(owner);
        self.edges.push(Vec::new());
        self.names.len() - 1
    }

    pub fn intern_action(&mut self, name: &str) -> ActionId {
        if let Some(&id) = self.action_index.get(name) {
            return id;
        }
        self.actions.push(name.to_string());
        self.action_index.insert(name.to_string(), self.actions.len() - 1);
        self.actions.len() - 1
    }

    pub fn add_transition(&mut self, from: StateId, action: &str, to: StateId) -> Result<(), LtsError> {
        self.check(from)?;
        self.check(to)?;
        let a = self.intern_action(action);
        let edges = &mut self.edges[from];
        match edges.binary_search_by_key(&a, |&(act, _)| act) {
            Ok(i) if edges[i].1 == to => Ok(()),
            Ok(_) => Err(LtsError::Nondeterministic {
                state: self.names[from].clone(),
                action: action.to_string(),
            }),
            Err(i) => {
                edges.insert(i, (a, to));
                Ok(())
            }
        }
    }

    pub fn set_final(&mut self, state: StateId) -> Result<(), LtsError> {
        self.check(state)?;
        self.finals.insert(state);
        Ok(())
    }

    fn check(&self, s: StateId) -> Result<(), LtsError> {
        if s < self.names.len() {
            Ok(())
        } else {
            Err(LtsError::UnknownState(s))
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, s: StateId) -> &str {
        &self.names[s]
    }

    pub fn owner(&self, s: StateId) -> Player {
        self.owner[s]
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.actions[a]
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.action_index.get(name).copied()
    }

    pub fn finals(&self) -> &BTreeSet<StateId> {
        &self.finals
    }

    /// `A(s)` together with successors, in action order.
    pub fn moves(&self, s: StateId) -> &[(ActionId, StateId)] {
        &self.edges[s]
    }

    pub fn successor(&self, s: StateId, a: ActionId) -> Option<StateId> {
        self.edges[s]
            .binary_search_by_key(&a, |&(act, _)| act)
            .ok()
            .map(|i| self.edges[s][i].1)
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        0..self.names.len()
    }
}

/// A finite run `s0 a1 s1 ... an sn`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub states: Vec<StateId>,
    pub actions: Vec<ActionId>,
}

impl Run {
    pub fn start(s: StateId) -> Self {
        Run {
            states: vec![s],
            actions: Vec::new(),
        }
    }

    /// Number of transitions taken.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn last(&self) -> StateId {
        *self.states.last().expect("runs are never empty")
    }

    /// True when every consecutive triple is a transition of `arena`.
    pub fn is_valid_in(&self, arena: &FiniteArena) -> bool {
        self.states.len() == self.actions.len() + 1
            && self
                .actions
                .iter()
                .enumerate()
                .all(|(i, &a)| arena.successor(self.states[i], a) == Some(self.states[i + 1]))
    }
}

/// `Stop(F)(r)`: the least index of a state in `finals`, `None` for infinity.
pub fn stop_index(run: &Run, finals: &BTreeSet<StateId>) -> Option<usize> {
    run.states.iter().position(|s| finals.contains(s))
}

/// Result of an attractor computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attractor {
    pub winning: BTreeSet<StateId>,
    /// Positional witness: for each non-target Achilles state in `winning`,
    /// an action leading strictly closer to the targets.
    pub strategy: BTreeMap<StateId, ActionId>,
}

impl Attractor {
    pub fn wins(&self, s: StateId) -> bool {
        self.winning.contains(&s)
    }

    /// Complement of the winning set: the Tortoise-winning states.
    pub fn losing(&self, arena: &FiniteArena) -> BTreeSet<StateId> {
        arena.states().filter(|s| !self.winning.contains(s)).collect()
    }
}

/// Backward attractor of `targets` for Achilles.
///
/// Dead-end states that are not targets are winning for Tortoise.
/// Predecessors are processed in a fixed order so the strategy is
/// reproducible.
pub fn attractor(arena: &FiniteArena, targets: &BTreeSet<StateId>) -> Result<Attractor, LtsError> {
    let n = arena.len();
    if let Some(&bad) = targets.iter().find(|&&t| t >= n) {
        return Err(LtsError::UnknownState(bad));
    }
    let mut preds: Vec<Vec<(StateId, ActionId)>> = vec![Vec::new(); n];
    for s in arena.states() {
        for &(a, t) in arena.moves(s) {
            preds[t].push((s, a));
        }
    }
    let mut remaining: Vec<usize> = arena.states().map(|s| arena.moves(s).len()).collect();
    let mut win = vec![false; n];
    let mut strategy = BTreeMap::new();
    let mut queue: VecDeque<StateId> = VecDeque::new();
    for &t in targets {
        win[t] = true;
        queue.push_back(t);
    }
    while let Some(t) = queue.pop_front() {
        for &(s, a) in &preds[t] {
            if win[s] {
                continue;
            }
            match arena.owner(s) {
                Player::Achilles => {
                    win[s] = true;
                    strategy.insert(s, a);
                    queue.push_back(s);
                }
                Player::Tortoise => {
                    remaining[s] -= 1;
                    if remaining[s] == 0 {
                        win[s] = true;
                        queue.push_back(s);
                    }
                }
            }
        }
    }
    Ok(Attractor {
        winning: arena.states().filter(|&s| win[s]).collect(),
        strategy,
    })
}

/// A strategy picks an action for the last state of a finite run.
pub trait Strategy {
    fn choose(&mut self, arena: &FiniteArena, run: &Run) -> Option<ActionId>;
}

impl<F> Strategy for F
where
    F: FnMut(&FiniteArena, &Run) -> Option<ActionId>,
{
    fn choose(&mut self, arena: &FiniteArena, run: &Run) -> Option<ActionId> {
        self(arena, run)
    }
}

/// Memoryless strategy given as a table.
#[derive(Debug, Clone, Default)]
pub struct Positional(pub BTreeMap<StateId, ActionId>);

impl Strategy for Positional {
    fn choose(&mut self, arena: &FiniteArena, run: &Run) -> Option<ActionId> {
        let s = run.last();
        self.0
            .get(&s)
            .copied()
            .or_else(|| arena.moves(s).first().map(|&(a, _)| a))
    }
}

/// `Run(s, alpha, tau)` truncated after `max_steps` transitions or at a
/// dead end.
pub fn play(
    arena: &FiniteArena,
    start: StateId,
    achilles: &mut dyn Strategy,
    tortoise: &mut dyn Strategy,
    max_steps: usize,
) -> Result<Run, LtsError> {
    arena.check(start)?;
    let mut run = Run::start(start);
    while run.len() < max_steps {
        let s = run.last();
        if arena.moves(s).is_empty() {
            break;
        }
        let choice = match arena.owner(s) {
            Player::Achilles => achilles.choose(arena, &run),
            Player::Tortoise => tortoise.choose(arena, &run),
        };
        let next = choice.and_then(|a| arena.successor(s, a).map(|t| (a, t)));
        match next {
            Some((a, t)) => {
                run.actions.push(a);
                run.states.push(t);
            }
            None => {
                return Err(LtsError::Strategy {
                    step: run.len(),
                    state: arena.name(s).to_string(),
                    action: choice
                        .filter(|&a| a < arena.actions.len())
                        .map(|a| arena.action_name(a).to_string()),
                })
            }
        }
    }
    Ok(run)
}
