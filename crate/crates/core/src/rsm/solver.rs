//! Exit-set summary fixpoint for reachability and termination games.
//!
//! `W(u, E)` holds when Achilles can force, from location `u` of some
//! component with an empty view of the caller, a visit to a final location
//! or a return through an exit in `E`. Call ports consult the callee's table
//! at its entry with the allowance made of exactly those exits whose return
//! ports win under `E`; since `W` is monotone in `E` this is equivalent to
//! asking for *some* winning allowance all of whose returns win.

use std::collections::{BTreeSet, HashMap};

use crate::lts::Player;
use crate::structure::{ComponentId, Location, LocationKind, ModelError, NodeId, Structure};

use super::{GamePartition, RsmModel};

/// A set of exits of one component, as bits over its `exits` order.
pub type ExitSet = u32;

const MAX_EXITS: usize = 16;

#[derive(Debug, Clone)]
struct ComponentTable {
    exits: Vec<NodeId>,
    locations: Vec<Location>,
    index: HashMap<Location, usize>,
    // win[allowance][location index]
    win: Vec<Vec<bool>>,
}

/// The least fixpoint `W`, per component, location and allowance.
#[derive(Debug, Clone)]
pub struct SummaryTable {
    tables: Vec<ComponentTable>,
    component_of: HashMap<Location, ComponentId>,
    /// Outer passes until stabilization.
    pub passes: usize,
}

impl SummaryTable {
    pub fn exits(&self, comp: ComponentId) -> &[NodeId] {
        &self.tables[comp.0 as usize].exits
    }

    pub fn allowance_of(&self, comp: ComponentId, exits: &BTreeSet<NodeId>) -> ExitSet {
        let t = &self.tables[comp.0 as usize];
        t.exits
            .iter()
            .enumerate()
            .filter(|(_, e)| exits.contains(e))
            .fold(0, |acc, (i, _)| acc | (1 << i))
    }

    pub fn wins(&self, loc: Location, allowance: ExitSet) -> bool {
        let c = self.component_of[&loc];
        let t = &self.tables[c.0 as usize];
        t.win[allowance as usize][t.index[&loc]]
    }

    /// The antichain of minimal winning allowances at `loc`.
    pub fn minimal_allowances(&self, loc: Location) -> Vec<ExitSet> {
        let c = self.component_of[&loc];
        let t = &self.tables[c.0 as usize];
        let i = t.index[&loc];
        (0..t.win.len() as ExitSet)
            .filter(|&e| t.win[e as usize][i])
            .filter(|&e| (0..t.exits.len()).all(|j| e & (1 << j) == 0 || !t.win[(e & !(1 << j)) as usize][i]))
            .collect()
    }

    /// Every `(location, allowance)` pair the table decides, in a fixed order.
    pub fn entries(&self) -> impl Iterator<Item = (Location, ExitSet, bool)> + '_ {
        self.tables.iter().flat_map(|t| {
            (0..t.win.len()).flat_map(move |e| {
                t.locations
                    .iter()
                    .enumerate()
                    .map(move |(i, &l)| (l, e as ExitSet, t.win[e][i]))
            })
        })
    }
}

#[derive(Debug, Clone)]
pub struct GameSolution {
    pub winner: Player,
    pub table: SummaryTable,
}

/// Computes `W` for the given finals.
pub fn summary_table(
    model: &RsmModel,
    partition: &GamePartition,
    finals: &BTreeSet<Location>,
) -> Result<SummaryTable, ModelError> {
    let s = model.structure();
    let mut tables = Vec::new();
    let mut component_of = HashMap::new();
    for c in s.component_ids() {
        let comp = s.component(c);
        if comp.exits.len() > MAX_EXITS {
            return Err(ModelError::Other(format!(
                "component {} has {} exits; at most {MAX_EXITS} are supported",
                comp.name,
                comp.exits.len()
            )));
        }
        let locations = s.locations_of(c);
        let index: HashMap<Location, usize> = locations.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        for &l in &locations {
            component_of.insert(l, c);
        }
        tables.push(ComponentTable {
            exits: comp.exits.clone(),
            win: vec![vec![false; locations.len()]; 1 << comp.exits.len()],
            locations,
            index,
        });
    }

    let order: Vec<ComponentId> = s.callee_first_order().unwrap_or_else(|| s.component_ids().collect());
    let mut passes = 0;
    loop {
        passes += 1;
        let mut changed = false;
        for &c in &order {
            let ci = c.0 as usize;
            for e in 0..tables[ci].win.len() {
                loop {
                    let mut inner = false;
                    for i in 0..tables[ci].locations.len() {
                        if tables[ci].win[e][i] {
                            continue;
                        }
                        let loc = tables[ci].locations[i];
                        if evaluate(s, partition, finals, &tables, ci, e as ExitSet, loc) {
                            tables[ci].win[e][i] = true;
                            inner = true;
                            changed = true;
                        }
                    }
                    if !inner {
                        break;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(SummaryTable {
        tables,
        component_of,
        passes,
    })
}

fn evaluate(
    s: &Structure,
    partition: &GamePartition,
    finals: &BTreeSet<Location>,
    tables: &[ComponentTable],
    ci: usize,
    allowance: ExitSet,
    loc: Location,
) -> bool {
    if finals.contains(&loc) {
        return true;
    }
    let t = &tables[ci];
    let here = |l: Location| t.win[allowance as usize][t.index[&l]];
    match s.kind(loc) {
        LocationKind::Exit => {
            let Location::Node(n) = loc else { unreachable!() };
            let j = t.exits.iter().position(|&x| x == n).expect("exit of own component");
            allowance & (1 << j) != 0
        }
        LocationKind::CallPort => {
            let Location::Call(b, en) = loc else { unreachable!() };
            let callee = &tables[s.box_decl(b).callee.0 as usize];
            let inner: ExitSet = callee
                .exits
                .iter()
                .enumerate()
                .filter(|&(_, &ex)| here(Location::Ret(b, ex)))
                .fold(0, |acc, (j, _)| acc | (1 << j));
            callee.win[inner as usize][callee.index[&Location::Node(en)]]
        }
        LocationKind::Internal => {
            let succ = s.outgoing(loc);
            if succ.is_empty() {
                return false;
            }
            let mut wins = succ.iter().map(|&tr| here(s.transition(tr).to));
            match partition.owner(loc) {
                Player::Achilles => wins.any(|w| w),
                Player::Tortoise => wins.all(|w| w),
            }
        }
    }
}

/// Reachability of `⟦finals⟧` from `(ε, start)`. Leaving the top-level
/// component is terminal, so the query allowance is empty.
pub fn solve_reachability_game(
    model: &RsmModel,
    partition: &GamePartition,
    start: NodeId,
    finals: &BTreeSet<Location>,
) -> Result<GameSolution, ModelError> {
    let table = summary_table(model, partition, finals)?;
    let winner = if table.wins(Location::Node(start), 0) {
        Player::Achilles
    } else {
        Player::Tortoise
    };
    Ok(GameSolution { winner, table })
}

/// Termination from `(ε, start)`: no finals, every exit of the start
/// component allowed at the top level.
pub fn solve_termination_game(
    model: &RsmModel,
    partition: &GamePartition,
    start: NodeId,
) -> Result<GameSolution, ModelError> {
    let table = summary_table(model, partition, &BTreeSet::new())?;
    let comp = model.structure().node(start).component;
    let all: ExitSet = ((1u64 << table.exits(comp).len()) - 1) as ExitSet;
    let winner = if table.wins(Location::Node(start), all) {
        Player::Achilles
    } else {
        Player::Tortoise
    };
    Ok(GameSolution { winner, table })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::two_level;
    use super::super::*;
    use super::*;

    fn fig2() -> RsmModel {
        RsmModel::from_doc(&two_level()).unwrap()
    }

    #[test]
    fn all_achilles_matches_reachability() {
        let m = fig2();
        let p = GamePartition::uniform(m.structure(), Player::Achilles);
        let u1 = m.node("u1").unwrap();
        for f in m.structure().all_locations() {
            let finals = BTreeSet::from([f]);
            let sol = solve_reachability_game(&m, &p, u1, &finals).unwrap();
            assert_eq!(
                sol.winner == Player::Achilles,
                reachable(&m, u1, &finals),
                "final {}",
                m.structure().location_name(f)
            );
        }
        assert_eq!(
            solve_termination_game(&m, &p, u1).unwrap().winner == Player::Achilles,
            terminates(&m, u1)
        );
    }

    #[test]
    fn all_tortoise_with_unreachable_finals() {
        let doc = RsmDoc {
            components: vec![RsmComponentDoc {
                name: "A".into(),
                nodes: vec!["a".into(), "b".into(), "c".into()],
                entries: vec!["a".into()],
                exits: vec![],
                boxes: vec![],
                transitions: vec![TransitionDoc {
                    from: "node:a".into(),
                    action: "t".into(),
                    to: "node:b".into(),
                }],
            }],
            start: None,
            partition: None,
            finals: vec![],
        };
        let flat = RsmModel::from_doc(&doc).unwrap();
        let pf = GamePartition::uniform(flat.structure(), Player::Tortoise);
        let c = BTreeSet::from([flat.location("c").unwrap()]);
        let sol = solve_reachability_game(&flat, &pf, flat.node("a").unwrap(), &c).unwrap();
        assert_eq!(sol.winner, Player::Tortoise);
    }

    #[test]
    fn allowances_are_upward_closed() {
        let m = fig2();
        let mut p = GamePartition::uniform(m.structure(), Player::Achilles);
        p.set(m.location("v2").unwrap(), Player::Tortoise);
        let table = summary_table(&m, &p, &BTreeSet::new()).unwrap();
        for (loc, e, w) in table.entries() {
            if !w {
                continue;
            }
            let c = m.structure().component_of(loc);
            let k = table.exits(c).len();
            for bigger in 0..(1u32 << k) {
                if bigger & e == e {
                    assert!(table.wins(loc, bigger));
                }
            }
        }
        for loc in m.structure().all_locations() {
            let c = m.structure().component_of(loc);
            let full = (1u32 << table.exits(c).len()) - 1;
            assert_eq!(table.wins(loc, full), !table.minimal_allowances(loc).is_empty());
        }
    }
}
