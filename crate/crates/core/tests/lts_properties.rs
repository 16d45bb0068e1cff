use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rtgames::lts::{attractor, play, stop_index, FiniteArena, Positional};
use rtgames::Player;

#[derive(Debug, Clone)]
struct ArenaSpec {
    owners: Vec<bool>,
    edges: Vec<(usize, u8, usize)>,
    finals: Vec<usize>,
}

fn arena_spec() -> impl Strategy<Value = ArenaSpec> {
    (1usize..=10).prop_flat_map(|n| {
        (
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec((0..n, 0u8..3, 0..n), 0..3 * n),
            proptest::collection::vec(0..n, 0..=2),
        )
            .prop_map(|(owners, edges, finals)| ArenaSpec { owners, edges, finals })
    })
}

fn build(spec: &ArenaSpec) -> FiniteArena {
    let mut a = FiniteArena::new();
    for (i, &ach) in spec.owners.iter().enumerate() {
        a.add_state(format!("s{i}"), if ach { Player::Achilles } else { Player::Tortoise });
    }
    for &(f, act, t) in &spec.edges {
        // Conflicting duplicates are rejected by the arena; skip them.
        let _ = a.add_transition(f, &format!("a{act}"), t);
    }
    for &f in &spec.finals {
        a.set_final(f).unwrap();
    }
    a
}

/// All positional strategies of `player`, as tables over its states with moves.
fn positional_strategies(a: &FiniteArena, player: Player) -> Vec<BTreeMap<usize, usize>> {
    let mut out = vec![BTreeMap::new()];
    for s in a.states().filter(|&s| a.owner(s) == player && !a.moves(s).is_empty()) {
        out = out
            .into_iter()
            .flat_map(|m| {
                a.moves(s).iter().map(move |&(act, _)| {
                    let mut m = m.clone();
                    m.insert(s, act);
                    m
                })
            })
            .collect();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn attractor_is_a_fixpoint(spec in arena_spec()) {
        let a = build(&spec);
        let attr = attractor(&a, a.finals()).unwrap();
        for s in a.states().filter(|s| !attr.wins(*s)) {
            let moves = a.moves(s);
            let step_wins = match a.owner(s) {
                Player::Achilles => moves.iter().any(|&(_, t)| attr.wins(t)),
                Player::Tortoise => !moves.is_empty() && moves.iter().all(|&(_, t)| attr.wins(t)),
            };
            prop_assert!(!step_wins, "state {} would join", s);
        }
    }

    #[test]
    fn winning_sets_partition_states(spec in arena_spec()) {
        let a = build(&spec);
        let attr = attractor(&a, a.finals()).unwrap();
        let lose = attr.losing(&a);
        prop_assert!(attr.winning.is_disjoint(&lose));
        prop_assert_eq!(attr.winning.len() + lose.len(), a.len());
    }

    #[test]
    fn attractor_strategy_wins_against_every_positional_tortoise(spec in arena_spec()) {
        let a = build(&spec);
        let finals: BTreeSet<usize> = a.finals().clone();
        let attr = attractor(&a, &finals).unwrap();
        let tortoises = positional_strategies(&a, Player::Tortoise);
        prop_assume!(tortoises.len() <= 4096);
        for start in a.states() {
            for tor in &tortoises {
                let mut ach = Positional(attr.strategy.clone());
                let mut t = Positional(tor.clone());
                let run = play(&a, start, &mut ach, &mut t, a.len() + 1).unwrap();
                let stop = stop_index(&run, &finals);
                if attr.wins(start) {
                    prop_assert!(stop.is_some(), "start {} lost to {:?}", start, tor);
                }
            }
            // Conversely some positional Tortoise strategy keeps every
            // positional Achilles strategy out of the finals.
            if !attr.wins(start) {
                let achilleses = positional_strategies(&a, Player::Achilles);
                prop_assume!(achilleses.len() <= 4096);
                let some_tortoise_holds = tortoises.iter().any(|tor| {
                    achilleses.iter().all(|ach| {
                        let run = play(&a, start, &mut Positional(ach.clone()), &mut Positional(tor.clone()), a.len() + 1).unwrap();
                        stop_index(&run, &finals).is_none()
                    })
                });
                prop_assert!(some_tortoise_holds, "start {}", start);
            }
        }
    }
}
