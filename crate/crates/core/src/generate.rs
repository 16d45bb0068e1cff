//! Seeded random RSM games, for oracle testing and benchmarks.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lts::Player;
use crate::rsm::{BoxDoc, RsmComponentDoc, RsmDoc, RsmGame, TransitionDoc};
use crate::structure::ModelError;

#[derive(Debug, Clone)]
pub struct GenParams {
    pub components: usize,
    pub max_nodes: usize,
    pub max_exits: usize,
    pub max_boxes: usize,
    pub actions: usize,
    /// Only call components with a higher index, so the call graph is acyclic.
    pub hierarchical: bool,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            components: 3,
            max_nodes: 5,
            max_exits: 2,
            max_boxes: 2,
            actions: 2,
            hierarchical: true,
        }
    }
}

/// A random well-formed game document. Every component has at least one
/// entry; the start is the first entry of component `C0`.
pub fn random_game_doc(seed: u64, params: &GenParams) -> RsmDoc {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(1..=params.components.max(1));

    // Shapes first so boxes can name callee ports.
    struct Shape {
        nodes: Vec<String>,
        entries: Vec<String>,
        exits: Vec<String>,
    }
    let shapes: Vec<Shape> = (0..k)
        .map(|c| {
            let n = rng.gen_range(2..=params.max_nodes.max(2));
            let nodes: Vec<String> = (0..n).map(|i| format!("c{c}n{i}")).collect();
            let max_ex = params.max_exits.min(n - 1);
            let n_ex = rng.gen_range(0..=max_ex);
            let exits = nodes[n - n_ex..].to_vec();
            let n_en = rng.gen_range(1..=(n - n_ex).min(2));
            let entries = nodes[..n_en].to_vec();
            Shape { nodes, entries, exits }
        })
        .collect();

    let actions: Vec<String> = (0..params.actions.max(1)).map(|i| ((b'a' + i as u8) as char).to_string()).collect();
    let mut components = Vec::new();
    let mut all_locations = Vec::new();
    for (c, shape) in shapes.iter().enumerate() {
        let callees: Vec<usize> = if params.hierarchical {
            ((c + 1)..k).collect()
        } else {
            (0..k).collect()
        };
        let mut boxes = Vec::new();
        if !callees.is_empty() {
            for bi in 0..rng.gen_range(0..=params.max_boxes) {
                let callee = *callees.choose(&mut rng).unwrap();
                boxes.push(BoxDoc {
                    name: format!("c{c}b{bi}"),
                    callee: format!("C{callee}"),
                });
            }
        }
        // Sources: non-exit nodes and return ports. Targets: nodes and call ports.
        let mut sources: Vec<String> = shape
            .nodes
            .iter()
            .filter(|n| !shape.exits.contains(n))
            .map(|n| format!("node:{n}"))
            .collect();
        let mut targets: Vec<String> = shape.nodes.iter().map(|n| format!("node:{n}")).collect();
        let mut calls = Vec::new();
        for b in &boxes {
            let callee = &shapes[b.callee[1..].parse::<usize>().unwrap()];
            for en in &callee.entries {
                calls.push(format!("call:{}:{en}", b.name));
            }
            for ex in &callee.exits {
                sources.push(format!("ret:{}:{ex}", b.name));
            }
        }
        targets.extend(calls.iter().cloned());
        all_locations.extend(targets.iter().cloned());
        all_locations.extend(sources.iter().filter(|s| s.starts_with("ret:")).cloned());

        let mut transitions = Vec::new();
        for from in &sources {
            for a in &actions {
                if rng.gen_bool(0.6) {
                    transitions.push(TransitionDoc {
                        from: from.clone(),
                        action: a.clone(),
                        to: targets.choose(&mut rng).unwrap().clone(),
                    });
                }
            }
        }
        components.push(RsmComponentDoc {
            name: format!("C{c}"),
            nodes: shape.nodes.clone(),
            entries: shape.entries.clone(),
            exits: shape.exits.clone(),
            boxes,
            transitions,
        });
    }
    all_locations.sort();
    all_locations.dedup();

    let partition: BTreeMap<String, Player> = all_locations
        .iter()
        .map(|l| {
            let p = if rng.gen_bool(0.5) { Player::Achilles } else { Player::Tortoise };
            (l.clone(), p)
        })
        .collect();
    let n_finals = rng.gen_range(1..=2);
    let finals: Vec<String> = all_locations.choose_multiple(&mut rng, n_finals).cloned().collect();
    RsmDoc {
        components,
        start: Some(shapes[0].entries[0].clone()),
        partition: Some(partition),
        finals,
    }
}

pub fn random_game(seed: u64, params: &GenParams) -> Result<RsmGame, ModelError> {
    RsmGame::from_doc(&random_game_doc(seed, params))
}
