use std::collections::BTreeSet;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rtgames::gadget::{compile, Target};
use rtgames::generate::{random_game, GenParams};
use rtgames::harness::{faithful_achilles, playout, tortoise_skip_all, DEFAULT_STEP_BOUND};
use rtgames::lts::{attractor, FiniteArena};
use rtgames::rsm::solve_reachability_game;
use rtgames::tcm::TwoCounterMachine;
use rtgames::Player;

fn random_arena(n: usize, seed: u64) -> (FiniteArena, BTreeSet<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = FiniteArena::new();
    for i in 0..n {
        let owner = if rng.gen_bool(0.5) { Player::Achilles } else { Player::Tortoise };
        a.add_state(format!("s{i}"), owner);
    }
    for i in 0..n {
        for k in 0..3 {
            a.add_transition(i, &format!("a{k}"), rng.gen_range(0..n)).unwrap();
        }
    }
    let targets = (0..n).filter(|_| rng.gen_bool(0.05)).collect();
    (a, targets)
}

fn bench_attractor(c: &mut Criterion) {
    let mut g = c.benchmark_group("attractor");
    for n in [1_000, 10_000] {
        let (a, t) = random_arena(n, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| attractor(&a, &t).unwrap()));
    }
    g.finish();
}

fn bench_rsm(c: &mut Criterion) {
    let games: Vec<_> = (0..50).map(|s| random_game(s, &GenParams::default()).unwrap()).collect();
    c.bench_function("rsm_reachability_50_games", |b| {
        b.iter(|| {
            for g in &games {
                solve_reachability_game(&g.model, &g.partition, g.start, &g.finals).unwrap();
            }
        })
    });
}

fn bench_playout(c: &mut Criterion) {
    let m = TwoCounterMachine::parse(
        "L0: INC c1 GOTO L1\nL1: INC c1 GOTO L2\nL2: IFZ c1 THEN L5 ELSE L3\nL3: DEC c1 GOTO L4\nL4: INC c2 GOTO L2\nL5: HALT\n",
    )
    .unwrap();
    let mut g = c.benchmark_group("playout_transfer");
    for target in [Target::Rta3, Target::Rsa4] {
        let arena = compile(&m, target).unwrap();
        g.bench_function(target.to_string(), |b| {
            b.iter(|| {
                let mut ach = faithful_achilles(&m, &arena).unwrap();
                playout(&arena, &mut ach, &mut tortoise_skip_all(), DEFAULT_STEP_BOUND, &arena.time_bound).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench_attractor, bench_rsm, bench_playout);
criterion_main!(benches);
