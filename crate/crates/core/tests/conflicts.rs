mod common;

use std::sync::Arc;

use common::oracles::{conflict_invariants, scene};
use follower::env::{resolve_conflicts, resolve_conflicts_ordered, AgentSpec, Environment, EpisodeConfig, TieBreak};
use follower::{Action, Grid, Pos};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PROPOSALS_PER_CASE: usize = 100;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn resolution_invariants(
        seed in any::<u64>(),
        w in 1usize..9,
        h in 1usize..9,
        density in 0.0f64..0.35,
        crowd in 0.1f64..1.0,
    ) {
        let (grid, positions) = scene(seed, w, h, density, crowd);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0FF);
        let mut order: Vec<usize> = (0..positions.len()).collect();
        for _ in 0..PROPOSALS_PER_CASE {
            let proposed: Vec<Action> = (0..positions.len()).map(|_| Action::ALL[rng.gen_range(0..5)]).collect();
            order.shuffle(&mut rng);
            if let Err(e) = conflict_invariants(&grid, &positions, &proposed, &order) {
                prop_assert!(false, "{}", e);
            }
        }
    }
}

#[test]
fn lowest_id_is_the_identity_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..200 {
        let (grid, positions) = scene(seed, 6, 6, 0.1, 0.7);
        let proposed: Vec<Action> = (0..positions.len()).map(|_| Action::ALL[rng.gen_range(0..5)]).collect();
        let order: Vec<usize> = (0..positions.len()).collect();
        assert_eq!(
            resolve_conflicts(&grid, &positions, &proposed),
            resolve_conflicts_ordered(&grid, &positions, &proposed, &order)
        );
    }
}

/// Relabelling agents (keeping each one's stream) leaves every trajectory unchanged
/// under seeded-random priorities.
#[test]
fn seeded_random_priority_is_label_invariant() {
    let grid = Arc::new(Grid::open(6, 6).unwrap());
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cells: Vec<Pos> = grid.free_cells().collect();
        cells.shuffle(&mut rng);
        let specs: Vec<AgentSpec> = (0..12)
            .map(|k| AgentSpec {
                start: cells[k],
                goal: cells[12 + k],
                stream: 100 + k as u64,
            })
            .collect();
        let mut permuted = specs.clone();
        permuted.shuffle(&mut rng);
        let config = EpisodeConfig::new(grid.clone(), specs.len(), 64, seed).with_tie_break(TieBreak::SeededRandom);
        let (mut a, _) = Environment::with_agents(config.clone(), &specs).unwrap();
        let (mut b, _) = Environment::with_agents(config, &permuted).unwrap();
        for t in 0..64u64 {
            let action_for = |stream: u64| {
                let mut r = ChaCha8Rng::seed_from_u64(seed ^ (t << 32) ^ stream);
                Action::ALL[r.gen_range(0..5)]
            };
            let pa: Vec<Action> = a.agents().iter().map(|s| action_for(s.stream)).collect();
            let pb: Vec<Action> = b.agents().iter().map(|s| action_for(s.stream)).collect();
            a.advance(&pa).unwrap();
            b.advance(&pb).unwrap();
            for s in a.agents() {
                let other = b.agents().iter().find(|x| x.stream == s.stream).unwrap();
                assert_eq!(
                    (s.position, s.goal, s.goals_reached),
                    (other.position, other.goal, other.goals_reached)
                );
            }
        }
    }
}
