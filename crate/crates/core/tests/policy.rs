use std::sync::Arc;

use follower::env::{AgentSpec, Environment, EpisodeConfig};
use follower::maps::generate_random;
use follower::planner::{CostView, Path, Planner, StaticCostField};
use follower::policy::{encode_observation, sample_action, Architecture, PolicyParams};
use follower::{Action, Grid, Pos};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mirror_grid(g: &Grid) -> Grid {
    let w = g.width();
    let blocked = (0..g.len())
        .map(|i| {
            let p = g.pos(i);
            !g.is_free(Pos::new(p.row, w - 1 - p.col))
        })
        .collect();
    Grid::new(w, g.height(), blocked).unwrap()
}

#[test]
fn encoding_commutes_with_horizontal_mirroring() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut planner = Planner::new();
    for case in 0..50 {
        let (w, h) = (rng.gen_range(4..14), rng.gen_range(4..14));
        let grid = generate_random(case, w, h, 0.2).unwrap();
        let mirrored = mirror_grid(&grid);
        let flip = |p: Pos| Pos::new(p.row, w - 1 - p.col);
        let mut free: Vec<Pos> = grid.free_cells().collect();
        if free.len() < 5 {
            continue;
        }
        free.shuffle(&mut rng);
        let specs: Vec<AgentSpec> = (0..4)
            .map(|k| AgentSpec {
                start: free[k],
                goal: free[4],
                stream: k as u64,
            })
            .collect();
        let flipped: Vec<AgentSpec> = specs
            .iter()
            .map(|s| AgentSpec {
                start: flip(s.start),
                goal: flip(s.goal),
                stream: s.stream,
            })
            .collect();
        let cfg = |g: &Grid| EpisodeConfig::new(Arc::new(g.clone()), 4, 8, case);
        let (_, obs) = Environment::with_agents(cfg(&grid), &specs).unwrap();
        let (_, obs_m) = Environment::with_agents(cfg(&mirrored), &flipped).unwrap();

        let statics = StaticCostField::uniform(&grid);
        let path = planner
            .plan(
                &grid,
                &CostView::new(&statics, None, 1.0),
                specs[0].start,
                specs[0].goal,
            )
            .unwrap();
        let path_m = Path {
            cells: path.cells.iter().map(|&p| flip(p)).collect(),
            fixed_cost: path.fixed_cost,
        };
        for size in [7, 11] {
            let a = encode_observation(&obs[0], &path, size);
            let b = encode_observation(&obs_m[0], &path_m, size);
            for ch in 0..2 {
                for r in 0..size {
                    for c in 0..size {
                        assert_eq!(
                            a.at(ch, r, c),
                            b.at(ch, r, size - 1 - c),
                            "case {case} ch {ch} ({r},{c})"
                        );
                    }
                }
            }
        }
        // The first step along the mirrored path is the mirrored action.
        if path.cells.len() > 1 {
            let step = Action::between(path.cells[0], path.cells[1]).unwrap();
            let step_m = Action::between(path_m.cells[0], path_m.cells[1]).unwrap();
            assert_eq!(step.mirrored_horizontally(), step_m);
        }
    }
}

#[test]
fn sampling_follows_the_softmax() {
    let logits = [0.0, 2f64.ln(), 0.0, 0.0, 0.0];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 200_000;
    let mut counts = [0usize; 5];
    for _ in 0..n {
        counts[sample_action(&logits, &mut rng, false).unwrap().index()] += 1;
    }
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    assert!((freq[1] - 2.0 / 6.0).abs() < 0.01, "{freq:?}");
    for i in [0, 2, 3, 4] {
        assert!((freq[i] - 1.0 / 6.0).abs() < 0.01, "{freq:?}");
    }
}

#[test]
fn sequence_evaluation_matches_step_by_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for arch in [Architecture::follower_lite(), Architecture::follower()] {
        let p = PolicyParams::init_orthogonal(arch, 1).unwrap();
        let inputs: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                (0..p.arch().input_len())
                    .map(|_| [0.0, 0.5, 1.0][rng.gen_range(0..3)])
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let (seq, _) = p.forward_sequence(&refs, &p.initial_memory(), &[false; 3]).unwrap();
        let mut memory = p.initial_memory();
        for (x, s) in inputs.iter().zip(&seq) {
            let out = p.forward(x, &memory).unwrap();
            assert_eq!(out.logits, s.logits);
            assert_eq!(out.value, s.value);
            assert!(out.logits.iter().all(|l| l.is_finite()) && out.value.is_finite());
            memory = out.memory;
        }
    }
}

#[test]
fn parameter_counts_are_pinned() {
    assert_eq!(Architecture::follower_lite().param_count(), 3_678);
    assert_eq!(Architecture::follower().param_count(), 5_150_406);
    let mut wrong = Architecture::follower_lite();
    wrong.mlp = vec![16];
    assert!(PolicyParams::zeros(wrong).is_err());
}
