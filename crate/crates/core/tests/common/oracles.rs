//! Independent reference implementations used to cross-check the library.

use std::collections::HashSet;

use follower::env::resolve_conflicts_ordered;
use follower::planner::CostView;
use follower::{Action, Grid, Pos};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_grid(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> Grid {
    let blocked = (0..w * h).map(|_| rng.gen_bool(density)).collect();
    Grid::new(w, h, blocked).unwrap()
}

/// Floyd-Warshall over unit edges.
pub fn all_pairs(grid: &Grid) -> Vec<Vec<f64>> {
    let n = grid.len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for i in 0..n {
        if !grid.is_free_index(i) {
            continue;
        }
        d[i][i] = 0.0;
        for j in grid.neighbors(i) {
            d[i][j] = 1.0;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if d[i][k].is_infinite() {
                continue;
            }
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Max average distance over each cell's own average distance to the cells it reaches.
pub fn static_oracle(grid: &Grid) -> Vec<f64> {
    let d = all_pairs(grid);
    let n = grid.len();
    let avg: Vec<Option<f64>> = (0..n)
        .map(|i| {
            if !grid.is_free_index(i) {
                return None;
            }
            let reach: Vec<f64> = (0..n)
                .filter(|&j| j != i && d[i][j].is_finite())
                .map(|j| d[i][j])
                .collect();
            (!reach.is_empty()).then(|| reach.iter().sum::<f64>() / reach.len() as f64)
        })
        .collect();
    let max = avg.iter().flatten().copied().fold(0.0, f64::max);
    (0..n)
        .map(|i| match (grid.is_free_index(i), avg[i]) {
            (false, _) => 0.0,
            (true, Some(a)) => max / a,
            (true, None) => 1.0,
        })
        .collect()
}

/// Dense O(V^2) Dijkstra on the planner's fixed-point cell-entry costs.
pub fn dijkstra(grid: &Grid, view: &CostView<'_>, start: usize, goal: usize) -> Option<u64> {
    let n = grid.len();
    let mut dist = vec![u64::MAX; n];
    let mut done = vec![false; n];
    dist[start] = 0;
    loop {
        let u = (0..n)
            .filter(|&i| !done[i] && dist[i] != u64::MAX)
            .min_by_key(|&i| dist[i])?;
        if u == goal {
            return Some(dist[u]);
        }
        done[u] = true;
        for v in grid.neighbors(u) {
            let nd = dist[u] + view.fixed_cost(v);
            if nd < dist[v] {
                dist[v] = nd;
            }
        }
    }
}

/// Direct weighted sum: A_t = sum_k (γλ)^(k-t) δ_k, truncated at episode ends.
pub fn gae_oracle(r: &[f64], v: &[f64], d: &[bool], bootstrap: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = r.len();
    let next_v = |k: usize| if k + 1 < n { v[k + 1] } else { bootstrap };
    let delta = |k: usize| r[k] + if d[k] { 0.0 } else { gamma * next_v(k) } - v[k];
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for k in t..n {
                let mut w = 1.0;
                for j in t..k {
                    w *= if d[j] { 0.0 } else { gamma * lambda };
                }
                sum += w * delta(k);
            }
            sum
        })
        .collect()
}

/// A random grid with a random subset of its free cells occupied.
pub fn scene(seed: u64, w: usize, h: usize, density: f64, crowd: f64) -> (Grid, Vec<Pos>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = random_grid(&mut rng, w, h, density);
    let mut free: Vec<Pos> = grid.free_cells().collect();
    free.shuffle(&mut rng);
    let n = ((free.len() as f64 * crowd).ceil() as usize).min(free.len());
    free.truncate(n);
    (grid, free)
}

/// Checks one joint proposal against the resolution invariants.
pub fn conflict_invariants(grid: &Grid, positions: &[Pos], proposed: &[Action], order: &[usize]) -> Result<(), String> {
    let executed = resolve_conflicts_ordered(grid, positions, proposed, order);
    let mut next = Vec::with_capacity(positions.len());
    for (i, (&p, &a)) in positions.iter().zip(&executed).enumerate() {
        let q = grid.apply(p, a).ok_or(format!("agent {i} leaves the grid"))?;
        if !grid.is_free(q) {
            return Err(format!("agent {i} ends on an obstacle"));
        }
        if a != proposed[i] && a != Action::Wait {
            return Err(format!("agent {i} executes an action it did not propose"));
        }
        next.push(q);
    }
    if next.iter().collect::<HashSet<_>>().len() != next.len() {
        return Err("vertex collision".into());
    }
    for i in 0..next.len() {
        for j in i + 1..next.len() {
            if next[i] == positions[j] && next[j] == positions[i] && next[i] != positions[i] {
                return Err(format!("agents {i} and {j} swap"));
            }
        }
    }
    if resolve_conflicts_ordered(grid, positions, &executed, order) != executed {
        return Err("resolution is not idempotent".into());
    }
    // An uncontested move into a cell that ends up vacant is never denied.
    for i in 0..next.len() {
        let Some(target) = grid.apply(positions[i], proposed[i]).filter(|q| grid.is_free(*q)) else {
            continue;
        };
        let contested = (0..next.len()).any(|j| j != i && grid.apply(positions[j], proposed[j]) == Some(target));
        if proposed[i] != Action::Wait && !contested && !next.contains(&target) {
            return Err(format!("agent {i} denied a free, uncontested move"));
        }
    }
    Ok(())
}
