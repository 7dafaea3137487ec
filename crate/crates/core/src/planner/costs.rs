//! Congestion-penalizing transition costs.
//!
//! The static field scores each cell by how central it is: cells whose
//! average BFS distance to the rest of the map is small sit on many shortest
//! paths and get a proportionally larger cost. The dynamic field counts how
//! often the owning agent has seen other agents on each cell since it last
//! reached a goal.

use std::collections::VecDeque;

use crate::env::Observation;
use crate::grid::Grid;

/// Per-cell static costs. Obstacles carry `0.0` in both vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticCostField {
    cost_st: Vec<f64>,
    avg_cost: Vec<f64>,
    min_cost: f64,
}

impl StaticCostField {
    /// BFS from every free cell. Cells with no reachable peer get cost 1.
    pub fn compute(grid: &Grid) -> Self {
        let n = grid.len();
        let mut avg_cost = vec![0.0; n];
        let mut dist = vec![u32::MAX; n];
        let mut queue = VecDeque::new();
        for src in 0..n {
            if !grid.is_free_index(src) {
                continue;
            }
            dist.fill(u32::MAX);
            grid.bfs_into(src, &mut dist, &mut queue);
            let (sum, count) = dist
                .iter()
                .filter(|&&d| d != u32::MAX && d > 0)
                .fold((0u64, 0u64), |(s, c), &d| (s + d as u64, c + 1));
            if count > 0 {
                avg_cost[src] = sum as f64 / count as f64;
            }
        }
        let max_avg = avg_cost.iter().copied().fold(0.0_f64, f64::max);
        let cost_st: Vec<f64> = (0..n)
            .map(|i| {
                if !grid.is_free_index(i) {
                    0.0
                } else if avg_cost[i] > 0.0 {
                    max_avg / avg_cost[i]
                } else {
                    1.0
                }
            })
            .collect();
        Self::from_parts(grid, cost_st, avg_cost)
    }

    /// Static costs switched off: every free cell costs 1.
    pub fn uniform(grid: &Grid) -> Self {
        let cost_st = (0..grid.len())
            .map(|i| if grid.is_free_index(i) { 1.0 } else { 0.0 })
            .collect();
        Self::from_parts(grid, cost_st, vec![0.0; grid.len()])
    }

    fn from_parts(grid: &Grid, cost_st: Vec<f64>, avg_cost: Vec<f64>) -> Self {
        let min_cost = (0..grid.len())
            .filter(|&i| grid.is_free_index(i))
            .map(|i| cost_st[i])
            .fold(f64::INFINITY, f64::min);
        Self {
            cost_st,
            avg_cost,
            min_cost: if min_cost.is_finite() { min_cost } else { 1.0 },
        }
    }

    #[inline]
    pub fn cost(&self, idx: usize) -> f64 {
        self.cost_st[idx]
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost_st
    }

    pub fn avg_costs(&self) -> &[f64] {
        &self.avg_cost
    }

    /// Smallest static cost over free cells (1 on any connected map).
    pub fn min_cost(&self) -> f64 {
        self.min_cost
    }
}

/// Per-agent sighting counts over the whole map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynamicCostField {
    counts: Vec<u32>,
}

impl DynamicCostField {
    pub fn new(grid: &Grid) -> Self {
        Self {
            counts: vec![0; grid.len()],
        }
    }

    /// Add one for each cell where the observation shows another agent.
    pub fn update(&mut self, grid: &Grid, obs: &Observation) {
        for p in obs.other_agents(grid) {
            self.counts[grid.index(p)] += 1;
        }
    }

    pub fn reset(&mut self) {
        self.counts.fill(0);
    }

    #[inline]
    pub fn count(&self, idx: usize) -> u32 {
        self.counts[idx]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn counts_mut(&mut self) -> &mut [u32] {
        &mut self.counts
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }
}

/// Transition cost of entering a free cell: static cost plus weighted sightings.
pub fn transition_cost(
    static_costs: &StaticCostField,
    dynamic: &DynamicCostField,
    dynamic_weight: f64,
    idx: usize,
) -> f64 {
    let st = static_costs.cost(idx);
    assert!(st > 0.0, "transition cost requested for an obstacle cell {idx}");
    st + dynamic_weight * dynamic.count(idx) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{AgentSpec, Environment, EpisodeConfig};
    use crate::grid::Pos;
    use std::sync::Arc;

    #[test]
    fn strip_of_three() {
        let g = Grid::open(3, 1).unwrap();
        let f = StaticCostField::compute(&g);
        assert_eq!(f.avg_costs(), &[1.5, 1.0, 1.5]);
        assert_eq!(f.costs(), &[1.0, 1.5, 1.0]);
    }

    #[test]
    fn open_three_by_three() {
        let g = Grid::open(3, 3).unwrap();
        let f = StaticCostField::compute(&g);
        let c = |r, c| f.cost(g.index(Pos::new(r, c)));
        let a = |r, c| f.avg_costs()[g.index(Pos::new(r, c))];
        assert_eq!(a(1, 1), 1.5);
        assert_eq!(a(0, 0), 2.25);
        assert_eq!(a(0, 1), 1.875);
        assert_eq!(c(1, 1), 1.5);
        assert_eq!(c(0, 0), 1.0);
        assert_eq!(c(2, 2), 1.0);
        assert_eq!(c(0, 1), 1.2);
        assert_eq!(c(1, 0), 1.2);
    }

    #[test]
    fn single_free_cell_costs_one() {
        let g = Grid::new(2, 1, vec![false, true]).unwrap();
        let f = StaticCostField::compute(&g);
        assert_eq!(f.cost(0), 1.0);
        assert_eq!(f.cost(1), 0.0);
    }

    #[test]
    fn transition_cost_sums_terms() {
        let g = Grid::open(3, 3).unwrap();
        let st = StaticCostField::compute(&g);
        let mut dynf = DynamicCostField::new(&g);
        let edge = g.index(Pos::new(0, 1));
        assert_eq!(transition_cost(&st, &dynf, 1.0, edge), 1.2);
        dynf.counts_mut()[0] = 4;
        assert_eq!(transition_cost(&st, &dynf, 1.0, 0), 5.0);
        dynf.reset();
        for i in 0..g.len() {
            assert_eq!(transition_cost(&st, &dynf, 1.0, i), st.cost(i));
        }
    }

    #[test]
    #[should_panic(expected = "obstacle")]
    fn transition_cost_rejects_obstacles() {
        let g = Grid::new(2, 1, vec![false, true]).unwrap();
        let st = StaticCostField::compute(&g);
        transition_cost(&st, &DynamicCostField::new(&g), 1.0, 1);
    }

    #[test]
    fn sightings_accumulate_and_skip_self() {
        let grid = Arc::new(Grid::open(8, 8).unwrap());
        let cfg = EpisodeConfig::new(grid.clone(), 2, 16, 0);
        let specs = [
            AgentSpec {
                start: Pos::new(3, 3),
                goal: Pos::new(7, 7),
                stream: 0,
            },
            AgentSpec {
                start: Pos::new(3, 5),
                goal: Pos::new(0, 0),
                stream: 1,
            },
        ];
        let (env, obs) = Environment::with_agents(cfg, &specs).unwrap();
        let mut dynf = DynamicCostField::new(&grid);
        for _ in 0..3 {
            dynf.update(env.grid(), &obs[0]);
        }
        assert_eq!(dynf.count(grid.index(Pos::new(3, 5))), 3);
        assert_eq!(dynf.count(grid.index(Pos::new(3, 3))), 0);
        assert_eq!(dynf.counts().iter().sum::<u32>(), 3);

        let (lonely, lonely_obs) =
            Environment::with_agents(EpisodeConfig::new(grid.clone(), 1, 16, 0), &specs[..1]).unwrap();
        let mut quiet = DynamicCostField::new(&grid);
        quiet.update(lonely.grid(), &lonely_obs[0]);
        assert!(quiet.is_zero());
    }
}
