//! A* over per-cell transition costs.
//!
//! Costs are charged on entering a cell; the start cell is free. Search runs
//! on fixed-point weights (2^-20 resolution) so that path costs are exact
//! integers and tie-breaking is reproducible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::costs::{DynamicCostField, StaticCostField};
use crate::grid::{Grid, Pos};

pub const COST_SCALE: f64 = (1u64 << 20) as f64;

#[inline]
pub fn to_fixed(cost: f64) -> u64 {
    (cost * COST_SCALE).round() as u64
}

/// The cost model seen by the planner.
#[derive(Clone, Copy, Debug)]
pub struct CostView<'a> {
    pub static_costs: &'a StaticCostField,
    pub dynamic: Option<&'a DynamicCostField>,
    pub dynamic_weight: f64,
}

impl<'a> CostView<'a> {
    pub fn new(static_costs: &'a StaticCostField, dynamic: Option<&'a DynamicCostField>, dynamic_weight: f64) -> Self {
        Self {
            static_costs,
            dynamic,
            dynamic_weight,
        }
    }

    #[inline]
    pub fn cost(&self, idx: usize) -> f64 {
        let st = self.static_costs.cost(idx);
        match self.dynamic {
            Some(d) => st + self.dynamic_weight * d.count(idx) as f64,
            None => st,
        }
    }

    /// Fixed-point cost of entering `idx`, as used by the search.
    #[inline]
    pub fn fixed_cost(&self, idx: usize) -> u64 {
        to_fixed(self.cost(idx))
    }

    /// Lower bound on any entered cell's fixed-point cost.
    fn min_fixed(&self) -> u64 {
        to_fixed(self.static_costs.min_cost())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    /// Planning start through goal, inclusive.
    pub cells: Vec<Pos>,
    /// Sum of fixed-point entry costs.
    pub fixed_cost: u64,
}

impl Path {
    pub fn start(&self) -> Pos {
        self.cells[0]
    }

    pub fn goal(&self) -> Pos {
        *self.cells.last().expect("paths are non-empty")
    }

    pub fn cost(&self) -> f64 {
        self.fixed_cost as f64 / COST_SCALE
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, p: Pos) -> bool {
        self.cells.contains(&p)
    }
}

/// The agent is no longer at the head of its path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("position {position} is not the head of the path ({head}); re-plan required")]
pub struct ReplanRequired {
    pub position: Pos,
    pub head: Pos,
}

/// First cell after the current position, or the goal for a single-cell path.
pub fn next_waypoint(path: &Path, position: Pos) -> Result<Pos, ReplanRequired> {
    let head = path.start();
    if position != head {
        return Err(ReplanRequired { position, head });
    }
    Ok(path.cells.get(1).copied().unwrap_or(head))
}

/// The waypoint was reached, or the agent left the head of its path.
pub fn needs_replan(path: &Path, position: Pos) -> bool {
    let waypoint = path.cells.get(1).copied().unwrap_or(path.start());
    position == waypoint || position != path.start()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Node {
    f: u64,
    g: u64,
    cell: u32,
}

impl Ord for Node {
    // BinaryHeap is a max-heap: smallest f first, then larger g, then row-major order.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .cmp(&self.f)
            .then(self.g.cmp(&other.g))
            .then(other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reusable A* search buffers for one grid size.
#[derive(Clone, Debug, Default)]
pub struct Planner {
    g: Vec<u64>,
    parent: Vec<u32>,
    seen: Vec<u32>,
    closed: Vec<u32>,
    generation: u32,
    open: BinaryHeap<Node>,
}

impl Planner {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, n: usize) {
        if self.g.len() != n {
            self.g = vec![0; n];
            self.parent = vec![0; n];
            self.seen = vec![0; n];
            self.closed = vec![0; n];
            self.generation = 0;
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.seen.fill(0);
            self.closed.fill(0);
            self.generation = 1;
        }
        self.open.clear();
    }

    /// Cheapest path from `start` to `goal`, or `None` when unreachable.
    pub fn plan(&mut self, grid: &Grid, costs: &CostView<'_>, start: Pos, goal: Pos) -> Option<Path> {
        self.plan_avoiding(grid, costs, start, goal, |_| false)
    }

    /// As [`Planner::plan`], treating cells for which `blocked` returns true as obstacles.
    /// The start cell is never considered blocked.
    pub fn plan_avoiding(
        &mut self,
        grid: &Grid,
        costs: &CostView<'_>,
        start: Pos,
        goal: Pos,
        blocked: impl Fn(usize) -> bool,
    ) -> Option<Path> {
        if !grid.is_free(start) || !grid.is_free(goal) {
            return None;
        }
        let s = grid.index(start);
        let t = grid.index(goal);
        if s != t && blocked(t) {
            return None;
        }
        self.prepare(grid.len());
        let gen = self.generation;
        let min_w = costs.min_fixed();
        let width = grid.width();
        let h = |idx: usize| -> u64 {
            let (r, c) = (idx / width, idx % width);
            (r.abs_diff(goal.row) + c.abs_diff(goal.col)) as u64 * min_w
        };

        self.g[s] = 0;
        self.seen[s] = gen;
        self.parent[s] = s as u32;
        self.open.push(Node {
            f: h(s),
            g: 0,
            cell: s as u32,
        });

        while let Some(Node { g, cell, .. }) = self.open.pop() {
            let cur = cell as usize;
            if self.closed[cur] == gen || g != self.g[cur] {
                continue;
            }
            if cur == t {
                return Some(self.extract(grid, s, t));
            }
            self.closed[cur] = gen;
            for nb in grid.neighbors(cur) {
                if self.closed[nb] == gen || blocked(nb) {
                    continue;
                }
                let ng = g + costs.fixed_cost(nb);
                if self.seen[nb] != gen || ng < self.g[nb] {
                    self.seen[nb] = gen;
                    self.g[nb] = ng;
                    self.parent[nb] = cur as u32;
                    self.open.push(Node {
                        f: ng + h(nb),
                        g: ng,
                        cell: nb as u32,
                    });
                }
            }
        }
        None
    }

    fn extract(&self, grid: &Grid, s: usize, t: usize) -> Path {
        let mut cells = vec![grid.pos(t)];
        let mut cur = t;
        while cur != s {
            cur = self.parent[cur] as usize;
            cells.push(grid.pos(cur));
        }
        cells.reverse();
        Path {
            cells,
            fixed_cost: self.g[t],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_view(g: &Grid) -> StaticCostField {
        StaticCostField::uniform(g)
    }

    #[test]
    fn uniform_costs_give_manhattan_length() {
        let g = Grid::open(7, 5).unwrap();
        let st = uniform_view(&g);
        let view = CostView::new(&st, None, 1.0);
        let mut planner = Planner::new();
        let p = planner.plan(&g, &view, Pos::new(0, 0), Pos::new(4, 6)).unwrap();
        assert_eq!(p.len(), 11);
        assert_eq!(p.cost(), 10.0);
        assert!(p.cells.windows(2).all(|w| w[0].is_adjacent(w[1])));
    }

    #[test]
    fn start_equals_goal() {
        let g = Grid::open(3, 3).unwrap();
        let st = uniform_view(&g);
        let p = Planner::new()
            .plan(&g, &CostView::new(&st, None, 1.0), Pos::new(1, 1), Pos::new(1, 1))
            .unwrap();
        assert_eq!(p.cells, vec![Pos::new(1, 1)]);
        assert_eq!(p.fixed_cost, 0);
    }

    #[test]
    fn unreachable_goal_has_no_path() {
        let g = Grid::new(3, 1, vec![false, true, false]).unwrap();
        let st = StaticCostField::compute(&g);
        let view = CostView::new(&st, None, 1.0);
        assert!(Planner::new().plan(&g, &view, Pos::new(0, 0), Pos::new(0, 2)).is_none());
    }

    #[test]
    fn detours_around_penalized_column() {
        // 5x5, middle column penalised except at the top row.
        let g = Grid::open(5, 5).unwrap();
        let st = uniform_view(&g);
        let mut d = DynamicCostField::new(&g);
        for r in 1..5 {
            d.counts_mut()[g.index(Pos::new(r, 2))] = 10;
        }
        let view = CostView::new(&st, Some(&d), 1.0);
        let p = Planner::new().plan(&g, &view, Pos::new(4, 0), Pos::new(4, 4)).unwrap();
        assert!(p.contains(Pos::new(0, 2)));
        assert_eq!(p.cost(), 12.0);
    }

    #[test]
    fn waypoint_and_replan_rules() {
        let cells = vec![Pos::new(0, 0), Pos::new(0, 1), Pos::new(0, 2), Pos::new(0, 3)];
        let path = Path { cells, fixed_cost: 0 };
        assert_eq!(next_waypoint(&path, Pos::new(0, 0)), Ok(Pos::new(0, 1)));
        assert!(next_waypoint(&path, Pos::new(1, 0)).is_err());
        assert!(!needs_replan(&path, Pos::new(0, 0)));
        assert!(needs_replan(&path, Pos::new(0, 1)));
        assert!(needs_replan(&path, Pos::new(1, 0)));

        let single = Path {
            cells: vec![Pos::new(2, 2)],
            fixed_cost: 0,
        };
        assert_eq!(next_waypoint(&single, Pos::new(2, 2)), Ok(Pos::new(2, 2)));
    }

    #[test]
    fn blocked_cells_are_avoided() {
        let g = Grid::open(3, 3).unwrap();
        let st = uniform_view(&g);
        let view = CostView::new(&st, None, 1.0);
        let wall = g.index(Pos::new(1, 1));
        let p = Planner::new()
            .plan_avoiding(&g, &view, Pos::new(0, 1), Pos::new(2, 1), |i| i == wall)
            .unwrap();
        assert_eq!(p.len(), 5);
        assert!(!p.contains(Pos::new(1, 1)));
    }
}
