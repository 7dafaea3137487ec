use crate::grid::{Grid, Pos};

/// Egocentric `size x size` view centred on the observing agent.
///
/// Cells outside the map read as obstacles. The agent channel includes the
/// observer itself at the centre; nothing about other agents' goals or paths
/// is carried.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub size: usize,
    pub center: Pos,
    pub obstacles: Vec<bool>,
    pub agents: Vec<bool>,
}

impl Observation {
    pub(crate) fn capture(grid: &Grid, occupancy: &[u32], center: Pos, size: usize) -> Self {
        debug_assert!(size % 2 == 1);
        let radius = (size / 2) as isize;
        let mut obstacles = vec![true; size * size];
        let mut agents = vec![false; size * size];
        for wr in 0..size {
            let r = center.row as isize + wr as isize - radius;
            for wc in 0..size {
                let c = center.col as isize + wc as isize - radius;
                if !grid.in_bounds(r, c) {
                    continue;
                }
                let idx = r as usize * grid.width() + c as usize;
                let k = wr * size + wc;
                obstacles[k] = !grid.is_free_index(idx);
                agents[k] = occupancy[idx] != u32::MAX;
            }
        }
        Self {
            size,
            center,
            obstacles,
            agents,
        }
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    /// Window coordinates of a map cell, if it falls inside the window.
    pub fn window_coords(&self, p: Pos) -> Option<(usize, usize)> {
        let r = self.radius() as isize;
        let wr = p.row as isize - self.center.row as isize + r;
        let wc = p.col as isize - self.center.col as isize + r;
        let s = self.size as isize;
        (wr >= 0 && wc >= 0 && wr < s && wc < s).then_some((wr as usize, wc as usize))
    }

    /// Map cell under window coordinates, if it is on the map.
    pub fn map_cell(&self, grid: &Grid, wr: usize, wc: usize) -> Option<Pos> {
        let r = self.radius() as isize;
        let row = self.center.row as isize + wr as isize - r;
        let col = self.center.col as isize + wc as isize - r;
        grid.in_bounds(row, col).then(|| Pos::new(row as usize, col as usize))
    }

    pub fn agent_at(&self, wr: usize, wc: usize) -> bool {
        self.agents[wr * self.size + wc]
    }

    pub fn obstacle_at(&self, wr: usize, wc: usize) -> bool {
        self.obstacles[wr * self.size + wc]
    }

    /// Map cells holding other agents (the observer excluded).
    pub fn other_agents<'a>(&'a self, grid: &'a Grid) -> impl Iterator<Item = Pos> + 'a {
        let r = self.radius();
        (0..self.size * self.size).filter_map(move |k| {
            let (wr, wc) = (k / self.size, k % self.size);
            if !self.agents[k] || (wr == r && wc == r) {
                return None;
            }
            self.map_cell(grid, wr, wc)
        })
    }
}
