use crate::env::Observation;
use crate::planner::Path;

pub const OBSTACLE: f64 = 1.0;
pub const PATH: f64 = 0.5;
pub const AGENT: f64 = 1.0;

/// Two-channel network input: obstacles with the planned path, and agent occupancy.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyInput {
    pub size: usize,
    /// `[2][size][size]`, channel 0 then channel 1.
    pub data: Vec<f64>,
}

impl PolicyInput {
    pub fn channel(&self, ch: usize) -> &[f64] {
        let n = self.size * self.size;
        &self.data[ch * n..(ch + 1) * n]
    }

    pub fn at(&self, ch: usize, r: usize, c: usize) -> f64 {
        self.data[(ch * self.size + r) * self.size + c]
    }
}

/// Encode the observation window and the in-window part of `path`, then
/// centre-crop to `size` (which must not exceed the observation size).
pub fn encode_observation(obs: &Observation, path: &Path, size: usize) -> PolicyInput {
    let m = obs.size;
    assert!(
        size <= m && size % 2 == 1,
        "network input {size} must be odd and fit the {m}x{m} window"
    );
    let mut full = vec![0.0; 2 * m * m];
    for k in 0..m * m {
        if obs.obstacles[k] {
            full[k] = OBSTACLE;
        }
        if obs.agents[k] {
            full[m * m + k] = AGENT;
        }
    }
    for &cell in &path.cells {
        if let Some((wr, wc)) = obs.window_coords(cell) {
            let k = wr * m + wc;
            assert!(!obs.obstacles[k], "path crosses obstacle at {cell}");
            full[k] = PATH;
        }
    }
    let off = (m - size) / 2;
    let mut data = Vec::with_capacity(2 * size * size);
    for ch in 0..2 {
        for r in 0..size {
            let start = ch * m * m + (r + off) * m + off;
            data.extend_from_slice(&full[start..start + size]);
        }
    }
    PolicyInput { size, data }
}
