//! Seeded map generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MapError;
use crate::grid::Grid;

/// Attempts made by [`generate_random`] before giving up on connectivity.
pub const RANDOM_MAP_RETRIES: usize = 1000;

/// Fraction of the remaining interior walls knocked out to create loops.
const LOOP_OPENING_RATE: f64 = 0.12;

/// Split `len` cells into corridors of width 1 or 2 separated by one-cell walls.
fn corridor_widths(len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    // Each corridor plus its trailing wall uses 2 or 3 cells; the last one has no wall.
    let mut remaining = len + 1;
    let mut widths = Vec::new();
    while remaining > 0 {
        let step = match remaining {
            2 | 3 => remaining,
            4 => 2,
            r if r - 3 == 1 => 2,
            _ => rng.gen_range(2..=3),
        };
        widths.push(step - 1);
        remaining -= step;
    }
    widths
}

/// Walls of the coarse maze: `right[r][c]` separates coarse cells (r,c) and (r,c+1);
/// `down[r][c]` separates (r,c) and (r+1,c).
struct CoarseWalls {
    right: Vec<Vec<bool>>,
    down: Vec<Vec<bool>>,
}

fn divide(walls: &mut CoarseWalls, r0: usize, c0: usize, rows: usize, cols: usize, rng: &mut ChaCha8Rng) {
    if rows < 2 && cols < 2 {
        return;
    }
    let horizontal = if rows < 2 {
        false
    } else if cols < 2 {
        true
    } else if rows != cols {
        rows > cols
    } else {
        rng.gen_bool(0.5)
    };
    if horizontal {
        let cut = rng.gen_range(0..rows - 1);
        let gap = rng.gen_range(0..cols);
        for c in 0..cols {
            walls.down[r0 + cut][c0 + c] = c != gap;
        }
        divide(walls, r0, c0, cut + 1, cols, rng);
        divide(walls, r0 + cut + 1, c0, rows - cut - 1, cols, rng);
    } else {
        let cut = rng.gen_range(0..cols - 1);
        let gap = rng.gen_range(0..rows);
        for r in 0..rows {
            walls.right[r0 + r][c0 + cut] = r != gap;
        }
        divide(walls, r0, c0, rows, cut + 1, rng);
        divide(walls, r0, c0 + cut + 1, rows, cols - cut - 1, rng);
    }
}

/// Recursive-division maze with corridors one or two cells wide and a share of
/// walls removed afterwards so that the maze contains loops.
pub fn generate_maze(seed: u64, width: usize, height: usize) -> Result<Grid, MapError> {
    if width < 3 || height < 3 {
        return Err(MapError::Dimensions { width, height });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let col_widths = corridor_widths(width, &mut rng);
    let row_heights = corridor_widths(height, &mut rng);
    let (nr, nc) = (row_heights.len(), col_widths.len());
    let mut walls = CoarseWalls {
        right: vec![vec![false; nc.saturating_sub(1)]; nr],
        down: vec![vec![false; nc]; nr.saturating_sub(1)],
    };
    divide(&mut walls, 0, 0, nr, nc, &mut rng);

    let mut standing: Vec<(bool, usize, usize)> = Vec::new();
    for (r, row) in walls.right.iter().enumerate() {
        standing.extend(row.iter().enumerate().filter(|(_, &w)| w).map(|(c, _)| (true, r, c)));
    }
    for (r, row) in walls.down.iter().enumerate() {
        standing.extend(row.iter().enumerate().filter(|(_, &w)| w).map(|(c, _)| (false, r, c)));
    }
    standing.shuffle(&mut rng);
    let openings = (standing.len() as f64 * LOOP_OPENING_RATE).round() as usize;
    for &(is_right, r, c) in &standing[..openings] {
        if is_right {
            walls.right[r][c] = false;
        } else {
            walls.down[r][c] = false;
        }
    }

    let offsets = |sizes: &[usize]| {
        let mut acc = 0;
        sizes
            .iter()
            .map(|&s| {
                let o = acc;
                acc += s + 1;
                o
            })
            .collect::<Vec<_>>()
    };
    let col_off = offsets(&col_widths);
    let row_off = offsets(&row_heights);
    let mut blocked = vec![true; width * height];
    let mut clear = |r: usize, c: usize| blocked[r * width + c] = false;
    for (i, (&ro, &rh)) in row_off.iter().zip(&row_heights).enumerate() {
        for (j, (&co, &cw)) in col_off.iter().zip(&col_widths).enumerate() {
            for r in ro..ro + rh {
                for c in co..co + cw {
                    clear(r, c);
                }
            }
            if j + 1 < nc && !walls.right[i][j] {
                for r in ro..ro + rh {
                    clear(r, co + cw);
                }
            }
            if i + 1 < nr && !walls.down[i][j] {
                for c in co..co + cw {
                    clear(ro + rh, c);
                }
            }
        }
    }
    Ok(Grid::new(width, height, blocked)?)
}

/// I.i.d. obstacles at `density`, redrawn until the free cells form one connected region.
pub fn generate_random(seed: u64, width: usize, height: usize, density: f64) -> Result<Grid, MapError> {
    if width == 0 || height == 0 {
        return Err(MapError::Dimensions { width, height });
    }
    if !(0.0..1.0).contains(&density) {
        return Err(MapError::Density(density));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_MAP_RETRIES {
        let blocked = (0..width * height).map(|_| rng.gen::<f64>() < density).collect();
        let grid = Grid::new(width, height, blocked)?;
        if grid.free_count() > 0 && grid.is_connected() {
            return Ok(grid);
        }
    }
    Err(MapError::Disconnected {
        density,
        attempts: RANDOM_MAP_RETRIES,
    })
}
