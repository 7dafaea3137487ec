//! Visit-count heatmaps.

use std::fmt::Write as _;
use std::path::Path;

use crate::grid::Grid;

/// `row,col,count` for every cell, row-major.
pub fn heatmap_csv(grid: &Grid, counts: &[u64]) -> String {
    assert_eq!(counts.len(), grid.len(), "visit counts must match the grid");
    let mut s = String::from("row,col,count\n");
    for (i, c) in counts.iter().enumerate() {
        let p = grid.pos(i);
        let _ = writeln!(s, "{},{},{}", p.row, p.col, c);
    }
    s
}

/// Binary PPM: obstacles black, free cells from white (0 visits) to pure red (maximum).
pub fn heatmap_ppm(grid: &Grid, counts: &[u64]) -> Vec<u8> {
    assert_eq!(counts.len(), grid.len(), "visit counts must match the grid");
    let max = (0..grid.len())
        .filter(|&i| grid.is_free_index(i))
        .map(|i| counts[i])
        .max()
        .unwrap_or(0);
    let mut out = format!("P6\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    for (i, &c) in counts.iter().enumerate() {
        if !grid.is_free_index(i) {
            out.extend_from_slice(&[0, 0, 0]);
            continue;
        }
        let heat = if max == 0 { 0.0 } else { c as f64 / max as f64 };
        let fade = (255.0 * (1.0 - heat)).round() as u8;
        out.extend_from_slice(&[255, fade, fade]);
    }
    out
}

/// Writes `<stem>.csv` and `<stem>.pnm` in `dir`.
pub fn emit_heatmap(grid: &Grid, counts: &[u64], dir: &Path, stem: &str) -> std::io::Result<()> {
    std::fs::write(dir.join(format!("{stem}.csv")), heatmap_csv(grid, counts))?;
    std::fs::write(dir.join(format!("{stem}.pnm")), heatmap_ppm(grid, counts))
}

/// Population standard deviation of the visit counts over free cells.
pub fn visit_dispersion(grid: &Grid, counts: &[u64]) -> f64 {
    let free: Vec<f64> = (0..grid.len())
        .filter(|&i| grid.is_free_index(i))
        .map(|i| counts[i] as f64)
        .collect();
    if free.is_empty() {
        return 0.0;
    }
    let n = free.len() as f64;
    let mean = free.iter().sum::<f64>() / n;
    (free.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n).sqrt()
}
