//! Map files, generators and the textual map references used by the CLI and configs.

mod generate;
mod movingai;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

pub use generate::{generate_maze, generate_random, RANDOM_MAP_RETRIES};
pub use movingai::{load_map, save_map};

use crate::grid::{Grid, GridError};

#[derive(Debug, thiserror::Error)]
pub enum MapError {
    #[error("map line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("map dimensions {width}x{height} are too small")]
    Dimensions { width: usize, height: usize },
    #[error("obstacle density {0} is outside [0, 1)")]
    Density(f64),
    #[error("no connected random map at density {density} after {attempts} attempts")]
    Disconnected { density: f64, attempts: usize },
    #[error("bad map reference `{0}`")]
    Reference(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("reading map {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Where a map comes from: a MovingAI file or a seeded generator.
///
/// Text forms: `gen:maze:W:H:SEED`, `gen:random:W:H:DENSITY:SEED`, or a file path.
#[derive(Clone, Debug, PartialEq)]
pub enum MapRef {
    File(PathBuf),
    Maze {
        width: usize,
        height: usize,
        seed: u64,
    },
    Random {
        width: usize,
        height: usize,
        density: f64,
        seed: u64,
    },
}

impl MapRef {
    pub fn load(&self) -> Result<Grid, MapError> {
        match self {
            MapRef::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| MapError::Io {
                    path: path.clone(),
                    source,
                })?;
                load_map(&text)
            }
            MapRef::Maze { width, height, seed } => generate_maze(*seed, *width, *height),
            MapRef::Random {
                width,
                height,
                density,
                seed,
            } => generate_random(*seed, *width, *height, *density),
        }
    }
}

impl FromStr for MapRef {
    type Err = MapError;

    fn from_str(s: &str) -> Result<Self, MapError> {
        let Some(spec) = s.strip_prefix("gen:") else {
            return Ok(MapRef::File(PathBuf::from(s)));
        };
        let bad = || MapError::Reference(s.to_string());
        let parts: Vec<&str> = spec.split(':').collect();
        let num = |i: usize| parts[i].parse::<usize>().map_err(|_| bad());
        let seed = |i: usize| parts[i].parse::<u64>().map_err(|_| bad());
        match parts.as_slice() {
            ["maze", _, _, _] => Ok(MapRef::Maze {
                width: num(1)?,
                height: num(2)?,
                seed: seed(3)?,
            }),
            ["random", _, _, d, _] => Ok(MapRef::Random {
                width: num(1)?,
                height: num(2)?,
                density: d.parse().map_err(|_| bad())?,
                seed: seed(4)?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for MapRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapRef::File(p) => write!(f, "{}", p.display()),
            MapRef::Maze { width, height, seed } => write!(f, "gen:maze:{width}:{height}:{seed}"),
            MapRef::Random {
                width,
                height,
                density,
                seed,
            } => write!(f, "gen:random:{width}:{height}:{density}:{seed}"),
        }
    }
}
