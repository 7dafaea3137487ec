//! Lifelong multi-agent pathfinding with decentralized, partially observable agents.
//!
//! Each agent plans an individual path over congestion-penalizing transition
//! costs and a small learned policy follows that path while avoiding the other
//! agents it can see.

pub mod bench;
pub mod env;
pub mod grid;
pub mod maps;
pub mod planner;
pub mod policy;
pub mod solver;
pub mod train;

pub use grid::{Action, Grid, GridError, Pos};
