//! Individual path planning over congestion-penalizing costs.

mod astar;
mod costs;

pub use astar::{needs_replan, next_waypoint, to_fixed, CostView, Path, Planner, ReplanRequired, COST_SCALE};
pub use costs::{transition_cost, DynamicCostField, StaticCostField};

/// Which cost components the planner uses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostConfig {
    pub use_static: bool,
    pub use_dynamic: bool,
    pub dynamic_weight: f64,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self {
            use_static: true,
            use_dynamic: true,
            dynamic_weight: 1.0,
        }
    }
}
