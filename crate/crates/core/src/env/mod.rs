//! Deterministic lifelong MAPF environment.
//!
//! Every agent receives a new goal the moment it stands on its current one.
//! All randomness comes from the episode seed: start placement uses one
//! stream, each agent's goal sequence its own stream, and seeded-random
//! tie-breaking hashes (seed, agent stream, timestep).

mod conflict;
mod log;
mod observation;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use conflict::{resolve_conflicts, resolve_conflicts_ordered, TieBreak};
pub use log::{throughput, throughput_from_count, EpisodeLog, GoalEvent, LogParseError};
pub use observation::Observation;

use crate::grid::{Action, Grid, Pos};

/// Observation window used throughout (11x11).
pub const DEFAULT_OBS_SIZE: usize = 11;

const NO_AGENT: u32 = u32::MAX;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EnvError {
    #[error("grid has no free cell")]
    NoFreeCell,
    #[error("{agents} agents requested but only {available} free cells can host an agent")]
    TooManyAgents { agents: usize, available: usize },
    #[error("episode must contain at least one agent")]
    NoAgents,
    #[error("episode length must be positive")]
    ZeroLength,
    #[error("observation size must be odd and positive, got {0}")]
    BadObservationSize(usize),
    #[error("episode already finished after {0} steps")]
    EpisodeFinished(usize),
    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("invalid agent placement: {0}")]
    BadPlacement(String),
}

#[derive(Clone, Debug)]
pub struct EpisodeConfig {
    pub grid: Arc<Grid>,
    pub num_agents: usize,
    pub episode_length: usize,
    pub obs_size: usize,
    pub seed: u64,
    pub tie_break: TieBreak,
}

impl EpisodeConfig {
    pub fn new(grid: Arc<Grid>, num_agents: usize, episode_length: usize, seed: u64) -> Self {
        Self {
            grid,
            num_agents,
            episode_length,
            obs_size: DEFAULT_OBS_SIZE,
            seed,
            tie_break: TieBreak::LowestId,
        }
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn with_obs_size(mut self, obs_size: usize) -> Self {
        self.obs_size = obs_size;
        self
    }

    fn validate(&self) -> Result<(), EnvError> {
        if self.num_agents == 0 {
            return Err(EnvError::NoAgents);
        }
        if self.episode_length == 0 {
            return Err(EnvError::ZeroLength);
        }
        if self.obs_size == 0 || self.obs_size.is_multiple_of(2) {
            return Err(EnvError::BadObservationSize(self.obs_size));
        }
        if self.grid.free_count() == 0 {
            return Err(EnvError::NoFreeCell);
        }
        Ok(())
    }
}

/// Simulator-side agent record. Planning and policy state live with the solver.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentState {
    pub id: usize,
    pub position: Pos,
    pub goal: Pos,
    pub goals_reached: u64,
    /// Key of the agent's private RNG stream and tie-break priority.
    pub stream: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveOutcome {
    Moved,
    /// The agent proposed WAIT.
    Waited,
    /// The proposed move was replaced by WAIT (obstacle, map edge or conflict).
    Denied,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AgentEvent {
    pub executed: Action,
    pub outcome: MoveOutcome,
    /// The goal cell reached this step, if any.
    pub reached_goal: Option<Pos>,
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub events: Vec<AgentEvent>,
    pub observations: Vec<Observation>,
}

/// Explicit initial placement, used by tests and relabeling checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AgentSpec {
    pub start: Pos,
    pub goal: Pos,
    pub stream: u64,
}

#[derive(Clone, Debug)]
pub struct Environment {
    config: EpisodeConfig,
    component: Vec<usize>,
    component_cells: Vec<Vec<usize>>,
    agents: Vec<AgentState>,
    goal_rngs: Vec<ChaCha8Rng>,
    occupancy: Vec<u32>,
    timestep: usize,
    log: EpisodeLog,
}

impl Environment {
    /// Sample starts and unique reachable goals from `config.seed`.
    pub fn reset(config: EpisodeConfig) -> Result<(Self, Vec<Observation>), EnvError> {
        config.validate()?;
        let grid = config.grid.clone();
        let (component, component_cells) = components(&grid);

        // Cells in single-cell components cannot host an agent: no goal would be reachable.
        let mut eligible: Vec<usize> = (0..grid.len())
            .filter(|&i| grid.is_free_index(i) && component_cells[component[i]].len() >= 2)
            .collect();
        if config.num_agents > eligible.len() {
            return Err(EnvError::TooManyAgents {
                agents: config.num_agents,
                available: eligible.len(),
            });
        }
        let mut placement_rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (chosen, _) = eligible.partial_shuffle(&mut placement_rng, config.num_agents);
        let starts: Vec<usize> = chosen.to_vec();

        let mut goal_rngs: Vec<ChaCha8Rng> = (0..config.num_agents as u64)
            .map(|s| goal_stream(config.seed, s))
            .collect();
        let mut taken = std::collections::HashSet::with_capacity(config.num_agents);
        let mut specs = Vec::with_capacity(config.num_agents);
        for (i, &start) in starts.iter().enumerate() {
            let cells = &component_cells[component[start]];
            let rng = &mut goal_rngs[i];
            let goal = sample_excluding(cells, rng, |c| c == start || taken.contains(&c))
                .or_else(|| sample_excluding(cells, rng, |c| c == start))
                .expect("component has at least two cells");
            taken.insert(goal);
            specs.push(AgentSpec {
                start: grid.pos(start),
                goal: grid.pos(goal),
                stream: i as u64,
            });
        }
        Self::build(config, component, component_cells, specs, goal_rngs)
    }

    /// Start from explicit placements; goal streams are keyed by each spec's `stream`.
    pub fn with_agents(config: EpisodeConfig, specs: &[AgentSpec]) -> Result<(Self, Vec<Observation>), EnvError> {
        let mut config = config;
        config.num_agents = specs.len();
        config.validate()?;
        let (component, component_cells) = components(&config.grid);
        let g = &config.grid;
        let mut seen = std::collections::HashSet::new();
        for s in specs {
            if !g.is_free(s.start) || !g.is_free(s.goal) {
                return Err(EnvError::BadPlacement(format!("{} or {} is not free", s.start, s.goal)));
            }
            if component[g.index(s.start)] != component[g.index(s.goal)] || s.start == s.goal {
                return Err(EnvError::BadPlacement(format!(
                    "goal {} not reachable from {}",
                    s.goal, s.start
                )));
            }
            if !seen.insert(s.start) {
                return Err(EnvError::BadPlacement(format!("duplicate start {}", s.start)));
            }
        }
        let goal_rngs = specs.iter().map(|s| goal_stream(config.seed, s.stream)).collect();
        Self::build(config, component, component_cells, specs.to_vec(), goal_rngs)
    }

    fn build(
        config: EpisodeConfig,
        component: Vec<usize>,
        component_cells: Vec<Vec<usize>>,
        specs: Vec<AgentSpec>,
        goal_rngs: Vec<ChaCha8Rng>,
    ) -> Result<(Self, Vec<Observation>), EnvError> {
        let grid = config.grid.clone();
        let mut occupancy = vec![NO_AGENT; grid.len()];
        let mut visits = vec![0u64; grid.len()];
        let agents: Vec<AgentState> = specs
            .iter()
            .enumerate()
            .map(|(id, s)| {
                let idx = grid.index(s.start);
                occupancy[idx] = id as u32;
                visits[idx] += 1;
                AgentState {
                    id,
                    position: s.start,
                    goal: s.goal,
                    goals_reached: 0,
                    stream: s.stream,
                }
            })
            .collect();
        let log = EpisodeLog {
            grid: (*grid).clone(),
            seed: config.seed,
            episode_length: config.episode_length,
            tie_break: config.tie_break,
            starts: specs.iter().map(|s| s.start).collect(),
            initial_goals: specs.iter().map(|s| s.goal).collect(),
            actions: Vec::new(),
            goal_events: Vec::new(),
            visits,
        };
        let env = Self {
            config,
            component,
            component_cells,
            agents,
            goal_rngs,
            occupancy,
            timestep: 0,
            log,
        };
        let obs = env.observe_all();
        Ok((env, obs))
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid {
        &self.config.grid
    }

    pub fn shared_grid(&self) -> &Arc<Grid> {
        &self.config.grid
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn positions(&self) -> Vec<Pos> {
        self.agents.iter().map(|a| a.position).collect()
    }

    pub fn timestep(&self) -> usize {
        self.timestep
    }

    pub fn is_finished(&self) -> bool {
        self.timestep >= self.config.episode_length
    }

    pub fn log(&self) -> &EpisodeLog {
        &self.log
    }

    pub fn into_log(self) -> EpisodeLog {
        self.log
    }

    pub fn total_goals(&self) -> usize {
        self.log.total_goals()
    }

    pub fn observe(&self, agent: usize) -> Observation {
        Observation::capture(
            &self.config.grid,
            &self.occupancy,
            self.agents[agent].position,
            self.config.obs_size,
        )
    }

    pub fn observe_all(&self) -> Vec<Observation> {
        (0..self.agents.len()).map(|i| self.observe(i)).collect()
    }

    /// Priority order for this timestep (first entry wins contested cells).
    fn priority_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.agents.len()).collect();
        if self.config.tie_break == TieBreak::SeededRandom {
            let t = self.timestep as u64;
            let seed = self.config.seed;
            order.sort_by_key(|&i| {
                let s = self.agents[i].stream;
                (
                    splitmix64(seed ^ splitmix64(s.wrapping_add(0x632B_E59B_D9B4_E019)) ^ splitmix64(t)),
                    s,
                )
            });
        }
        order
    }

    /// Advance one timestep with the proposed joint action.
    pub fn step(&mut self, proposed: &[Action]) -> Result<StepResult, EnvError> {
        let events = self.advance(proposed)?;
        Ok(StepResult {
            events,
            observations: self.observe_all(),
        })
    }

    /// As [`Environment::step`] without building observations.
    pub fn advance(&mut self, proposed: &[Action]) -> Result<Vec<AgentEvent>, EnvError> {
        if self.is_finished() {
            return Err(EnvError::EpisodeFinished(self.timestep));
        }
        let n = self.agents.len();
        if proposed.len() != n {
            return Err(EnvError::ActionCount {
                expected: n,
                got: proposed.len(),
            });
        }
        let positions = self.positions();
        let order = self.priority_order();
        let executed = resolve_conflicts_ordered(&self.config.grid, &positions, proposed, &order);

        let grid = self.config.grid.clone();
        for a in &self.agents {
            self.occupancy[grid.index(a.position)] = NO_AGENT;
        }
        self.timestep += 1;
        let t = self.timestep;
        let mut events = Vec::with_capacity(n);
        for i in 0..n {
            let outcome = match (proposed[i], executed[i]) {
                (Action::Wait, _) => MoveOutcome::Waited,
                (_, Action::Wait) => MoveOutcome::Denied,
                _ => MoveOutcome::Moved,
            };
            let agent = &mut self.agents[i];
            agent.position = grid
                .apply(agent.position, executed[i])
                .expect("resolved move stays on grid");
            let idx = grid.index(agent.position);
            self.occupancy[idx] = i as u32;
            self.log.visits[idx] += 1;

            let mut reached_goal = None;
            if agent.position == agent.goal {
                reached_goal = Some(agent.goal);
                agent.goals_reached += 1;
                self.log.goal_events.push(GoalEvent {
                    t,
                    agent: i,
                    cell: agent.goal,
                });
                let cells = &self.component_cells[self.component[idx]];
                let new_goal = sample_excluding(cells, &mut self.goal_rngs[i], |c| c == idx)
                    .expect("agent component has at least two cells");
                agent.goal = grid.pos(new_goal);
            }
            events.push(AgentEvent {
                executed: executed[i],
                outcome,
                reached_goal,
            });
        }
        self.log.actions.push(executed);
        Ok(events)
    }

    /// Rebuild an environment by replaying a log's executed actions.
    pub fn replay(config: EpisodeConfig, log: &EpisodeLog) -> Result<Self, EnvError> {
        let (mut env, _) = Self::reset(config)?;
        for joint in &log.actions {
            env.advance(joint)?;
        }
        Ok(env)
    }
}

fn components(grid: &Grid) -> (Vec<usize>, Vec<Vec<usize>>) {
    let labels = grid.components();
    let count = labels.iter().filter(|&&l| l != usize::MAX).max().map_or(0, |m| m + 1);
    let mut cells = vec![Vec::new(); count];
    for (i, &l) in labels.iter().enumerate() {
        if l != usize::MAX {
            cells[l].push(i);
        }
    }
    (labels, cells)
}

fn goal_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_add(1));
    rng
}

/// Uniform draw from `cells` minus the excluded ones.
///
/// Rejection sampling first; when the allowed set is sparse, falls back to an
/// explicit filtered draw, which has the same distribution.
fn sample_excluding(cells: &[usize], rng: &mut ChaCha8Rng, excluded: impl Fn(usize) -> bool) -> Option<usize> {
    for _ in 0..64 {
        let c = cells[rng.gen_range(0..cells.len())];
        if !excluded(c) {
            return Some(c);
        }
    }
    let allowed: Vec<usize> = cells.iter().copied().filter(|&c| !excluded(c)).collect();
    allowed.choose(rng).copied()
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
