//! Running whole episodes with a decentralized solver.

use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::env::{AgentEvent, EnvError, Environment, EpisodeConfig, EpisodeLog, Observation};
use crate::grid::{Action, Grid};
use crate::planner::{CostConfig, StaticCostField};
use crate::policy::{AgentContext, AgentView, PolicyError, PolicyParams};

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// How each agent picks its action.
#[derive(Clone, Debug)]
pub enum Solver {
    /// Path decider plus the learned follower network.
    Learned { params: Arc<PolicyParams>, greedy: bool },
    /// Path decider only, visible agents treated as obstacles.
    NoRl,
}

impl Solver {
    pub fn memory_size(&self) -> usize {
        match self {
            Solver::Learned { params, .. } => params.arch().memory_size(),
            Solver::NoRl => 0,
        }
    }
}

/// Static costs as selected by `cost.use_static`.
pub fn static_costs_for(grid: &Grid, cost: &CostConfig) -> StaticCostField {
    if cost.use_static {
        StaticCostField::compute(grid)
    } else {
        StaticCostField::uniform(grid)
    }
}

/// One context per agent of an environment.
#[derive(Clone, Debug)]
pub struct Team {
    pub contexts: Vec<AgentContext>,
}

impl Team {
    pub fn new(env: &Environment, static_costs: Arc<StaticCostField>, cost: CostConfig, memory_size: usize) -> Self {
        let seed = env.config().seed;
        let contexts = env
            .agents()
            .iter()
            .map(|a| {
                AgentContext::new(
                    a.id,
                    env.grid(),
                    static_costs.clone(),
                    cost,
                    memory_size,
                    seed,
                    a.stream,
                )
            })
            .collect();
        Self { contexts }
    }

    /// Decide every agent's action in id order; also returns the time spent per agent decision.
    pub fn decide(
        &mut self,
        env: &Environment,
        obs: &[Observation],
        last_events: Option<&[AgentEvent]>,
        solver: &Solver,
    ) -> Result<(Vec<Action>, Duration), PolicyError> {
        let grid = env.grid();
        let mut actions = Vec::with_capacity(self.contexts.len());
        let mut spent = Duration::ZERO;
        for (i, ctx) in self.contexts.iter_mut().enumerate() {
            let a = &env.agents()[i];
            let view = AgentView {
                position: a.position,
                goal: a.goal,
                reached_goal: last_events.is_some_and(|e| e[i].reached_goal.is_some()),
                obs: &obs[i],
            };
            let started = Instant::now();
            let action = match solver {
                Solver::Learned { params, greedy } => ctx.follower_act(grid, params, &view, *greedy)?.action,
                Solver::NoRl => ctx.baseline_no_rl(grid, &view),
            };
            spent += started.elapsed();
            actions.push(action);
        }
        Ok((actions, spent))
    }
}

#[derive(Clone, Debug)]
pub struct EpisodeOutcome {
    pub log: EpisodeLog,
    /// Total wall-clock time spent inside agent decisions.
    pub decision_time: Duration,
    pub decisions: u64,
}

impl EpisodeOutcome {
    pub fn throughput(&self) -> f64 {
        crate::env::throughput(&self.log, self.log.episode_length)
    }

    /// Mean milliseconds per agent decision.
    pub fn mean_decision_ms(&self) -> f64 {
        if self.decisions == 0 {
            return 0.0;
        }
        self.decision_time.as_secs_f64() * 1e3 / self.decisions as f64
    }
}

/// Play one full episode.
pub fn run_episode(
    config: EpisodeConfig,
    static_costs: Arc<StaticCostField>,
    cost: CostConfig,
    solver: &Solver,
) -> Result<EpisodeOutcome, SolverError> {
    let (mut env, mut obs) = Environment::reset(config)?;
    let mut team = Team::new(&env, static_costs, cost, solver.memory_size());
    let mut events: Option<Vec<AgentEvent>> = None;
    let mut decision_time = Duration::ZERO;
    let mut decisions = 0u64;
    while !env.is_finished() {
        let (actions, spent) = team.decide(&env, &obs, events.as_deref(), solver)?;
        decision_time += spent;
        decisions += actions.len() as u64;
        let step = env.step(&actions)?;
        obs = step.observations;
        events = Some(step.events);
    }
    Ok(EpisodeOutcome {
        log: env.into_log(),
        decision_time,
        decisions,
    })
}
