//! Per-agent decision pipeline: path decider, then learned follower.
//!
//! An [`AgentContext`] only ever sees its own position, goal and observation
//! window through [`AgentView`]; other agents' goals and paths are not
//! reachable from here.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::encode::{encode_observation, PolicyInput};
use super::net::{log_softmax, softmax, Logits, PolicyOutput, PolicyParams};
use super::PolicyError;
use crate::env::Observation;
use crate::grid::{Action, Grid, Pos};
use crate::planner::{
    needs_replan, next_waypoint, CostConfig, CostView, DynamicCostField, Path, Planner, StaticCostField,
};

/// Reward for stepping onto the rewarded waypoint.
pub const WAYPOINT_REWARD: f64 = 0.01;

pub fn compute_reward(_prev: Pos, new: Pos, waypoint: Pos) -> f64 {
    if new == waypoint {
        WAYPOINT_REWARD
    } else {
        0.0
    }
}

/// Draw from softmax(logits), or take the argmax (lowest index on ties) when `greedy`.
pub fn sample_action(logits: &Logits, rng: &mut impl Rng, greedy: bool) -> Result<Action, PolicyError> {
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(PolicyError::NonFiniteLogits(*logits));
    }
    let idx = if greedy {
        let mut best = 0;
        for (i, &l) in logits.iter().enumerate() {
            if l > logits[best] {
                best = i;
            }
        }
        best
    } else {
        let p = softmax(logits);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = p.len() - 1;
        for (i, &q) in p.iter().enumerate() {
            acc += q;
            if u < acc {
                pick = i;
                break;
            }
        }
        pick
    };
    Ok(Action::ALL[idx])
}

/// What an agent knows about itself at decision time.
#[derive(Clone, Copy, Debug)]
pub struct AgentView<'a> {
    pub position: Pos,
    pub goal: Pos,
    /// The agent stood on its previous goal after the last step.
    pub reached_goal: bool,
    pub obs: &'a Observation,
}

/// Everything produced by one learned decision, kept for training.
#[derive(Clone, Debug)]
pub struct Decision {
    pub action: Action,
    pub input: PolicyInput,
    pub output: PolicyOutput,
    pub log_prob: f64,
    pub memory_before: Vec<f64>,
    /// Waypoint that will be rewarded for this action.
    pub waypoint: Pos,
}

/// Solver-side per-agent state: cost fields, current path, recurrent memory, RNG.
#[derive(Clone, Debug)]
pub struct AgentContext {
    id: usize,
    static_costs: Arc<StaticCostField>,
    cost_config: CostConfig,
    dynamic: DynamicCostField,
    path: Option<Path>,
    waypoint: Option<Pos>,
    memory: Vec<f64>,
    rng: ChaCha8Rng,
    planner: Planner,
}

impl AgentContext {
    /// `static_costs` should already reflect `cost_config.use_static`
    /// (see [`StaticCostField::uniform`]).
    pub fn new(
        id: usize,
        grid: &Grid,
        static_costs: Arc<StaticCostField>,
        cost_config: CostConfig,
        memory_size: usize,
        seed: u64,
        stream: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::env::splitmix64(seed ^ 0x5EED_AC71_0000_0000));
        rng.set_stream(stream);
        Self {
            id,
            static_costs,
            cost_config,
            dynamic: DynamicCostField::new(grid),
            path: None,
            waypoint: None,
            memory: vec![0.0; memory_size],
            rng,
            planner: Planner::new(),
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_ref()
    }

    pub fn waypoint(&self) -> Option<Pos> {
        self.waypoint
    }

    pub fn memory(&self) -> &[f64] {
        &self.memory
    }

    pub fn dynamic_costs(&self) -> &DynamicCostField {
        &self.dynamic
    }

    pub fn static_costs(&self) -> &StaticCostField {
        &self.static_costs
    }

    pub fn reset_memory(&mut self) {
        self.memory.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Goal bookkeeping and dynamic-cost update shared by all solvers.
    fn observe(&mut self, grid: &Grid, view: &AgentView<'_>) {
        if view.reached_goal {
            self.dynamic.reset();
            self.path = None;
        }
        if self.cost_config.use_dynamic {
            self.dynamic.update(grid, view.obs);
        }
    }

    fn ensure_path(&mut self, grid: &Grid, view: &AgentView<'_>) -> Result<Pos, PolicyError> {
        let stale = match &self.path {
            None => true,
            Some(p) => p.goal() != view.goal || needs_replan(p, view.position),
        };
        if stale {
            let costs = CostView::new(
                &self.static_costs,
                self.cost_config.use_dynamic.then_some(&self.dynamic),
                self.cost_config.dynamic_weight,
            );
            let path = self
                .planner
                .plan(grid, &costs, view.position, view.goal)
                .ok_or(PolicyError::NoPath {
                    from: view.position,
                    to: view.goal,
                })?;
            self.waypoint = Some(next_waypoint(&path, view.position).expect("fresh path starts here"));
            self.path = Some(path);
        }
        Ok(self.waypoint.expect("waypoint set with path"))
    }

    /// Update costs, re-plan if needed and encode the network input.
    /// Returns the input together with the waypoint that the next action is rewarded for.
    pub fn prepare(
        &mut self,
        grid: &Grid,
        view: &AgentView<'_>,
        input_size: usize,
    ) -> Result<(PolicyInput, Pos), PolicyError> {
        self.observe(grid, view);
        let waypoint = self.ensure_path(grid, view)?;
        let input = encode_observation(view.obs, self.path.as_ref().expect("path planned"), input_size);
        Ok((input, waypoint))
    }

    /// Run the network on a prepared input, pick an action and advance the recurrent memory.
    pub fn act_on(
        &mut self,
        params: &PolicyParams,
        input: PolicyInput,
        waypoint: Pos,
        greedy: bool,
    ) -> Result<Decision, PolicyError> {
        let output = params.forward(&input.data, &self.memory)?;
        let action = sample_action(&output.logits, &mut self.rng, greedy)?;
        let log_prob = log_softmax(&output.logits)[action.index()];
        let memory_before = std::mem::replace(&mut self.memory, output.memory.clone());
        Ok(Decision {
            action,
            input,
            output,
            log_prob,
            memory_before,
            waypoint,
        })
    }

    /// [`prepare`](Self::prepare) followed by [`act_on`](Self::act_on).
    pub fn follower_act(
        &mut self,
        grid: &Grid,
        params: &PolicyParams,
        view: &AgentView<'_>,
        greedy: bool,
    ) -> Result<Decision, PolicyError> {
        let (input, waypoint) = self.prepare(grid, view, params.arch().input_size)?;
        self.act_on(params, input, waypoint, greedy)
    }

    /// Non-learned ablation: re-plan every step treating visible agents as
    /// obstacles and take the first move; random action when no path exists.
    pub fn baseline_no_rl(&mut self, grid: &Grid, view: &AgentView<'_>) -> Action {
        self.observe(grid, view);
        let blocked: Vec<usize> = view.obs.other_agents(grid).map(|p| grid.index(p)).collect();
        let costs = CostView::new(
            &self.static_costs,
            self.cost_config.use_dynamic.then_some(&self.dynamic),
            self.cost_config.dynamic_weight,
        );
        let planned = self
            .planner
            .plan_avoiding(grid, &costs, view.position, view.goal, |i| blocked.contains(&i));
        match planned {
            Some(path) => {
                let next = path.cells.get(1).copied().unwrap_or(view.position);
                self.waypoint = Some(next);
                self.path = Some(path);
                Action::between(view.position, next).expect("path steps are adjacent")
            }
            None => {
                self.path = None;
                Action::ALL[self.rng.gen_range(0..Action::COUNT)]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{AgentSpec, Environment, EpisodeConfig};
    use crate::policy::Architecture;

    #[test]
    fn reward_only_on_first_waypoint() {
        let wp = Pos::new(0, 1);
        assert_eq!(compute_reward(Pos::new(0, 0), wp, wp), 0.01);
        assert_eq!(compute_reward(Pos::new(0, 0), Pos::new(0, 0), wp), 0.0);
        assert_eq!(compute_reward(Pos::new(0, 1), Pos::new(0, 2), wp), 0.0);
    }

    #[test]
    fn greedy_and_degenerate_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_action(&[0.0; 5], &mut rng, true).unwrap(), Action::Wait);
        assert_eq!(
            sample_action(&[0.0, 3.0, 3.0, 0.0, 0.0], &mut rng, true).unwrap(),
            Action::Up
        );
        let mut hits = 0;
        for _ in 0..10_000 {
            if sample_action(&[10.0, -10.0, -10.0, -10.0, -10.0], &mut rng, false).unwrap() == Action::Wait {
                hits += 1;
            }
        }
        assert!(hits >= 9_990);
        assert!(matches!(
            sample_action(&[f64::NAN, 0.0, 0.0, 0.0, 0.0], &mut rng, false),
            Err(PolicyError::NonFiniteLogits(_))
        ));
    }

    fn single_agent(grid: Grid, start: Pos, goal: Pos) -> (Environment, Vec<Observation>, Arc<Grid>) {
        let grid = Arc::new(grid);
        let cfg = EpisodeConfig::new(grid.clone(), 1, 64, 3);
        let (env, obs) = Environment::with_agents(cfg, &[AgentSpec { start, goal, stream: 0 }]).unwrap();
        (env, obs, grid)
    }

    #[test]
    fn fresh_agent_plans_and_acts() {
        let (env, obs, grid) = single_agent(Grid::open(8, 8).unwrap(), Pos::new(0, 0), Pos::new(5, 5));
        let st = Arc::new(StaticCostField::compute(&grid));
        let params = PolicyParams::init_orthogonal(Architecture::follower_lite(), 0).unwrap();
        let mut ctx = AgentContext::new(0, &grid, st, CostConfig::default(), 0, 1, 0);
        let a = env.agents()[0].clone();
        let view = AgentView {
            position: a.position,
            goal: a.goal,
            reached_goal: false,
            obs: &obs[0],
        };
        let d = ctx.follower_act(&grid, &params, &view, false).unwrap();
        let path = ctx.path().unwrap();
        assert_eq!(path.start(), a.position);
        assert_eq!(path.goal(), a.goal);
        assert!(Action::ALL.contains(&d.action));
        assert_eq!(d.waypoint, path.cells[1]);
        assert_eq!(d.input.size, 7);
    }

    #[test]
    fn reaching_goal_resets_dynamic_costs_and_replans() {
        let (env, obs, grid) = single_agent(Grid::open(8, 8).unwrap(), Pos::new(0, 0), Pos::new(5, 5));
        let st = Arc::new(StaticCostField::uniform(&grid));
        let params = PolicyParams::init_orthogonal(Architecture::follower_lite(), 0).unwrap();
        let mut ctx = AgentContext::new(0, &grid, st, CostConfig::default(), 0, 1, 0);
        ctx.dynamic.counts_mut()[10] = 7;
        let a = env.agents()[0].clone();
        let view = AgentView {
            position: a.position,
            goal: a.goal,
            reached_goal: false,
            obs: &obs[0],
        };
        ctx.follower_act(&grid, &params, &view, true).unwrap();
        assert!(!ctx.dynamic_costs().is_zero());
        let new_goal = Pos::new(7, 0);
        let view = AgentView {
            position: a.position,
            goal: new_goal,
            reached_goal: true,
            obs: &obs[0],
        };
        ctx.follower_act(&grid, &params, &view, true).unwrap();
        assert!(ctx.dynamic_costs().is_zero());
        assert_eq!(ctx.path().unwrap().goal(), new_goal);
    }

    #[test]
    fn no_rl_follows_shortest_path_in_corridor() {
        let (env, obs, grid) = single_agent(Grid::open(6, 1).unwrap(), Pos::new(0, 0), Pos::new(0, 5));
        let st = Arc::new(StaticCostField::compute(&grid));
        let mut ctx = AgentContext::new(0, &grid, st, CostConfig::default(), 0, 1, 0);
        let a = env.agents()[0].clone();
        let view = AgentView {
            position: a.position,
            goal: a.goal,
            reached_goal: false,
            obs: &obs[0],
        };
        assert_eq!(ctx.baseline_no_rl(&grid, &view), Action::Right);
    }

    #[test]
    fn no_rl_boxed_in_picks_seeded_random_action() {
        let grid = Arc::new(Grid::open(5, 5).unwrap());
        let cfg = EpisodeConfig::new(grid.clone(), 5, 64, 3);
        let c = Pos::new(2, 2);
        let mut specs = vec![AgentSpec {
            start: c,
            goal: Pos::new(0, 0),
            stream: 0,
        }];
        for (i, p) in [Pos::new(1, 2), Pos::new(3, 2), Pos::new(2, 1), Pos::new(2, 3)]
            .into_iter()
            .enumerate()
        {
            specs.push(AgentSpec {
                start: p,
                goal: Pos::new(4, 4),
                stream: i as u64 + 1,
            });
        }
        let (_, obs) = Environment::with_agents(cfg, &specs).unwrap();
        let st = Arc::new(StaticCostField::compute(&grid));
        let pick = |seed| {
            let mut ctx = AgentContext::new(0, &grid, st.clone(), CostConfig::default(), 0, seed, 0);
            let view = AgentView {
                position: c,
                goal: Pos::new(0, 0),
                reached_goal: false,
                obs: &obs[0],
            };
            (0..20).map(|_| ctx.baseline_no_rl(&grid, &view)).collect::<Vec<_>>()
        };
        let a = pick(5);
        assert_eq!(a, pick(5));
        assert!(a.iter().any(|&x| x != a[0]), "random actions vary: {a:?}");
    }
}
