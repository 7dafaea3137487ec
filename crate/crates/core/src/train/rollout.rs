//! Experience collection under the shared policy.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{TrainConfig, TrainError};
use crate::env::{splitmix64, AgentEvent, Environment, EpisodeConfig, Observation};
use crate::grid::{Grid, Pos};
use crate::maps::MapRef;
use crate::planner::{CostConfig, StaticCostField};
use crate::policy::{compute_reward, AgentView, PolicyInput, PolicyParams};
use crate::solver::{static_costs_for, Team};

/// Transitions from one collection round, stored time-major: entry `t * lanes + lane`,
/// where a lane is one agent of one env.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutBuffer {
    pub steps: usize,
    pub lanes: usize,
    pub input_len: usize,
    pub memory_size: usize,
    /// Sequence length for replay; memory is snapshotted every `chunk_len` steps.
    pub chunk_len: usize,
    pub inputs: Vec<f64>,
    pub actions: Vec<u8>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    /// The episode ended after this step.
    pub dones: Vec<bool>,
    /// Recurrent memory was zeroed before this step (first step of an episode).
    pub resets: Vec<bool>,
    /// Memory before each chunk start, entry `(chunk * lanes + lane) * memory_size`.
    pub memories: Vec<f64>,
    /// Value of the state after the last step, per lane (0 when that step ended the episode).
    pub bootstrap: Vec<f64>,
    pub goal_events: u64,
}

impl RolloutBuffer {
    fn new(steps: usize, lanes: usize, input_len: usize, memory_size: usize, chunk_len: usize) -> Self {
        let n = steps * lanes;
        Self {
            steps,
            lanes,
            input_len,
            memory_size,
            chunk_len,
            inputs: vec![0.0; n * input_len],
            actions: vec![0; n],
            log_probs: vec![0.0; n],
            values: vec![0.0; n],
            rewards: vec![0.0; n],
            dones: vec![false; n],
            resets: vec![false; n],
            memories: vec![0.0; (steps / chunk_len) * lanes * memory_size],
            bootstrap: vec![0.0; lanes],
            goal_events: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.steps * self.lanes
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, t: usize, lane: usize) -> usize {
        t * self.lanes + lane
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_len..(i + 1) * self.input_len]
    }

    /// Memory before step `chunk * chunk_len` of `lane`.
    pub fn chunk_memory(&self, chunk: usize, lane: usize) -> &[f64] {
        let at = (chunk * self.lanes + lane) * self.memory_size;
        &self.memories[at..at + self.memory_size]
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Number of transitions that reached their rewarded waypoint.
    pub fn waypoint_events(&self) -> usize {
        self.rewards.iter().filter(|&&r| r > 0.0).count()
    }

    pub fn mean_reward(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.total_reward() / self.len() as f64
        }
    }

    /// Rewards, values and done flags of one lane in time order.
    pub fn lane_series(&self, lane: usize) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
        let idx = (0..self.steps).map(|t| self.index(t, lane));
        let r = idx.clone().map(|i| self.rewards[i]).collect();
        let v = idx.clone().map(|i| self.values[i]).collect();
        let d = idx.map(|i| self.dones[i]).collect();
        (r, v, d)
    }
}

/// Per-step record of one lane, gathered by a worker before assembly.
struct LaneStep {
    input: Vec<f64>,
    action: u8,
    log_prob: f64,
    value: f64,
    reward: f64,
    done: bool,
    reset: bool,
    memory: Option<Vec<f64>>,
}

/// One training environment plus the solver state of its agents.
#[derive(Clone, Debug)]
pub struct EnvSlot {
    index: u64,
    episode: u64,
    num_agents: usize,
    env: Environment,
    obs: Vec<Observation>,
    events: Option<Vec<AgentEvent>>,
    team: Team,
    /// Inputs prepared for the next step when a round ends mid-episode.
    pending: Vec<Option<(PolicyInput, Pos)>>,
    fresh_episode: bool,
}

/// Builds episodes for the training envs.
#[derive(Clone, Debug)]
pub struct EpisodeFactory {
    base_map: MapRef,
    base_grid: Arc<Grid>,
    base_costs: Arc<StaticCostField>,
    vary_map: bool,
    cost: CostConfig,
    memory_size: usize,
    episode_length: usize,
    seed: u64,
}

impl EpisodeFactory {
    pub fn new(config: &TrainConfig, memory_size: usize) -> Result<Self, TrainError> {
        let cost = cost_config(config);
        let grid = config.map.load()?;
        let costs = Arc::new(static_costs_for(&grid, &cost));
        Ok(Self {
            base_map: config.map.clone(),
            base_grid: Arc::new(grid),
            base_costs: costs,
            vary_map: config.vary_map,
            cost,
            memory_size,
            episode_length: config.episode_length,
            seed: config.seed,
        })
    }

    pub fn base_grid(&self) -> &Arc<Grid> {
        &self.base_grid
    }

    pub fn base_costs(&self) -> &Arc<StaticCostField> {
        &self.base_costs
    }

    pub fn cost(&self) -> CostConfig {
        self.cost
    }

    fn episode_seed(&self, env: u64, episode: u64) -> u64 {
        splitmix64(self.seed ^ splitmix64(env.wrapping_add(0x7EA1)) ^ splitmix64(episode.wrapping_mul(0x9E37)))
    }

    fn map_for(&self, seed: u64) -> Result<(Arc<Grid>, Arc<StaticCostField>), TrainError> {
        let varied = match &self.base_map {
            MapRef::File(_) => None,
            _ if !self.vary_map => None,
            MapRef::Maze { width, height, .. } => Some(MapRef::Maze {
                width: *width,
                height: *height,
                seed,
            }),
            MapRef::Random {
                width, height, density, ..
            } => Some(MapRef::Random {
                width: *width,
                height: *height,
                density: *density,
                seed,
            }),
        };
        Ok(match varied {
            None => (self.base_grid.clone(), self.base_costs.clone()),
            Some(r) => {
                let g = r.load()?;
                let c = Arc::new(static_costs_for(&g, &self.cost));
                (Arc::new(g), c)
            }
        })
    }

    fn start(&self, index: u64, episode: u64, num_agents: usize) -> Result<EnvSlot, TrainError> {
        let seed = self.episode_seed(index, episode);
        let (grid, costs) = self.map_for(seed)?;
        let (env, obs) = Environment::reset(EpisodeConfig::new(grid, num_agents, self.episode_length, seed))?;
        let team = Team::new(&env, costs, self.cost, self.memory_size);
        Ok(EnvSlot {
            index,
            episode,
            num_agents,
            env,
            obs,
            events: None,
            team,
            pending: vec![None; num_agents],
            fresh_episode: true,
        })
    }

    /// Envs for training, with agent counts drawn from `agents_min..=agents_max`.
    pub fn spawn(&self, config: &TrainConfig) -> Result<Vec<EnvSlot>, TrainError> {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ 0xA6E7_5000));
        (0..config.num_envs() as u64)
            .map(|i| {
                let n = rng.gen_range(config.agents_min..=config.agents_max);
                self.start(i, 0, n)
            })
            .collect()
    }
}

pub fn cost_config(config: &TrainConfig) -> CostConfig {
    CostConfig {
        use_static: config.use_static_cost,
        use_dynamic: config.use_dynamic_cost,
        ..CostConfig::default()
    }
}

/// Per-lane steps, per-lane bootstrap values and the number of goal events.
type SlotRollout = (Vec<Vec<LaneStep>>, Vec<f64>, u64);

fn advance_slot(
    slot: &mut EnvSlot,
    factory: &EpisodeFactory,
    params: &PolicyParams,
    steps: usize,
    chunk_len: usize,
) -> Result<SlotRollout, TrainError> {
    let input_size = params.arch().input_size;
    let mut lanes: Vec<Vec<LaneStep>> = (0..slot.num_agents).map(|_| Vec::with_capacity(steps)).collect();
    let mut goals = 0u64;
    for t in 0..steps {
        let reset = std::mem::replace(&mut slot.fresh_episode, false);
        let mut actions = Vec::with_capacity(slot.num_agents);
        let mut waypoints = Vec::with_capacity(slot.num_agents);
        for i in 0..slot.num_agents {
            let ctx = &mut slot.team.contexts[i];
            let (input, waypoint) = match slot.pending[i].take() {
                Some(p) => p,
                None => {
                    let a = &slot.env.agents()[i];
                    let view = AgentView {
                        position: a.position,
                        goal: a.goal,
                        reached_goal: slot.events.as_ref().is_some_and(|e| e[i].reached_goal.is_some()),
                        obs: &slot.obs[i],
                    };
                    ctx.prepare(slot.env.grid(), &view, input_size)?
                }
            };
            let d = ctx.act_on(params, input, waypoint, false)?;
            lanes[i].push(LaneStep {
                input: d.input.data,
                action: d.action.index() as u8,
                log_prob: d.log_prob,
                value: d.output.value,
                reward: 0.0,
                done: false,
                reset,
                memory: t.is_multiple_of(chunk_len).then_some(d.memory_before),
            });
            actions.push(d.action);
            waypoints.push(d.waypoint);
        }
        let result = slot.env.step(&actions)?;
        for i in 0..slot.num_agents {
            let pos = slot.env.agents()[i].position;
            let last = lanes[i].last_mut().expect("pushed above");
            last.reward = compute_reward(pos, pos, waypoints[i]);
            goals += u64::from(result.events[i].reached_goal.is_some());
        }
        slot.obs = result.observations;
        slot.events = Some(result.events);
        if slot.env.is_finished() {
            for lane in &mut lanes {
                lane.last_mut().expect("pushed above").done = true;
            }
            *slot = factory.start(slot.index, slot.episode + 1, slot.num_agents)?;
        }
    }
    let mut bootstrap = vec![0.0; slot.num_agents];
    let ended = lanes.first().and_then(|l| l.last()).is_some_and(|s| s.done);
    if !ended && steps > 0 {
        for i in 0..slot.num_agents {
            let a = &slot.env.agents()[i];
            let view = AgentView {
                position: a.position,
                goal: a.goal,
                reached_goal: slot.events.as_ref().is_some_and(|e| e[i].reached_goal.is_some()),
                obs: &slot.obs[i],
            };
            let ctx = &mut slot.team.contexts[i];
            let (input, waypoint) = ctx.prepare(slot.env.grid(), &view, input_size)?;
            bootstrap[i] = params.forward(&input.data, ctx.memory())?.value;
            slot.pending[i] = Some((input, waypoint));
        }
    }
    Ok((lanes, bootstrap, goals))
}

/// Advance every env `steps` steps under `params` and assemble the buffer.
///
/// `workers` envs groups are advanced on separate threads; the result depends
/// only on the envs' seeds, never on scheduling.
pub fn collect_rollouts(
    slots: &mut [EnvSlot],
    factory: &EpisodeFactory,
    params: &PolicyParams,
    steps: usize,
    chunk_len: usize,
    workers: usize,
) -> Result<RolloutBuffer, TrainError> {
    assert!(
        chunk_len > 0 && steps.is_multiple_of(chunk_len),
        "steps must be a multiple of chunk_len"
    );
    let per_worker = slots.len().div_ceil(workers.max(1)).max(1);
    let results: Vec<Result<Vec<_>, TrainError>> = std::thread::scope(|s| {
        let handles: Vec<_> = slots
            .chunks_mut(per_worker)
            .map(|group| {
                s.spawn(move || {
                    group
                        .iter_mut()
                        .map(|slot| advance_slot(slot, factory, params, steps, chunk_len))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("rollout worker panicked"))
            .collect()
    });

    let mut per_lane: Vec<Vec<LaneStep>> = Vec::new();
    let mut bootstrap = Vec::new();
    let mut goals = 0;
    for group in results {
        for (lanes, boot, g) in group? {
            per_lane.extend(lanes);
            bootstrap.extend(boot);
            goals += g;
        }
    }
    let arch = params.arch();
    let mut buf = RolloutBuffer::new(steps, per_lane.len(), arch.input_len(), arch.memory_size(), chunk_len);
    buf.bootstrap = bootstrap;
    buf.goal_events = goals;
    for (lane, records) in per_lane.into_iter().enumerate() {
        for (t, rec) in records.into_iter().enumerate() {
            let i = buf.index(t, lane);
            buf.inputs[i * buf.input_len..(i + 1) * buf.input_len].copy_from_slice(&rec.input);
            buf.actions[i] = rec.action;
            buf.log_probs[i] = rec.log_prob;
            buf.values[i] = rec.value;
            buf.rewards[i] = rec.reward;
            buf.dones[i] = rec.done;
            buf.resets[i] = rec.reset;
            if let Some(m) = rec.memory {
                let at = ((t / chunk_len) * buf.lanes + lane) * buf.memory_size;
                buf.memories[at..at + buf.memory_size].copy_from_slice(&m);
            }
        }
    }
    Ok(buf)
}
