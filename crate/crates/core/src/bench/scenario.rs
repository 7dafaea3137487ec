//! Seeded benchmark scenarios and their metrics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use super::heatmap::{emit_heatmap, visit_dispersion};
use super::BenchError;
use crate::env::{EpisodeConfig, EpisodeLog, TieBreak};
use crate::grid::Grid;
use crate::maps::MapRef;
use crate::planner::CostConfig;
use crate::policy::{load_checkpoint, Architecture, PolicyParams};
use crate::solver::{run_episode, static_costs_for, Solver};

pub const DEFAULT_EPISODE_LENGTH: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Follower,
    FollowerLite,
    NoRl,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Follower => "follower",
            SolverKind::FollowerLite => "followerlite",
            SolverKind::NoRl => "norl",
        }
    }

    pub fn architecture(self) -> Option<Architecture> {
        match self {
            SolverKind::Follower => Some(Architecture::follower()),
            SolverKind::FollowerLite => Some(Architecture::follower_lite()),
            SolverKind::NoRl => None,
        }
    }
}

impl FromStr for SolverKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "follower" => Ok(SolverKind::Follower),
            "followerlite" => Ok(SolverKind::FollowerLite),
            "norl" => Ok(SolverKind::NoRl),
            other => Err(BenchError::Spec(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub map: MapRef,
    pub agents: usize,
    pub episode_length: usize,
    pub solver: SolverKind,
    pub use_static_cost: bool,
    pub use_dynamic_cost: bool,
    pub greedy: bool,
    /// Learned solvers without a checkpoint run an untrained, seed-0 initialization.
    pub checkpoint: Option<PathBuf>,
    pub tie_break: TieBreak,
    pub seeds: Vec<u64>,
}

impl ScenarioSpec {
    pub fn new(map: MapRef, agents: usize, solver: SolverKind, seeds: Vec<u64>) -> Self {
        Self {
            map,
            agents,
            episode_length: DEFAULT_EPISODE_LENGTH,
            solver,
            use_static_cost: true,
            use_dynamic_cost: true,
            greedy: false,
            checkpoint: None,
            tie_break: TieBreak::LowestId,
            seeds,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.agents == 0 {
            return Err(BenchError::Spec("at least one agent is required".into()));
        }
        if self.episode_length == 0 {
            return Err(BenchError::Spec("episode length must be positive".into()));
        }
        if self.seeds.is_empty() {
            return Err(BenchError::Spec("at least one seed is required".into()));
        }
        Ok(())
    }

    pub fn cost_config(&self) -> CostConfig {
        CostConfig {
            use_static: self.use_static_cost,
            use_dynamic: self.use_dynamic_cost,
            ..CostConfig::default()
        }
    }

    /// Load the checkpoint (if any) and build the solver.
    pub fn resolve_solver(&self) -> Result<Solver, BenchError> {
        let Some(arch) = self.solver.architecture() else {
            return Ok(Solver::NoRl);
        };
        let params = match &self.checkpoint {
            Some(path) => {
                let p = load_checkpoint(path).map_err(|e| BenchError::Checkpoint {
                    path: path.clone(),
                    msg: e.to_string(),
                })?;
                if p.arch().name != arch.name {
                    return Err(BenchError::Checkpoint {
                        path: path.clone(),
                        msg: format!("holds `{}` weights but the solver is `{}`", p.arch().name, arch.name),
                    });
                }
                p
            }
            None => {
                log::warn!("no checkpoint given; {} runs with untrained weights", arch.name);
                PolicyParams::init_orthogonal(arch, 0).map_err(|e| BenchError::Spec(e.to_string()))?
            }
        };
        Ok(Solver::Learned {
            params: Arc::new(params),
            greedy: self.greedy,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedMetrics {
    pub seed: u64,
    pub goals: usize,
    pub throughput: f64,
    /// Standard deviation of per-free-cell visit counts.
    pub visit_std: f64,
    /// Wall-clock, milliseconds per agent decision. Not deterministic.
    pub mean_decision_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub per_seed: Vec<SeedMetrics>,
    pub mean_throughput: f64,
    /// Half-width of the 95% confidence interval of the mean throughput.
    pub ci95: f64,
    pub mean_visit_std: f64,
    pub mean_decision_ms: f64,
    pub total_goals: usize,
}

/// Mean and 95% confidence half-width `1.96·s/√n` (sample standard deviation).
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * var.sqrt() / n.sqrt())
}

impl MetricsReport {
    pub fn from_seeds(mut per_seed: Vec<SeedMetrics>) -> Self {
        per_seed.sort_by_key(|m| m.seed);
        let tp: Vec<f64> = per_seed.iter().map(|m| m.throughput).collect();
        let (mean_throughput, ci95) = mean_ci95(&tp);
        let n = per_seed.len().max(1) as f64;
        Self {
            mean_throughput,
            ci95,
            mean_visit_std: per_seed.iter().map(|m| m.visit_std).sum::<f64>() / n,
            mean_decision_ms: per_seed.iter().map(|m| m.mean_decision_ms).sum::<f64>() / n,
            total_goals: per_seed.iter().map(|m| m.goals).sum(),
            per_seed,
        }
    }

    /// Deterministic metrics: no wall-clock values.
    pub fn metrics_csv(&self) -> String {
        let mut s = String::from("seed,goals,throughput,visit_std\n");
        for m in &self.per_seed {
            let _ = writeln!(s, "{},{},{},{}", m.seed, m.goals, m.throughput, m.visit_std);
        }
        let _ = writeln!(
            s,
            "mean,{},{},{}",
            self.total_goals, self.mean_throughput, self.mean_visit_std
        );
        let _ = writeln!(s, "ci95,,{},", self.ci95);
        s
    }

    pub fn timing_csv(&self) -> String {
        let mut s = String::from("seed,mean_decision_ms\n");
        for m in &self.per_seed {
            let _ = writeln!(s, "{},{}", m.seed, m.mean_decision_ms);
        }
        let _ = writeln!(s, "mean,{}", self.mean_decision_ms);
        s
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub grid: Arc<Grid>,
    pub report: MetricsReport,
    /// One log per seed, in seed order.
    pub logs: Vec<EpisodeLog>,
}

impl ScenarioRun {
    /// `metrics.csv`, `timing.csv`, `episode_<seed>.log` and `heatmap_<seed>.{csv,pnm}`.
    pub fn write_outputs(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("metrics.csv"), self.report.metrics_csv())?;
        std::fs::write(dir.join("timing.csv"), self.report.timing_csv())?;
        for log in &self.logs {
            std::fs::write(dir.join(format!("episode_{}.log", log.seed)), log.to_text())?;
            emit_heatmap(&self.grid, &log.visits, dir, &format!("heatmap_{}", log.seed))?;
        }
        Ok(())
    }
}

/// One episode per seed; the spec fully determines every output except timings.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioRun, BenchError> {
    spec.validate()?;
    let grid = Arc::new(spec.map.load()?);
    let solver = spec.resolve_solver()?;
    run_with_solver(spec, grid, &solver)
}

pub(crate) fn run_with_solver(
    spec: &ScenarioSpec,
    grid: Arc<Grid>,
    solver: &Solver,
) -> Result<ScenarioRun, BenchError> {
    let cost = spec.cost_config();
    let static_costs = Arc::new(static_costs_for(&grid, &cost));
    let mut seeds = spec.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let mut per_seed = Vec::with_capacity(seeds.len());
    let mut logs = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let config =
            EpisodeConfig::new(grid.clone(), spec.agents, spec.episode_length, seed).with_tie_break(spec.tie_break);
        let outcome = run_episode(config, static_costs.clone(), cost, solver)?;
        per_seed.push(SeedMetrics {
            seed,
            goals: outcome.log.total_goals(),
            throughput: outcome.throughput(),
            visit_std: visit_dispersion(&grid, &outcome.log.visits),
            mean_decision_ms: outcome.mean_decision_ms(),
        });
        log::info!("seed {seed}: throughput {:.4}", outcome.throughput());
        logs.push(outcome.log);
    }
    Ok(ScenarioRun {
        grid,
        report: MetricsReport::from_seeds(per_seed),
        logs,
    })
}
