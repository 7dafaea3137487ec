use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use follower::bench::{ablation_matrix, emit_heatmap, run_scenario, BenchError, ScenarioSpec, SolverKind};
use follower::env::{EpisodeLog, TieBreak};
use follower::maps::{save_map, MapError, MapRef};
use follower::train::{train, TrainConfig, TrainError};

#[derive(Parser)]
#[command(
    name = "follower-bench",
    version,
    about = "Lifelong multi-agent pathfinding benchmark and trainer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode per seed and write metrics, logs and heatmaps.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "followerlite")]
        solver: String,
        /// Plan with uniform static costs.
        #[arg(long)]
        no_static_cost: bool,
        /// Never accumulate sightings of other agents.
        #[arg(long)]
        no_dynamic_cost: bool,
    },
    /// Compare full, no-RL, no-dynamic-cost and no-static-cost variants over shared seeds.
    Ablation {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "followerlite")]
        solver: String,
    },
    /// Train a policy from a `key = value` config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the visit counts stored in an episode log.
    Heatmap {
        #[arg(long)]
        log: PathBuf,
        /// Defaults to the log's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a map (file or generator reference) in MovingAI format.
    ExportMap {
        #[arg(long)]
        map: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Map file, `gen:maze:W:H:SEED` or `gen:random:W:H:DENSITY:SEED`.
    #[arg(long)]
    map: String,
    #[arg(long)]
    agents: usize,
    #[arg(long, default_value_t = 512)]
    steps: usize,
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Take the most likely action instead of sampling.
    #[arg(long)]
    greedy: bool,
    /// Comma-separated episode seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value = "lowest-id")]
    tie_break: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Input(String),
}

impl CliError {
    /// Process exit code for each error category.
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Bench(BenchError::Spec(_)) => 2,
            CliError::Map(_) | CliError::Bench(BenchError::Map(_)) | CliError::Train(TrainError::Map(_)) => 3,
            CliError::Bench(BenchError::Checkpoint { .. }) => 4,
            CliError::Bench(BenchError::Run(_)) => 5,
            CliError::Train(TrainError::Config(_)) => 2,
            CliError::Train(_) => 6,
            CliError::Io { .. } => 7,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl ScenarioArgs {
    fn spec(&self, solver: &str) -> Result<ScenarioSpec, CliError> {
        let map: MapRef = self.map.parse()?;
        let solver: SolverKind = solver.parse()?;
        let tie_break = match self.tie_break.as_str() {
            "lowest-id" => TieBreak::LowestId,
            "seeded-random" => TieBreak::SeededRandom,
            other => return Err(CliError::Input(format!("unknown tie-break `{other}`"))),
        };
        let mut spec = ScenarioSpec::new(map, self.agents, solver, self.seeds.clone());
        spec.episode_length = self.steps;
        spec.checkpoint = self.ckpt.clone();
        spec.greedy = self.greedy;
        spec.tie_break = tie_break;
        Ok(spec)
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            scenario,
            solver,
            no_static_cost,
            no_dynamic_cost,
        } => {
            let mut spec = scenario.spec(&solver)?;
            spec.use_static_cost = !no_static_cost;
            spec.use_dynamic_cost = !no_dynamic_cost;
            let run = run_scenario(&spec)?;
            run.write_outputs(&scenario.out).map_err(io_err(&scenario.out))?;
            let r = &run.report;
            println!(
                "throughput {:.4} ± {:.4} over {} seeds, {} goals, {:.4} ms per agent decision",
                r.mean_throughput,
                r.ci95,
                r.per_seed.len(),
                r.total_goals,
                r.mean_decision_ms
            );
        }
        Command::Ablation { scenario, solver } => {
            let spec = scenario.spec(&solver)?;
            let report = ablation_matrix(&spec)?;
            std::fs::create_dir_all(&scenario.out).map_err(io_err(&scenario.out))?;
            let csv = report.to_csv();
            let path = scenario.out.join("ablation.csv");
            std::fs::write(&path, &csv).map_err(io_err(&path))?;
            print!("{csv}");
        }
        Command::Train { config, out } => {
            let text = std::fs::read_to_string(&config).map_err(io_err(&config))?;
            let mut cfg: TrainConfig = text.parse()?;
            if out.is_some() {
                cfg.out_dir = out;
            }
            if cfg.out_dir.is_none() {
                return Err(CliError::Input("no output directory: set out_dir or pass --out".into()));
            }
            let outcome = train(&cfg)?;
            let last = outcome.rows.last().map(|r| r.mean_reward).unwrap_or(0.0);
            println!(
                "trained {} steps in {} updates, final mean reward {last:.5}",
                outcome.steps, outcome.updates
            );
        }
        Command::Heatmap { log, out } => {
            let text = std::fs::read_to_string(&log).map_err(io_err(&log))?;
            let parsed = EpisodeLog::parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", log.display())))?;
            let dir = out.unwrap_or_else(|| log.parent().map(Path::to_path_buf).unwrap_or_default());
            std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            emit_heatmap(&parsed.grid, &parsed.visits, &dir, &format!("heatmap_{}", parsed.seed))
                .map_err(io_err(&dir))?;
        }
        Command::ExportMap { map, out } => {
            let grid = map.parse::<MapRef>()?.load()?;
            std::fs::write(&out, save_map(&grid)).map_err(io_err(&out))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
