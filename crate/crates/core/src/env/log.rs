//! Episode logs and their line-oriented text form.

use std::fmt::Write as _;

use super::conflict::TieBreak;
use crate::grid::{Action, Grid, Pos};

const MAGIC: &str = "FOLLOWER-LOG v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GoalEvent {
    /// Timestep after which the goal was observed reached (1-based step count).
    pub t: usize,
    pub agent: usize,
    pub cell: Pos,
}

/// Everything needed to audit or replay an episode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpisodeLog {
    pub grid: Grid,
    pub seed: u64,
    pub episode_length: usize,
    pub tie_break: TieBreak,
    pub starts: Vec<Pos>,
    pub initial_goals: Vec<Pos>,
    /// Executed (post-resolution) joint actions, one entry per completed step.
    pub actions: Vec<Vec<Action>>,
    pub goal_events: Vec<GoalEvent>,
    /// Per-cell visit counts, including the start positions.
    pub visits: Vec<u64>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("episode log line {line}: {msg}")]
pub struct LogParseError {
    pub line: usize,
    pub msg: String,
}

impl EpisodeLog {
    pub fn num_agents(&self) -> usize {
        self.starts.len()
    }

    pub fn total_goals(&self) -> usize {
        self.goal_events.len()
    }

    pub fn goals_of(&self, agent: usize) -> impl Iterator<Item = &GoalEvent> {
        self.goal_events.iter().filter(move |e| e.agent == agent)
    }

    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "agents {}", self.num_agents());
        let _ = writeln!(s, "steps {}", self.episode_length);
        let tb = match self.tie_break {
            TieBreak::LowestId => "lowest-id",
            TieBreak::SeededRandom => "seeded-random",
        };
        let _ = writeln!(s, "tiebreak {tb}");
        let _ = writeln!(s, "map {} {}", g.width(), g.height());
        for r in 0..g.height() {
            let row: String = (0..g.width())
                .map(|c| if g.is_free(Pos::new(r, c)) { '.' } else { '@' })
                .collect();
            let _ = writeln!(s, "{row}");
        }
        for (i, (st, gl)) in self.starts.iter().zip(&self.initial_goals).enumerate() {
            let _ = writeln!(s, "agent {i} start {} {} goal {} {}", st.row, st.col, gl.row, gl.col);
        }
        let mut events = self.goal_events.iter().peekable();
        for (k, joint) in self.actions.iter().enumerate() {
            let t = k + 1;
            let acts: String = joint.iter().map(|a| a.to_char()).collect();
            let _ = writeln!(s, "t {t} {acts}");
            while let Some(e) = events.next_if(|e| e.t == t) {
                let _ = writeln!(s, "goal {} {} {} {}", e.t, e.agent, e.cell.row, e.cell.col);
            }
        }
        let _ = writeln!(s, "visits");
        for r in 0..g.height() {
            let row: Vec<String> = (0..g.width())
                .map(|c| self.visits[r * g.width() + c].to_string())
                .collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        let _ = writeln!(s, "end");
        s
    }

    pub fn parse(text: &str) -> Result<Self, LogParseError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| LogParseError {
                line: 0,
                msg: format!("unexpected end of log, expected {what}"),
            })
        };
        let err = |line: usize, msg: String| LogParseError { line, msg };

        let (ln, l) = next("header")?;
        if l.trim() != MAGIC {
            return Err(err(ln, format!("expected `{MAGIC}`")));
        }
        let mut keyed = |key: &str| -> Result<(usize, String), LogParseError> {
            let (ln, l) = next(key)?;
            let rest = l
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| err(ln, format!("expected `{key} ...`")))?;
            Ok((ln, rest.trim().to_string()))
        };
        let num = |ln: usize, v: &str| -> Result<u64, LogParseError> {
            v.parse::<u64>().map_err(|_| err(ln, format!("bad number `{v}`")))
        };

        let (ln, v) = keyed("seed")?;
        let seed = num(ln, &v)?;
        let (ln, v) = keyed("agents")?;
        let n = num(ln, &v)? as usize;
        let (ln, v) = keyed("steps")?;
        let episode_length = num(ln, &v)? as usize;
        let (ln, v) = keyed("tiebreak")?;
        let tie_break = match v.as_str() {
            "lowest-id" => TieBreak::LowestId,
            "seeded-random" => TieBreak::SeededRandom,
            other => return Err(err(ln, format!("unknown tie-break `{other}`"))),
        };
        let (ln, v) = keyed("map")?;
        let dims: Vec<&str> = v.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(err(ln, "expected `map <width> <height>`".into()));
        }
        let (w, h) = (num(ln, dims[0])? as usize, num(ln, dims[1])? as usize);

        let mut blocked = Vec::with_capacity(w * h);
        for _ in 0..h {
            let (ln, l) = next("map row")?;
            if l.chars().count() != w {
                return Err(err(ln, format!("map row must have {w} cells")));
            }
            for ch in l.chars() {
                match ch {
                    '.' => blocked.push(false),
                    '@' => blocked.push(true),
                    other => return Err(err(ln, format!("unknown map character `{other}`"))),
                }
            }
        }
        let grid = Grid::new(w, h, blocked).map_err(|e| err(ln, e.to_string()))?;

        let mut starts = Vec::with_capacity(n);
        let mut initial_goals = Vec::with_capacity(n);
        for i in 0..n {
            let (ln, l) = next("agent line")?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 8 || f[0] != "agent" || f[2] != "start" || f[5] != "goal" || f[1] != i.to_string() {
                return Err(err(ln, format!("expected `agent {i} start r c goal r c`")));
            }
            let p = |a: &str, b: &str| -> Result<Pos, LogParseError> {
                Ok(Pos::new(num(ln, a)? as usize, num(ln, b)? as usize))
            };
            starts.push(p(f[3], f[4])?);
            initial_goals.push(p(f[6], f[7])?);
        }

        let mut actions = Vec::new();
        let mut goal_events = Vec::new();
        loop {
            let (ln, l) = next("step, goal or visits line")?;
            let f: Vec<&str> = l.split_whitespace().collect();
            match f.first().copied() {
                Some("t") if f.len() == 3 || (f.len() == 2 && n == 0) => {
                    let t = num(ln, f[1])? as usize;
                    if t != actions.len() + 1 {
                        return Err(err(ln, format!("expected step {}", actions.len() + 1)));
                    }
                    let acts = f.get(2).copied().unwrap_or("");
                    let joint: Option<Vec<Action>> = acts.chars().map(Action::from_char).collect();
                    match joint {
                        Some(j) if j.len() == n => actions.push(j),
                        _ => return Err(err(ln, format!("expected {n} action characters"))),
                    }
                }
                Some("goal") if f.len() == 5 => {
                    let t = num(ln, f[1])? as usize;
                    let agent = num(ln, f[2])? as usize;
                    if agent >= n {
                        return Err(err(ln, format!("agent {agent} out of range")));
                    }
                    let cell = Pos::new(num(ln, f[3])? as usize, num(ln, f[4])? as usize);
                    goal_events.push(GoalEvent { t, agent, cell });
                }
                Some("visits") => break,
                _ => return Err(err(ln, format!("unrecognised line `{l}`"))),
            }
        }
        let mut visits = Vec::with_capacity(w * h);
        for _ in 0..h {
            let (ln, l) = next("visit row")?;
            let row: Result<Vec<u64>, _> = l.split_whitespace().map(|v| num(ln, v)).collect();
            let row = row?;
            if row.len() != w {
                return Err(err(ln, format!("visit row must have {w} counts")));
            }
            visits.extend(row);
        }
        let (ln, l) = next("end")?;
        if l.trim() != "end" {
            return Err(err(ln, "expected `end`".into()));
        }
        Ok(Self {
            grid,
            seed,
            episode_length,
            tie_break,
            starts,
            initial_goals,
            actions,
            goal_events,
            visits,
        })
    }
}

/// Goals achieved by all agents divided by the episode length.
pub fn throughput(log: &EpisodeLog, episode_length: usize) -> f64 {
    throughput_from_count(log.total_goals(), episode_length)
}

pub fn throughput_from_count(goals: usize, episode_length: usize) -> f64 {
    if episode_length == 0 {
        return 0.0;
    }
    goals as f64 / episode_length as f64
}
