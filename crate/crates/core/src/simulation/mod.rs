//! Randomized trials comparing relay delivery with a single-robot baseline.
//!
//! Each trial places `team_size` robots on distinct random grid cells and
//! draws a pickup/drop pair at least `min_task_separation` apart. The relay
//! plan and the baseline plan are both executed on the grid; their executed
//! move counts are recorded.
//!
//! Trials are seeded independently from the master seed, the team size and
//! the trial index, so a batch gives identical records regardless of thread
//! count or run order.

mod executor;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use executor::{execute, ExecConfig, Execution, HandoffCheck, Monitor, Package};

use crate::coordination::{HandoffMessage, IllegalTransition, MessageKind};
use crate::geometry::{compute_voronoi, GeometryError, Point, RobotId, Workspace};
use crate::nlu::TaskSpec;
use crate::planning::{
    build_relay_plan, single_agent_baseline, sites, PlanningError, RelayPlan, Robot,
};
use crate::world::{center_of, GridCell, OccupancyGrid, WorldError};

/// Random draws of pickup/drop pairs before a trial is given up.
pub const PLACEMENT_ATTEMPTS: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("could not place a task with the required separation after {attempts} attempts")]
    PlacementExhausted { attempts: u32 },
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("no completed trials for team size {team_size}")]
    NoCompletedTrials { team_size: u32 },
    #[error(transparent)]
    Planning(#[from] PlanningError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Protocol(#[from] IllegalTransition),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub grid_cols: u32,
    pub grid_rows: u32,
    pub team_sizes: Vec<u32>,
    pub trials_per_size: u32,
    /// Minimum distance between pickup and drop cell centers, in cells.
    pub min_task_separation: f64,
    pub seed: u64,
    pub message_delay: u64,
    /// Ticks before a trial is declared incomplete; defaults to ten per cell.
    pub tick_budget: Option<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            grid_cols: 20,
            grid_rows: 20,
            team_sizes: vec![1, 3, 5, 7, 10],
            trials_per_size: 100,
            min_task_separation: 8.0,
            seed: 0,
            message_delay: 0,
            tick_budget: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if self.grid_cols == 0 || self.grid_rows == 0 {
            return bad("grid dimensions must be positive".into());
        }
        if self.team_sizes.is_empty() {
            return bad("at least one team size is required".into());
        }
        let area = self.grid_cols as u64 * self.grid_rows as u64;
        for &n in &self.team_sizes {
            if n == 0 || n as u64 > area {
                return bad(format!(
                    "team size {n} does not fit a {}x{} grid",
                    self.grid_cols, self.grid_rows
                ));
            }
        }
        if self.trials_per_size == 0 {
            return bad("trials_per_size must be positive".into());
        }
        let diameter =
            (((self.grid_cols - 1) as f64).powi(2) + ((self.grid_rows - 1) as f64).powi(2)).sqrt();
        if !self.min_task_separation.is_finite()
            || self.min_task_separation < 0.0
            || self.min_task_separation > diameter
        {
            return bad(format!(
                "min_task_separation {} must lie in [0, {diameter:.3}]",
                self.min_task_separation
            ));
        }
        if self.tick_budget == Some(0) {
            return bad("tick_budget must be positive".into());
        }
        Ok(())
    }

    pub fn workspace(&self) -> Result<Workspace, SimError> {
        Ok(Workspace::unit_grid(self.grid_cols, self.grid_rows)?)
    }

    pub fn exec_config(&self) -> ExecConfig {
        let area = self.grid_cols as u64 * self.grid_rows as u64;
        ExecConfig {
            message_delay: self.message_delay,
            tick_budget: self.tick_budget.unwrap_or(10 * area),
        }
    }
}

/// Result of one trial. Move counts are executed grid moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u32,
    pub team_size: u32,
    pub seed: u64,
    pub task: TaskSpec,
    pub robots: Vec<Robot>,
    pub active_count: u32,
    pub per_agent_moves: BTreeMap<RobotId, u64>,
    pub total_moves: u64,
    pub baseline_total_moves: u64,
    pub ticks: u64,
    pub completed: bool,
    pub baseline_completed: bool,
    pub handoffs: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TrialRecord {
    /// Mean moves per active robot.
    pub fn per_agent(&self) -> f64 {
        self.total_moves as f64 / self.active_count.max(1) as f64
    }

    fn failed(trial_id: u32, team_size: u32, seed: u64, err: &SimError) -> Self {
        TrialRecord {
            trial_id,
            team_size,
            seed,
            task: TaskSpec {
                pickup: Point::new(0.0, 0.0),
                drop: Point::new(0.0, 0.0),
                item: String::new(),
                source_text: String::new(),
            },
            robots: Vec::new(),
            active_count: 0,
            per_agent_moves: BTreeMap::new(),
            total_moves: 0,
            baseline_total_moves: 0,
            ticks: 0,
            completed: false,
            baseline_completed: false,
            handoffs: 0,
            error: Some(err.to_string()),
        }
    }
}

/// Everything produced by one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub record: TrialRecord,
    pub plan: RelayPlan,
    pub relay: Execution,
    pub baseline_plan: RelayPlan,
    pub baseline: Execution,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of one trial, derived from the master seed.
pub fn trial_seed(master: u64, team_size: u32, trial: u32) -> u64 {
    splitmix64(master ^ splitmix64(((team_size as u64) << 32) | trial as u64))
}

/// Random robot placement and task for one trial.
pub fn generate_trial(
    team_size: u32,
    config: &SimConfig,
    rng: &mut impl Rng,
) -> Result<(Vec<Robot>, TaskSpec), SimError> {
    config.validate()?;
    let grid = OccupancyGrid::empty(config.workspace()?);
    let cols = config.grid_cols as usize;
    let at = |i: usize| -> Result<_, SimError> {
        Ok(center_of(
            GridCell::new((i % cols) as u32, (i / cols) as u32),
            &grid,
        )?)
    };

    let robots = sample(rng, grid.len(), team_size as usize)
        .into_iter()
        .enumerate()
        .map(|(id, i)| {
            Ok(Robot {
                id: RobotId(id as u32),
                position: at(i)?,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;

    for _ in 0..PLACEMENT_ATTEMPTS {
        let pickup = at(rng.gen_range(0..grid.len()))?;
        let drop = at(rng.gen_range(0..grid.len()))?;
        if pickup.distance(drop) >= config.min_task_separation && pickup != drop {
            let task = TaskSpec {
                pickup,
                drop,
                item: "package".into(),
                source_text: String::new(),
            };
            return Ok((robots, task));
        }
    }
    Err(SimError::PlacementExhausted {
        attempts: PLACEMENT_ATTEMPTS,
    })
}

/// Plans and executes the relay and the baseline for one placement on an
/// empty grid of the configured size.
pub fn run_trial_detailed(
    robots: &[Robot],
    task: &TaskSpec,
    config: &SimConfig,
    trial_id: u32,
) -> Result<TrialRun, SimError> {
    let grid = OccupancyGrid::empty(config.workspace()?);
    let mut run = run_trial_on(robots, task, &grid, config.exec_config(), trial_id)?;
    run.record.seed = config.seed;
    Ok(run)
}

/// [`run_trial_detailed`] on an arbitrary occupancy grid.
pub fn run_trial_on(
    robots: &[Robot],
    task: &TaskSpec,
    grid: &OccupancyGrid,
    exec: ExecConfig,
    trial_id: u32,
) -> Result<TrialRun, SimError> {
    let diagram = compute_voronoi(&sites(robots), grid.workspace())?;
    let plan = build_relay_plan(task, robots, &diagram, grid)?;
    let baseline_plan = single_agent_baseline(task, robots, &diagram, grid)?;
    let relay = execute(&plan, grid, exec, trial_id as u64)?;
    let baseline = execute(&baseline_plan, grid, exec, trial_id as u64)?;

    let record = TrialRecord {
        trial_id,
        team_size: robots.len() as u32,
        seed: 0,
        task: task.clone(),
        robots: robots.to_vec(),
        active_count: plan.active.len() as u32,
        per_agent_moves: relay.moves.clone(),
        total_moves: relay.total_moves(),
        baseline_total_moves: baseline.total_moves(),
        ticks: relay.ticks,
        completed: relay.completed,
        baseline_completed: baseline.completed,
        handoffs: relay.count(MessageKind::HandoffAck) as u32,
        error: None,
    };
    Ok(TrialRun {
        record,
        plan,
        relay,
        baseline_plan,
        baseline,
    })
}

/// [`run_trial_detailed`], keeping only the record.
pub fn run_trial(
    robots: &[Robot],
    task: &TaskSpec,
    config: &SimConfig,
) -> Result<TrialRecord, SimError> {
    Ok(run_trial_detailed(robots, task, config, 0)?.record)
}

/// Records of a batch, in team-size then trial order, with the message log
/// of every relay execution.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub records: Vec<TrialRecord>,
    pub messages: Vec<HandoffMessage>,
}

fn one_trial(config: &SimConfig, team_size: u32, trial: u32) -> (TrialRecord, Vec<HandoffMessage>) {
    let seed = trial_seed(config.seed, team_size, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcome = generate_trial(team_size, config, &mut rng)
        .and_then(|(robots, task)| run_trial_detailed(&robots, &task, config, trial));
    match outcome {
        Ok(run) => {
            let mut record = run.record;
            record.seed = seed;
            (record, run.relay.messages)
        }
        Err(err) => {
            log::warn!("trial {trial} with {team_size} robots failed: {err}");
            (
                TrialRecord::failed(trial, team_size, seed, &err),
                Vec::new(),
            )
        }
    }
}

/// Runs every trial of `config` in parallel. A failing trial is recorded
/// with its error and does not stop the batch.
pub fn run_batch(config: &SimConfig) -> Result<BatchResult, SimError> {
    config.validate()?;
    let jobs: Vec<(u32, u32)> = config
        .team_sizes
        .iter()
        .flat_map(|&n| (0..config.trials_per_size).map(move |t| (n, t)))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(n, t)| one_trial(config, n, t))
        .collect();
    let mut records = Vec::with_capacity(results.len());
    let mut messages = Vec::new();
    for (record, log) in results {
        records.push(record);
        messages.extend(log);
    }
    Ok(BatchResult { records, messages })
}

/// Per-team-size statistics over completed trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamSummary {
    pub team_size: u32,
    pub trials: u32,
    pub completed: u32,
    pub mean_total: f64,
    /// Population standard deviation of the total.
    pub std_total: f64,
    pub mean_per_agent: f64,
    pub mean_active: f64,
    pub mean_baseline_total: f64,
    /// `1 - mean_per_agent / mean_baseline_total`.
    pub reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub rows: Vec<TeamSummary>,
    /// Reduction of the largest team size.
    pub reduction_vs_baseline: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Groups records by team size. Only trials where both the relay and the
/// baseline completed enter the statistics.
pub fn summarize(records: &[TrialRecord]) -> Result<BatchSummary, SimError> {
    let mut groups: BTreeMap<u32, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.team_size).or_default().push(r);
    }
    if groups.is_empty() {
        return Err(SimError::Config("no trial records".into()));
    }
    let mut rows = Vec::with_capacity(groups.len());
    for (team_size, group) in groups {
        let done: Vec<_> = group
            .iter()
            .filter(|r| r.completed && r.baseline_completed)
            .collect();
        if done.is_empty() {
            return Err(SimError::NoCompletedTrials { team_size });
        }
        let totals: Vec<f64> = done.iter().map(|r| r.total_moves as f64).collect();
        let per_agent: Vec<f64> = done.iter().map(|r| r.per_agent()).collect();
        let active: Vec<f64> = done.iter().map(|r| r.active_count as f64).collect();
        let baseline: Vec<f64> = done.iter().map(|r| r.baseline_total_moves as f64).collect();
        let mean_per_agent = mean(&per_agent);
        let mean_baseline_total = mean(&baseline);
        rows.push(TeamSummary {
            team_size,
            trials: group.len() as u32,
            completed: done.len() as u32,
            mean_total: mean(&totals),
            std_total: population_std(&totals),
            mean_per_agent,
            mean_active: mean(&active),
            mean_baseline_total,
            reduction: 1.0 - mean_per_agent / mean_baseline_total,
        });
    }
    let reduction_vs_baseline = rows.last().expect("non-empty").reduction;
    Ok(BatchSummary {
        rows,
        reduction_vs_baseline,
    })
}

impl BatchSummary {
    pub const CSV_HEADER: &'static str =
        "team_size,mean_total,std_total,mean_per_agent,mean_active,reduction";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.4},{:.4},{:.4},{:.4},{:.4}",
                r.team_size,
                r.mean_total,
                r.std_total,
                r.mean_per_agent,
                r.mean_active,
                r.reduction
            );
        }
        out
    }

    /// Human-readable table.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:>5} {:>6} {:>10} {:>9} {:>10} {:>8} {:>9} {:>9}\n",
            "team", "done", "mean_total", "std", "per_agent", "active", "baseline", "reduction"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>5} {:>6} {:>10.2} {:>9.2} {:>10.2} {:>8.2} {:>9.2} {:>8.1}%",
                r.team_size,
                format!("{}/{}", r.completed, r.trials),
                r.mean_total,
                r.std_total,
                r.mean_per_agent,
                r.mean_active,
                r.mean_baseline_total,
                100.0 * r.reduction
            );
        }
        let _ = writeln!(
            out,
            "reduction vs single-robot baseline: {:.1}%",
            100.0 * self.reduction_vs_baseline
        );
        out
    }
}

/// One JSON object per line.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable"));
        out.push('\n');
    }
    out
}
