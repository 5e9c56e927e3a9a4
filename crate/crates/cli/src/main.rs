mod svg;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use deliver::geometry::{
    compute_voronoi, GeometryError, SharedEdge, VoronoiCell, VoronoiDiagram, Workspace,
};
use deliver::nlu::{interpret, InterpreterConfig, InterpreterMode, NluError};
use deliver::planning::{build_relay_plan, sites, PlanningError, RelayPlan, Robot};
use deliver::simulation::{run_batch, run_trial_on, summarize, to_jsonl, SimConfig, SimError};
use deliver::world::{OccupancyGrid, SemanticMap, WorldError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Nlu(#[from] NluError),
    #[error(transparent)]
    Planning(#[from] PlanningError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{0}")]
    Execution(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Config(_) => 1,
            CliError::Nlu(_) => 3,
            CliError::Planning(_) | CliError::Geometry(_) => 4,
            CliError::Execution(_) => 5,
        }
    }
}

impl From<WorldError> for CliError {
    fn from(e: WorldError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) | SimError::InvalidPlacement(_) => CliError::Config(e.to_string()),
            SimError::Planning(p) => CliError::Planning(p),
            SimError::Geometry(g) => CliError::Geometry(g),
            other => CliError::Execution(other.to_string()),
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Parser)]
#[command(
    name = "deliver",
    version,
    about = "Relay planning and simulation for multi-robot delivery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Voronoi partition of the workspace among the robots.
    Partition {
        #[command(flatten)]
        world: WorldArgs,
        #[command(flatten)]
        robots: RobotArgs,
        /// Diagram JSON output (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Parse a command and build its relay plan.
    Plan {
        /// Natural-language command, e.g. "bring the cup from the kitchen to the bedroom".
        text: String,
        #[command(flatten)]
        world: WorldArgs,
        #[command(flatten)]
        robots: RobotArgs,
        #[command(flatten)]
        interpreter: InterpreterArgs,
        /// Plan JSON output (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Execute one delivery and print its trial record.
    Run {
        /// Command text; alternatively pass --plan.
        #[arg(required_unless_present = "plan")]
        text: Option<String>,
        /// Plan file written by `deliver plan`; its robots and task are used.
        #[arg(long, conflicts_with_all = ["text", "robots", "robots_file"])]
        plan: Option<PathBuf>,
        #[command(flatten)]
        world: WorldArgs,
        #[command(flatten)]
        robots: RobotArgs,
        #[command(flatten)]
        interpreter: InterpreterArgs,
        /// Simulation config (message_delay and tick_budget are used).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trial record output (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Message log output, one JSON object per line.
        #[arg(long)]
        messages: Option<PathBuf>,
    },
    /// Randomized trials over several team sizes.
    Batch {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, required = true)]
        seed: u64,
        /// Comma-separated team sizes, e.g. 1,3,5.
        #[arg(long, value_delimiter = ',')]
        team_sizes: Option<Vec<u32>>,
        #[arg(long)]
        trials: Option<u32>,
        /// Output directory for summary.csv, trials.jsonl and messages.jsonl.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Render a saved diagram or plan as SVG.
    Render {
        #[arg(long, required_unless_present = "diagram", conflicts_with = "diagram")]
        plan: Option<PathBuf>,
        #[arg(long)]
        diagram: Option<PathBuf>,
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long)]
        svg: PathBuf,
    },
}

#[derive(Args)]
struct WorldArgs {
    /// Semantic map JSON (default: built-in five-room home on a 20x20 grid).
    #[arg(long)]
    map: Option<PathBuf>,
    /// Blocked cells, a JSON list of [col, row] pairs.
    #[arg(long)]
    obstacles: Option<PathBuf>,
}

#[derive(Args)]
struct RobotArgs {
    /// Robot positions "x,y;x,y;..." with ids 0, 1, ... in order.
    #[arg(long, conflicts_with = "robots_file")]
    robots: Option<String>,
    /// JSON list of {"id": n, "position": [x, y]}.
    #[arg(long)]
    robots_file: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Interpreter {
    Grammar,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct InterpreterArgs {
    #[arg(long, value_enum, default_value = "grammar")]
    interpreter: Interpreter,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long, value_enum, default_value = "on")]
    fallback: Switch,
    #[arg(long, default_value_t = 5000)]
    timeout_ms: u64,
}

/// Serialized form of a Voronoi diagram.
#[derive(Debug, Serialize, Deserialize)]
struct DiagramFile {
    workspace: Workspace,
    cells: Vec<VoronoiCell>,
    edges: Vec<SharedEdge>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_owned(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(path) => write(path, contents),
        None => io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl WorldArgs {
    fn load(&self) -> Result<(SemanticMap, OccupancyGrid)> {
        let map = match &self.map {
            Some(path) => SemanticMap::from_json(&read(path)?)?,
            None => SemanticMap::home(),
        };
        let grid = match &self.obstacles {
            Some(path) => OccupancyGrid::from_json(*map.workspace(), &read(path)?)?,
            None => OccupancyGrid::empty(*map.workspace()),
        };
        Ok((map, grid))
    }
}

fn parse_robots(text: &str) -> Result<Vec<Robot>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .enumerate()
        .map(|(i, pair)| {
            let coords: Vec<f64> = pair
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| CliError::Config(format!("robot {i}: {e}")))?;
            match coords[..] {
                [x, y] => Ok(Robot::new(i as u32, x, y)),
                _ => Err(CliError::Config(format!(
                    "robot {i}: expected x,y but got {pair:?}"
                ))),
            }
        })
        .collect()
}

impl RobotArgs {
    fn load(&self) -> Result<Vec<Robot>> {
        let robots = match (&self.robots, &self.robots_file) {
            (Some(text), _) => parse_robots(text)?,
            (None, Some(path)) => parse_json(path)?,
            (None, None) => {
                return Err(CliError::Config(
                    "one of --robots or --robots-file is required".into(),
                ))
            }
        };
        if robots.is_empty() {
            return Err(CliError::Config("no robots given".into()));
        }
        Ok(robots)
    }
}

impl InterpreterArgs {
    fn config(&self) -> InterpreterConfig {
        InterpreterConfig {
            mode: match self.interpreter {
                Interpreter::Grammar => InterpreterMode::Grammar,
                Interpreter::External => InterpreterMode::External,
            },
            endpoint: self.endpoint.clone(),
            timeout: Duration::from_millis(self.timeout_ms),
            fallback: matches!(self.fallback, Switch::On),
        }
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn diagram_file(diagram: &VoronoiDiagram) -> DiagramFile {
    DiagramFile {
        workspace: diagram.workspace,
        cells: diagram.cells.clone(),
        edges: diagram.edges(),
    }
}

fn plan_for(
    text: &str,
    world: &WorldArgs,
    robots: &RobotArgs,
    interpreter: &InterpreterArgs,
) -> Result<(SemanticMap, OccupancyGrid, VoronoiDiagram, RelayPlan)> {
    let (map, grid) = world.load()?;
    let robots = robots.load()?;
    let task = interpret(text, &map, &interpreter.config())?;
    let diagram = compute_voronoi(&sites(&robots), map.workspace())?;
    let plan = build_relay_plan(&task, &robots, &diagram, &grid)?;
    Ok((map, grid, diagram, plan))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Partition {
            world,
            robots,
            out,
            svg,
        } => {
            let (map, grid) = world.load()?;
            let robots = robots.load()?;
            let diagram = compute_voronoi(&sites(&robots), map.workspace())?;
            emit(out.as_deref(), &pretty(&diagram_file(&diagram)))?;
            if let Some(path) = svg {
                write(&path, &svg::render_diagram(&diagram, &grid, Some(&map)))?;
            }
        }
        Command::Plan {
            text,
            world,
            robots,
            interpreter,
            out,
            svg,
        } => {
            let (map, grid, diagram, plan) = plan_for(&text, &world, &robots, &interpreter)?;
            log::info!(
                "active chain {:?} with {} transfers",
                plan.active,
                plan.transfers.len()
            );
            emit(out.as_deref(), &pretty(&plan))?;
            if let Some(path) = svg {
                write(&path, &svg::render_plan(&diagram, &grid, Some(&map), &plan))?;
            }
        }
        Command::Run {
            text,
            plan,
            world,
            robots,
            interpreter,
            config,
            out,
            messages,
        } => {
            let sim = match &config {
                Some(path) => parse_json::<SimConfig>(path)?,
                None => SimConfig::default(),
            };
            let (_, grid) = world.load()?;
            let (robots, task) = match (&plan, &text) {
                (Some(path), _) => {
                    let plan: RelayPlan = parse_json(path)?;
                    (plan.robots, plan.task)
                }
                (None, Some(text)) => {
                    let (_, _, _, plan) = plan_for(text, &world, &robots, &interpreter)?;
                    (plan.robots, plan.task)
                }
                (None, None) => unreachable!("clap requires text or --plan"),
            };
            let area = grid.len() as u64;
            let exec = deliver::simulation::ExecConfig {
                message_delay: sim.message_delay,
                tick_budget: sim.tick_budget.unwrap_or(10 * area),
            };
            let mut trial = run_trial_on(&robots, &task, &grid, exec, 0)?;
            trial.record.seed = sim.seed;
            emit(
                out.as_deref(),
                &to_jsonl(std::slice::from_ref(&trial.record)),
            )?;
            if let Some(path) = messages {
                write(&path, &to_jsonl(&trial.relay.messages))?;
            }
            if !trial.record.completed {
                return Err(CliError::Execution(format!(
                    "delivery not completed within {} ticks",
                    exec.tick_budget
                )));
            }
        }
        Command::Batch {
            config,
            seed,
            team_sizes,
            trials,
            out,
        } => {
            let mut sim = match &config {
                Some(path) => parse_json::<SimConfig>(path)?,
                None => SimConfig::default(),
            };
            sim.seed = seed;
            if let Some(sizes) = team_sizes {
                sim.team_sizes = sizes;
            }
            if let Some(t) = trials {
                sim.trials_per_size = t;
            }
            let batch = run_batch(&sim)?;
            let failed = batch.records.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                log::warn!("{failed} trials failed; see trials.jsonl");
            }
            let summary = summarize(&batch.records)?;
            write(&out.join("summary.csv"), &summary.to_csv())?;
            write(&out.join("trials.jsonl"), &to_jsonl(&batch.records))?;
            write(&out.join("messages.jsonl"), &to_jsonl(&batch.messages))?;
            emit(None, &summary.table())?;
        }
        Command::Render {
            plan,
            diagram,
            world,
            svg,
        } => {
            let (map, grid) = world.load()?;
            let rendered = match (plan, diagram) {
                (Some(path), _) => {
                    let plan: RelayPlan = parse_json(&path)?;
                    let diagram = compute_voronoi(&sites(&plan.robots), map.workspace())?;
                    svg::render_plan(&diagram, &grid, Some(&map), &plan)
                }
                (None, Some(path)) => {
                    let file: DiagramFile = parse_json(&path)?;
                    let diagram = VoronoiDiagram {
                        workspace: file.workspace,
                        cells: file.cells,
                    };
                    svg::render_diagram(&diagram, &grid, Some(&map))
                }
                (None, None) => unreachable!("clap requires --plan or --diagram"),
            };
            write(&svg, &rendered)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DELIVER_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Nlu(nlu) = &e {
                eprintln!("code: {}", nlu.code());
            }
            ExitCode::from(e.exit_code())
        }
    }
}
