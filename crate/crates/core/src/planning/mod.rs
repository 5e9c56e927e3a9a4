//! Global path, active-agent selection and relay plan assembly.
//!
//! A relay plan hands the item down a chain of robots. The chain is the list
//! of robots whose Voronoi cells the global pickup-to-drop path passes
//! through, in order of first contact. Consecutive robots in the chain meet
//! at a transfer point on their shared cell boundary:
//!
//! * initiator: start, pickup, first transfer
//! * intermediate: start, incoming transfer, outgoing transfer
//! * final: start, last transfer, drop
//!
//! A chain of one robot simply goes start, pickup, drop.

mod astar;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use astar::{astar, astar_with, GridPath};

use crate::geometry::{
    locate, relay_point, shared_edge, GeometryError, Point, RobotId, VoronoiDiagram,
    GEOMETRY_TOLERANCE,
};
use crate::nlu::{validate_task, NluError, TaskSpec};
use crate::world::{cell_of, center_of, GridCell, OccupancyGrid, WorldError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanningError {
    #[error("no path from {start} to {goal}")]
    NoPath { start: GridCell, goal: GridCell },
    #[error("path endpoint {0} is blocked")]
    BlockedEndpoint(GridCell),
    #[error("cell {0} is out of bounds")]
    CellOutOfBounds(GridCell),
    #[error("at least one robot is required")]
    NoRobots,
    #[error("robot {0} is not part of the diagram")]
    RobotNotInDiagram(RobotId),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("invalid task: {0}")]
    Task(#[from] NluError),
}

/// A robot and its start position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Robot {
    pub id: RobotId,
    pub position: Point,
}

impl Robot {
    pub fn new(id: u32, x: f64, y: f64) -> Self {
        Robot {
            id: RobotId(id),
            position: Point::new(x, y),
        }
    }
}

/// Converts robots into Voronoi sites.
pub fn sites(robots: &[Robot]) -> Vec<(RobotId, Point)> {
    robots.iter().map(|r| (r.id, r.position)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Initiator,
    Intermediate,
    Final,
    Bystander,
}

/// How a transfer point was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferKind {
    /// Minimax point on the pair's shared Voronoi edge.
    SharedEdge,
    /// The pair's cells do not share an edge; the point where the path first
    /// enters the receiver's cell is used instead.
    PathCrossing,
}

/// Waypoints of one active robot, starting at its own position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub robot: RobotId,
    pub role: Role,
    pub waypoints: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelayPlan {
    pub task: TaskSpec,
    pub robots: Vec<Robot>,
    pub path: GridPath,
    pub active: Vec<RobotId>,
    pub transfers: Vec<Point>,
    pub transfer_kinds: Vec<TransferKind>,
    pub segments: Vec<Segment>,
    pub baseline: bool,
}

impl RelayPlan {
    pub fn role_of(&self, id: RobotId) -> Role {
        self.segments
            .iter()
            .find(|s| s.robot == id)
            .map_or(Role::Bystander, |s| s.role)
    }

    pub fn segment_of(&self, id: RobotId) -> Option<&Segment> {
        self.segments.iter().find(|s| s.robot == id)
    }

    /// Plan equality ignoring the baseline flag.
    pub fn same_route(&self, other: &RelayPlan) -> bool {
        RelayPlan {
            baseline: other.baseline,
            ..self.clone()
        } == *other
    }

    /// Checks the structural invariants of a plan.
    pub fn validate(&self, diagram: &VoronoiDiagram) -> Result<(), String> {
        let k = self.active.len();
        if k == 0 {
            return Err("no active robots".into());
        }
        if self.transfers.len() != k - 1 || self.transfer_kinds.len() != k - 1 {
            return Err(format!(
                "{k} active robots but {} transfers",
                self.transfers.len()
            ));
        }
        if self.segments.len() != k {
            return Err(format!(
                "{k} active robots but {} segments",
                self.segments.len()
            ));
        }
        if self.baseline && k != 1 {
            return Err("a baseline plan has exactly one active robot".into());
        }
        let mut seen = self.active.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != k {
            return Err("a robot appears twice in the chain".into());
        }
        if self.path.cells.is_empty() || self.path.length as usize != self.path.cells.len() - 1 {
            return Err("path length does not match its cells".into());
        }
        for w in self.path.cells.windows(2) {
            if w[0].manhattan(w[1]) != 1 {
                return Err(format!("path step {} -> {} is not 4-adjacent", w[0], w[1]));
            }
        }
        for (j, (seg, &id)) in self.segments.iter().zip(&self.active).enumerate() {
            if seg.robot != id {
                return Err(format!("segment {j} belongs to {} not {id}", seg.robot));
            }
            let start = self
                .robots
                .iter()
                .find(|r| r.id == id)
                .ok_or_else(|| format!("active robot {id} has no start position"))?
                .position;
            let first = if j == 0 {
                self.task.pickup
            } else {
                self.transfers[j - 1]
            };
            let last = if j + 1 == k {
                self.task.drop
            } else {
                self.transfers[j]
            };
            let role = match (j, k) {
                (0, _) => Role::Initiator,
                (j, k) if j + 1 == k => Role::Final,
                _ => Role::Intermediate,
            };
            if seg.role != role || seg.waypoints != [start, first, last] {
                return Err(format!("segment {j} does not follow its role"));
            }
        }
        for (j, (&z, kind)) in self.transfers.iter().zip(&self.transfer_kinds).enumerate() {
            if *kind == TransferKind::SharedEdge {
                let a = diagram.site(self.active[j]).ok_or("unknown robot")?;
                let b = diagram.site(self.active[j + 1]).ok_or("unknown robot")?;
                if (z.distance(a) - z.distance(b)).abs() > 1e-6 {
                    return Err(format!("transfer {j} is not equidistant from its robots"));
                }
            }
        }
        Ok(())
    }
}

/// Owners of the pickup and drop locations.
pub fn endpoint_agents(
    task: &TaskSpec,
    diagram: &VoronoiDiagram,
) -> Result<(RobotId, RobotId), GeometryError> {
    Ok((locate(task.pickup, diagram)?, locate(task.drop, diagram)?))
}

/// Owner of every path cell, judged at the cell center.
pub fn path_owners(
    path: &GridPath,
    diagram: &VoronoiDiagram,
    grid: &OccupancyGrid,
) -> Result<Vec<RobotId>, PlanningError> {
    path.cells
        .iter()
        .map(|&c| Ok(locate(center_of(c, grid)?, diagram)?))
        .collect()
}

/// Robots whose cells the path visits, in order of first visit. A robot whose
/// cell the path re-enters keeps its first position in the chain.
pub fn select_active_agents(
    path: &GridPath,
    diagram: &VoronoiDiagram,
    grid: &OccupancyGrid,
) -> Result<Vec<RobotId>, PlanningError> {
    Ok(first_appearances(&path_owners(path, diagram, grid)?))
}

fn first_appearances(owners: &[RobotId]) -> Vec<RobotId> {
    let mut active: Vec<RobotId> = Vec::new();
    for &id in owners {
        if !active.contains(&id) {
            active.push(id);
        }
    }
    active
}

fn prepare(
    task: &TaskSpec,
    robots: &[Robot],
    diagram: &VoronoiDiagram,
    grid: &OccupancyGrid,
) -> Result<GridPath, PlanningError> {
    if robots.is_empty() {
        return Err(PlanningError::NoRobots);
    }
    for r in robots {
        if diagram.site(r.id) != Some(r.position) {
            return Err(PlanningError::RobotNotInDiagram(r.id));
        }
    }
    validate_task(task.clone(), grid.workspace())?;
    astar(grid, cell_of(task.pickup, grid)?, cell_of(task.drop, grid)?)
}

/// Full relay plan: global path, chain, transfer points and segments.
pub fn build_relay_plan(
    task: &TaskSpec,
    robots: &[Robot],
    diagram: &VoronoiDiagram,
    grid: &OccupancyGrid,
) -> Result<RelayPlan, PlanningError> {
    let path = prepare(task, robots, diagram, grid)?;
    let owners = path_owners(&path, diagram, grid)?;
    let active = first_appearances(&owners);
    let position = |id: RobotId| diagram.site(id).ok_or(PlanningError::RobotNotInDiagram(id));

    let mut transfers = Vec::with_capacity(active.len().saturating_sub(1));
    let mut transfer_kinds = Vec::with_capacity(transfers.capacity());
    for pair in active.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let edge = shared_edge(diagram, a, b)?.filter(|e| e.length() > GEOMETRY_TOLERANCE);
        match edge {
            Some(edge) => {
                transfers.push(relay_point(position(a)?, position(b)?, &edge)?.point);
                transfer_kinds.push(TransferKind::SharedEdge);
            }
            None => {
                let k = owners
                    .iter()
                    .position(|&o| o == b)
                    .expect("active robots own path cells");
                let z =
                    center_of(path.cells[k - 1], grid)?.midpoint(center_of(path.cells[k], grid)?);
                log::debug!("{a} and {b} share no edge; transferring at path crossing {z}");
                transfers.push(z);
                transfer_kinds.push(TransferKind::PathCrossing);
            }
        }
    }

    let k = active.len();
    let segments = active
        .iter()
        .enumerate()
        .map(|(j, &id)| {
            let (role, first, last) = match j {
                0 => (
                    Role::Initiator,
                    task.pickup,
                    transfers.first().copied().unwrap_or(task.drop),
                ),
                j if j + 1 == k => (Role::Final, transfers[j - 1], task.drop),
                j => (Role::Intermediate, transfers[j - 1], transfers[j]),
            };
            Ok(Segment {
                robot: id,
                role,
                waypoints: vec![position(id)?, first, last],
            })
        })
        .collect::<Result<Vec<_>, PlanningError>>()?;

    Ok(RelayPlan {
        task: task.clone(),
        robots: robots.to_vec(),
        path,
        active,
        transfers,
        transfer_kinds,
        segments,
        baseline: false,
    })
}

/// Comparison plan in which the owner of the pickup location does everything.
pub fn single_agent_baseline(
    task: &TaskSpec,
    robots: &[Robot],
    diagram: &VoronoiDiagram,
    grid: &OccupancyGrid,
) -> Result<RelayPlan, PlanningError> {
    let path = prepare(task, robots, diagram, grid)?;
    let (owner, _) = endpoint_agents(task, diagram)?;
    let start = diagram
        .site(owner)
        .ok_or(PlanningError::RobotNotInDiagram(owner))?;
    Ok(RelayPlan {
        task: task.clone(),
        robots: robots.to_vec(),
        path,
        active: vec![owner],
        transfers: Vec::new(),
        transfer_kinds: Vec::new(),
        segments: vec![Segment {
            robot: owner,
            role: Role::Initiator,
            waypoints: vec![start, task.pickup, task.drop],
        }],
        baseline: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{compute_voronoi, Workspace};

    fn setup(robots: &[Robot]) -> (VoronoiDiagram, OccupancyGrid) {
        let ws = Workspace::unit_grid(20, 20).unwrap();
        (
            compute_voronoi(&sites(robots), &ws).unwrap(),
            OccupancyGrid::empty(ws),
        )
    }

    fn task(px: f64, py: f64, dx: f64, dy: f64) -> TaskSpec {
        TaskSpec {
            pickup: Point::new(px, py),
            drop: Point::new(dx, dy),
            item: "glass of water".into(),
            source_text: String::new(),
        }
    }

    #[test]
    fn single_robot_plan() {
        let robots = [Robot::new(0, 10.5, 10.5)];
        let (d, g) = setup(&robots);
        let t = task(3.5, 16.5, 16.5, 16.5);
        let plan = build_relay_plan(&t, &robots, &d, &g).unwrap();
        assert_eq!(plan.active, vec![RobotId(0)]);
        assert!(plan.transfers.is_empty());
        assert_eq!(
            plan.segments[0].waypoints,
            vec![robots[0].position, t.pickup, t.drop]
        );
        let base = single_agent_baseline(&t, &robots, &d, &g).unwrap();
        assert!(base.baseline);
        assert!(plan.same_route(&base));
        plan.validate(&d).unwrap();
    }

    #[test]
    fn two_robot_relay_across_the_split() {
        // kitchen on the left half, bedroom on the right, third robot below
        let robots = [
            Robot::new(1, 5.5, 15.5),
            Robot::new(2, 14.5, 15.5),
            Robot::new(3, 10.5, 2.5),
        ];
        let (d, g) = setup(&robots);
        let t = task(3.5, 16.5, 16.5, 16.5);
        assert_eq!(endpoint_agents(&t, &d).unwrap(), (RobotId(1), RobotId(2)));
        let plan = build_relay_plan(&t, &robots, &d, &g).unwrap();
        assert_eq!(plan.active, vec![RobotId(1), RobotId(2)]);
        assert_eq!(plan.transfers.len(), 1);
        let z = plan.transfers[0];
        assert!((z.x - 10.0).abs() < 1e-12 && (z.y - 15.5).abs() < 1e-12);
        assert_eq!(plan.segments[0].waypoints.last(), Some(&z));
        assert_eq!(plan.segments[1].waypoints[1], z);
        assert_eq!(plan.role_of(RobotId(3)), Role::Bystander);
        plan.validate(&d).unwrap();
    }

    #[test]
    fn same_cell_endpoints() {
        let robots = [Robot::new(0, 5.5, 5.5), Robot::new(1, 15.5, 15.5)];
        let (d, _) = setup(&robots);
        let t = task(2.5, 2.5, 4.5, 3.5);
        assert_eq!(endpoint_agents(&t, &d).unwrap(), (RobotId(0), RobotId(0)));
    }

    #[test]
    fn re_entry_keeps_first_position() {
        let a = RobotId(0);
        let b = RobotId(1);
        let c = RobotId(2);
        assert_eq!(first_appearances(&[a, a, b, a, c, c, b]), vec![a, b, c]);
    }

    #[test]
    fn rejects_mismatched_robots() {
        let robots = [Robot::new(0, 5.5, 5.5)];
        let (d, g) = setup(&robots);
        let t = task(2.5, 2.5, 14.5, 3.5);
        assert_eq!(
            build_relay_plan(&t, &[], &d, &g),
            Err(PlanningError::NoRobots)
        );
        assert_eq!(
            build_relay_plan(&t, &[Robot::new(0, 6.5, 5.5)], &d, &g),
            Err(PlanningError::RobotNotInDiagram(RobotId(0)))
        );
    }

    #[test]
    fn plan_json_has_the_documented_fields() {
        let robots = [Robot::new(0, 10.5, 10.5)];
        let (d, g) = setup(&robots);
        let plan = build_relay_plan(&task(3.5, 16.5, 16.5, 16.5), &robots, &d, &g).unwrap();
        let v: serde_json::Value = serde_json::to_value(&plan).unwrap();
        for key in ["task", "active", "transfers", "segments", "baseline"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: RelayPlan = serde_json::from_value(v).unwrap();
        assert_eq!(back, plan);
    }
}
