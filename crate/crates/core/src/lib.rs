//! Multi-robot pickup and delivery by relay.
//!
//! A natural-language command becomes a [`TaskSpec`](nlu::TaskSpec). The
//! workspace is split into Voronoi cells around the robots, a grid path is
//! planned from pickup to drop, and every robot whose cell the path crosses
//! carries the item over its own stretch, handing it to the next robot at a
//! point on their shared cell boundary.
//!
//! ```
//! use deliver::geometry::{compute_voronoi, Workspace};
//! use deliver::planning::{build_relay_plan, sites, Robot};
//! use deliver::nlu::parse_command;
//! use deliver::world::{OccupancyGrid, SemanticMap};
//!
//! let map = SemanticMap::home();
//! let task = parse_command("bring the cup from the kitchen to the bedroom", &map).unwrap();
//! let robots = [Robot::new(1, 5.5, 15.5), Robot::new(2, 14.5, 15.5), Robot::new(3, 10.5, 2.5)];
//! let ws = Workspace::unit_grid(20, 20).unwrap();
//! let diagram = compute_voronoi(&sites(&robots), &ws).unwrap();
//! let plan = build_relay_plan(&task, &robots, &diagram, &OccupancyGrid::empty(ws)).unwrap();
//! assert_eq!(plan.active.len(), 2);
//! ```

pub mod coordination;
pub mod geometry;
pub mod nlu;
pub mod planning;
pub mod simulation;
pub mod world;

use thiserror::Error;

/// Any error produced by this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    World(#[from] world::WorldError),
    #[error(transparent)]
    Nlu(#[from] nlu::NluError),
    #[error(transparent)]
    Planning(#[from] planning::PlanningError),
    #[error(transparent)]
    Protocol(#[from] coordination::IllegalTransition),
    #[error(transparent)]
    Simulation(#[from] simulation::SimError),
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/voronoi.md")]
    mod voronoi {}
    #[doc = include_str!("../../../book/src/relay.md")]
    mod relay {}
    #[doc = include_str!("../../../book/src/planning.md")]
    mod planning {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
