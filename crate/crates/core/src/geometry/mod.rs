//! Planar primitives, bounded Voronoi partitions and relay transfer points.
//!
//! All geometry is continuous and lives in workspace units. The discrete grid
//! used for motion is a separate overlay owned by [`crate::world`].

mod relay;
mod voronoi;

use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use relay::{project_clamp, relay_point, RelayCase, RelayPoint};
pub use voronoi::{compute_voronoi, locate, shared_edge, SharedEdge, VoronoiCell, VoronoiDiagram};

/// Minimum distance between two Voronoi sites.
pub const SITE_SEPARATION: f64 = 1e-6;

/// Absolute tolerance for equidistance, on-segment and containment tests.
pub const GEOMETRY_TOLERANCE: f64 = 1e-9;

/// Relative tolerance under which two directions count as parallel.
pub const PARALLEL_TOLERANCE: f64 = 1e-9;

/// Errors raised by the geometric primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("at least one site is required")]
    EmptySites,
    #[error("site of robot {0} lies outside the workspace")]
    SiteOutsideWorkspace(RobotId),
    #[error("sites of robots {0} and {1} are closer than {SITE_SEPARATION}")]
    SitesTooClose(RobotId, RobotId),
    #[error("robot id {0} appears more than once")]
    DuplicateRobotId(RobotId),
    #[error("point ({}, {}) lies outside the workspace", .0.x, .0.y)]
    PointOutsideWorkspace(Point),
    #[error("unknown robot id {0}")]
    UnknownRobotId(RobotId),
    #[error("the two sites coincide")]
    DegenerateSites,
    #[error("segment endpoints coincide")]
    DegenerateEdge,
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("invalid workspace: {0}")]
    InvalidWorkspace(&'static str),
}

/// Identifier of a robot (and of the Voronoi site it generates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RobotId(pub u32);

impl fmt::Display for RobotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// A point (or vector) in the plane. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn distance_squared(self, other: Point) -> f64 {
        (self - other).norm_squared()
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        self + (other - self) * t
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Axis-aligned rectangular workspace with a grid overlay of `grid_cols x grid_rows` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WorkspaceRepr", into = "WorkspaceRepr")]
pub struct Workspace {
    min_corner: Point,
    max_corner: Point,
    grid_cols: u32,
    grid_rows: u32,
}

impl Workspace {
    pub fn new(
        min_corner: Point,
        max_corner: Point,
        grid_cols: u32,
        grid_rows: u32,
    ) -> Result<Self, GeometryError> {
        if !min_corner.is_finite() || !max_corner.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if min_corner.x >= max_corner.x || min_corner.y >= max_corner.y {
            return Err(GeometryError::InvalidWorkspace(
                "min corner must be strictly below max corner",
            ));
        }
        if grid_cols == 0 || grid_rows == 0 {
            return Err(GeometryError::InvalidWorkspace(
                "grid dimensions must be positive",
            ));
        }
        Ok(Workspace {
            min_corner,
            max_corner,
            grid_cols,
            grid_rows,
        })
    }

    /// `[0, cols] x [0, rows]` with unit cells.
    pub fn unit_grid(cols: u32, rows: u32) -> Result<Self, GeometryError> {
        Workspace::new(
            Point::new(0.0, 0.0),
            Point::new(cols as f64, rows as f64),
            cols,
            rows,
        )
    }

    pub fn min_corner(&self) -> Point {
        self.min_corner
    }

    pub fn max_corner(&self) -> Point {
        self.max_corner
    }

    pub fn grid_cols(&self) -> u32 {
        self.grid_cols
    }

    pub fn grid_rows(&self) -> u32 {
        self.grid_rows
    }

    pub fn width(&self) -> f64 {
        self.max_corner.x - self.min_corner.x
    }

    pub fn height(&self) -> f64 {
        self.max_corner.y - self.min_corner.y
    }

    pub fn cell_width(&self) -> f64 {
        self.width() / self.grid_cols as f64
    }

    pub fn cell_height(&self) -> f64 {
        self.height() / self.grid_rows as f64
    }

    pub fn cell_diagonal(&self) -> f64 {
        self.cell_width().hypot(self.cell_height())
    }

    /// Closed containment test.
    pub fn contains(&self, p: Point) -> bool {
        p.is_finite()
            && p.x >= self.min_corner.x
            && p.x <= self.max_corner.x
            && p.y >= self.min_corner.y
            && p.y <= self.max_corner.y
    }

    /// Strict interior test.
    pub fn contains_strictly(&self, p: Point) -> bool {
        p.is_finite()
            && p.x > self.min_corner.x
            && p.x < self.max_corner.x
            && p.y > self.min_corner.y
            && p.y < self.max_corner.y
    }

    /// Rectangle corners in counter-clockwise order starting at the min corner.
    pub fn corners(&self) -> [Point; 4] {
        let (lo, hi) = (self.min_corner, self.max_corner);
        [lo, Point::new(hi.x, lo.y), hi, Point::new(lo.x, hi.y)]
    }
}

#[derive(Serialize, Deserialize)]
struct WorkspaceRepr {
    min: Point,
    max: Point,
    cols: u32,
    rows: u32,
}

impl TryFrom<WorkspaceRepr> for Workspace {
    type Error = GeometryError;
    fn try_from(r: WorkspaceRepr) -> Result<Self, Self::Error> {
        Workspace::new(r.min, r.max, r.cols, r.rows)
    }
}

impl From<Workspace> for WorkspaceRepr {
    fn from(w: Workspace) -> Self {
        WorkspaceRepr {
            min: w.min_corner,
            max: w.max_corner,
            cols: w.grid_cols,
            rows: w.grid_rows,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workspace_rejects_inverted_corners() {
        let err = Workspace::new(Point::new(5.0, 0.0), Point::new(1.0, 1.0), 1, 1).unwrap_err();
        assert!(matches!(err, GeometryError::InvalidWorkspace(_)));
        assert!(Workspace::new(Point::new(0.0, 0.0), Point::new(1.0, 1.0), 0, 1).is_err());
        assert_eq!(
            Workspace::new(Point::new(f64::NAN, 0.0), Point::new(1.0, 1.0), 1, 1),
            Err(GeometryError::NonFinite)
        );
    }

    #[test]
    fn workspace_json_shape() {
        let ws = Workspace::unit_grid(20, 20).unwrap();
        let json = serde_json::to_string(&ws).unwrap();
        assert_eq!(
            json,
            r#"{"min":[0.0,0.0],"max":[20.0,20.0],"cols":20,"rows":20}"#
        );
        let back: Workspace = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ws);
        assert!(serde_json::from_str::<Workspace>(
            r#"{"min":[3,0],"max":[1,1],"cols":1,"rows":1}"#
        )
        .is_err());
    }

    #[test]
    fn point_ops() {
        let a = Point::new(3.0, 4.0);
        assert_eq!(a.norm(), 5.0);
        assert_eq!(a.perp(), Point::new(-4.0, 3.0));
        assert_eq!(a.cross(Point::new(1.0, 0.0)), -4.0);
        assert_eq!(
            Point::new(0.0, 0.0).midpoint(Point::new(2.0, 2.0)),
            Point::new(1.0, 1.0)
        );
    }
}
