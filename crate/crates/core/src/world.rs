//! Discrete grid overlay, occupancy and named zones.
//!
//! Cells are half-open: cell `(c, r)` covers `[x0 + c*dx, x0 + (c+1)*dx) x
//! [y0 + r*dy, y0 + (r+1)*dy)`, so the max corner of the workspace belongs to
//! no cell.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Workspace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("point {0} lies outside the grid")]
    PointOutsideWorkspace(Point),
    #[error("cell {0} is out of bounds")]
    CellOutOfBounds(GridCell),
    #[error("unknown zone {0:?}")]
    UnknownZone(String),
    #[error("zone {0:?} is defined twice")]
    DuplicateZone(String),
    #[error("anchor of zone {0:?} lies outside the workspace")]
    ZoneOutsideWorkspace(String),
    #[error("invalid map file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct GridCell {
    pub col: u32,
    pub row: u32,
}

impl GridCell {
    pub const fn new(col: u32, row: u32) -> Self {
        GridCell { col, row }
    }

    pub fn manhattan(self, other: GridCell) -> u32 {
        self.col.abs_diff(other.col) + self.row.abs_diff(other.row)
    }

    pub fn chebyshev(self, other: GridCell) -> u32 {
        self.col
            .abs_diff(other.col)
            .max(self.row.abs_diff(other.row))
    }
}

/// Row-major order: by row, then column.
impl Ord for GridCell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.row, self.col).cmp(&(other.row, other.col))
    }
}

impl PartialOrd for GridCell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl From<[u32; 2]> for GridCell {
    fn from([col, row]: [u32; 2]) -> Self {
        GridCell { col, row }
    }
}

impl From<GridCell> for [u32; 2] {
    fn from(c: GridCell) -> Self {
        [c.col, c.row]
    }
}

impl fmt::Display for GridCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.col, self.row)
    }
}

/// Grid overlay of a workspace plus its blocked cells.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    workspace: Workspace,
    blocked: BTreeSet<GridCell>,
}

impl OccupancyGrid {
    pub fn empty(workspace: Workspace) -> Self {
        OccupancyGrid {
            workspace,
            blocked: BTreeSet::new(),
        }
    }

    pub fn with_blocked(
        workspace: Workspace,
        blocked: impl IntoIterator<Item = GridCell>,
    ) -> Result<Self, WorldError> {
        let mut grid = OccupancyGrid::empty(workspace);
        for cell in blocked {
            if !grid.in_bounds(cell) {
                return Err(WorldError::CellOutOfBounds(cell));
            }
            grid.blocked.insert(cell);
        }
        Ok(grid)
    }

    /// Parses an occupancy file: a JSON list of `[col, row]` pairs.
    pub fn from_json(workspace: Workspace, json: &str) -> Result<Self, WorldError> {
        let cells: Vec<GridCell> =
            serde_json::from_str(json).map_err(|e| WorldError::Parse(e.to_string()))?;
        OccupancyGrid::with_blocked(workspace, cells)
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn cols(&self) -> u32 {
        self.workspace.grid_cols()
    }

    pub fn rows(&self) -> u32 {
        self.workspace.grid_rows()
    }

    pub fn blocked(&self) -> &BTreeSet<GridCell> {
        &self.blocked
    }

    pub fn in_bounds(&self, cell: GridCell) -> bool {
        cell.col < self.cols() && cell.row < self.rows()
    }

    pub fn is_blocked(&self, cell: GridCell) -> bool {
        self.blocked.contains(&cell)
    }

    pub fn is_free(&self, cell: GridCell) -> bool {
        self.in_bounds(cell) && !self.is_blocked(cell)
    }

    /// In-bounds 4-neighbours in the fixed order up, down, left, right.
    pub fn neighbors(&self, cell: GridCell) -> impl Iterator<Item = GridCell> + '_ {
        let GridCell { col, row } = cell;
        [
            row.checked_add(1).map(|r| GridCell::new(col, r)),
            row.checked_sub(1).map(|r| GridCell::new(col, r)),
            col.checked_sub(1).map(|c| GridCell::new(c, row)),
            col.checked_add(1).map(|c| GridCell::new(c, row)),
        ]
        .into_iter()
        .flatten()
        .filter(move |&c| self.in_bounds(c))
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = GridCell> {
        let cols = self.cols();
        (0..self.rows()).flat_map(move |row| (0..cols).map(move |col| GridCell::new(col, row)))
    }

    pub fn index(&self, cell: GridCell) -> usize {
        cell.row as usize * self.cols() as usize + cell.col as usize
    }

    pub fn len(&self) -> usize {
        self.cols() as usize * self.rows() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Cell whose half-open extent contains `point`.
pub fn cell_of(point: Point, grid: &OccupancyGrid) -> Result<GridCell, WorldError> {
    let ws = grid.workspace();
    let (lo, hi) = (ws.min_corner(), ws.max_corner());
    if !point.is_finite() || point.x < lo.x || point.y < lo.y || point.x >= hi.x || point.y >= hi.y
    {
        return Err(WorldError::PointOutsideWorkspace(point));
    }
    let col = ((point.x - lo.x) / ws.cell_width()).floor() as u32;
    let row = ((point.y - lo.y) / ws.cell_height()).floor() as u32;
    Ok(GridCell::new(
        col.min(grid.cols() - 1),
        row.min(grid.rows() - 1),
    ))
}

/// Geometric center of `cell`.
pub fn center_of(cell: GridCell, grid: &OccupancyGrid) -> Result<Point, WorldError> {
    if !grid.in_bounds(cell) {
        return Err(WorldError::CellOutOfBounds(cell));
    }
    let ws = grid.workspace();
    let lo = ws.min_corner();
    Ok(Point::new(
        lo.x + (cell.col as f64 + 0.5) * ws.cell_width(),
        lo.y + (cell.row as f64 + 0.5) * ws.cell_height(),
    ))
}

/// Lowercases, trims and collapses internal whitespace.
pub fn normalize_zone_name(name: &str) -> String {
    name.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    /// Name as written in the map file.
    pub name: String,
    pub anchor: Point,
}

/// Named zones grounded to anchor points, keyed by normalized name.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMap {
    workspace: Workspace,
    zones: BTreeMap<String, Zone>,
}

#[derive(Serialize, Deserialize)]
struct MapFile {
    zones: BTreeMap<String, Point>,
    workspace: Workspace,
}

impl SemanticMap {
    pub fn new(workspace: Workspace) -> Self {
        SemanticMap {
            workspace,
            zones: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, anchor: Point) -> Result<(), WorldError> {
        if !self.workspace.contains(anchor) {
            return Err(WorldError::ZoneOutsideWorkspace(name.to_owned()));
        }
        let key = normalize_zone_name(name);
        if key.is_empty() || self.zones.contains_key(&key) {
            return Err(WorldError::DuplicateZone(name.to_owned()));
        }
        self.zones.insert(
            key,
            Zone {
                name: name.to_owned(),
                anchor,
            },
        );
        Ok(())
    }

    /// The five-room home layout on a 20x20 unit grid. Anchors are cell centers.
    pub fn home() -> Self {
        let ws = Workspace::unit_grid(20, 20).expect("static workspace");
        let mut map = SemanticMap::new(ws);
        for (name, x, y) in [
            ("Kitchen", 3.5, 16.5),
            ("Living Area", 10.5, 10.5),
            ("Storage Area", 3.5, 3.5),
            ("Bedroom", 16.5, 16.5),
            ("Bathroom", 16.5, 3.5),
        ] {
            map.insert(name, Point::new(x, y)).expect("static zones");
        }
        map
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn zones(&self) -> impl Iterator<Item = &Zone> {
        self.zones.values()
    }

    /// Display names in normalized-key order.
    pub fn zone_names(&self) -> Vec<String> {
        self.zones.values().map(|z| z.name.clone()).collect()
    }

    pub fn from_json(json: &str) -> Result<Self, WorldError> {
        let file: MapFile =
            serde_json::from_str(json).map_err(|e| WorldError::Parse(e.to_string()))?;
        let mut map = SemanticMap::new(file.workspace);
        for (name, anchor) in file.zones {
            map.insert(&name, anchor)?;
        }
        Ok(map)
    }

    pub fn to_json(&self) -> String {
        let file = MapFile {
            zones: self
                .zones
                .values()
                .map(|z| (z.name.clone(), z.anchor))
                .collect(),
            workspace: self.workspace,
        };
        serde_json::to_string_pretty(&file).expect("map serialization is infallible")
    }
}

/// Anchor of the zone called `name` (case and whitespace insensitive).
pub fn resolve_zone(name: &str, map: &SemanticMap) -> Result<Point, WorldError> {
    map.zones
        .get(&normalize_zone_name(name))
        .map(|z| z.anchor)
        .ok_or_else(|| WorldError::UnknownZone(name.trim().to_owned()))
}
