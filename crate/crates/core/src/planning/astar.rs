use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::PlanningError;
use crate::world::{GridCell, OccupancyGrid};

/// 4-connected cell sequence from start to goal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPath {
    pub cells: Vec<GridCell>,
    /// Number of moves, `cells.len() - 1`.
    pub length: u32,
}

impl GridPath {
    fn from_cells(cells: Vec<GridCell>) -> Self {
        let length = cells.len().saturating_sub(1) as u32;
        GridPath { cells, length }
    }

    pub fn start(&self) -> GridCell {
        self.cells[0]
    }

    pub fn goal(&self) -> GridCell {
        self.cells[self.cells.len() - 1]
    }
}

/// Shortest 4-connected path with unit costs and a Manhattan heuristic.
///
/// Open-list ties are broken by lower `f`, then lower `h`, then row-major cell
/// order, so the returned path is a pure function of the inputs.
pub fn astar(
    grid: &OccupancyGrid,
    start: GridCell,
    goal: GridCell,
) -> Result<GridPath, PlanningError> {
    for cell in [start, goal] {
        if !grid.in_bounds(cell) {
            return Err(PlanningError::CellOutOfBounds(cell));
        }
        if grid.is_blocked(cell) {
            return Err(PlanningError::BlockedEndpoint(cell));
        }
    }
    astar_with(grid, start, goal, |_| true).ok_or(PlanningError::NoPath { start, goal })
}

/// [`astar`] over the free cells of `grid` that also satisfy `passable`.
/// The start cell is exempt from both checks; the goal is not.
pub fn astar_with(
    grid: &OccupancyGrid,
    start: GridCell,
    goal: GridCell,
    passable: impl Fn(GridCell) -> bool,
) -> Option<GridPath> {
    if !grid.in_bounds(start) || !grid.is_free(goal) {
        return None;
    }
    if start == goal {
        return Some(GridPath::from_cells(vec![start]));
    }
    if !passable(goal) {
        return None;
    }

    let n = grid.len();
    let mut g = vec![u32::MAX; n];
    let mut parent: Vec<Option<GridCell>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    g[grid.index(start)] = 0;
    let h0 = start.manhattan(goal);
    open.push(Reverse((h0, h0, start.row, start.col)));

    while let Some(Reverse((_, _, row, col))) = open.pop() {
        let cell = GridCell::new(col, row);
        let idx = grid.index(cell);
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if cell == goal {
            let mut cells = vec![goal];
            let mut cur = goal;
            while let Some(p) = parent[grid.index(cur)] {
                cells.push(p);
                cur = p;
            }
            cells.reverse();
            return Some(GridPath::from_cells(cells));
        }
        let next_g = g[idx] + 1;
        for nb in grid.neighbors(cell) {
            if grid.is_blocked(nb) || !passable(nb) {
                continue;
            }
            let ni = grid.index(nb);
            if next_g < g[ni] {
                g[ni] = next_g;
                parent[ni] = Some(cell);
                let h = nb.manhattan(goal);
                open.push(Reverse((next_g + h, h, nb.row, nb.col)));
            }
        }
    }
    None
}
