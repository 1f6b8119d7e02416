//! Grid planners.
//!
//! The fast, UAV-side operators (`astar`, `dstar`, greedy waypoint choice)
//! search the local map and treat Unknown cells as free. The slow,
//! base-station side (`global`) assigns waypoints to UAVs with a genetic
//! algorithm over true-map distances.

mod astar;
mod dstar;
pub mod global;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use astar::astar;
pub use dstar::DStarLite;

use crate::world::{Cell, Traversable};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path {
    cells: Vec<Cell>,
}

impl Path {
    /// Panics if `cells` is empty or not 4-connected.
    pub fn new(cells: Vec<Cell>) -> Self {
        assert!(!cells.is_empty(), "a path has at least one cell");
        debug_assert!(cells.windows(2).all(|w| w[0].is_adjacent(w[1])));
        Self { cells }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn start(&self) -> Cell {
        self.cells[0]
    }

    pub fn goal(&self) -> Cell {
        *self.cells.last().expect("non-empty")
    }

    pub fn cost(&self) -> u32 {
        (self.cells.len() - 1) as u32
    }

    /// The cell after the start, or the start itself for a zero-length path.
    pub fn next_step(&self) -> Cell {
        self.cells.get(1).copied().unwrap_or(self.cells[0])
    }

    pub fn contains(&self, c: Cell) -> bool {
        self.cells.contains(&c)
    }

    /// Drops the first cell after the UAV has moved onto the second one.
    pub fn advance(&mut self) {
        if self.cells.len() > 1 {
            self.cells.remove(0);
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("no path from {from} to {to}")]
    NoPath { from: Cell, to: Cell },
    #[error("{0} is outside the map")]
    OutOfBounds(Cell),
    #[error("start {0} is a known obstacle")]
    StartBlocked(Cell),
    #[error("none of the residual waypoints is reachable")]
    NoReachableWaypoint,
    #[error("no residual waypoints")]
    NoWaypoints,
}

/// Picks the residual waypoint with the smallest A* cost from `position`;
/// ties go to the smaller cell in `(y, x)` order.
pub fn next_waypoint_greedy(
    map: &impl Traversable,
    position: Cell,
    residual: &[Cell],
    heuristic_weight: f64,
) -> Result<Cell, PlanError> {
    if residual.is_empty() {
        return Err(PlanError::NoWaypoints);
    }
    residual
        .iter()
        .filter_map(|&wp| astar(map, position, wp, heuristic_weight).ok().map(|p| (p.cost(), wp)))
        .min()
        .map(|(_, wp)| wp)
        .ok_or(PlanError::NoReachableWaypoint)
}

pub const UNREACHABLE: u32 = u32::MAX;

/// Breadth-first distances from `source` to every cell (row-major), `UNREACHABLE` where blocked off.
pub fn distance_field(map: &impl Traversable, source: Cell) -> Vec<u32> {
    let w = usize::from(map.width());
    let n = w * usize::from(map.height());
    let mut dist = vec![UNREACHABLE; n];
    if !map.contains(source) || map.blocked(source) {
        return dist;
    }
    let idx = |c: Cell| usize::from(c.y) * w + usize::from(c.x);
    dist[idx(source)] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(c) = queue.pop_front() {
        let d = dist[idx(c)];
        for nb in c.neighbors(map.width(), map.height()) {
            if !map.blocked(nb) && dist[idx(nb)] == UNREACHABLE {
                dist[idx(nb)] = d + 1;
                queue.push_back(nb);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::GridMap;

    #[test]
    fn greedy_single_waypoint() {
        let map = GridMap::new(8, 8);
        let wp = Cell::new(6, 6);
        assert_eq!(next_waypoint_greedy(&map, Cell::new(0, 0), &[wp], 1.0), Ok(wp));
    }

    #[test]
    fn greedy_prefers_strictly_closer() {
        let map = GridMap::new(10, 10);
        let near = Cell::new(3, 0);
        let far = Cell::new(0, 7);
        assert_eq!(next_waypoint_greedy(&map, Cell::new(0, 0), &[far, near], 1.0), Ok(near));
    }

    #[test]
    fn greedy_ties_break_by_cell_order() {
        let map = GridMap::new(10, 10);
        let a = Cell::new(2, 0);
        let b = Cell::new(0, 2);
        assert_eq!(next_waypoint_greedy(&map, Cell::new(0, 0), &[b, a], 1.0), Ok(a));
    }

    #[test]
    fn greedy_reports_all_unreachable() {
        let map = GridMap::with_obstacles(5, 5, (0..5).map(|y| Cell::new(2, y)));
        assert_eq!(
            next_waypoint_greedy(&map, Cell::new(0, 0), &[Cell::new(4, 4)], 1.0),
            Err(PlanError::NoReachableWaypoint)
        );
        assert_eq!(next_waypoint_greedy(&map, Cell::new(0, 0), &[], 1.0), Err(PlanError::NoWaypoints));
    }

    #[test]
    fn distance_field_walls() {
        let map = GridMap::with_obstacles(3, 3, [Cell::new(1, 0), Cell::new(1, 1)]);
        let d = distance_field(&map, Cell::new(0, 0));
        assert_eq!(d[2], 6);
        assert_eq!(d[1], UNREACHABLE);
    }
}
