//! Occupancy-grid world, UAV kinematics and the radius-limited sensing model.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::PlannerParams;
use crate::experiment::CostModel;

/// A grid coordinate. Ordered by `(y, x)`, which is the tie-break order used
/// by every planner in the crate.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u16; 2]", into = "[u16; 2]")]
pub struct Cell {
    pub x: u16,
    pub y: u16,
}

impl Cell {
    pub const fn new(x: u16, y: u16) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        u32::from(self.x.abs_diff(other.x)) + u32::from(self.y.abs_diff(other.y))
    }

    pub fn chebyshev(self, other: Cell) -> u32 {
        u32::from(self.x.abs_diff(other.x).max(self.y.abs_diff(other.y)))
    }

    pub fn is_adjacent(self, other: Cell) -> bool {
        self.manhattan(other) == 1
    }

    /// 4-connected neighbours inside a `width` x `height` grid, in `(y, x)` order.
    pub fn neighbors(self, width: u16, height: u16) -> impl Iterator<Item = Cell> {
        let Cell { x, y } = self;
        let up = (y > 0).then(|| Cell::new(x, y - 1));
        let left = (x > 0).then(|| Cell::new(x - 1, y));
        let right = (x + 1 < width).then(|| Cell::new(x + 1, y));
        let down = (y + 1 < height).then(|| Cell::new(x, y + 1));
        [up, left, right, down].into_iter().flatten()
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<[u16; 2]> for Cell {
    fn from([x, y]: [u16; 2]) -> Self {
        Cell::new(x, y)
    }
}

impl From<Cell> for [u16; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

impl fmt::Debug for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellState {
    Free,
    Obstacle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KnownState {
    Unknown,
    Free,
    Obstacle,
}

impl From<CellState> for KnownState {
    fn from(s: CellState) -> Self {
        match s {
            CellState::Free => KnownState::Free,
            CellState::Obstacle => KnownState::Obstacle,
        }
    }
}

/// Anything a grid planner can search over.
pub trait Traversable {
    fn width(&self) -> u16;
    fn height(&self) -> u16;
    fn blocked(&self, cell: Cell) -> bool;

    fn contains(&self, cell: Cell) -> bool {
        cell.x < self.width() && cell.y < self.height()
    }
}

impl<T: Traversable + ?Sized> Traversable for &T {
    fn width(&self) -> u16 {
        (**self).width()
    }
    fn height(&self) -> u16 {
        (**self).height()
    }
    fn blocked(&self, cell: Cell) -> bool {
        (**self).blocked(cell)
    }
}

/// Overlays a set of forbidden cells on top of another map.
pub struct WithNoFly<'a, M> {
    pub map: M,
    pub no_fly: &'a std::collections::BTreeSet<Cell>,
}

impl<M: Traversable> Traversable for WithNoFly<'_, M> {
    fn width(&self) -> u16 {
        self.map.width()
    }
    fn height(&self) -> u16 {
        self.map.height()
    }
    fn blocked(&self, cell: Cell) -> bool {
        self.map.blocked(cell) || self.no_fly.contains(&cell)
    }
}

/// The true world: a static occupancy grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMap {
    width: u16,
    height: u16,
    cells: Vec<CellState>,
}

impl GridMap {
    pub fn new(width: u16, height: u16) -> Self {
        assert!(width > 0 && height > 0, "grid dimensions must be positive");
        Self {
            width,
            height,
            cells: vec![CellState::Free; usize::from(width) * usize::from(height)],
        }
    }

    pub fn with_obstacles(width: u16, height: u16, obstacles: impl IntoIterator<Item = Cell>) -> Self {
        let mut map = Self::new(width, height);
        for c in obstacles {
            map.set(c, CellState::Obstacle);
        }
        map
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn index(&self, c: Cell) -> usize {
        usize::from(c.y) * usize::from(self.width) + usize::from(c.x)
    }

    pub fn cell_at(&self, idx: usize) -> Cell {
        let w = usize::from(self.width);
        Cell::new((idx % w) as u16, (idx / w) as u16)
    }

    pub fn get(&self, c: Cell) -> CellState {
        self.cells[self.index(c)]
    }

    pub fn set(&mut self, c: Cell, state: CellState) {
        let i = self.index(c);
        self.cells[i] = state;
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.get(c) == CellState::Obstacle
    }

    pub fn obstacles(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.cells.len())
            .filter(|&i| self.cells[i] == CellState::Obstacle)
            .map(|i| self.cell_at(i))
    }
}

impl Traversable for GridMap {
    fn width(&self) -> u16 {
        self.width
    }
    fn height(&self) -> u16 {
        self.height
    }
    fn blocked(&self, cell: Cell) -> bool {
        self.is_obstacle(cell)
    }
}

/// A UAV's partial knowledge of the world. Unknown cells are treated as
/// traversable by the planners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalMapCache {
    width: u16,
    height: u16,
    states: Vec<KnownState>,
    observed_at: Vec<f64>,
}

impl LocalMapCache {
    pub fn unknown(width: u16, height: u16) -> Self {
        let n = usize::from(width) * usize::from(height);
        Self {
            width,
            height,
            states: vec![KnownState::Unknown; n],
            observed_at: vec![f64::NEG_INFINITY; n],
        }
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    fn index(&self, c: Cell) -> usize {
        usize::from(c.y) * usize::from(self.width) + usize::from(c.x)
    }

    pub fn get(&self, c: Cell) -> KnownState {
        self.states[self.index(c)]
    }

    /// Timestamp of the last observation of `c`, if it was ever observed.
    pub fn observed_at(&self, c: Cell) -> Option<f64> {
        let t = self.observed_at[self.index(c)];
        t.is_finite().then_some(t)
    }

    pub fn is_known_obstacle(&self, c: Cell) -> bool {
        self.get(c) == KnownState::Obstacle
    }

    pub fn known_count(&self) -> usize {
        self.states.iter().filter(|s| **s != KnownState::Unknown).count()
    }

    pub fn known_obstacles(&self) -> impl Iterator<Item = Cell> + '_ {
        let w = usize::from(self.width);
        self.states
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == KnownState::Obstacle)
            .map(move |(i, _)| Cell::new((i % w) as u16, (i / w) as u16))
    }

    /// Applies an observation. Returns the cells whose traversability changed.
    pub fn apply(&mut self, delta: &ObservationDelta) -> Vec<Cell> {
        let mut changed = Vec::new();
        for &(cell, state) in &delta.revealed {
            let before_blocked = self.is_known_obstacle(cell);
            self.record(cell, state.into(), delta.timestamp);
            if before_blocked != self.is_known_obstacle(cell) {
                changed.push(cell);
            }
        }
        changed
    }

    /// Last-writer-wins merge of a single report; older reports never overwrite newer ones.
    pub fn merge_report(&mut self, cell: Cell, state: KnownState, timestamp: f64) -> bool {
        let i = self.index(cell);
        if timestamp >= self.observed_at[i] {
            let changed = self.states[i] != state;
            self.states[i] = state;
            self.observed_at[i] = timestamp;
            changed
        } else {
            false
        }
    }

    fn record(&mut self, cell: Cell, state: KnownState, timestamp: f64) {
        let i = self.index(cell);
        self.states[i] = state;
        self.observed_at[i] = timestamp;
    }
}

impl Traversable for LocalMapCache {
    fn width(&self) -> u16 {
        self.width
    }
    fn height(&self) -> u16 {
        self.height
    }
    fn blocked(&self, cell: Cell) -> bool {
        self.is_known_obstacle(cell)
    }
}

/// Output of the perception stage: every cell within the sensor footprint
/// with its true state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationDelta {
    pub revealed: Vec<(Cell, CellState)>,
    pub timestamp: f64,
}

impl ObservationDelta {
    pub fn empty(timestamp: f64) -> Self {
        Self {
            revealed: Vec::new(),
            timestamp,
        }
    }

    pub fn obstacles(&self) -> impl Iterator<Item = Cell> + '_ {
        self.revealed
            .iter()
            .filter(|(_, s)| *s == CellState::Obstacle)
            .map(|(c, _)| *c)
    }
}

/// Reveals every cell within Chebyshev distance `radius` of `position`, in `(y, x)` order.
pub fn observe(map: &GridMap, position: Cell, radius: u16, timestamp: f64) -> ObservationDelta {
    debug_assert!(map.contains(position));
    let x0 = position.x.saturating_sub(radius);
    let y0 = position.y.saturating_sub(radius);
    let x1 = position.x.saturating_add(radius).min(map.width() - 1);
    let y1 = position.y.saturating_add(radius).min(map.height() - 1);
    let mut revealed = Vec::with_capacity(usize::from(x1 - x0 + 1) * usize::from(y1 - y0 + 1));
    for y in y0..=y1 {
        for x in x0..=x1 {
            let c = Cell::new(x, y);
            revealed.push((c, map.get(c)));
        }
    }
    ObservationDelta { revealed, timestamp }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("uav {uav}: energy exhausted (needed {needed:.6}, had {available:.6})")]
    EnergyExhausted { uav: u32, needed: f64, available: f64 },
    #[error("uav {uav}: {from} -> {to} is not a single 4-connected step")]
    NotAdjacent { uav: u32, from: Cell, to: Cell },
}

/// Everything a UAV carries between decision ticks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub id: u32,
    pub position: Cell,
    pub energy: f64,
    pub residual_waypoints: Vec<Cell>,
    pub decision_count: u32,
    pub trajectory_length: u64,
    pub local_map: LocalMapCache,
    pub params: PlannerParams,
}

impl UavState {
    pub fn new(id: u32, position: Cell, energy: f64, width: u16, height: u16, params: PlannerParams) -> Self {
        Self {
            id,
            position,
            energy,
            residual_waypoints: Vec::new(),
            decision_count: 0,
            trajectory_length: 0,
            local_map: LocalMapCache::unknown(width, height),
            params,
        }
    }

    /// Deducts `amount` from the battery, failing without side effects if it would go negative.
    pub fn spend(&mut self, amount: f64) -> Result<(), WorldError> {
        if amount > self.energy {
            return Err(WorldError::EnergyExhausted {
                uav: self.id,
                needed: amount,
                available: self.energy,
            });
        }
        self.energy -= amount;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoveOutcome {
    pub length: u32,
    pub energy: f64,
    pub hovered: bool,
}

/// Moves one 4-connected step (or hovers in place) and charges flight or hover energy.
pub fn apply_move(uav: &mut UavState, next_cell: Cell, cost_model: &CostModel) -> Result<MoveOutcome, WorldError> {
    let hovered = next_cell == uav.position;
    if !hovered && !uav.position.is_adjacent(next_cell) {
        return Err(WorldError::NotAdjacent {
            uav: uav.id,
            from: uav.position,
            to: next_cell,
        });
    }
    let (length, energy) = if hovered {
        (0, cost_model.e_hover)
    } else {
        (1, cost_model.e_flight)
    };
    uav.spend(energy)?;
    uav.position = next_cell;
    uav.trajectory_length += u64::from(length);
    Ok(MoveOutcome { length, energy, hovered })
}
