use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{Path, PlanError};
use crate::world::{Cell, ObservationDelta, Traversable};

const INF: i64 = i64::MAX / 4;

type Key = (i64, i64);

/// D* Lite (Koenig & Likhachev) searching backwards from a fixed goal so the
/// plan can be repaired as the UAV moves and discovers obstacles.
///
/// The planner keeps its own snapshot of which cells are blocked; `replan`
/// diffs the cells it is told about against that snapshot.
#[derive(Clone, Debug)]
pub struct DStarLite {
    goal: Cell,
    start: Cell,
    last: Cell,
    width: u16,
    height: u16,
    km: i64,
    g: Vec<i64>,
    rhs: Vec<i64>,
    open: Vec<Option<Key>>,
    heap: BinaryHeap<Reverse<(Key, Cell)>>,
    blocked: Vec<bool>,
    expansions: u64,
}

impl DStarLite {
    pub fn new(map: &impl Traversable, start: Cell, goal: Cell) -> Result<Self, PlanError> {
        for c in [start, goal] {
            if !map.contains(c) {
                return Err(PlanError::OutOfBounds(c));
            }
        }
        if map.blocked(start) {
            return Err(PlanError::StartBlocked(start));
        }
        let (width, height) = (map.width(), map.height());
        let n = usize::from(width) * usize::from(height);
        let mut blocked = vec![false; n];
        for y in 0..height {
            for x in 0..width {
                let c = Cell::new(x, y);
                blocked[usize::from(y) * usize::from(width) + usize::from(x)] = map.blocked(c);
            }
        }
        let mut p = Self {
            goal,
            start,
            last: start,
            width,
            height,
            km: 0,
            g: vec![INF; n],
            rhs: vec![INF; n],
            open: vec![None; n],
            heap: BinaryHeap::new(),
            blocked,
            expansions: 0,
        };
        let gi = p.idx(goal);
        p.rhs[gi] = 0;
        let k = p.key(goal);
        p.push(goal, k);
        Ok(p)
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn expansions(&self) -> u64 {
        self.expansions
    }

    /// Runs the initial search and extracts a path from the start.
    pub fn plan(&mut self) -> Result<Path, PlanError> {
        self.compute_shortest_path();
        self.extract()
    }

    /// Repairs the plan after `deltas` were applied to `map` and the UAV moved to `current`.
    pub fn replan(&mut self, map: &impl Traversable, current: Cell, deltas: &ObservationDelta) -> Result<Path, PlanError> {
        let cells: Vec<Cell> = deltas.revealed.iter().map(|(c, _)| *c).collect();
        self.replan_cells(map, current, &cells)
    }

    /// As [`DStarLite::replan`], given just the cells that may have changed.
    pub fn replan_cells(&mut self, map: &impl Traversable, current: Cell, cells: &[Cell]) -> Result<Path, PlanError> {
        if !map.contains(current) {
            return Err(PlanError::OutOfBounds(current));
        }
        self.start = current;
        let mut changed = Vec::new();
        for &c in cells {
            let i = self.idx(c);
            let now = map.blocked(c);
            if self.blocked[i] != now {
                self.blocked[i] = now;
                changed.push(c);
            }
        }
        if !changed.is_empty() {
            self.km += i64::from(self.last.manhattan(current));
            self.last = current;
            for c in changed {
                self.update_vertex(c);
                for nb in c.neighbors(self.width, self.height) {
                    self.update_vertex(nb);
                }
            }
        }
        self.compute_shortest_path();
        self.extract()
    }

    /// Cost-to-goal estimate for `c` (`None` if unreachable).
    pub fn g(&self, c: Cell) -> Option<u32> {
        let v = self.g[self.idx(c)];
        (v < INF).then_some(v as u32)
    }

    /// True when every cell outside the open list satisfies `g == rhs`.
    pub fn consistent_outside_open(&self) -> bool {
        (0..self.g.len()).all(|i| self.open[i].is_some() || self.g[i] == self.rhs[i])
    }

    fn idx(&self, c: Cell) -> usize {
        usize::from(c.y) * usize::from(self.width) + usize::from(c.x)
    }

    fn h(a: Cell, b: Cell) -> i64 {
        i64::from(a.manhattan(b))
    }

    fn cost(&self, a: Cell, b: Cell) -> i64 {
        if self.blocked[self.idx(a)] || self.blocked[self.idx(b)] {
            INF
        } else {
            1
        }
    }

    fn key(&self, c: Cell) -> Key {
        let i = self.idx(c);
        let m = self.g[i].min(self.rhs[i]);
        if m >= INF {
            (INF, INF)
        } else {
            (m + Self::h(self.start, c) + self.km, m)
        }
    }

    fn push(&mut self, c: Cell, k: Key) {
        let i = self.idx(c);
        self.open[i] = Some(k);
        self.heap.push(Reverse((k, c)));
    }

    fn top(&mut self) -> Option<(Key, Cell)> {
        while let Some(&Reverse((k, c))) = self.heap.peek() {
            if self.open[self.idx(c)] == Some(k) {
                return Some((k, c));
            }
            self.heap.pop();
        }
        None
    }

    fn update_vertex(&mut self, u: Cell) {
        let ui = self.idx(u);
        if u != self.goal {
            let mut best = INF;
            for s in u.neighbors(self.width, self.height) {
                let c = self.cost(u, s);
                if c < INF {
                    best = best.min(c + self.g[self.idx(s)]);
                }
            }
            self.rhs[ui] = best.min(INF);
        }
        self.open[ui] = None;
        if self.g[ui] != self.rhs[ui] {
            let k = self.key(u);
            self.push(u, k);
        }
    }

    fn compute_shortest_path(&mut self) {
        while let Some((k_old, u)) = self.top() {
            let si = self.idx(self.start);
            if k_old >= self.key(self.start) && self.rhs[si] == self.g[si] {
                break;
            }
            self.heap.pop();
            let ui = self.idx(u);
            self.open[ui] = None;
            self.expansions += 1;
            let k_new = self.key(u);
            if k_old < k_new {
                self.push(u, k_new);
            } else if self.g[ui] > self.rhs[ui] {
                self.g[ui] = self.rhs[ui];
                for s in u.neighbors(self.width, self.height) {
                    self.update_vertex(s);
                }
            } else {
                self.g[ui] = INF;
                self.update_vertex(u);
                for s in u.neighbors(self.width, self.height) {
                    self.update_vertex(s);
                }
            }
        }
    }

    fn extract(&self) -> Result<Path, PlanError> {
        let no_path = PlanError::NoPath {
            from: self.start,
            to: self.goal,
        };
        if self.g[self.idx(self.start)] >= INF || self.blocked[self.idx(self.goal)] {
            return Err(no_path);
        }
        let mut cells = vec![self.start];
        let mut cur = self.start;
        let limit = self.g.len();
        while cur != self.goal {
            let mut best: Option<(i64, Cell)> = None;
            for s in cur.neighbors(self.width, self.height) {
                let c = self.cost(cur, s);
                if c >= INF {
                    continue;
                }
                let v = c + self.g[self.idx(s)];
                if best.is_none_or(|b| (v, s) < b) {
                    best = Some((v, s));
                }
            }
            match best {
                Some((v, s)) if v < INF => {
                    cur = s;
                    cells.push(s);
                }
                _ => return Err(no_path),
            }
            if cells.len() > limit {
                return Err(no_path);
            }
        }
        Ok(Path::new(cells))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::astar;
    use crate::world::{CellState, GridMap, LocalMapCache};

    fn reveal(map: &mut LocalMapCache, cells: &[Cell], t: f64) -> ObservationDelta {
        let d = ObservationDelta {
            revealed: cells.iter().map(|&c| (c, CellState::Obstacle)).collect(),
            timestamp: t,
        };
        map.apply(&d);
        d
    }

    #[test]
    fn initial_plan_matches_astar() {
        let map = GridMap::with_obstacles(8, 8, (1..7).map(|y| Cell::new(4, y)));
        let (s, g) = (Cell::new(0, 4), Cell::new(7, 4));
        let mut d = DStarLite::new(&map, s, g).unwrap();
        let p = d.plan().unwrap();
        assert_eq!(p.cost(), astar(&map, s, g, 1.0).unwrap().cost());
        assert!(d.consistent_outside_open());
    }

    #[test]
    fn empty_delta_keeps_cost() {
        let local = LocalMapCache::unknown(10, 10);
        let (s, g) = (Cell::new(0, 0), Cell::new(9, 9));
        let mut d = DStarLite::new(&local, s, g).unwrap();
        let before = d.plan().unwrap().cost();
        let after = d.replan(&local, s, &ObservationDelta::empty(1.0)).unwrap().cost();
        assert_eq!(before, after);
    }

    #[test]
    fn off_path_obstacle_keeps_cost() {
        let mut local = LocalMapCache::unknown(10, 10);
        let (s, g) = (Cell::new(0, 0), Cell::new(9, 0));
        let mut d = DStarLite::new(&local, s, g).unwrap();
        let p = d.plan().unwrap();
        assert_eq!(p.cost(), 9);
        let delta = reveal(&mut local, &[Cell::new(5, 7)], 1.0);
        assert_eq!(d.replan(&local, s, &delta).unwrap().cost(), 9);
    }

    #[test]
    fn blocking_obstacle_matches_fresh_astar() {
        let mut local = LocalMapCache::unknown(10, 10);
        let (s, g) = (Cell::new(0, 0), Cell::new(9, 0));
        let mut d = DStarLite::new(&local, s, g).unwrap();
        d.plan().unwrap();
        let wall: Vec<Cell> = (0..6).map(|y| Cell::new(4, y)).collect();
        let delta = reveal(&mut local, &wall, 1.0);
        let cur = Cell::new(1, 0);
        let p = d.replan(&local, cur, &delta).unwrap();
        assert_eq!(p.start(), cur);
        assert_eq!(p.cost(), astar(&local, cur, g, 1.0).unwrap().cost());
        assert!(p.cells().iter().all(|c| !local.is_known_obstacle(*c)));
        assert!(d.consistent_outside_open());
    }

    #[test]
    fn enclosed_goal_is_no_path() {
        let mut local = LocalMapCache::unknown(5, 5);
        let (s, g) = (Cell::new(0, 0), Cell::new(2, 2));
        let mut d = DStarLite::new(&local, s, g).unwrap();
        d.plan().unwrap();
        let ring = [Cell::new(2, 1), Cell::new(1, 2), Cell::new(3, 2), Cell::new(2, 3)];
        let delta = reveal(&mut local, &ring, 1.0);
        assert!(matches!(d.replan(&local, s, &delta), Err(PlanError::NoPath { .. })));
    }
}
