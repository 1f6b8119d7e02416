use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Path, PlanError};
use crate::world::{Cell, Traversable};

#[derive(PartialEq)]
struct Open {
    f: f64,
    cell: Cell,
}

impl Eq for Open {}

impl Ord for Open {
    // Reversed: BinaryHeap is a max-heap and we want the smallest (f, y, x).
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Weighted A* with a Manhattan heuristic over a 4-connected grid.
///
/// With `heuristic_weight == 1` the returned cost is optimal; with `w > 1` it
/// is at most `w` times optimal. Equal keys are expanded in `(y, x)` order so
/// the returned path, not just its cost, is deterministic.
pub fn astar(map: &impl Traversable, start: Cell, goal: Cell, heuristic_weight: f64) -> Result<Path, PlanError> {
    for c in [start, goal] {
        if !map.contains(c) {
            return Err(PlanError::OutOfBounds(c));
        }
    }
    if map.blocked(start) {
        return Err(PlanError::StartBlocked(start));
    }
    if map.blocked(goal) {
        return Err(PlanError::NoPath { from: start, to: goal });
    }
    let w = heuristic_weight.max(1.0);
    let width = usize::from(map.width());
    let n = width * usize::from(map.height());
    let idx = |c: Cell| usize::from(c.y) * width + usize::from(c.x);

    let mut g = vec![u32::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    g[idx(start)] = 0;
    open.push(Open {
        f: w * f64::from(start.manhattan(goal)),
        cell: start,
    });

    while let Some(Open { cell, .. }) = open.pop() {
        let ci = idx(cell);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        if cell == goal {
            let mut cells = vec![goal];
            let mut i = ci;
            while parent[i] != usize::MAX {
                i = parent[i];
                cells.push(Cell::new((i % width) as u16, (i / width) as u16));
            }
            cells.reverse();
            return Ok(Path::new(cells));
        }
        let gc = g[ci];
        for nb in cell.neighbors(map.width(), map.height()) {
            let ni = idx(nb);
            if closed[ni] || map.blocked(nb) {
                continue;
            }
            let tentative = gc + 1;
            if tentative < g[ni] {
                g[ni] = tentative;
                parent[ni] = ci;
                open.push(Open {
                    f: f64::from(tentative) + w * f64::from(nb.manhattan(goal)),
                    cell: nb,
                });
            }
        }
    }
    Err(PlanError::NoPath { from: start, to: goal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{GridMap, KnownState, LocalMapCache, ObservationDelta};

    #[test]
    fn start_equals_goal() {
        let map = GridMap::new(3, 3);
        let p = astar(&map, Cell::new(1, 1), Cell::new(1, 1), 1.0).unwrap();
        assert_eq!(p.cost(), 0);
        assert_eq!(p.cells(), &[Cell::new(1, 1)]);
    }

    #[test]
    fn empty_map_is_manhattan() {
        let map = GridMap::new(5, 5);
        let p = astar(&map, Cell::new(0, 0), Cell::new(4, 4), 1.0).unwrap();
        assert_eq!(p.cost(), 8);
        assert_eq!(p.start(), Cell::new(0, 0));
        assert_eq!(p.goal(), Cell::new(4, 4));
    }

    #[test]
    fn wall_detour() {
        // Column 2 blocked on rows 0..=3; the only gap is row 4.
        let map = GridMap::with_obstacles(5, 5, (0..4).map(|y| Cell::new(2, y)));
        let p = astar(&map, Cell::new(0, 0), Cell::new(4, 0), 1.0).unwrap();
        // Down 4, across 4, up 4.
        assert_eq!(p.cost(), 12);
        assert!(p.cells().iter().all(|c| !map.is_obstacle(*c)));
    }

    #[test]
    fn unknown_cells_are_traversable() {
        let mut local = LocalMapCache::unknown(5, 1);
        let p = astar(&local, Cell::new(0, 0), Cell::new(4, 0), 1.0).unwrap();
        assert_eq!(p.cost(), 4);
        local.apply(&ObservationDelta {
            revealed: vec![(Cell::new(2, 0), crate::world::CellState::Obstacle)],
            timestamp: 0.0,
        });
        assert_eq!(local.get(Cell::new(2, 0)), KnownState::Obstacle);
        assert!(matches!(
            astar(&local, Cell::new(0, 0), Cell::new(4, 0), 1.0),
            Err(PlanError::NoPath { .. })
        ));
    }

    #[test]
    fn blocked_start_and_out_of_bounds() {
        let map = GridMap::with_obstacles(3, 3, [Cell::new(0, 0)]);
        assert_eq!(
            astar(&map, Cell::new(0, 0), Cell::new(2, 2), 1.0),
            Err(PlanError::StartBlocked(Cell::new(0, 0)))
        );
        assert_eq!(
            astar(&map, Cell::new(1, 1), Cell::new(3, 0), 1.0),
            Err(PlanError::OutOfBounds(Cell::new(3, 0)))
        );
    }

    #[test]
    fn paths_are_deterministic() {
        let map = GridMap::new(6, 6);
        let a = astar(&map, Cell::new(0, 0), Cell::new(5, 5), 1.0).unwrap();
        let b = astar(&map, Cell::new(0, 0), Cell::new(5, 5), 1.0).unwrap();
        assert_eq!(a, b);
    }
}
