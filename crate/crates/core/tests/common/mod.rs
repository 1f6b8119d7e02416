//! Independent oracles shared by the integration tests. Nothing here calls
//! into the planners or the registry it is used to check.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use lawnsim::agents::Action;
use lawnsim::experiment::RunOutput;
use lawnsim::toolkit::{Tier, TierConstraint, ToolDescriptor, ToolQuery};
use lawnsim::world::{Cell, GridMap};
use rand::Rng;

pub fn random_map(rng: &mut impl Rng, w: u16, h: u16, density: f64) -> GridMap {
    let mut obstacles = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if rng.gen::<f64>() < density {
                obstacles.push(Cell::new(x, y));
            }
        }
    }
    GridMap::with_obstacles(w, h, obstacles)
}

pub fn random_free_cell(rng: &mut impl Rng, map: &GridMap) -> Cell {
    loop {
        let c = Cell::new(rng.gen_range(0..map.width()), rng.gen_range(0..map.height()));
        if !map.is_obstacle(c) {
            return c;
        }
    }
}

fn neighbours(map: &GridMap, c: Cell) -> Vec<Cell> {
    let (x, y) = (i32::from(c.x), i32::from(c.y));
    [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)]
        .into_iter()
        .filter(|&(nx, ny)| nx >= 0 && ny >= 0 && nx < i32::from(map.width()) && ny < i32::from(map.height()))
        .map(|(nx, ny)| Cell::new(nx as u16, ny as u16))
        .filter(|&n| !map.is_obstacle(n))
        .collect()
}

/// Plain breadth-first search over free cells.
pub fn bfs_cost(map: &GridMap, from: Cell, to: Cell) -> Option<u32> {
    if map.is_obstacle(from) || map.is_obstacle(to) {
        return None;
    }
    let mut dist = vec![u32::MAX; map.width() as usize * map.height() as usize];
    let idx = |c: Cell| c.y as usize * map.width() as usize + c.x as usize;
    dist[idx(from)] = 0;
    let mut q = VecDeque::from([from]);
    while let Some(c) = q.pop_front() {
        if c == to {
            return Some(dist[idx(c)]);
        }
        for n in neighbours(map, c) {
            if dist[idx(n)] == u32::MAX {
                dist[idx(n)] = dist[idx(c)] + 1;
                q.push_back(n);
            }
        }
    }
    None
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Optimal total route length: every owner labelling of the waypoints,
/// every visiting order per UAV.
pub fn brute_force_oracle(map: &GridMap, uavs: &[Cell], wps: &[Cell]) -> Option<u64> {
    let n = uavs.len();
    let m = wps.len();
    let points: Vec<Cell> = uavs.iter().chain(wps).copied().collect();
    let mut dist = std::collections::BTreeMap::new();
    for &a in &points {
        for &b in &points {
            dist.insert((a, b), bfs_cost(map, a, b).map(u64::from));
        }
    }
    let d = |a: Cell, b: Cell| dist[&(a, b)];
    let mut best: Option<u64> = None;
    for labelling in 0..n.pow(m as u32) {
        let mut owned = vec![Vec::new(); n];
        let mut l = labelling;
        for j in 0..m {
            owned[l % n].push(j);
            l /= n;
        }
        let mut total = 0u64;
        for (u, items) in owned.iter().enumerate() {
            let mut best_route: Option<u64> = None;
            for perm in permutations(items) {
                let mut cur = uavs[u];
                let mut len = 0u64;
                for &j in &perm {
                    len += d(cur, wps[j])?;
                    cur = wps[j];
                }
                best_route = Some(best_route.map_or(len, |b| b.min(len)));
            }
            total += best_route.unwrap_or(0);
        }
        best = Some(best.map_or(total, |b| b.min(total)));
    }
    best
}

/// Every tool that satisfies the query, by a linear scan, best first.
pub fn exhaustive_topk(tools: &[ToolDescriptor], q: &ToolQuery) -> Vec<String> {
    let mut hits: Vec<&ToolDescriptor> = tools
        .iter()
        .filter(|t| {
            let tier_ok = match q.tier_constraint {
                TierConstraint::Any => true,
                TierConstraint::Onboard => t.tier == Tier::Onboard,
                TierConstraint::Ground => t.tier == Tier::Ground,
            };
            tier_ok && t.resource_floor <= q.available_energy && q.required_tags.is_subset(&t.tags)
        })
        .collect();
    hits.sort_by(|a, b| {
        a.latency_cost
            .partial_cmp(&b.latency_cost)
            .unwrap()
            .then(a.energy_cost.partial_cmp(&b.energy_cost).unwrap())
            .then(a.name.cmp(&b.name))
    });
    hits.into_iter().take(q.k).map(|t| t.name.clone()).collect()
}

/// Replays the action log against the true world and reports every move
/// into an obstacle or no-fly cell, every non-adjacent move, and every
/// decision that left the UAV below its reserve floor.
pub fn audit(out: &RunOutput) -> Vec<String> {
    let no_fly: &BTreeSet<Cell> = &out.world.no_fly;
    let mut v = Vec::new();
    for a in &out.log.actions {
        if let Action::Move { from, to } = a.action {
            if out.world.map.is_obstacle(to) {
                v.push(format!("tick {} uav {}: moved into obstacle {to:?}", a.tick, a.uav));
            }
            if no_fly.contains(&to) {
                v.push(format!("tick {} uav {}: moved into no-fly {to:?}", a.tick, a.uav));
            }
            if from.manhattan(to) != 1 {
                v.push(format!("tick {} uav {}: jump {from:?} -> {to:?}", a.tick, a.uav));
            }
            if a.energy_after < a.floor - 1e-9 {
                v.push(format!("tick {} uav {}: energy {} below floor {}", a.tick, a.uav, a.energy_after, a.floor));
            }
        }
    }
    v
}

/// Per-UAV cell sequence visited by executed moves.
pub fn trajectories(out: &RunOutput) -> Vec<Vec<Cell>> {
    let n = out.report.uavs.len();
    let mut t = vec![Vec::new(); n];
    for a in &out.log.actions {
        if let Action::Move { to, .. } = a.action {
            t[a.uav as usize].push(to);
        }
    }
    t
}
