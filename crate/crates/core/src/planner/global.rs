//! Base-station waypoint assignment.
//!
//! Every planner here returns an [`Assignment`]: an ordered route per UAV
//! whose union is exactly the input waypoint set. The objective is the sum of
//! true-map shortest-path route lengths over all UAVs.

use std::collections::BTreeSet;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{astar, distance_field, PlanError, UNREACHABLE};
use crate::world::{Cell, Traversable};

pub const BRUTE_FORCE_MAX_WAYPOINTS: usize = 8;
pub const BRUTE_FORCE_MAX_UAVS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GlobalPlanError {
    #[error("waypoint {0} is unreachable")]
    Unreachable(Cell),
    #[error("infeasible instance: {0}")]
    Infeasible(String),
    #[error("instance too large for exhaustive search ({waypoints} waypoints, {uavs} uavs)")]
    TooLarge { waypoints: usize, uavs: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub routes: Vec<Vec<Cell>>,
    pub objective: u64,
}

impl Assignment {
    pub fn empty(uavs: usize) -> Self {
        Self {
            routes: vec![Vec::new(); uavs],
            objective: 0,
        }
    }

    /// True when every waypoint appears in exactly one route exactly once.
    pub fn is_partition_of(&self, waypoints: &[Cell]) -> bool {
        let mut all: Vec<Cell> = self.routes.iter().flatten().copied().collect();
        let mut expected = waypoints.to_vec();
        all.sort();
        expected.sort();
        all == expected
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population: 64,
            generations: 200,
            crossover_rate: 0.9,
            mutation_rate: 0.2,
            elitism: 2,
            seed: 0,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.population < 2 {
            return Err(format!("ga.population: {} < 2", self.population));
        }
        if self.generations < 1 {
            return Err("ga.generations: must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(format!("ga.crossover_rate: {} not in [0, 1]", self.crossover_rate));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(format!("ga.mutation_rate: {} not in [0, 1]", self.mutation_rate));
        }
        if self.elitism >= self.population {
            return Err(format!(
                "ga.elitism: {} must be below population {}",
                self.elitism, self.population
            ));
        }
        Ok(())
    }
}

/// Sum of A* leg lengths along `start -> wp1 -> wp2 -> ...` on the given map.
pub fn route_length(map: &impl Traversable, start: Cell, ordered_waypoints: &[Cell]) -> Result<u64, GlobalPlanError> {
    let mut total = 0u64;
    let mut from = start;
    for &wp in ordered_waypoints {
        let leg = astar(map, from, wp, 1.0).map_err(|_| GlobalPlanError::Unreachable(wp))?;
        total += u64::from(leg.cost());
        from = wp;
    }
    Ok(total)
}

/// Shortest-path distances between UAV starts and waypoints, computed once per planning call.
#[derive(Clone, Debug)]
pub struct DistanceTable {
    uavs: usize,
    waypoints: usize,
    from_uav: Vec<u32>,
    between: Vec<u32>,
}

impl DistanceTable {
    pub fn build(map: &impl Traversable, uav_positions: &[Cell], waypoints: &[Cell]) -> Result<Self, GlobalPlanError> {
        let width = usize::from(map.width());
        let idx = |c: Cell| usize::from(c.y) * width + usize::from(c.x);
        let m = waypoints.len();
        let mut from_uav = Vec::with_capacity(uav_positions.len() * m);
        for &u in uav_positions {
            if !map.contains(u) || map.blocked(u) {
                return Err(GlobalPlanError::Infeasible(format!("uav position {u} is blocked")));
            }
            let field = distance_field(map, u);
            for &wp in waypoints {
                if !map.contains(wp) {
                    return Err(GlobalPlanError::Unreachable(wp));
                }
                let d = field[idx(wp)];
                if d == UNREACHABLE {
                    return Err(GlobalPlanError::Unreachable(wp));
                }
                from_uav.push(d);
            }
        }
        let mut between = Vec::with_capacity(m * m);
        for &a in waypoints {
            let field = distance_field(map, a);
            for &b in waypoints {
                let d = field[idx(b)];
                if d == UNREACHABLE {
                    return Err(GlobalPlanError::Unreachable(b));
                }
                between.push(d);
            }
        }
        Ok(Self {
            uavs: uav_positions.len(),
            waypoints: m,
            from_uav,
            between,
        })
    }

    pub fn from_uav(&self, uav: usize, wp: usize) -> u32 {
        self.from_uav[uav * self.waypoints + wp]
    }

    pub fn between(&self, a: usize, b: usize) -> u32 {
        self.between[a * self.waypoints + b]
    }

    pub fn route(&self, uav: usize, order: &[usize]) -> u64 {
        let Some((&first, rest)) = order.split_first() else {
            return 0;
        };
        let mut total = u64::from(self.from_uav(uav, first));
        let mut prev = first;
        for &wp in rest {
            total += u64::from(self.between(prev, wp));
            prev = wp;
        }
        total
    }
}

fn check_instance(uav_positions: &[Cell], waypoints: &[Cell]) -> Result<(), GlobalPlanError> {
    if uav_positions.is_empty() {
        return Err(GlobalPlanError::Infeasible("no uavs".into()));
    }
    let unique: BTreeSet<Cell> = waypoints.iter().copied().collect();
    if unique.len() != waypoints.len() {
        return Err(GlobalPlanError::Infeasible("duplicate waypoints".into()));
    }
    Ok(())
}

fn to_assignment(routes_idx: &[Vec<usize>], waypoints: &[Cell], table: &DistanceTable) -> Assignment {
    let objective = routes_idx.iter().enumerate().map(|(u, r)| table.route(u, r)).sum();
    Assignment {
        routes: routes_idx
            .iter()
            .map(|r| r.iter().map(|&i| waypoints[i]).collect())
            .collect(),
        objective,
    }
}

/// Greedy baseline: repeatedly appends the unclaimed waypoint with the smallest
/// marginal distance from any UAV's current route end.
pub fn nearest_neighbor_assign(
    map: &impl Traversable,
    uav_positions: &[Cell],
    waypoints: &[Cell],
) -> Result<Assignment, GlobalPlanError> {
    check_instance(uav_positions, waypoints)?;
    let table = DistanceTable::build(map, uav_positions, waypoints)?;
    let routes = nearest_neighbor_routes(&table, waypoints);
    Ok(to_assignment(&routes, waypoints, &table))
}

fn nearest_neighbor_routes(table: &DistanceTable, waypoints: &[Cell]) -> Vec<Vec<usize>> {
    let mut routes: Vec<Vec<usize>> = vec![Vec::new(); table.uavs];
    let mut claimed = vec![false; table.waypoints];
    for _ in 0..table.waypoints {
        let (_, u, _, wp) = (0..table.uavs)
            .flat_map(|u| (0..table.waypoints).map(move |w| (u, w)))
            .filter(|&(_, w)| !claimed[w])
            .map(|(u, w)| {
                let d = match routes[u].last() {
                    Some(&end) => table.between(end, w),
                    None => table.from_uav(u, w),
                };
                (d, u, waypoints[w], w)
            })
            .min()
            .expect("an unclaimed waypoint remains");
        claimed[wp] = true;
        routes[u].push(wp);
    }
    routes
}

/// Exhaustive optimum over every partition and every visiting order.
pub fn brute_force_assign(
    map: &impl Traversable,
    uav_positions: &[Cell],
    waypoints: &[Cell],
) -> Result<Assignment, GlobalPlanError> {
    if waypoints.len() > BRUTE_FORCE_MAX_WAYPOINTS || uav_positions.len() > BRUTE_FORCE_MAX_UAVS {
        return Err(GlobalPlanError::TooLarge {
            waypoints: waypoints.len(),
            uavs: uav_positions.len(),
        });
    }
    check_instance(uav_positions, waypoints)?;
    let table = DistanceTable::build(map, uav_positions, waypoints)?;
    let m = waypoints.len();
    let n = uav_positions.len();

    // Best order for every (uav, subset) by trying all permutations of the subset.
    let subsets = 1usize << m;
    let mut best: Vec<Vec<(u64, Vec<usize>)>> = Vec::with_capacity(n);
    for u in 0..n {
        let mut per = Vec::with_capacity(subsets);
        for mask in 0..subsets {
            let members: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            let k = members.len();
            let mut choice = (u64::MAX, Vec::new());
            for perm in members.into_iter().permutations(k) {
                let cost = table.route(u, &perm);
                if cost < choice.0 {
                    choice = (cost, perm);
                }
            }
            per.push(choice);
        }
        best.push(per);
    }

    // Every map waypoint -> uav.
    let mut optimum: Option<(u64, Vec<usize>)> = None;
    let total = n.pow(m as u32);
    for code in 0..total {
        let mut masks = vec![0usize; n];
        let mut c = code;
        for wp in 0..m {
            masks[c % n] |= 1 << wp;
            c /= n;
        }
        let cost: u64 = (0..n).map(|u| best[u][masks[u]].0).sum();
        if optimum.as_ref().is_none_or(|(b, _)| cost < *b) {
            optimum = Some((cost, masks));
        }
    }
    let (_, masks) = optimum.expect("at least one assignment");
    let routes: Vec<Vec<usize>> = (0..n).map(|u| best[u][masks[u]].1.clone()).collect();
    Ok(to_assignment(&routes, waypoints, &table))
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Genome {
    order: Vec<usize>,
    cuts: Vec<usize>,
}

impl Genome {
    fn random(m: usize, n: usize, rng: &mut impl Rng) -> Self {
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(rng);
        let mut cuts: Vec<usize> = (1..n).map(|_| rng.gen_range(0..=m)).collect();
        cuts.sort_unstable();
        Self { order, cuts }
    }

    fn from_routes(routes: &[Vec<usize>]) -> Self {
        let mut order = Vec::new();
        let mut cuts = Vec::new();
        for (i, r) in routes.iter().enumerate() {
            if i > 0 {
                cuts.push(order.len());
            }
            order.extend_from_slice(r);
        }
        Self { order, cuts }
    }

    fn routes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(self.cuts.len() + 1);
        let mut lo = 0;
        for &c in &self.cuts {
            out.push(self.order[lo..c].to_vec());
            lo = c;
        }
        out.push(self.order[lo..].to_vec());
        out
    }

    fn fitness(&self, table: &DistanceTable) -> u64 {
        let mut lo = 0;
        let mut total = 0;
        for (u, &hi) in self.cuts.iter().chain(std::iter::once(&self.order.len())).enumerate() {
            total += table.route(u, &self.order[lo..hi]);
            lo = hi;
        }
        total
    }
}

/// Order crossover (OX1): copy a slice from `a`, fill the rest in `b`'s order.
fn order_crossover(a: &[usize], b: &[usize], rng: &mut impl Rng) -> Vec<usize> {
    let m = a.len();
    if m < 2 {
        return a.to_vec();
    }
    let mut i = rng.gen_range(0..m);
    let mut j = rng.gen_range(0..m);
    if i > j {
        std::mem::swap(&mut i, &mut j);
    }
    let mut child = vec![usize::MAX; m];
    let mut used = vec![false; m];
    for k in i..=j {
        child[k] = a[k];
        used[a[k]] = true;
    }
    let mut fill = b.iter().filter(|g| !used[**g]);
    for k in (0..m).filter(|k| *k < i || *k > j) {
        child[k] = *fill.next().expect("permutations have equal content");
    }
    child
}

/// Result of a GA run, including the best objective after every generation.
#[derive(Clone, Debug)]
pub struct GaRun {
    pub assignment: Assignment,
    pub best_per_generation: Vec<u64>,
    pub evaluations: u64,
}

pub fn ga_assign(
    map: &impl Traversable,
    uav_positions: &[Cell],
    waypoints: &[Cell],
    params: &GaParams,
) -> Result<Assignment, GlobalPlanError> {
    ga_assign_seeded(map, uav_positions, waypoints, params, None).map(|r| r.assignment)
}

/// Genetic assignment over a permutation-plus-split-points genome.
///
/// The initial population holds the nearest-neighbour solution, the
/// `incumbent` routes if given, and random genomes. At least one elite
/// survives each generation, so the best objective never increases.
pub fn ga_assign_seeded(
    map: &impl Traversable,
    uav_positions: &[Cell],
    waypoints: &[Cell],
    params: &GaParams,
    incumbent: Option<&[Vec<Cell>]>,
) -> Result<GaRun, GlobalPlanError> {
    check_instance(uav_positions, waypoints)?;
    params.validate().map_err(GlobalPlanError::Infeasible)?;
    let n = uav_positions.len();
    let m = waypoints.len();
    let table = DistanceTable::build(map, uav_positions, waypoints)?;
    if m == 0 {
        return Ok(GaRun {
            assignment: Assignment::empty(n),
            best_per_generation: vec![0; params.generations],
            evaluations: 0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut population: Vec<Genome> = Vec::with_capacity(params.population);
    population.push(Genome::from_routes(&nearest_neighbor_routes(&table, waypoints)));
    if let Some(routes) = incumbent.and_then(|r| incumbent_routes(r, waypoints, n)) {
        population.push(Genome::from_routes(&routes));
    }
    while population.len() < params.population {
        population.push(Genome::random(m, n, &mut rng));
    }
    let mut scored: Vec<(u64, Genome)> = population.into_iter().map(|g| (g.fitness(&table), g)).collect();
    let mut evaluations = scored.len() as u64;
    scored.sort_by_key(|s| s.0);

    let elites = params.elitism.max(1);
    let mut best_per_generation = Vec::with_capacity(params.generations);
    for _ in 0..params.generations {
        let mut next: Vec<(u64, Genome)> = scored[..elites].to_vec();
        let mut seen: BTreeSet<Genome> = next.iter().map(|(_, g)| g.clone()).collect();
        while next.len() < params.population {
            let a = tournament(&scored, &mut rng);
            let b = tournament(&scored, &mut rng);
            let mut child = if rng.gen_bool(params.crossover_rate) {
                Genome {
                    order: order_crossover(&a.order, &b.order, &mut rng),
                    cuts: if rng.gen_bool(0.5) { a.cuts.clone() } else { b.cuts.clone() },
                }
            } else {
                a.clone()
            };
            mutate(&mut child, params.mutation_rate, n, &mut rng);
            // Duplicates collapse diversity; nudge them, then fall back to an immigrant.
            let mut tries = 0;
            // Tiny instances have fewer distinct genomes than the population.
            while seen.contains(&child) && tries < 8 {
                tries += 1;
                if tries > 3 {
                    child = Genome::random(m, n, &mut rng);
                } else {
                    mutate(&mut child, 1.0, n, &mut rng);
                }
            }
            seen.insert(child.clone());
            let f = child.fitness(&table);
            evaluations += 1;
            next.push((f, child));
        }
        next.sort_by_key(|s| s.0);
        scored = next;
        best_per_generation.push(scored[0].0);
    }
    let assignment = to_assignment(&scored[0].1.routes(), waypoints, &table);
    debug_assert!(assignment.is_partition_of(waypoints));
    Ok(GaRun {
        assignment,
        best_per_generation,
        evaluations,
    })
}

/// Swap, segment inversion or relocation on the order; a cut shift or resample.
fn mutate(g: &mut Genome, rate: f64, n: usize, rng: &mut impl Rng) {
    let m = g.order.len();
    if m >= 2 && rng.gen_bool(rate) {
        let mut i = rng.gen_range(0..m);
        let mut j = rng.gen_range(0..m);
        match rng.gen_range(0..3) {
            0 => g.order.swap(i, j),
            1 => {
                if i > j {
                    std::mem::swap(&mut i, &mut j);
                }
                g.order[i..=j].reverse();
            }
            _ => {
                let x = g.order.remove(i);
                g.order.insert(j, x);
            }
        }
    }
    if n > 1 && rng.gen_bool(rate) {
        let k = rng.gen_range(0..g.cuts.len());
        g.cuts[k] = if rng.gen_bool(0.5) {
            let shifted = if rng.gen_bool(0.5) { g.cuts[k] + 1 } else { g.cuts[k].saturating_sub(1) };
            shifted.min(m)
        } else {
            rng.gen_range(0..=m)
        };
        g.cuts.sort_unstable();
    }
}

fn tournament<'a>(scored: &'a [(u64, Genome)], rng: &mut impl Rng) -> &'a Genome {
    let mut best = &scored[rng.gen_range(0..scored.len())];
    for _ in 1..3 {
        let c = &scored[rng.gen_range(0..scored.len())];
        if c.0 < best.0 {
            best = c;
        }
    }
    &best.1
}

/// Maps an incumbent cell assignment to waypoint indices, if it is a valid partition.
fn incumbent_routes(routes: &[Vec<Cell>], waypoints: &[Cell], n: usize) -> Option<Vec<Vec<usize>>> {
    if routes.len() != n {
        return None;
    }
    let mut seen = vec![false; waypoints.len()];
    let mut out = Vec::with_capacity(n);
    for r in routes {
        let mut idx = Vec::with_capacity(r.len());
        for c in r {
            let i = waypoints.iter().position(|w| w == c)?;
            if seen[i] {
                return None;
            }
            seen[i] = true;
            idx.push(i);
        }
        out.push(idx);
    }
    seen.iter().all(|s| *s).then_some(out)
}

impl From<PlanError> for GlobalPlanError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::NoPath { to, .. } => GlobalPlanError::Unreachable(to),
            other => GlobalPlanError::Infeasible(other.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::GridMap;

    #[test]
    fn route_length_examples() {
        let map = GridMap::new(5, 5);
        assert_eq!(route_length(&map, Cell::new(0, 0), &[]), Ok(0));
        assert_eq!(route_length(&map, Cell::new(0, 0), &[Cell::new(0, 3), Cell::new(3, 3)]), Ok(6));
    }

    #[test]
    fn route_length_unreachable() {
        let map = GridMap::with_obstacles(3, 3, [Cell::new(1, 0), Cell::new(1, 1), Cell::new(1, 2)]);
        assert_eq!(
            route_length(&map, Cell::new(0, 0), &[Cell::new(2, 2)]),
            Err(GlobalPlanError::Unreachable(Cell::new(2, 2)))
        );
    }

    #[test]
    fn ga_single_uav_single_waypoint() {
        let map = GridMap::new(6, 6);
        let a = ga_assign(&map, &[Cell::new(0, 0)], &[Cell::new(4, 3)], &GaParams::default()).unwrap();
        assert_eq!(a.routes, vec![vec![Cell::new(4, 3)]]);
        assert_eq!(a.objective, 7);
    }

    #[test]
    fn ga_mirrored_uavs_take_adjacent_waypoints() {
        let map = GridMap::new(10, 3);
        let uavs = [Cell::new(0, 1), Cell::new(9, 1)];
        let wps = [Cell::new(8, 1), Cell::new(1, 1)];
        let a = ga_assign(&map, &uavs, &wps, &GaParams::default()).unwrap();
        assert_eq!(a.routes, vec![vec![Cell::new(1, 1)], vec![Cell::new(8, 1)]]);
        assert_eq!(a.objective, 2);
    }

    #[test]
    fn ga_rejects_bad_params() {
        let map = GridMap::new(4, 4);
        let p = GaParams {
            elitism: 64,
            ..GaParams::default()
        };
        assert!(matches!(
            ga_assign(&map, &[Cell::new(0, 0)], &[Cell::new(1, 1)], &p),
            Err(GlobalPlanError::Infeasible(_))
        ));
        assert!(matches!(
            ga_assign(&map, &[], &[Cell::new(1, 1)], &GaParams::default()),
            Err(GlobalPlanError::Infeasible(_))
        ));
    }

    #[test]
    fn ga_zero_waypoints() {
        let map = GridMap::new(4, 4);
        let a = ga_assign(&map, &[Cell::new(0, 0), Cell::new(3, 3)], &[], &GaParams::default()).unwrap();
        assert_eq!(a, Assignment::empty(2));
    }

    #[test]
    fn brute_force_picks_cheaper_order() {
        let map = GridMap::new(8, 1);
        let a = brute_force_assign(&map, &[Cell::new(0, 0)], &[Cell::new(7, 0), Cell::new(2, 0)]).unwrap();
        assert_eq!(a.routes, vec![vec![Cell::new(2, 0), Cell::new(7, 0)]]);
        assert_eq!(a.objective, 7);
    }

    #[test]
    fn brute_force_no_waypoints() {
        let map = GridMap::new(4, 4);
        let a = brute_force_assign(&map, &[Cell::new(0, 0), Cell::new(1, 1)], &[]).unwrap();
        assert_eq!(a.objective, 0);
        assert_eq!(a.routes, vec![Vec::<Cell>::new(), Vec::new()]);
    }

    #[test]
    fn brute_force_guard_rail() {
        let map = GridMap::new(10, 10);
        let wps: Vec<Cell> = (0..9).map(|i| Cell::new(i, 5)).collect();
        assert!(matches!(
            brute_force_assign(&map, &[Cell::new(0, 0)], &wps),
            Err(GlobalPlanError::TooLarge { .. })
        ));
    }

    #[test]
    fn brute_force_golden_two_uavs_four_waypoints() {
        // Empty 8x8, UAVs at opposite corners, one waypoint near each corner.
        let map = GridMap::new(8, 8);
        let uavs = [Cell::new(0, 0), Cell::new(7, 7)];
        let wps = [Cell::new(1, 1), Cell::new(6, 6), Cell::new(0, 7), Cell::new(7, 0)];
        let a = brute_force_assign(&map, &uavs, &wps).unwrap();
        // Hand check: uav0 -> (1,1) -> (7,0) costs 2 + 7 = 9; uav1 -> (6,6) -> (0,7) costs 2 + 7 = 9.
        // Any split that sends one UAV to both far corners costs at least 2 + 12 = 14 for that UAV alone.
        assert_eq!(a.objective, 18);
        assert!(a.is_partition_of(&wps));
    }

    #[test]
    fn nearest_neighbor_visits_closer_first() {
        let map = GridMap::new(12, 1);
        let a = nearest_neighbor_assign(&map, &[Cell::new(0, 0)], &[Cell::new(9, 0), Cell::new(2, 0)]).unwrap();
        assert_eq!(a.routes, vec![vec![Cell::new(2, 0), Cell::new(9, 0)]]);
    }

    #[test]
    fn nearest_neighbor_symmetric_split() {
        let map = GridMap::new(11, 3);
        let uavs = [Cell::new(0, 1), Cell::new(10, 1)];
        let wps = [Cell::new(2, 1), Cell::new(8, 1), Cell::new(3, 0), Cell::new(7, 0)];
        let a = nearest_neighbor_assign(&map, &uavs, &wps).unwrap();
        assert_eq!(a.routes[0].len(), 2);
        assert_eq!(a.routes[1].len(), 2);
        assert!(a.routes[0].iter().all(|c| c.x < 5));
        assert!(a.routes[1].iter().all(|c| c.x > 5));
    }

    #[test]
    fn genome_round_trip() {
        let routes = vec![vec![2, 0], vec![], vec![1, 3]];
        let g = Genome::from_routes(&routes);
        assert_eq!(g.routes(), routes);
    }

    #[test]
    fn ox1_yields_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let mut a: Vec<usize> = (0..9).collect();
            let mut b = a.clone();
            a.shuffle(&mut rng);
            b.shuffle(&mut rng);
            let mut c = order_crossover(&a, &b, &mut rng);
            c.sort_unstable();
            assert_eq!(c, (0..9).collect::<Vec<_>>());
        }
    }
}
