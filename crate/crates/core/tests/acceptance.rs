//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

mod common;

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::{audit, bfs_cost, brute_force_oracle, exhaustive_topk, random_free_cell, random_map, trajectories};
use lawnsim::experiment::{compare, run, run_with_log, ComparisonTable, Mode};
use lawnsim::planner::global::{ga_assign, GaParams};
use lawnsim::planner::{astar, DStarLite};
use lawnsim::scenario::Scenario;
use lawnsim::toolkit::{Registry, Tier, TierConstraint, ToolDescriptor, ToolQuery};
use lawnsim::world::{Cell, CellState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const SEEDS: std::ops::Range<u64> = 0..20;

fn report(name: &str, ok: bool, detail: String) {
    // Written to the raw handle so the line shows up even when output is captured.
    let line = format!("{} {name}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "{name}: {detail}");
}

fn reference_comparison() -> &'static (ComparisonTable, Duration) {
    static TABLE: OnceLock<(ComparisonTable, Duration)> = OnceLock::new();
    TABLE.get_or_init(|| {
        let t = Instant::now();
        let seeds: Vec<u64> = SEEDS.collect();
        let table = compare(&Scenario::reference(), &Mode::ALL, &seeds);
        (table, t.elapsed())
    })
}

#[test]
fn c01_latency_ordering() {
    let (table, took) = reference_comparison();
    let lat = |m| table.modes[&m].mean_latency;
    let (l, s, g) = (lat(Mode::LSlm), lat(Mode::SlmLlm), lat(Mode::GLlm));
    let ok = table.errors.is_empty()
        && l < s
        && s < g
        && (s - l) > 0.1 * l
        && (g - s) > 0.1 * s
        && *took < Duration::from_secs(60);
    report(
        "latency l-slm < slm-llm < g-llm (gaps >10%)",
        ok,
        format!("l-slm {l:.4} slm-llm {s:.4} g-llm {g:.4} over {} seeds in {took:.1?}", SEEDS.end),
    );
}

#[test]
fn c02_trajectory_ordering() {
    let (table, _) = reference_comparison();
    let len = |m| table.modes[&m].trajectory_length;
    let (l, s, g) = (len(Mode::LSlm), len(Mode::SlmLlm), len(Mode::GLlm));
    let ok = table.errors.is_empty() && g <= s && s <= l && g <= 0.95 * l;
    report(
        "trajectory g-llm <= slm-llm <= l-slm, g-llm >=5% shorter",
        ok,
        format!("g-llm {g:.1} slm-llm {s:.1} l-slm {l:.1} ({:.1}% shorter)", 100.0 * (1.0 - g / l)),
    );
}

#[test]
fn c03_sync_cadence() {
    let s = Scenario::reference();
    let k = s.config().agents.sync_interval;
    let bad: Vec<String> = SEEDS
        .into_par_iter()
        .flat_map_iter(|seed| {
            let out = run_with_log(&s, Mode::SlmLlm, seed).unwrap();
            let mut bad = Vec::new();
            for u in &out.report.uavs {
                let got: Vec<u32> =
                    out.log.syncs.iter().filter(|r| r.uav == u.uav_id).map(|r| r.decision_count).collect();
                let want: Vec<u32> = (1..=u.decisions / k).map(|i| i * k).collect();
                if got != want || got.is_empty() {
                    bad.push(format!("seed {seed} uav {}: {got:?}", u.uav_id));
                }
            }
            bad
        })
        .collect();
    report("sync at decisions 9, 18, 27, ...", bad.is_empty(), format!("{} seeds, mismatches {bad:?}", SEEDS.end));
}

#[test]
fn c04_full_outage() {
    let t = Instant::now();
    let from_start = Scenario::reference().with_override("link.outage", r#"{"start_tick": 0}"#).unwrap();
    let late = Scenario::reference()
        .with_override("link.outage", r#"{"start_tick": 30}"#)
        .unwrap()
        .with_override("sim.tick_limit", "400")
        .unwrap();
    let seeds = 0..5u64;
    let results: Vec<(bool, u64, u64)> = seeds
        .clone()
        .into_par_iter()
        .map(|seed| {
            let local = run_with_log(&from_start, Mode::LSlm, seed).unwrap();
            let collab = run_with_log(&from_start, Mode::SlmLlm, seed).unwrap();
            let offload = run_with_log(&late, Mode::GLlm, seed).unwrap();
            let after = offload.log.completions.iter().filter(|c| c.tick >= 30).count() as u64;
            let before = offload.log.completions.len() as u64 - after;
            (trajectories(&local) == trajectories(&collab), after, before)
        })
        .collect();
    let identical = results.iter().all(|r| r.0);
    let after: u64 = results.iter().map(|r| r.1).sum();
    let before: u64 = results.iter().map(|r| r.2).sum();
    let took = t.elapsed();
    report(
        "full outage: slm-llm == l-slm, g-llm frozen",
        identical && after == 0 && took < Duration::from_secs(10),
        format!("identical {identical}, g-llm completions before/after outage {before}/{after}, {took:.1?}"),
    );
}

#[test]
fn c05_planner_oracles() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut astar_bad = 0;
    for _ in 0..200 {
        let (w, h) = (rng.gen_range(2..=16), rng.gen_range(2..=16));
        let density = rng.gen_range(0.0..0.35);
        let map = random_map(&mut rng, w, h, density);
        let (s, g) = (random_free_cell(&mut rng, &map), random_free_cell(&mut rng, &map));
        if astar(&map, s, g, 1.0).ok().map(|p| p.cost()) != bfs_cost(&map, s, g) {
            astar_bad += 1;
        }
    }
    let (mut replans, mut dstar_bad, mut scenarios) = (0, 0, 0);
    while scenarios < 100 {
        let mut map = random_map(&mut rng, 16, 16, 0.2);
        let (start, goal) = (random_free_cell(&mut rng, &map), random_free_cell(&mut rng, &map));
        if bfs_cost(&map, start, goal).is_none() || start == goal {
            continue;
        }
        scenarios += 1;
        let mut d = DStarLite::new(&map, start, goal).unwrap();
        let mut cur = start;
        let first = d.plan().unwrap();
        if Some(first.cost()) != bfs_cost(&map, start, goal) {
            dstar_bad += 1;
        }
        for _ in 0..8 {
            let mut changed = Vec::new();
            for _ in 0..3 {
                let c = Cell::new(rng.gen_range(0..16), rng.gen_range(0..16));
                if c != cur && c != goal {
                    let s = if map.is_obstacle(c) { CellState::Free } else { CellState::Obstacle };
                    map.set(c, s);
                    changed.push(c);
                }
            }
            replans += 1;
            let got = d.replan_cells(&map, cur, &changed).ok();
            if got.as_ref().map(|p| p.cost()) != bfs_cost(&map, cur, goal) {
                dstar_bad += 1;
            }
            match got {
                Some(p) if p.cost() > 0 => cur = p.next_step(),
                _ => break,
            }
        }
    }
    let took = t.elapsed();
    report(
        "planner oracles (A* vs BFS, D* vs fresh search)",
        astar_bad == 0 && dstar_bad == 0 && took < Duration::from_secs(20),
        format!("A* mismatches {astar_bad}/200, D* mismatches {dstar_bad}/{replans} replans over {scenarios} scenarios, {took:.1?}"),
    );
}

#[test]
fn c06_ga_quality() {
    let t = Instant::now();
    let instances: Vec<u64> = (0..50).collect();
    let results: Vec<(u64, u64)> = instances
        .par_iter()
        .map(|&i| {
            let mut rng = ChaCha8Rng::seed_from_u64(7000 + i);
            loop {
                let map = random_map(&mut rng, 16, 16, 0.15);
                let uavs = [random_free_cell(&mut rng, &map), random_free_cell(&mut rng, &map)];
                let mut wps: Vec<Cell> = Vec::new();
                while wps.len() < 6 {
                    let c = random_free_cell(&mut rng, &map);
                    if !wps.contains(&c) && !uavs.contains(&c) {
                        wps.push(c);
                    }
                }
                let Some(best) = brute_force_oracle(&map, &uavs, &wps) else { continue };
                let params = GaParams { seed: i, ..GaParams::default() };
                let ga = ga_assign(&map, &uavs, &wps, &params).unwrap();
                return (ga.objective, best);
            }
        })
        .collect();
    let within = results.iter().filter(|(g, b)| *g as f64 <= *b as f64 * 1.05).count();
    let equal = results.iter().filter(|(g, b)| g == b).count();
    let took = t.elapsed();
    report(
        "GA vs brute force (2 UAVs, 6 waypoints, 16x16)",
        within == 50 && equal >= 45 && took < Duration::from_secs(60),
        format!("within 5%: {within}/50, optimal: {equal}/50, {took:.1?}"),
    );
}

#[test]
fn c07_compression() {
    let s = Scenario::reference();
    let ratios: Vec<(u64, f64)> = SEEDS
        .into_par_iter()
        .map(|seed| {
            let r = run(&s, Mode::SlmLlm, seed).unwrap();
            (seed, r.summary_bytes as f64 / r.raw_window_bytes as f64)
        })
        .collect();
    let worst = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    report(
        "summary bytes <= 0.20 x raw window bytes",
        ratios.iter().all(|(_, r)| *r <= 0.20),
        format!("worst ratio {worst:.4} over {} seeds", ratios.len()),
    );
}

#[test]
fn c08_consistency() {
    let s = Scenario::reference();
    let jobs: Vec<(Mode, u64)> = Mode::ALL.iter().flat_map(|&m| SEEDS.map(move |seed| (m, seed))).collect();
    let violations: Vec<String> = jobs
        .par_iter()
        .flat_map_iter(|&(m, seed)| audit(&run_with_log(&s, m, seed).unwrap()).into_iter().map(move |v| format!("{m} seed {seed}: {v}")))
        .collect();
    report(
        "no moves into no-fly/obstacles, energy >= floor",
        violations.is_empty(),
        format!("{} runs audited, {} violations {:?}", jobs.len(), violations.len(), violations.iter().take(3).collect::<Vec<_>>()),
    );
}

#[test]
fn c09_tool_retrieval() {
    let t = Instant::now();
    let tags = ["plan", "local", "global", "perceive", "actuate", "memory", "network"];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut checked, mut bad) = (0, 0);
    for _ in 0..50 {
        let size = rng.gen_range(1..80);
        let tools = (0..size).map(|i| {
            let tier = if rng.gen_bool(0.5) { Tier::Onboard } else { Tier::Ground };
            let mine: Vec<&str> = tags.iter().copied().filter(|_| rng.gen_bool(0.35)).collect();
            ToolDescriptor::new(&format!("tool{i}"), tier, &mine, f64::from(rng.gen_range(0..6)) * 0.01, f64::from(rng.gen_range(0..4)))
                .with_floor(f64::from(rng.gen_range(0..5)) * 10.0)
        });
        let reg = Registry::from_tools(tools).unwrap();
        for _ in 0..20 {
            let q_tags: Vec<&str> = tags.iter().copied().filter(|_| rng.gen_bool(0.2)).collect();
            let tier = [TierConstraint::Onboard, TierConstraint::Ground, TierConstraint::Any][rng.gen_range(0..3)];
            let q = ToolQuery::new(&q_tags, tier, f64::from(rng.gen_range(0..60)), rng.gen_range(0..8));
            let got: Vec<String> = reg.select_topk(&q).into_iter().map(|t| t.name.clone()).collect();
            checked += 1;
            bad += usize::from(got != exhaustive_topk(reg.tools(), &q));
        }
    }
    let took = t.elapsed();
    report(
        "select_topk == exhaustive scan",
        bad == 0 && took < Duration::from_secs(5),
        format!("{bad} mismatches in {checked} queries, {took:.1?}"),
    );
}

#[test]
fn c10_determinism() {
    let t = Instant::now();
    let s = Scenario::reference();
    let jobs: Vec<(Mode, u64)> = Mode::ALL.iter().flat_map(|&m| (0..6u64).map(move |seed| (m, seed))).collect();
    let differing: Vec<String> = jobs
        .par_iter()
        .filter(|&&(m, seed)| run(&s, m, seed).unwrap().to_json() != run(&s, m, seed).unwrap().to_json())
        .map(|(m, seed)| format!("{m}/{seed}"))
        .collect();
    let took = t.elapsed();
    report(
        "byte-identical repeated runs",
        differing.is_empty() && took < Duration::from_secs(30),
        format!("{} pairs, differing {differing:?}, {took:.1?}", jobs.len()),
    );
}
