mod common;

use common::{audit, trajectories};
use lawnsim::agents::SyncOutcome;
use lawnsim::experiment::{compare, parse_csv, run, run_with_log, sweep, write_csv, write_sweep_csv, Mode};
use lawnsim::scenario::Scenario;

fn tiny(extra: &str) -> Scenario {
    Scenario::parse(&format!(
        r#"{{
            "map": {{"width": 6, "height": 6, "obstacles": []}},
            "uavs": [{{"start": [2, 2], "energy": 500}}],
            "waypoints": [[3, 2]],
            "link": {{"p_down": 0.0, "p_up": 1.0}}
            {extra}
        }}"#
    ))
    .unwrap()
}

fn reference_with(overrides: &[(&str, &str)]) -> Scenario {
    let mut s = Scenario::reference();
    for (k, v) in overrides {
        s = s.with_override(k, v).unwrap();
    }
    s
}

#[test]
fn adjacent_waypoint_takes_one_step_in_every_mode() {
    let s = tiny("");
    for mode in Mode::ALL {
        let r = run(&s, mode, 0).unwrap();
        assert!(r.mission_complete, "{mode}");
        assert_eq!(r.aggregate.trajectory_length, 1, "{mode}");
        assert_eq!(r.aggregate.waypoints_completed, 1, "{mode}");
    }
}

#[test]
fn local_mode_never_uses_the_link() {
    for seed in 0..3 {
        let r = run(&Scenario::reference(), Mode::LSlm, seed).unwrap();
        assert_eq!((r.aggregate.uplink_bytes, r.aggregate.downlink_bytes), (0, 0));
        assert_eq!(r.sync_attempts, 0);
    }
}

#[test]
fn offloading_uses_the_most_uplink() {
    let s = Scenario::reference();
    for seed in 0..3 {
        let g = run(&s, Mode::GLlm, seed).unwrap().aggregate.uplink_bytes;
        let c = run(&s, Mode::SlmLlm, seed).unwrap().aggregate.uplink_bytes;
        assert!(g > c && c > 0, "seed {seed}: g-llm {g}, slm-llm {c}");
    }
}

#[test]
fn reports_are_reproducible() {
    let s = Scenario::reference();
    for mode in Mode::ALL {
        assert_eq!(run(&s, mode, 4).unwrap().to_json(), run(&s, mode, 4).unwrap().to_json(), "{mode}");
    }
}

#[test]
fn latency_and_energy_decompose_exactly() {
    let s = Scenario::reference();
    for mode in Mode::ALL {
        let out = run_with_log(&s, mode, 2).unwrap();
        for d in &out.log.decisions {
            let l = d.latency;
            assert_eq!(d.total, l.inference + l.tool + l.transfer + l.waiting);
        }
        for u in &out.report.uavs {
            let mine: Vec<f64> = out.log.decisions.iter().filter(|d| d.uav == u.uav_id).map(|d| d.total).collect();
            assert_eq!(mine.len(), u.decisions as usize);
            let mean = mine.iter().sum::<f64>() / mine.len() as f64;
            assert!((mean - u.mean_latency).abs() < 1e-9, "{mode}");
            assert_eq!(mine.iter().copied().fold(0.0, f64::max), u.max_latency);

            let b = u.energy_breakdown;
            assert_eq!(u.energy, b.inference + b.flight + b.hover + b.transmit + b.tool);
            let initial = s.config().uavs[u.uav_id as usize].energy;
            assert!((initial - u.energy_remaining - u.energy).abs() < 1e-6, "{mode} uav {}", u.uav_id);
        }
        let a = &out.report.aggregate;
        assert_eq!(a.trajectory_length, out.report.uavs.iter().map(|u| u.trajectory_length).sum::<u64>());
        assert_eq!(a.waypoints_completed, out.report.waypoints_total);
    }
}

#[test]
fn collaborative_decisions_stay_within_the_timeout_bound() {
    let s = Scenario::reference();
    let tau = s.config().agents.sync_timeout;
    let out = run_with_log(&s, Mode::SlmLlm, 3).unwrap();
    for d in &out.log.decisions {
        assert_eq!(d.latency.inference, s.config().costs.t_slm);
        assert!(d.latency.transfer + d.latency.waiting <= tau + 1e-9, "{d:?}");
        if d.sync.is_none() {
            assert_eq!(d.latency.transfer + d.latency.waiting, 0.0);
        }
    }
}

#[test]
fn sync_cadence_follows_the_interval() {
    for k in [1u32, 4, 9] {
        let s = reference_with(&[("agents.sync_interval", &k.to_string())]);
        let out = run_with_log(&s, Mode::SlmLlm, 1).unwrap();
        for u in &out.report.uavs {
            let counts: Vec<u32> = out.log.syncs.iter().filter(|r| r.uav == u.uav_id).map(|r| r.decision_count).collect();
            let expected: Vec<u32> = (1..=u.decisions / k).map(|i| i * k).collect();
            assert_eq!(counts, expected, "K={k} uav {}", u.uav_id);
        }
    }
}

#[test]
fn summaries_compress_their_windows() {
    for seed in 0..3 {
        let r = run(&Scenario::reference(), Mode::SlmLlm, seed).unwrap();
        assert!(r.summary_bytes * 5 <= r.raw_window_bytes, "{} vs {}", r.summary_bytes, r.raw_window_bytes);
    }
}

#[test]
fn no_unsafe_moves_in_any_mode() {
    for mode in Mode::ALL {
        for seed in 0..3 {
            let out = run_with_log(&Scenario::reference(), mode, seed).unwrap();
            assert_eq!(audit(&out), Vec::<String>::new());
        }
    }
}

#[test]
fn full_outage_isolates_the_base_station() {
    let s = reference_with(&[("link.outage", r#"{"start_tick": 0}"#)]);
    for seed in 0..3 {
        let local = run_with_log(&s, Mode::LSlm, seed).unwrap();
        let collab = run_with_log(&s, Mode::SlmLlm, seed).unwrap();
        assert_eq!(trajectories(&local), trajectories(&collab));
        assert!(collab.log.syncs.iter().all(|r| r.outcome == SyncOutcome::Sent));
        let offload = run_with_log(&s.with_override("sim.tick_limit", "300").unwrap(), Mode::GLlm, seed).unwrap();
        assert_eq!(offload.report.aggregate.waypoints_completed, 0);
        assert_eq!(offload.report.aggregate.trajectory_length, 0);
        assert!(offload.report.tick_limit_exceeded);
    }
}

#[test]
fn late_outage_freezes_offloaded_progress() {
    let s = reference_with(&[("link.outage", r#"{"start_tick": 40}"#), ("sim.tick_limit", "400")]);
    let out = run_with_log(&s, Mode::GLlm, 0).unwrap();
    assert!(!out.log.completions.is_empty());
    assert!(out.log.completions.iter().all(|c| c.tick < 40));
    let collab = run(&s, Mode::SlmLlm, 0).unwrap();
    assert!(collab.mission_complete);
}

#[test]
fn tick_limit_is_reported_not_raised() {
    let r = run(&reference_with(&[("sim.tick_limit", "5")]), Mode::LSlm, 0).unwrap();
    assert!(r.tick_limit_exceeded && !r.mission_complete);
    assert_eq!(r.ticks, 5);
}

#[test]
fn exhausted_uav_drops_out_without_stopping_the_run() {
    // Its waypoints are never reassigned, so the others idle until the tick limit.
    let s = reference_with(&[("uavs.0.energy", "40"), ("sim.tick_limit", "1000")]);
    let r = run(&s, Mode::LSlm, 0).unwrap();
    assert!(r.uavs[0].failed || r.uavs[0].energy_remaining >= s.config().agents.energy_reserve_floor);
    assert!(r.uavs[1..].iter().all(|u| !u.failed));
    assert!(r.uavs[1].decisions > r.uavs[0].decisions);
}

#[test]
fn comparison_csv_has_run_and_aggregate_rows() {
    let table = compare(&Scenario::reference(), &Mode::ALL, &[0, 1]);
    assert!(table.errors.is_empty());
    let runs = table.rows.iter().filter(|r| r.seed.parse::<u64>().is_ok()).count();
    let aggregates = table.rows.iter().filter(|r| r.seed == "mean" || r.seed == "std").count();
    assert_eq!((runs, aggregates), (6, 6));
    assert!(!table.verdicts.low_confidence);

    let mut buf = Vec::new();
    write_csv(&mut buf, &table.rows).unwrap();
    assert_eq!(parse_csv(buf.as_slice()).unwrap(), table.rows);

    let single = compare(&Scenario::reference(), &Mode::ALL, &[0]);
    assert!(single.verdicts.low_confidence);
    assert!(single.verdict_lines().iter().all(|l| l.contains("low confidence")));
}

#[test]
fn sweeping_sync_interval_yields_one_block_per_value() {
    let axes = vec![("agents.sync_interval".to_string(), vec!["1".into(), "9".into(), "27".into()])];
    let points = sweep(&Scenario::reference(), &axes, &[Mode::SlmLlm], &[0]).unwrap();
    assert_eq!(points.len(), 3);
    let syncs: Vec<u64> = points.iter().map(|p| p.table.reports[0].sync_attempts).collect();
    assert!(syncs[0] > syncs[1] && syncs[1] > syncs[2], "{syncs:?}");
    let mut buf = Vec::new();
    write_sweep_csv(&mut buf, &points).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("sweep,mode,seed,"));
    assert!(text.contains("agents.sync_interval=27,slm-llm,0,all"));
}

#[test]
fn worse_links_do_not_speed_up_collaboration() {
    let axes = vec![("link.p_down".to_string(), vec!["0".into(), "0.05".into(), "0.5".into()])];
    let seeds: Vec<u64> = (0..8).collect();
    let points = sweep(&Scenario::reference(), &axes, &[Mode::SlmLlm], &seeds).unwrap();
    let lat: Vec<f64> = points.iter().map(|p| p.table.modes[&Mode::SlmLlm].mean_latency).collect();
    assert!(lat.windows(2).all(|w| w[0] <= w[1]), "{lat:?}");
}
