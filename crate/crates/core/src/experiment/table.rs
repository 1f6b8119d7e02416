use std::collections::BTreeMap;
use std::io;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use super::{compare, Mode, RunReport};
use crate::scenario::{Scenario, ScenarioError};

pub const CSV_HEADER: [&str; 12] = [
    "mode",
    "seed",
    "uav_id",
    "traj_len",
    "mean_latency",
    "max_latency",
    "energy",
    "uplink_bytes",
    "downlink_bytes",
    "fallbacks",
    "waypoints_done",
    "mission_time",
];

/// Most sweep points accepted without an explicit override.
pub const SWEEP_POINT_LIMIT: usize = 256;

/// One CSV row. `seed` is `mean`/`std` and `uav_id` is `all` on aggregate rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub mode: String,
    pub seed: String,
    pub uav_id: String,
    pub traj_len: f64,
    pub mean_latency: f64,
    pub max_latency: f64,
    pub energy: f64,
    pub uplink_bytes: f64,
    pub downlink_bytes: f64,
    pub fallbacks: f64,
    pub waypoints_done: f64,
    pub mission_time: f64,
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

impl TableRow {
    fn metrics(&self) -> [f64; 9] {
        [
            self.traj_len,
            self.mean_latency,
            self.max_latency,
            self.energy,
            self.uplink_bytes,
            self.downlink_bytes,
            self.fallbacks,
            self.waypoints_done,
            self.mission_time,
        ]
    }

    fn from_metrics(mode: &str, seed: &str, uav_id: &str, m: [f64; 9]) -> Self {
        let m = m.map(round6);
        Self {
            mode: mode.to_string(),
            seed: seed.to_string(),
            uav_id: uav_id.to_string(),
            traj_len: m[0],
            mean_latency: m[1],
            max_latency: m[2],
            energy: m[3],
            uplink_bytes: m[4],
            downlink_bytes: m[5],
            fallbacks: m[6],
            waypoints_done: m[7],
            mission_time: m[8],
        }
    }

    fn record(&self) -> Vec<String> {
        let mut r = vec![self.mode.clone(), self.seed.clone(), self.uav_id.clone()];
        r.extend(self.metrics().iter().map(|v| format!("{v:.6}")));
        r
    }
}

/// Per-UAV rows followed by the run-level `all` row.
pub fn rows_for_report(report: &RunReport) -> Vec<TableRow> {
    let mode = report.mode.name();
    let seed = report.seed.to_string();
    let mut rows: Vec<TableRow> = report
        .uavs
        .iter()
        .map(|u| {
            TableRow::from_metrics(
                mode,
                &seed,
                &u.uav_id.to_string(),
                [
                    u.trajectory_length as f64,
                    u.mean_latency,
                    u.max_latency,
                    u.energy,
                    u.uplink_bytes as f64,
                    u.downlink_bytes as f64,
                    f64::from(u.fallback_count),
                    f64::from(u.waypoints_completed),
                    u.mission_time,
                ],
            )
        })
        .collect();
    rows.push(run_row(report));
    rows
}

fn run_row(report: &RunReport) -> TableRow {
    let a = &report.aggregate;
    TableRow::from_metrics(
        report.mode.name(),
        &report.seed.to_string(),
        "all",
        [
            a.trajectory_length as f64,
            a.mean_latency,
            a.max_latency,
            a.energy,
            a.uplink_bytes as f64,
            a.downlink_bytes as f64,
            a.fallback_count as f64,
            a.waypoints_completed as f64,
            a.mission_time,
        ],
    )
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    /// l-slm < slm-llm < g-llm on mean latency.
    pub latency_order: Option<bool>,
    /// g-llm <= slm-llm <= l-slm on mean trajectory length.
    pub length_order: Option<bool>,
    /// Fewer than two seeds per mode.
    pub low_confidence: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeStats {
    pub runs: usize,
    pub mean_latency: f64,
    pub trajectory_length: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<TableRow>,
    pub modes: BTreeMap<Mode, ModeStats>,
    pub verdicts: Verdicts,
    pub errors: Vec<String>,
    #[serde(skip)]
    pub reports: Vec<RunReport>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl ComparisonTable {
    pub fn from_results(mut results: Vec<(Mode, u64, Result<RunReport, String>)>) -> Self {
        results.sort_by_key(|(m, s, _)| (*m, *s));
        let mut table = ComparisonTable::default();
        for (mode, seed, r) in results {
            match r {
                Ok(report) => table.reports.push(report),
                Err(e) => table.errors.push(format!("{mode} seed {seed}: {e}")),
            }
        }
        for (mode, group) in &table.reports.iter().chunk_by(|r| r.mode) {
            let runs: Vec<TableRow> = group.map(run_row).collect();
            let columns: Vec<[f64; 9]> = runs.iter().map(TableRow::metrics).collect();
            let mut mean = [0.0; 9];
            let mut std = [0.0; 9];
            for k in 0..9 {
                let xs: Vec<f64> = columns.iter().map(|c| c[k]).collect();
                (mean[k], std[k]) = mean_std(&xs);
            }
            table.modes.insert(
                mode,
                ModeStats {
                    runs: runs.len(),
                    mean_latency: mean[1],
                    trajectory_length: mean[0],
                },
            );
            table.rows.extend(runs);
            table.rows.push(TableRow::from_metrics(mode.name(), "mean", "all", mean));
            table.rows.push(TableRow::from_metrics(mode.name(), "std", "all", std));
        }
        let get = |m: Mode| table.modes.get(&m);
        if let (Some(l), Some(s), Some(g)) = (get(Mode::LSlm), get(Mode::SlmLlm), get(Mode::GLlm)) {
            table.verdicts.latency_order = Some(l.mean_latency < s.mean_latency && s.mean_latency < g.mean_latency);
            table.verdicts.length_order =
                Some(g.trajectory_length <= s.trajectory_length && s.trajectory_length <= l.trajectory_length);
        }
        table.verdicts.low_confidence = table.modes.values().any(|m| m.runs < 2);
        table
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    /// `PASS`/`FAIL` lines for the two orderings.
    pub fn verdict_lines(&self) -> Vec<String> {
        let flag = if self.verdicts.low_confidence { " (low confidence: n=1)" } else { "" };
        let line = |name: &str, v: Option<bool>| match v {
            Some(true) => format!("PASS {name}{flag}"),
            Some(false) => format!("FAIL {name}{flag}"),
            None => format!("SKIP {name} (needs all three modes)"),
        };
        vec![
            line("latency l-slm < slm-llm < g-llm", self.verdicts.latency_order),
            line("trajectory g-llm <= slm-llm <= l-slm", self.verdicts.length_order),
        ]
    }
}

pub fn write_csv(w: impl io::Write, rows: &[TableRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for row in rows {
        out.write_record(row.record())?;
    }
    out.flush()?;
    Ok(())
}

pub fn parse_csv(r: impl io::Read) -> csv::Result<Vec<TableRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub settings: Vec<(String, String)>,
    pub table: ComparisonTable,
}

impl SweepPoint {
    pub fn label(&self) -> String {
        self.settings.iter().map(|(k, v)| format!("{k}={v}")).join(";")
    }
}

/// Cartesian product of the axes, in axis order.
pub fn sweep_points(axes: &[(String, Vec<String>)]) -> Vec<Vec<(String, String)>> {
    axes.iter()
        .map(|(k, vs)| vs.iter().map(move |v| (k.clone(), v.clone())).collect::<Vec<_>>())
        .multi_cartesian_product()
        .collect()
}

pub fn sweep(
    scenario: &Scenario,
    axes: &[(String, Vec<String>)],
    modes: &[Mode],
    seeds: &[u64],
) -> Result<Vec<SweepPoint>, ScenarioError> {
    sweep_points(axes)
        .into_iter()
        .map(|settings| {
            let mut s = scenario.clone();
            for (k, v) in &settings {
                s = s.with_override(k, v)?;
            }
            Ok(SweepPoint {
                table: compare(&s, modes, seeds),
                settings,
            })
        })
        .collect()
}

/// Long format: a leading `sweep` column naming the point.
pub fn write_sweep_csv(w: impl io::Write, points: &[SweepPoint]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(std::iter::once("sweep").chain(CSV_HEADER))?;
    for p in points {
        let label = p.label();
        for row in &p.table.rows {
            out.write_record(std::iter::once(label.clone()).chain(row.record()))?;
        }
    }
    out.flush()?;
    Ok(())
}
