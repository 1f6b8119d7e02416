//! Running the three collaboration modes and comparing them.
//!
//! * `l-slm`: local greedy selection + fast planner, no link use.
//! * `g-llm`: every decision is a round trip to the base station.
//! * `slm-llm`: local loop with a summary/strategy-update exchange every `K` decisions.

mod sim;
mod table;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use sim::{run, run_with_log, ActionRecord, CompletionRecord, DecisionRecord, EventLog, RunOutput, SyncRecord, ToolRecord};
pub use table::{
    parse_csv, rows_for_report, sweep, sweep_points, write_csv, write_sweep_csv, ComparisonTable, ModeStats, SweepPoint,
    TableRow, Verdicts, CSV_HEADER, SWEEP_POINT_LIMIT,
};

use crate::agents::EnergyParts;
use crate::scenario::{Scenario, ScenarioError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostModel {
    pub t_slm: f64,
    pub t_llm: f64,
    pub e_slm: f64,
    pub e_llm: f64,
    pub e_flight: f64,
    pub e_hover: f64,
    pub e_tx: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            t_slm: 0.05,
            t_llm: 0.8,
            e_slm: 0.2,
            e_llm: 8.0,
            e_flight: 1.0,
            e_hover: 0.1,
            e_tx: 0.001,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), String> {
        for (k, v) in [
            ("t_slm", self.t_slm),
            ("t_llm", self.t_llm),
            ("e_slm", self.e_slm),
            ("e_llm", self.e_llm),
            ("e_flight", self.e_flight),
            ("e_hover", self.e_hover),
            ("e_tx", self.e_tx),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("costs.{k}: {v} must be a finite non-negative number"));
            }
        }
        if self.t_slm >= self.t_llm {
            return Err(format!("costs.t_slm: {} must be below t_llm {}", self.t_slm, self.t_llm));
        }
        if self.e_slm >= self.e_llm {
            return Err(format!("costs.e_slm: {} must be below e_llm {}", self.e_slm, self.e_llm));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "l-slm")]
    LSlm,
    #[serde(rename = "g-llm")]
    GLlm,
    #[serde(rename = "slm-llm")]
    SlmLlm,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::LSlm, Mode::SlmLlm, Mode::GLlm];

    pub fn name(self) -> &'static str {
        match self {
            Mode::LSlm => "l-slm",
            Mode::GLlm => "g-llm",
            Mode::SlmLlm => "slm-llm",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "l-slm" => Ok(Mode::LSlm),
            "g-llm" => Ok(Mode::GLlm),
            "slm-llm" => Ok(Mode::SlmLlm),
            _ => Err(format!("unknown mode {s:?} (expected l-slm, g-llm or slm-llm)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("base station planning failed: {0}")]
    Planning(#[from] crate::planner::global::GlobalPlanError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UavReport {
    pub uav_id: u32,
    pub trajectory_length: u64,
    pub decisions: u32,
    pub mean_latency: f64,
    pub max_latency: f64,
    pub energy: f64,
    pub energy_breakdown: EnergyParts,
    pub energy_remaining: f64,
    pub uplink_bytes: u64,
    pub downlink_bytes: u64,
    pub fallback_count: u32,
    pub waypoints_completed: u32,
    pub mission_time: f64,
    pub failed: bool,
}

/// Sums over UAVs, except `mean_latency` (mean of per-UAV means) and
/// `max_latency` / `mission_time` (maxima).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trajectory_length: u64,
    pub decisions: u64,
    pub mean_latency: f64,
    pub max_latency: f64,
    pub energy: f64,
    pub uplink_bytes: u64,
    pub downlink_bytes: u64,
    pub fallback_count: u64,
    pub waypoints_completed: u64,
    pub mission_time: f64,
}

impl Aggregate {
    pub fn of(uavs: &[UavReport]) -> Self {
        let n = uavs.len().max(1) as f64;
        Self {
            trajectory_length: uavs.iter().map(|u| u.trajectory_length).sum(),
            decisions: uavs.iter().map(|u| u64::from(u.decisions)).sum(),
            mean_latency: uavs.iter().map(|u| u.mean_latency).sum::<f64>() / n,
            max_latency: uavs.iter().map(|u| u.max_latency).fold(0.0, f64::max),
            energy: uavs.iter().map(|u| u.energy).sum(),
            uplink_bytes: uavs.iter().map(|u| u.uplink_bytes).sum(),
            downlink_bytes: uavs.iter().map(|u| u.downlink_bytes).sum(),
            fallback_count: uavs.iter().map(|u| u64::from(u.fallback_count)).sum(),
            waypoints_completed: uavs.iter().map(|u| u64::from(u.waypoints_completed)).sum(),
            mission_time: uavs.iter().map(|u| u.mission_time).fold(0.0, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub seed: u64,
    pub ticks: u64,
    pub mission_complete: bool,
    pub tick_limit_exceeded: bool,
    pub waypoints_total: u64,
    pub uavs: Vec<UavReport>,
    pub aggregate: Aggregate,
    pub bs_energy: f64,
    pub bs_plans: u32,
    pub collab_requests: u64,
    pub sync_attempts: u64,
    pub summary_bytes: u64,
    pub raw_window_bytes: u64,
    pub link_dropped: u64,
    pub errors: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs every `(mode, seed)` pair, in parallel, and tabulates the results.
pub fn compare(scenario: &Scenario, modes: &[Mode], seeds: &[u64]) -> ComparisonTable {
    let mut jobs: Vec<(Mode, u64)> = modes.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    jobs.sort();
    jobs.dedup();
    let results: Vec<(Mode, u64, Result<RunReport, String>)> = jobs
        .par_iter()
        .map(|&(m, s)| (m, s, run(scenario, m, s).map_err(|e| e.to_string())))
        .collect();
    ComparisonTable::from_results(results)
}
