//! Scenario files: JSON configuration, validation, dotted-key overrides and
//! per-seed world generation.
//!
//! Top-level keys: `map`, `uavs`, `waypoints`, `link`, `costs`, `seed`,
//! `tools`, `agents`, `ga`, `sim`. Everything except `map`, `uavs` and
//! `waypoints` has defaults. Unknown keys are rejected.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path as FsPath;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agents::{ConstraintSet, PlannerKind, PlannerParams, ReflectionRules, UavConfig};
use crate::experiment::CostModel;
use crate::link::LinkParams;
use crate::planner::global::GaParams;
use crate::toolkit::{Registry, Tier, ToolDescriptor, ToolError};
use crate::world::{Cell, CellState, GridMap};

const REFERENCE: &str = include_str!("../scenarios/reference.json");
const GENERATION_ATTEMPTS: usize = 64;
const GENERATION_STREAM: u64 = 0x5eed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub width: u16,
    pub height: u16,
    #[serde(default)]
    pub obstacles: Option<Vec<Cell>>,
    #[serde(default)]
    pub obstacle_density: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavSpec {
    pub start: Cell,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomWaypoints {
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WaypointSpec {
    List(Vec<Cell>),
    Random(RandomWaypoints),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSettings {
    pub sensor_radius: u16,
    pub sync_interval: u32,
    pub heuristic_weight: f64,
    pub confidence_threshold: f64,
    pub sync_timeout: f64,
    pub energy_reserve_floor: f64,
    pub no_fly: Vec<Cell>,
    pub stm_capacity: usize,
    pub planner: PlannerKind,
    pub reflection: ReflectionRules,
}

impl Default for AgentSettings {
    fn default() -> Self {
        let p = PlannerParams::default();
        Self {
            sensor_radius: 3,
            sync_interval: p.sync_interval,
            heuristic_weight: p.heuristic_weight,
            confidence_threshold: p.confidence_threshold,
            sync_timeout: 2.0,
            energy_reserve_floor: 20.0,
            no_fly: Vec::new(),
            stm_capacity: crate::memory::DEFAULT_STM_CAPACITY,
            planner: PlannerKind::Dstar,
            reflection: ReflectionRules::default(),
        }
    }
}

impl AgentSettings {
    pub fn planner_params(&self) -> PlannerParams {
        PlannerParams {
            heuristic_weight: self.heuristic_weight,
            confidence_threshold: self.confidence_threshold,
            sync_interval: self.sync_interval,
        }
    }

    pub fn constraints(&self) -> ConstraintSet {
        ConstraintSet {
            no_fly: self.no_fly.iter().copied().collect(),
            energy_reserve_floor: self.energy_reserve_floor,
        }
    }

    pub fn uav_config(&self) -> UavConfig {
        UavConfig {
            sensor_radius: self.sensor_radius,
            planner: self.planner,
            stm_capacity: self.stm_capacity,
            params: self.planner_params(),
            constraints: self.constraints(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    pub tick_limit: u64,
    pub tick_seconds: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            tick_limit: 10_000,
            tick_seconds: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub map: MapConfig,
    pub uavs: Vec<UavSpec>,
    pub waypoints: WaypointSpec,
    #[serde(default)]
    pub link: LinkParams,
    #[serde(default)]
    pub costs: CostModel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tools")]
    pub tools: Vec<ToolDescriptor>,
    #[serde(default)]
    pub agents: AgentSettings,
    #[serde(default)]
    pub ga: GaParams,
    #[serde(default)]
    pub sim: SimSettings,
}

/// Roster used when a scenario does not declare `tools`.
pub fn default_tools() -> Vec<ToolDescriptor> {
    vec![
        ToolDescriptor::new("sensor_fusion", Tier::Onboard, &["perceive", "sensor"], 0.004, 0.02),
        ToolDescriptor::new("dstar_lite", Tier::Onboard, &["plan", "local", "dstar"], 0.008, 0.03),
        ToolDescriptor::new("astar", Tier::Onboard, &["plan", "local", "astar"], 0.010, 0.03),
        ToolDescriptor::new("flight_control", Tier::Onboard, &["actuate"], 0.002, 0.01),
        ToolDescriptor::new("ga_optimizer", Tier::Ground, &["plan", "global"], 0.12, 2.0),
    ]
}

/// One problem found while checking a scenario, tied to a field path such as `waypoints[3]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scenario: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("override {key:?}: {message}")]
    Override { key: String, message: String },
    #[error("world generation failed for seed {seed}: {message}")]
    Generation { seed: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            ScenarioError::Invalid(d) => d,
            _ => &[],
        }
    }
}

fn diag(path: impl Into<String>, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        path: path.into(),
        message: message.into(),
    }
}

/// Splits `"link.p_down: 2 not in [0, 1]"` style messages into a diagnostic.
fn diag_from(prefix: &str, msg: String) -> Diagnostic {
    match msg.split_once(": ") {
        Some((field, rest)) if !field.contains(' ') => {
            let field = field.rsplit('.').next().unwrap_or(field);
            diag(format!("{prefix}.{field}"), rest)
        }
        _ => diag(prefix, msg),
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Sets a documented key, e.g. `costs.t_llm=1.5` or `uavs.0.energy=500`.
    /// The value is read as JSON, falling back to a plain string.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), ScenarioError> {
        let err = |message: String| ScenarioError::Override {
            key: key.to_string(),
            message,
        };
        let parsed: Value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        let mut root = serde_json::to_value(&*self).expect("config serializes");
        let mut slot = &mut root;
        for part in key.split('.') {
            slot = match slot {
                Value::Object(map) => map.get_mut(part).ok_or_else(|| err(format!("unknown key {part:?}")))?,
                Value::Array(items) => {
                    let i: usize = part.parse().map_err(|_| err(format!("{part:?} is not an index")))?;
                    items.get_mut(i).ok_or_else(|| err(format!("index {i} out of range")))?
                }
                _ => return Err(err(format!("cannot descend into {part:?}"))),
            };
        }
        *slot = parsed;
        *self = serde_json::from_value(root).map_err(|e| err(e.to_string()))?;
        Ok(())
    }

    /// Every problem found; empty means valid.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let (w, h) = (self.map.width, self.map.height);
        if w < 2 || h < 2 {
            out.push(diag("map", format!("{w}x{h} is too small (minimum 2x2)")));
            return out;
        }
        let in_bounds = |c: Cell| c.x < w && c.y < h;
        match (&self.map.obstacles, self.map.obstacle_density) {
            (Some(_), Some(_)) => out.push(diag("map", "give either obstacles or obstacle_density, not both")),
            (None, Some(d)) if !(0.0..0.9).contains(&d) => {
                out.push(diag("map.obstacle_density", format!("{d} not in [0, 0.9)")))
            }
            _ => {}
        }
        let obstacles: BTreeSet<Cell> = self.map.obstacles.iter().flatten().copied().collect();
        for (i, &c) in self.map.obstacles.iter().flatten().enumerate() {
            if !in_bounds(c) {
                out.push(diag(format!("map.obstacles[{i}]"), format!("{c} is outside the map")));
            }
        }
        let no_fly: BTreeSet<Cell> = self.agents.no_fly.iter().copied().collect();
        for (i, &c) in self.agents.no_fly.iter().enumerate() {
            if !in_bounds(c) {
                out.push(diag(format!("agents.no_fly[{i}]"), format!("{c} is outside the map")));
            }
        }

        if self.uavs.is_empty() {
            out.push(diag("uavs", "at least one uav is required"));
        }
        let mut starts = BTreeSet::new();
        for (i, u) in self.uavs.iter().enumerate() {
            let p = format!("uavs[{i}]");
            if !in_bounds(u.start) {
                out.push(diag(format!("{p}.start"), format!("{} is outside the map", u.start)));
            } else if obstacles.contains(&u.start) {
                out.push(diag(format!("{p}.start"), format!("{} is an obstacle", u.start)));
            } else if no_fly.contains(&u.start) {
                out.push(diag(format!("{p}.start"), format!("{} is a no-fly cell", u.start)));
            }
            if !starts.insert(u.start) {
                out.push(diag(format!("{p}.start"), format!("{} is shared with another uav", u.start)));
            }
            if !(u.energy > 0.0 && u.energy.is_finite()) {
                out.push(diag(format!("{p}.energy"), format!("{} must be positive", u.energy)));
            } else if u.energy <= self.agents.energy_reserve_floor {
                out.push(diag(
                    format!("{p}.energy"),
                    format!("{} does not exceed the reserve floor {}", u.energy, self.agents.energy_reserve_floor),
                ));
            }
        }

        let free_cells = usize::from(w) * usize::from(h);
        match &self.waypoints {
            WaypointSpec::Random(r) => {
                if r.count > free_cells / 2 {
                    out.push(diag("waypoints.count", format!("{} is more than half the map", r.count)));
                }
            }
            WaypointSpec::List(list) => {
                let mut seen = BTreeSet::new();
                for (i, &c) in list.iter().enumerate() {
                    let p = format!("waypoints[{i}]");
                    if !in_bounds(c) {
                        out.push(diag(p, format!("{c} is outside the map")));
                    } else if obstacles.contains(&c) {
                        out.push(diag(p, format!("{c} is on an obstacle")));
                    } else if no_fly.contains(&c) {
                        out.push(diag(p, format!("{c} is a no-fly cell")));
                    } else if starts.contains(&c) {
                        out.push(diag(p, format!("{c} is a uav start")));
                    } else if !seen.insert(c) {
                        out.push(diag(p, format!("{c} is a duplicate")));
                    }
                }
            }
        }

        // Reachability can only be checked up front when the obstacles are explicit.
        if out.is_empty() && self.map.obstacle_density.is_none() {
            let map = GridMap::with_obstacles(w, h, obstacles.iter().copied());
            let reach = reachable(&map, &no_fly, self.uavs[0].start);
            for (i, u) in self.uavs.iter().enumerate().skip(1) {
                if !reach.contains(&u.start) {
                    out.push(diag(format!("uavs[{i}].start"), "not connected to uavs[0]"));
                }
            }
            if let WaypointSpec::List(list) = &self.waypoints {
                for (i, c) in list.iter().enumerate() {
                    if !reach.contains(c) {
                        out.push(diag(format!("waypoints[{i}]"), format!("{c} is unreachable")));
                    }
                }
            }
        }

        if let Err(e) = self.link.validate() {
            out.push(diag_from("link", e));
        }
        if let Err(e) = self.costs.validate() {
            out.push(diag_from("costs", e));
        }
        if let Err(e) = self.ga.validate() {
            out.push(diag_from("ga", e));
        }
        if let Err(e) = self.agents.planner_params().validate() {
            out.push(diag_from("agents", e));
        }
        if self.agents.sensor_radius == 0 {
            out.push(diag("agents.sensor_radius", "must be at least 1"));
        }
        if !(self.agents.sync_timeout >= 0.0 && self.agents.sync_timeout.is_finite()) {
            out.push(diag("agents.sync_timeout", "must be non-negative"));
        }
        if self.agents.energy_reserve_floor.is_nan() || self.agents.energy_reserve_floor < 0.0 {
            out.push(diag("agents.energy_reserve_floor", "must be non-negative"));
        }
        if self.agents.stm_capacity == 0 {
            out.push(diag("agents.stm_capacity", "must be at least 1"));
        }
        if self.sim.tick_limit == 0 {
            out.push(diag("sim.tick_limit", "must be at least 1"));
        }
        if !(self.sim.tick_seconds > 0.0 && self.sim.tick_seconds.is_finite()) {
            out.push(diag("sim.tick_seconds", "must be positive"));
        }
        let mut names = BTreeSet::new();
        for (i, t) in self.tools.iter().enumerate() {
            if !names.insert(t.name.as_str()) {
                out.push(diag(format!("tools[{i}].name"), format!("duplicate tool name {:?}", t.name)));
            }
            if let Err(ToolError::InvalidDescriptor { reason, .. }) = Registry::from_tools([t.clone()]) {
                out.push(diag(format!("tools[{i}]"), reason));
            }
        }
        out
    }
}

/// Cells reachable from `from` avoiding obstacles and `no_fly`.
fn reachable(map: &GridMap, no_fly: &BTreeSet<Cell>, from: Cell) -> BTreeSet<Cell> {
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(c) = queue.pop_front() {
        for nb in c.neighbors(map.width(), map.height()) {
            if !map.is_obstacle(nb) && !no_fly.contains(&nb) && seen.insert(nb) {
                queue.push_back(nb);
            }
        }
    }
    seen
}

/// A validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    config: ScenarioConfig,
    registry: Registry,
}

/// The concrete world for one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub map: GridMap,
    pub starts: Vec<Cell>,
    pub energies: Vec<f64>,
    pub waypoints: Vec<Cell>,
    pub no_fly: BTreeSet<Cell>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self, ScenarioError> {
        let d = config.diagnostics();
        if !d.is_empty() {
            return Err(ScenarioError::Invalid(d));
        }
        let registry = Registry::from_tools(config.tools.iter().cloned()).map_err(|e| {
            ScenarioError::Invalid(vec![diag("tools", e.to_string())])
        })?;
        Ok(Self { config, registry })
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        Self::new(ScenarioConfig::parse(text)?)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self, ScenarioError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// 64x64, 10% obstacles, four corner UAVs, 24 waypoints.
    pub fn reference() -> Self {
        Self::parse(REFERENCE).expect("bundled reference scenario is valid")
    }

    pub fn reference_config() -> ScenarioConfig {
        ScenarioConfig::parse(REFERENCE).expect("bundled reference scenario parses")
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// Returns a copy with `key=value` applied and revalidated.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self, ScenarioError> {
        let mut c = self.config.clone();
        c.apply_override(key, value)?;
        Self::new(c)
    }

    pub fn instantiate(&self, seed: u64) -> Result<World, ScenarioError> {
        let c = &self.config;
        let (w, h) = (c.map.width, c.map.height);
        let starts: Vec<Cell> = c.uavs.iter().map(|u| u.start).collect();
        let start_set: BTreeSet<Cell> = starts.iter().copied().collect();
        let no_fly: BTreeSet<Cell> = c.agents.no_fly.iter().copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(GENERATION_STREAM);
        let gen_err = |message: String| ScenarioError::Generation { seed, message };

        for _ in 0..GENERATION_ATTEMPTS {
            let map = match (&c.map.obstacles, c.map.obstacle_density) {
                (Some(obs), _) => GridMap::with_obstacles(w, h, obs.iter().copied()),
                (None, density) => {
                    let d = density.unwrap_or(0.0);
                    let mut m = GridMap::new(w, h);
                    for y in 0..h {
                        for x in 0..w {
                            let cell = Cell::new(x, y);
                            // One draw per cell keeps the layout stable under start changes.
                            let blocked = rng.gen::<f64>() < d;
                            if blocked && !start_set.contains(&cell) {
                                m.set(cell, CellState::Obstacle);
                            }
                        }
                    }
                    m
                }
            };
            let reach = reachable(&map, &no_fly, starts[0]);
            if starts.iter().any(|s| !reach.contains(s)) {
                if c.map.obstacles.is_some() {
                    return Err(gen_err("uav starts are not connected".into()));
                }
                continue;
            }
            let waypoints = match &c.waypoints {
                WaypointSpec::List(list) => {
                    if let Some(bad) = list.iter().find(|wp| !reach.contains(wp)) {
                        if c.map.obstacles.is_some() {
                            return Err(gen_err(format!("waypoint {bad} is unreachable")));
                        }
                        continue;
                    }
                    list.clone()
                }
                WaypointSpec::Random(r) => {
                    let candidates: Vec<Cell> = reach.iter().copied().filter(|c| !start_set.contains(c)).collect();
                    if candidates.len() < r.count {
                        continue;
                    }
                    candidates.choose_multiple(&mut rng, r.count).copied().collect()
                }
            };
            return Ok(World {
                map,
                starts,
                energies: c.uavs.iter().map(|u| u.energy).collect(),
                waypoints,
                no_fly,
            });
        }
        Err(gen_err(format!("no connected layout after {GENERATION_ATTEMPTS} attempts")))
    }
}
