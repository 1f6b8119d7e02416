use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    validate, validate_with_cost, BsAgent, CollabRequest, Command, ConstraintSet, FallbackReason, FullState,
    PlannerParams, StrategyUpdate, ValidationVerdict,
};
use crate::experiment::CostModel;
use crate::link::{Channel, DeliveryOutcome, Direction, Message, NodeId, Payload};
use crate::memory::{summarize, EntryPayload, EpisodeSummary, MemoryEntry, ShortTermMemory, SummaryContext};
use crate::planner::{astar, next_waypoint_greedy, DStarLite, Path, PlanError};
use crate::toolkit::{invoke, InvocationReceipt, Registry, TierConstraint};
use crate::world::{apply_move, observe, Cell, GridMap, KnownState, UavState, WithNoFly, WorldError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    #[default]
    Dstar,
    Astar,
}

impl PlannerKind {
    fn tag(self) -> &'static str {
        match self {
            PlannerKind::Dstar => "dstar",
            PlannerKind::Astar => "astar",
        }
    }
}

/// How the next target is chosen from the residual list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selection {
    /// Nearest residual waypoint by A* cost on the local map.
    Greedy,
    /// Residual list order, as handed down by the base station.
    Ordered,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Move { from: Cell, to: Cell },
    Hover { at: Cell },
    /// Hovering while an offloaded decision is outstanding. Not a decision.
    Wait { at: Cell },
}

impl Action {
    pub fn from(&self) -> Cell {
        match *self {
            Action::Move { from, .. } => from,
            Action::Hover { at } | Action::Wait { at } => at,
        }
    }

    pub fn to(&self) -> Cell {
        match *self {
            Action::Move { to, .. } => to,
            Action::Hover { at } | Action::Wait { at } => at,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyParts {
    pub inference: f64,
    pub tool: f64,
    pub transfer: f64,
    pub waiting: f64,
}

impl LatencyParts {
    pub fn total(&self) -> f64 {
        self.inference + self.tool + self.transfer + self.waiting
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    pub inference: f64,
    pub flight: f64,
    pub hover: f64,
    pub transmit: f64,
    pub tool: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.inference + self.flight + self.hover + self.transmit + self.tool
    }

    pub fn add(&mut self, o: &EnergyParts) {
        self.inference += o.inference;
        self.flight += o.flight;
        self.hover += o.hover;
        self.transmit += o.transmit;
        self.tool += o.tool;
    }
}

pub type ToolUse = InvocationReceipt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SyncOutcome {
    Skipped,
    Sent,
    SentAndApplied,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("mission failed: {0}")]
    MissionFailed(#[from] WorldError),
    #[error("uav {0} is no longer active")]
    Inactive(u32),
}

/// Result of one decision tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickOutcome {
    pub action: Action,
    pub verdict: Option<ValidationVerdict>,
    pub target: Option<Cell>,
    pub completed: Option<Cell>,
    pub latency: LatencyParts,
    pub energy: EnergyParts,
    pub tools: Vec<ToolUse>,
    pub collab: Option<CollabRequest>,
    pub decision_count: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UavConfig {
    pub sensor_radius: u16,
    pub planner: PlannerKind,
    pub stm_capacity: usize,
    pub params: PlannerParams,
    pub constraints: ConstraintSet,
}

impl Default for UavConfig {
    fn default() -> Self {
        Self {
            sensor_radius: 3,
            planner: PlannerKind::Dstar,
            stm_capacity: crate::memory::DEFAULT_STM_CAPACITY,
            params: PlannerParams::default(),
            constraints: ConstraintSet::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct UavAgent {
    pub state: UavState,
    pub constraints: ConstraintSet,
    pub stm: ShortTermMemory,
    pub selection: Selection,
    pub sensor_radius: u16,
    pub planner: PlannerKind,
    target: Option<Cell>,
    dstar: Option<DStarLite>,
    pending_changes: Vec<Cell>,
    sync_round: u32,
    bs_known: BTreeSet<Cell>,
    unacked: BTreeSet<Cell>,
    completed_unreported: Vec<Cell>,
    alive: bool,
    pub fallback_count: u32,
    pub waypoints_completed: u32,
    pub energy_used: EnergyParts,
}

impl UavAgent {
    pub fn new(id: u32, start: Cell, energy: f64, map: &GridMap, cfg: &UavConfig) -> Self {
        Self {
            state: UavState::new(id, start, energy, map.width(), map.height(), cfg.params.clone()),
            constraints: cfg.constraints.clone(),
            stm: ShortTermMemory::new(cfg.stm_capacity),
            selection: Selection::Greedy,
            sensor_radius: cfg.sensor_radius,
            planner: cfg.planner,
            target: None,
            dstar: None,
            pending_changes: Vec::new(),
            sync_round: 0,
            bs_known: BTreeSet::new(),
            unacked: BTreeSet::new(),
            completed_unreported: Vec::new(),
            alive: true,
            fallback_count: 0,
            waypoints_completed: 0,
            energy_used: EnergyParts::default(),
        }
    }

    pub fn with_waypoints(mut self, waypoints: Vec<Cell>) -> Self {
        self.state.residual_waypoints = waypoints;
        self
    }

    pub fn id(&self) -> u32 {
        self.state.id
    }

    pub fn is_alive(&self) -> bool {
        self.alive
    }

    pub fn target(&self) -> Option<Cell> {
        self.target
    }

    pub fn sync_round(&self) -> u32 {
        self.sync_round
    }

    pub fn params(&self) -> &PlannerParams {
        &self.state.params
    }

    fn fail(&mut self, e: WorldError) -> AgentError {
        self.alive = false;
        AgentError::MissionFailed(e)
    }

    fn spend(&mut self, amount: f64) -> Result<(), AgentError> {
        self.state.spend(amount).map_err(|e| self.fail(e))
    }

    /// Top-1 Onboard tool for `tags`; no match means the built-in operator runs for free.
    fn use_tool(&mut self, tools: &Registry, tags: &[&str], out: &mut TickOutcome) {
        let Some(tool) = tools.select_one(tags, TierConstraint::Onboard, self.state.energy) else {
            return;
        };
        if let Ok(r) = invoke(tool, &mut self.state) {
            out.latency.tool += r.latency_cost;
            out.energy.tool += r.energy_cost;
            out.tools.push(r);
        }
    }

    fn perceive(&mut self, world: &GridMap, now: f64) -> crate::world::ObservationDelta {
        let delta = observe(world, self.state.position, self.sensor_radius, now);
        let changed = self.state.local_map.apply(&delta);
        self.pending_changes.extend(changed);
        self.stm.record(MemoryEntry::new(
            now,
            EntryPayload::Observation {
                revealed: delta.revealed.clone(),
            },
        ));
        delta
    }

    fn select_target(&mut self) -> Result<Cell, PlanError> {
        if let Some(t) = self.target.filter(|t| self.state.residual_waypoints.contains(t)) {
            return Ok(t);
        }
        let t = match self.selection {
            Selection::Ordered => *self.state.residual_waypoints.first().ok_or(PlanError::NoWaypoints)?,
            Selection::Greedy => {
                let map = WithNoFly {
                    map: &self.state.local_map,
                    no_fly: &self.constraints.no_fly,
                };
                next_waypoint_greedy(
                    &map,
                    self.state.position,
                    &self.state.residual_waypoints,
                    self.state.params.heuristic_weight,
                )?
            }
        };
        self.target = Some(t);
        Ok(t)
    }

    fn plan_path(&mut self, target: Cell) -> Result<Path, PlanError> {
        let map = WithNoFly {
            map: &self.state.local_map,
            no_fly: &self.constraints.no_fly,
        };
        let pos = self.state.position;
        match self.planner {
            PlannerKind::Astar => astar(&map, pos, target, self.state.params.heuristic_weight),
            PlannerKind::Dstar => match &mut self.dstar {
                Some(d) if d.goal() == target => {
                    let changed = std::mem::take(&mut self.pending_changes);
                    d.replan_cells(&map, pos, &changed)
                }
                _ => {
                    self.pending_changes.clear();
                    let mut d = DStarLite::new(&map, pos, target)?;
                    let p = d.plan();
                    self.dstar = Some(d);
                    p
                }
            },
        }
    }

    fn hover(&mut self, costs: &CostModel, out: &mut TickOutcome) -> Result<(), AgentError> {
        let pos = self.state.position;
        let m = apply_move(&mut self.state, pos, costs).map_err(|e| self.fail(e))?;
        out.energy.hover += m.energy;
        out.action = Action::Hover { at: pos };
        Ok(())
    }

    /// Hover in place, remember the failure and prepare a collaboration request.
    pub fn handle_fallback(
        &mut self,
        reason: FallbackReason,
        costs: &CostModel,
        now: f64,
        out: &mut TickOutcome,
    ) -> Result<CollabRequest, AgentError> {
        self.hover(costs, out)?;
        self.fallback_count += 1;
        let at = self.state.position;
        self.stm.record(MemoryEntry::new(now, EntryPayload::Fallback { reason, at }));
        let req = CollabRequest {
            uav_id: self.state.id,
            reason,
            position: at,
            timestamp: now,
        };
        out.collab = Some(req.clone());
        Ok(req)
    }

    fn blank_outcome(&self) -> TickOutcome {
        TickOutcome {
            action: Action::Hover {
                at: self.state.position,
            },
            verdict: None,
            target: None,
            completed: None,
            latency: LatencyParts::default(),
            energy: EnergyParts::default(),
            tools: Vec::new(),
            collab: None,
            decision_count: self.state.decision_count,
        }
    }

    fn complete_here(&mut self) -> Option<Cell> {
        let pos = self.state.position;
        let i = self.state.residual_waypoints.iter().position(|c| *c == pos)?;
        self.state.residual_waypoints.remove(i);
        if self.target == Some(pos) {
            self.target = None;
        }
        self.waypoints_completed += 1;
        self.completed_unreported.push(pos);
        Some(pos)
    }

    fn finish_decision(&mut self, mut out: TickOutcome, from: Cell, now: f64) -> TickOutcome {
        out.completed = self.complete_here();
        self.state.decision_count += 1;
        out.decision_count = self.state.decision_count;
        self.stm.record(MemoryEntry::new(
            now,
            EntryPayload::Decision {
                from,
                to: self.state.position,
                target: out.target,
                completed: out.completed,
                latency: out.latency.total(),
            },
        ));
        self.energy_used.add(&out.energy);
        out
    }

    /// One local perceive → decide → validate → act pass.
    pub fn uav_tick(
        &mut self,
        world: &GridMap,
        tools: &Registry,
        costs: &CostModel,
        now: f64,
    ) -> Result<TickOutcome, AgentError> {
        if !self.alive {
            return Err(AgentError::Inactive(self.state.id));
        }
        let mut out = self.blank_outcome();
        let from = self.state.position;
        match self.local_decision(world, tools, costs, now, &mut out) {
            Ok(()) => Ok(self.finish_decision(out, from, now)),
            Err(e) => {
                self.energy_used.add(&out.energy);
                Err(e)
            }
        }
    }

    fn local_decision(
        &mut self,
        world: &GridMap,
        tools: &Registry,
        costs: &CostModel,
        now: f64,
        out: &mut TickOutcome,
    ) -> Result<(), AgentError> {
        let from = self.state.position;
        self.spend(costs.e_slm)?;
        out.energy.inference += costs.e_slm;
        out.latency.inference += costs.t_slm;

        self.use_tool(tools, &["perceive"], out);
        self.perceive(world, now);

        if self.state.residual_waypoints.is_empty() {
            self.target = None;
            return self.hover(costs, out);
        }

        let planner_tag = self.planner.tag();
        self.use_tool(tools, &["plan", "local", planner_tag], out);
        self.use_tool(tools, &["actuate"], out);

        let planned = self.select_target().and_then(|t| {
            out.target = Some(t);
            self.plan_path(t)
        });
        let verdict = match &planned {
            Ok(path) => validate(path.next_step(), &self.state, &self.constraints, path, costs.e_flight),
            Err(_) => ValidationVerdict::Fallback(FallbackReason::NoPath),
        };
        out.verdict = Some(verdict);
        match (verdict, planned) {
            (ValidationVerdict::Valid, Ok(path)) => self.step_to(path.next_step(), from, costs, out),
            (ValidationVerdict::Fallback(reason), _) => self.handle_fallback(reason, costs, now, out).map(|_| ()),
            (ValidationVerdict::Valid, Err(_)) => unreachable!("a valid verdict always has a path"),
        }
    }

    fn step_to(&mut self, next: Cell, from: Cell, costs: &CostModel, out: &mut TickOutcome) -> Result<(), AgentError> {
        let m = apply_move(&mut self.state, next, costs).map_err(|e| self.fail(e))?;
        if m.hovered {
            out.energy.hover += m.energy;
            out.action = Action::Hover { at: next };
        } else {
            out.energy.flight += m.energy;
            out.action = Action::Move { from, to: next };
        }
        Ok(())
    }

    pub fn sync_due(&self) -> bool {
        let k = self.state.params.sync_interval.max(1);
        self.state.decision_count > 0 && self.state.decision_count.is_multiple_of(k)
    }

    /// Builds the semantic summary for a due sync and opens a new window.
    /// Obstacles from earlier, unacknowledged summaries are carried along.
    pub fn begin_sync(&mut self, now: f64) -> Option<EpisodeSummary> {
        if !self.sync_due() {
            return None;
        }
        self.sync_round += 1;
        let ctx = SummaryContext {
            uav_id: self.state.id,
            sync_round: self.sync_round,
            timestamp: now,
            position: self.state.position,
            residual: self.state.residual_waypoints.clone(),
        };
        let mut summary = summarize(&self.stm, ctx, &self.bs_known);
        self.unacked.extend(summary.obstacle_deltas.iter().map(|(c, _)| *c));
        summary.obstacle_deltas = self.unacked.iter().map(|&c| (c, KnownState::Obstacle)).collect();
        self.stm.record(MemoryEntry::new(
            now,
            EntryPayload::SyncMarker {
                round: self.sync_round,
            },
        ));
        Some(summary)
    }

    /// Closes a sync opened by [`UavAgent::begin_sync`]. `update` is the
    /// strategy update if it arrived within the timeout.
    pub fn finish_sync(&mut self, update: Option<&StrategyUpdate>) -> SyncOutcome {
        match update {
            Some(u) => {
                self.apply_update(u);
                SyncOutcome::SentAndApplied
            }
            None => SyncOutcome::Sent,
        }
    }

    pub fn apply_update(&mut self, u: &StrategyUpdate) {
        self.bs_known.append(&mut self.unacked);
        self.state.residual_waypoints = u.assignment_slice.clone();
        self.selection = Selection::Ordered;
        if self.target != u.assignment_slice.first().copied() {
            self.target = None;
        }
        self.state.params = u.params.clone();
        if self.constraints != u.constraints {
            self.constraints = u.constraints.clone();
            self.dstar = None;
        }
        self.stm.apply_refresh(u.refresh);
    }

    /// Full synchronous sync round trip with a single base station over `channel`.
    ///
    /// Returns the outcome and the latency it adds to the current decision.
    pub fn maybe_sync(
        &mut self,
        channel: &mut Channel,
        bs: &mut BsAgent,
        tools: &Registry,
        costs: &CostModel,
        timeout: f64,
        now: f64,
    ) -> (SyncOutcome, LatencyParts) {
        let Some(summary) = self.begin_sync(now) else {
            return (SyncOutcome::Skipped, LatencyParts::default());
        };
        let waited = LatencyParts {
            waiting: timeout,
            ..LatencyParts::default()
        };
        let msg = Message::new(NodeId::Uav(self.state.id), NodeId::BaseStation, now, Payload::Summary(summary.clone()));
        let up_at = match channel.transmit(Direction::Uplink, msg, now) {
            Ok(DeliveryOutcome::Delivered { at }) => at,
            _ => return (self.finish_sync(None), waited),
        };
        channel.take_delivered(Direction::Uplink);
        let (bs_time, _, _) = bs.processing_cost(tools, costs);
        let Ok(mut updates) = bs.handle_round(vec![summary]) else {
            return (self.finish_sync(None), waited);
        };
        let Some(update) = updates.remove(&self.state.id) else {
            return (self.finish_sync(None), waited);
        };
        let sent = up_at + bs_time;
        let msg = Message::new(NodeId::BaseStation, NodeId::Uav(self.state.id), sent, Payload::Update(update.clone()));
        match channel.transmit(Direction::Downlink, msg, sent) {
            Ok(DeliveryOutcome::Delivered { at }) if at - now <= timeout => {
                channel.take_delivered(Direction::Downlink);
                let outcome = self.finish_sync(Some(&update));
                let transfer = (up_at - now) + (at - sent);
                (
                    outcome,
                    LatencyParts {
                        transfer,
                        waiting: bs_time,
                        ..LatencyParts::default()
                    },
                )
            }
            _ => (self.finish_sync(None), waited),
        }
    }

    /// Offloaded mode, first half: observe and package the full state for the base station.
    pub fn offload_observe(&mut self, world: &GridMap, tools: &Registry, now: f64) -> (FullState, TickOutcome) {
        let mut out = self.blank_outcome();
        self.use_tool(tools, &["perceive"], &mut out);
        let delta = self.perceive(world, now);
        let fs = FullState {
            uav_id: self.state.id,
            position: self.state.position,
            energy: self.state.energy,
            decision_count: self.state.decision_count,
            reports: delta.revealed,
            completed: std::mem::take(&mut self.completed_unreported),
            timestamp: now,
        };
        self.energy_used.add(&out.energy);
        (fs, out)
    }

    /// Offloaded mode while a request is outstanding: hover, no decision.
    pub fn wait(&mut self, costs: &CostModel) -> Result<TickOutcome, AgentError> {
        if !self.alive {
            return Err(AgentError::Inactive(self.state.id));
        }
        let mut out = self.blank_outcome();
        self.hover(costs, &mut out)?;
        let at = self.state.position;
        out.action = Action::Wait { at };
        self.energy_used.add(&out.energy);
        Ok(out)
    }

    /// Offloaded mode, second half: validate and execute a base-station command.
    /// `out` carries whatever the first half already charged.
    pub fn execute_command(
        &mut self,
        cmd: &Command,
        tools: &Registry,
        costs: &CostModel,
        now: f64,
        mut out: TickOutcome,
    ) -> Result<TickOutcome, AgentError> {
        if !self.alive {
            return Err(AgentError::Inactive(self.state.id));
        }
        let from = self.state.position;
        // Energy already booked by offload_observe must not be counted twice.
        let booked = std::mem::take(&mut out.energy);
        match self.command_decision(cmd, tools, costs, now, &mut out) {
            Ok(()) => {
                let mut out = self.finish_decision(out, from, now);
                out.energy.add(&booked);
                Ok(out)
            }
            Err(e) => {
                self.energy_used.add(&out.energy);
                Err(e)
            }
        }
    }

    fn command_decision(
        &mut self,
        cmd: &Command,
        tools: &Registry,
        costs: &CostModel,
        now: f64,
        out: &mut TickOutcome,
    ) -> Result<(), AgentError> {
        let from = self.state.position;
        self.use_tool(tools, &["actuate"], out);
        self.target = cmd.target;
        out.target = cmd.target;
        let Some(t) = cmd.target else {
            self.state.residual_waypoints.clear();
            return self.hover(costs, out);
        };
        if !self.state.residual_waypoints.contains(&t) {
            self.state.residual_waypoints = vec![t];
        }
        let verdict = validate_with_cost(
            cmd.next,
            &self.state,
            &self.constraints,
            from.manhattan(t),
            cmd.path_cost,
            costs.e_flight,
        );
        out.verdict = Some(verdict);
        match verdict {
            ValidationVerdict::Valid => self.step_to(cmd.next, from, costs, out),
            ValidationVerdict::Fallback(reason) => self.handle_fallback(reason, costs, now, out).map(|_| ()),
        }
    }

    /// Charges radio energy for `bytes` actually delivered on the uplink.
    pub fn charge_transmit(&mut self, bytes: usize, costs: &CostModel) -> Result<f64, AgentError> {
        let e = costs.e_tx * bytes as f64;
        self.spend(e)?;
        self.energy_used.transmit += e;
        Ok(e)
    }
}
