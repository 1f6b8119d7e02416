//! UAV and base-station agents.
//!
//! A UAV runs a perceive → decide → validate → act loop once per model tick
//! and, in collaborative mode, synchronizes with the base station every `K`
//! decisions. The base station folds summaries into long-term memory, reruns
//! the global assignment and sends back a [`StrategyUpdate`].

mod bs;
mod uav;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use bs::{bs_aggregate, bs_plan, bs_reflect, Adjustment, BsAgent, GlobalView, Health, ReflectionRules};
pub use uav::{
    Action, AgentError, EnergyParts, LatencyParts, PlannerKind, Selection, SyncOutcome, TickOutcome, ToolUse, UavAgent,
    UavConfig,
};

use crate::memory::RefreshDirective;
use crate::planner::Path;
use crate::wire::{Canonical, Writer};
use crate::world::{Cell, Traversable, UavState};

pub const DEFAULT_SYNC_INTERVAL: u32 = 9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerParams {
    pub heuristic_weight: f64,
    pub confidence_threshold: f64,
    pub sync_interval: u32,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            heuristic_weight: 1.0,
            confidence_threshold: 0.1,
            sync_interval: DEFAULT_SYNC_INTERVAL,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.heuristic_weight >= 1.0 && self.heuristic_weight.is_finite()) {
            return Err(format!("heuristic_weight: {} must be >= 1", self.heuristic_weight));
        }
        if !(self.confidence_threshold > 0.0 && self.confidence_threshold <= 1.0) {
            return Err(format!("confidence_threshold: {} not in (0, 1]", self.confidence_threshold));
        }
        if self.sync_interval == 0 {
            return Err("sync_interval: must be at least 1".into());
        }
        Ok(())
    }

    fn encode(&self, w: &mut Writer) {
        w.real(self.heuristic_weight);
        w.real(self.confidence_threshold);
        w.counter(self.sync_interval);
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub no_fly: BTreeSet<Cell>,
    pub energy_reserve_floor: f64,
}

impl ConstraintSet {
    fn encode(&self, w: &mut Writer) {
        let cells: Vec<Cell> = self.no_fly.iter().copied().collect();
        w.cells(&cells);
        w.real(self.energy_reserve_floor);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FallbackReason {
    OutOfBounds,
    KnownObstacle,
    NoFlyViolation,
    EnergyReserve,
    LowConfidence,
    NoPath,
}

impl FallbackReason {
    pub fn code(self) -> u8 {
        match self {
            FallbackReason::OutOfBounds => 0,
            FallbackReason::KnownObstacle => 1,
            FallbackReason::NoFlyViolation => 2,
            FallbackReason::EnergyReserve => 3,
            FallbackReason::LowConfidence => 4,
            FallbackReason::NoPath => 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValidationVerdict {
    Valid,
    Fallback(FallbackReason),
}

/// Pre-execution check of a proposed next cell. The first failing check, in
/// the order bounds, known obstacle, no-fly, energy reserve, confidence, is
/// reported.
///
/// Confidence is the Manhattan lower bound from the current position to the
/// path's goal divided by the planned path cost (1 for a zero-cost path).
pub fn validate(
    command: Cell,
    state: &UavState,
    constraints: &ConstraintSet,
    planned_path: &Path,
    move_energy: f64,
) -> ValidationVerdict {
    let lower_bound = state.position.manhattan(planned_path.goal());
    validate_with_cost(command, state, constraints, lower_bound, planned_path.cost(), move_energy)
}

/// As [`validate`], for a command that arrives with only a path cost (G-LLM).
pub fn validate_with_cost(
    command: Cell,
    state: &UavState,
    constraints: &ConstraintSet,
    lower_bound: u32,
    path_cost: u32,
    move_energy: f64,
) -> ValidationVerdict {
    use FallbackReason::*;
    let map = &state.local_map;
    if !map.contains(command) {
        return ValidationVerdict::Fallback(OutOfBounds);
    }
    if map.is_known_obstacle(command) {
        return ValidationVerdict::Fallback(KnownObstacle);
    }
    if constraints.no_fly.contains(&command) {
        return ValidationVerdict::Fallback(NoFlyViolation);
    }
    let cost = if command == state.position { 0.0 } else { move_energy };
    if state.energy - cost < constraints.energy_reserve_floor {
        return ValidationVerdict::Fallback(EnergyReserve);
    }
    let confidence = if path_cost == 0 {
        1.0
    } else {
        f64::from(lower_bound) / f64::from(path_cost)
    };
    if confidence < state.params.confidence_threshold {
        return ValidationVerdict::Fallback(LowConfidence);
    }
    ValidationVerdict::Valid
}

/// Base-station downlink for one UAV after a sync round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyUpdate {
    pub uav_id: u32,
    pub sync_round: u32,
    pub assignment_slice: Vec<Cell>,
    pub params: PlannerParams,
    pub constraints: ConstraintSet,
    pub refresh: RefreshDirective,
}

impl StrategyUpdate {
    pub fn payload_bytes(&self) -> usize {
        self.encoded_len()
    }
}

impl Canonical for StrategyUpdate {
    fn encode(&self, w: &mut Writer) {
        w.counter(self.uav_id);
        w.counter(self.sync_round);
        w.cells(&self.assignment_slice);
        self.params.encode(w);
        self.constraints.encode(w);
        self.refresh.encode(w);
    }
}

/// Everything a UAV uplinks per decision in fully offloaded mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullState {
    pub uav_id: u32,
    pub position: Cell,
    pub energy: f64,
    pub decision_count: u32,
    pub reports: Vec<(Cell, crate::world::CellState)>,
    pub completed: Vec<Cell>,
    pub timestamp: f64,
}

impl Canonical for FullState {
    fn encode(&self, w: &mut Writer) {
        w.counter(self.uav_id);
        w.cell(self.position);
        w.real(self.energy);
        w.counter(self.decision_count);
        w.counter(self.reports.len() as u32);
        for &(c, s) in &self.reports {
            w.cell_report(c, s.into());
        }
        w.cells(&self.completed);
        w.real(self.timestamp);
    }
}

/// A single-step instruction from the base station.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub uav_id: u32,
    pub next: Cell,
    pub target: Option<Cell>,
    pub path_cost: u32,
    pub timestamp: f64,
}

impl Canonical for Command {
    fn encode(&self, w: &mut Writer) {
        w.counter(self.uav_id);
        w.cell(self.next);
        w.opt_cell(self.target);
        w.counter(self.path_cost);
        w.real(self.timestamp);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollabRequest {
    pub uav_id: u32,
    pub reason: FallbackReason,
    pub position: Cell,
    pub timestamp: f64,
}

impl Canonical for CollabRequest {
    fn encode(&self, w: &mut Writer) {
        w.counter(self.uav_id);
        w.tag(self.reason.code());
        w.cell(self.position);
        w.real(self.timestamp);
    }
}

/// Convenience for checking a move against a map in tests and audits.
pub fn is_legal_step(map: &impl Traversable, constraints: &ConstraintSet, from: Cell, to: Cell) -> bool {
    (from == to || from.is_adjacent(to)) && map.contains(to) && !map.blocked(to) && !constraints.no_fly.contains(&to)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{CellState, ObservationDelta};

    fn state_at(c: Cell, energy: f64, rho: f64) -> UavState {
        let params = PlannerParams {
            confidence_threshold: rho,
            ..PlannerParams::default()
        };
        UavState::new(0, c, energy, 8, 8, params)
    }

    fn straight(from: Cell, len: u16) -> Path {
        Path::new((0..=len).map(|i| Cell::new(from.x + i, from.y)).collect())
    }

    #[test]
    fn all_checks_pass() {
        // rho = 0 is outside the configurable range but the validator accepts it.
        let s = state_at(Cell::new(0, 0), 10.0, 0.0);
        let p = straight(Cell::new(0, 0), 3);
        let v = validate(Cell::new(1, 0), &s, &ConstraintSet::default(), &p, 1.0);
        assert_eq!(v, ValidationVerdict::Valid);
    }

    #[test]
    fn order_of_checks() {
        let mut s = state_at(Cell::new(0, 0), 10.0, 0.1);
        s.local_map.apply(&ObservationDelta {
            revealed: vec![(Cell::new(1, 0), CellState::Obstacle)],
            timestamp: 0.0,
        });
        let cons = ConstraintSet {
            no_fly: [Cell::new(1, 0), Cell::new(0, 1)].into_iter().collect(),
            energy_reserve_floor: 9.5,
        };
        let p = straight(Cell::new(0, 0), 3);
        let v = |c| validate(c, &s, &cons, &p, 1.0);
        assert_eq!(v(Cell::new(8, 0)), ValidationVerdict::Fallback(FallbackReason::OutOfBounds));
        assert_eq!(v(Cell::new(1, 0)), ValidationVerdict::Fallback(FallbackReason::KnownObstacle));
        assert_eq!(v(Cell::new(0, 1)), ValidationVerdict::Fallback(FallbackReason::NoFlyViolation));
        assert_eq!(v(Cell::new(1, 1)), ValidationVerdict::Fallback(FallbackReason::EnergyReserve));
    }

    #[test]
    fn no_fly_command() {
        let s = state_at(Cell::new(0, 0), 10.0, 0.1);
        let cons = ConstraintSet {
            no_fly: [Cell::new(1, 0)].into_iter().collect(),
            energy_reserve_floor: 0.0,
        };
        let v = validate(Cell::new(1, 0), &s, &cons, &straight(Cell::new(0, 0), 2), 1.0);
        assert_eq!(v, ValidationVerdict::Fallback(FallbackReason::NoFlyViolation));
    }

    #[test]
    fn low_confidence_arithmetic() {
        // Path cost 20, Manhattan bound 4: confidence 0.2 < 0.3.
        let s = state_at(Cell::new(0, 0), 100.0, 0.3);
        let v = validate_with_cost(Cell::new(1, 0), &s, &ConstraintSet::default(), 4, 20, 1.0);
        assert_eq!(v, ValidationVerdict::Fallback(FallbackReason::LowConfidence));
        let s = state_at(Cell::new(0, 0), 100.0, 0.2);
        let v = validate_with_cost(Cell::new(1, 0), &s, &ConstraintSet::default(), 4, 20, 1.0);
        assert_eq!(v, ValidationVerdict::Valid);
    }

    #[test]
    fn payload_sizes_are_encoding_lengths() {
        let u = StrategyUpdate {
            uav_id: 1,
            sync_round: 2,
            assignment_slice: vec![Cell::new(1, 1), Cell::new(2, 2)],
            params: PlannerParams::default(),
            constraints: ConstraintSet::default(),
            refresh: RefreshDirective::None,
        };
        // 4 + 4 + (4 + 8) + (8 + 8 + 4) + (4 + 8) + (1 + 4)
        assert_eq!(u.payload_bytes(), 57);
        let c = CollabRequest {
            uav_id: 0,
            reason: FallbackReason::NoPath,
            position: Cell::new(0, 0),
            timestamp: 0.0,
        };
        assert_eq!(c.encoded_len(), 17);
        let cmd = Command {
            uav_id: 0,
            next: Cell::new(0, 1),
            target: Some(Cell::new(0, 5)),
            path_cost: 5,
            timestamp: 1.0,
        };
        assert_eq!(cmd.encoded_len(), 4 + 4 + 5 + 4 + 8);
    }

    #[test]
    fn params_validation() {
        assert!(PlannerParams::default().validate().is_ok());
        let bad = PlannerParams {
            heuristic_weight: 0.5,
            ..PlannerParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = PlannerParams {
            confidence_threshold: 0.0,
            ..PlannerParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = PlannerParams {
            sync_interval: 0,
            ..PlannerParams::default()
        };
        assert!(bad.validate().is_err());
    }
}
