use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Command, ConstraintSet, FullState, PlannerParams, StrategyUpdate};
use crate::experiment::CostModel;
use crate::memory::{EpisodeSummary, LongTermStore, RefreshDirective};
use crate::planner::astar;
use crate::planner::global::{ga_assign_seeded, GaParams, GlobalPlanError};
use crate::toolkit::{receipt, InvocationReceipt, Registry, TierConstraint};
use crate::world::{Cell, KnownState, LocalMapCache, Traversable, WithNoFly};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReflectionRules {
    pub fallback_threshold: u32,
    pub rounds: usize,
    pub weight_step: f64,
    pub confidence_step: f64,
    pub weight_floor: f64,
    pub weight_cap: f64,
    pub confidence_floor: f64,
    pub latency_budget: f64,
}

impl Default for ReflectionRules {
    fn default() -> Self {
        Self {
            fallback_threshold: 3,
            rounds: 2,
            weight_step: 0.25,
            confidence_step: 0.05,
            weight_floor: 1.0,
            weight_cap: 2.0,
            confidence_floor: 0.05,
            latency_budget: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub fallback_count: u32,
    pub decision_count: u32,
    pub latency_mean: f64,
    pub latency_max: f64,
}

/// The base station's fused picture after one batch of summaries.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GlobalView {
    pub reports: BTreeMap<Cell, (KnownState, f64)>,
    pub positions: BTreeMap<u32, Cell>,
    pub residual: BTreeMap<u32, Vec<Cell>>,
    pub completed: BTreeSet<Cell>,
    pub health: BTreeMap<u32, Health>,
    pub latest_round: u32,
}

impl GlobalView {
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn obstacles(&self) -> BTreeSet<Cell> {
        self.reports
            .iter()
            .filter(|(_, (s, _))| *s == KnownState::Obstacle)
            .map(|(c, _)| *c)
            .collect()
    }
}

/// Fuses summaries in `(sync_round, uav_id)` order; conflicting cell reports
/// resolve to the later timestamp (ties to the later summary).
pub fn bs_aggregate(summaries: &[EpisodeSummary]) -> GlobalView {
    let mut sorted: Vec<&EpisodeSummary> = summaries.iter().collect();
    sorted.sort_by_key(|s| (s.sync_round, s.uav_id));
    let mut view = GlobalView::default();
    for s in sorted {
        for &(c, state) in &s.obstacle_deltas {
            match view.reports.get(&c) {
                Some(&(_, ts)) if ts > s.timestamp => {}
                _ => {
                    view.reports.insert(c, (state, s.timestamp));
                }
            }
        }
        view.positions.insert(s.uav_id, s.position);
        view.residual.insert(s.uav_id, s.residual.clone());
        view.completed.extend(s.waypoints_completed.iter().copied());
        view.health.insert(
            s.uav_id,
            Health {
                fallback_count: s.fallback_count,
                decision_count: s.decision_count,
                latency_mean: s.latency_mean,
                latency_max: s.latency_max,
            },
        );
        view.latest_round = view.latest_round.max(s.sync_round);
    }
    view
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adjustment {
    pub params: PlannerParams,
    pub refresh: RefreshDirective,
}

/// Fixed rule table over recent history:
/// too many fallbacks → relax `w` and `ρ` and clear short-term memory;
/// mean latency over budget → raise `w`.
pub fn bs_reflect(
    view: &GlobalView,
    history: &LongTermStore,
    rules: &ReflectionRules,
    current: &BTreeMap<u32, PlannerParams>,
) -> BTreeMap<u32, Adjustment> {
    let mut out = BTreeMap::new();
    for (&uav, health) in &view.health {
        let mut params = current.get(&uav).cloned().unwrap_or_default();
        let mut refresh = RefreshDirective::None;
        let mut recent: u32 = history.recent(uav, rules.rounds).iter().map(|s| s.fallback_count).sum();
        if history.recent(uav, 1).is_empty() {
            recent = health.fallback_count;
        }
        if recent > rules.fallback_threshold {
            params.heuristic_weight = (params.heuristic_weight - rules.weight_step).max(rules.weight_floor);
            params.confidence_threshold =
                (params.confidence_threshold - rules.confidence_step).max(rules.confidence_floor);
            refresh = RefreshDirective::Clear;
        }
        if health.latency_mean > rules.latency_budget {
            params.heuristic_weight = (params.heuristic_weight + rules.weight_step).min(rules.weight_cap);
        }
        out.insert(uav, Adjustment { params, refresh });
    }
    out
}

fn mix_seed(seed: u64, round: u64) -> u64 {
    (seed ^ 0x5bd1_e995).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ round.wrapping_mul(0xbf58_476d_1ce4_e5b9)
}

/// Global assignment over the view's residual waypoints, one update per UAV in the view.
///
/// `adjustments` override `default_params` for UAVs that have one.
pub fn bs_plan(
    view: &GlobalView,
    map: &impl Traversable,
    ga: &GaParams,
    default_params: &PlannerParams,
    constraints: &ConstraintSet,
    adjustments: &BTreeMap<u32, Adjustment>,
) -> Result<BTreeMap<u32, StrategyUpdate>, GlobalPlanError> {
    if view.is_empty() {
        return Err(GlobalPlanError::Infeasible("empty view".into()));
    }
    let uavs: Vec<u32> = view.positions.keys().copied().collect();
    let positions: Vec<Cell> = view.positions.values().copied().collect();
    let mut seen = BTreeSet::new();
    let mut waypoints = Vec::new();
    let mut incumbent = Vec::with_capacity(uavs.len());
    for uav in &uavs {
        let mut route = Vec::new();
        for &c in view.residual.get(uav).map(Vec::as_slice).unwrap_or(&[]) {
            if !view.completed.contains(&c) && seen.insert(c) {
                waypoints.push(c);
                route.push(c);
            }
        }
        incumbent.push(route);
    }
    let run = ga_assign_seeded(map, &positions, &waypoints, ga, Some(&incumbent))?;
    Ok(uavs
        .iter()
        .zip(run.assignment.routes)
        .map(|(&uav, slice)| {
            let adj = adjustments.get(&uav);
            (
                uav,
                StrategyUpdate {
                    uav_id: uav,
                    sync_round: view.latest_round,
                    assignment_slice: slice,
                    params: adj.map_or_else(|| default_params.clone(), |a| a.params.clone()),
                    constraints: constraints.clone(),
                    refresh: adj.map_or(RefreshDirective::None, |a| a.refresh),
                },
            )
        })
        .collect())
}

/// The base station: long-term memory, reflection state and global planning.
#[derive(Clone, Debug)]
pub struct BsAgent {
    pub lts: LongTermStore,
    pub constraints: ConstraintSet,
    pub ga: GaParams,
    pub rules: ReflectionRules,
    pub default_params: PlannerParams,
    pub params: BTreeMap<u32, PlannerParams>,
    seed: u64,
    pub plans: u32,
    pub collab_requests: u64,
    pub late_summaries: u64,
    // Fully offloaded mode keeps its own picture and the authoritative assignment.
    central_map: LocalMapCache,
    mission: Vec<Cell>,
    completed: BTreeSet<Cell>,
    positions: BTreeMap<u32, Cell>,
    assignment: BTreeMap<u32, Vec<Cell>>,
}

impl BsAgent {
    pub fn new(
        width: u16,
        height: u16,
        constraints: ConstraintSet,
        ga: GaParams,
        rules: ReflectionRules,
        default_params: PlannerParams,
        seed: u64,
    ) -> Self {
        Self {
            lts: LongTermStore::new(width, height),
            constraints,
            ga,
            rules,
            default_params,
            params: BTreeMap::new(),
            seed,
            plans: 0,
            collab_requests: 0,
            late_summaries: 0,
            central_map: LocalMapCache::unknown(width, height),
            mission: Vec::new(),
            completed: BTreeSet::new(),
            positions: BTreeMap::new(),
            assignment: BTreeMap::new(),
        }
    }

    pub fn with_mission(mut self, waypoints: Vec<Cell>) -> Self {
        self.mission = waypoints;
        self
    }

    /// Model time and energy for one global planning pass, plus the Ground tool used.
    pub fn processing_cost(&self, tools: &Registry, costs: &CostModel) -> (f64, f64, Option<InvocationReceipt>) {
        match tools.select_one(&["plan", "global"], TierConstraint::Ground, f64::INFINITY) {
            Some(t) => (costs.t_llm + t.latency_cost, costs.e_llm + t.energy_cost, Some(receipt(t))),
            None => (costs.t_llm, costs.e_llm, None),
        }
    }

    fn ga_for(&self, salt: u64) -> GaParams {
        GaParams {
            seed: mix_seed(self.seed, salt),
            ..self.ga.clone()
        }
    }

    /// Records a summary that arrived after its round was already planned.
    pub fn ingest_late(&mut self, summary: EpisodeSummary) {
        self.late_summaries += 1;
        let _ = self.lts.ingest(summary);
    }

    /// Aggregate → reflect → plan for one sync round.
    pub fn handle_round(
        &mut self,
        summaries: Vec<EpisodeSummary>,
    ) -> Result<BTreeMap<u32, StrategyUpdate>, GlobalPlanError> {
        for s in &summaries {
            let _ = self.lts.ingest(s.clone());
        }
        let view = bs_aggregate(&summaries);
        for &uav in view.health.keys() {
            self.params.entry(uav).or_insert_with(|| self.default_params.clone());
        }
        let adjustments = bs_reflect(&view, &self.lts, &self.rules, &self.params);
        for (&uav, a) in &adjustments {
            self.params.insert(uav, a.params.clone());
        }
        self.plans += 1;
        let ga = self.ga_for(u64::from(self.plans));
        let map = WithNoFly {
            map: self.lts.global_map(),
            no_fly: &self.constraints.no_fly,
        };
        bs_plan(&view, &map, &ga, &self.default_params, &self.constraints, &adjustments)
    }

    /// Current fully-offloaded assignment.
    pub fn assignment(&self) -> &BTreeMap<u32, Vec<Cell>> {
        &self.assignment
    }

    /// Fully offloaded mode: fold in a batch of full states and answer each with
    /// a single-step command. Returns whether the global assignment was recomputed.
    pub fn command_round(&mut self, states: &[FullState]) -> Result<(BTreeMap<u32, Command>, bool), GlobalPlanError> {
        for fs in states {
            for &(c, s) in &fs.reports {
                self.central_map.merge_report(c, s.into(), fs.timestamp);
            }
            self.positions.insert(fs.uav_id, fs.position);
            self.completed.extend(fs.completed.iter().copied());
        }
        let residual: BTreeSet<Cell> = self.mission.iter().copied().filter(|c| !self.completed.contains(c)).collect();
        let assigned: BTreeSet<Cell> = self.assignment.values().flatten().copied().collect();
        let mut replanned = false;
        let known_uavs = self.positions.len() != self.assignment.len();
        if residual != assigned || known_uavs {
            let uavs: Vec<u32> = self.positions.keys().copied().collect();
            let positions: Vec<Cell> = self.positions.values().copied().collect();
            let incumbent: Vec<Vec<Cell>> = uavs
                .iter()
                .map(|u| {
                    self.assignment
                        .get(u)
                        .map(|r| r.iter().copied().filter(|c| residual.contains(c)).collect())
                        .unwrap_or_default()
                })
                .collect();
            let waypoints: Vec<Cell> = residual.iter().copied().collect();
            self.plans += 1;
            let ga = self.ga_for(u64::from(self.plans));
            let map = WithNoFly {
                map: &self.central_map,
                no_fly: &self.constraints.no_fly,
            };
            let run = ga_assign_seeded(&map, &positions, &waypoints, &ga, Some(&incumbent))?;
            self.assignment = uavs.into_iter().zip(run.assignment.routes).collect();
            replanned = true;
        }
        let map = WithNoFly {
            map: &self.central_map,
            no_fly: &self.constraints.no_fly,
        };
        let mut commands = BTreeMap::new();
        for fs in states {
            let route = self.assignment.get(&fs.uav_id).map(Vec::as_slice).unwrap_or(&[]);
            let cmd = match route.first() {
                None => Command {
                    uav_id: fs.uav_id,
                    next: fs.position,
                    target: None,
                    path_cost: 0,
                    timestamp: fs.timestamp,
                },
                Some(&target) => {
                    let path = astar(&map, fs.position, target, 1.0).map_err(GlobalPlanError::from)?;
                    Command {
                        uav_id: fs.uav_id,
                        next: path.next_step(),
                        target: Some(target),
                        path_cost: path.cost(),
                        timestamp: fs.timestamp,
                    }
                }
            };
            commands.insert(fs.uav_id, cmd);
        }
        Ok((commands, replanned))
    }
}
