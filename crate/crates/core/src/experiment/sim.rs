use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Aggregate, CostModel, Mode, RunError, RunReport, UavReport};
use crate::agents::{
    Action, BsAgent, FullState, LatencyParts, StrategyUpdate, SyncOutcome, TickOutcome, UavAgent, ValidationVerdict,
};
use crate::link::{transfer_time, Channel, Delivery, DeliveryOutcome, Direction, Message, NodeId, Payload};
use crate::memory::{EpisodeSummary, LongTermStore};
use crate::scenario::{Scenario, World};
use crate::toolkit::{InvocationReceipt, Registry};
use crate::world::Cell;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub tick: u64,
    pub uav: u32,
    pub action: Action,
    /// False for offloaded-mode waiting hovers.
    pub decision: bool,
    pub energy_after: f64,
    pub floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub tick: u64,
    pub uav: u32,
    pub index: u32,
    pub latency: LatencyParts,
    pub total: f64,
    pub verdict: Option<ValidationVerdict>,
    pub sync: Option<SyncOutcome>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncRecord {
    pub tick: u64,
    pub uav: u32,
    pub decision_count: u32,
    pub round: u32,
    pub outcome: SyncOutcome,
    pub summary_bytes: u64,
    pub window_bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolRecord {
    pub tick: u64,
    /// `None` for the base station.
    pub uav: Option<u32>,
    pub receipt: InvocationReceipt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub tick: u64,
    pub uav: u32,
    pub cell: Cell,
    pub time: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub actions: Vec<ActionRecord>,
    pub decisions: Vec<DecisionRecord>,
    pub syncs: Vec<SyncRecord>,
    pub tools: Vec<ToolRecord>,
    pub completions: Vec<CompletionRecord>,
}

/// A run's report plus everything needed to audit it.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub log: EventLog,
    pub world: World,
    pub memory: LongTermStore,
}

pub fn run(scenario: &Scenario, mode: Mode, seed: u64) -> Result<RunReport, RunError> {
    run_with_log(scenario, mode, seed).map(|o| o.report)
}

pub fn run_with_log(scenario: &Scenario, mode: Mode, seed: u64) -> Result<RunOutput, RunError> {
    let world = scenario.instantiate(seed)?;
    let mut sim = Sim::new(scenario, mode, seed, world);
    sim.run();
    Ok(sim.finish())
}

#[derive(Clone, Copy, Debug)]
struct LatencyStats {
    sum: f64,
    max: f64,
    count: u32,
}

struct PendingSync {
    round: u32,
    send_at: f64,
}

struct PendingOffload {
    sent_at: f64,
    pre: TickOutcome,
}

struct Sim<'a> {
    mode: Mode,
    seed: u64,
    world: World,
    costs: CostModel,
    tools: &'a Registry,
    timeout: f64,
    tick_seconds: f64,
    tick_limit: u64,
    agents: Vec<UavAgent>,
    channels: Vec<Channel>,
    bs: BsAgent,
    remaining: BTreeSet<Cell>,
    stats: Vec<LatencyStats>,
    mission_time: Vec<f64>,
    offload: Vec<Option<PendingOffload>>,
    log: EventLog,
    ticks: u64,
    bs_energy: f64,
    sync_attempts: u64,
    summary_bytes: u64,
    raw_window_bytes: u64,
    errors: Vec<String>,
}

impl<'a> Sim<'a> {
    fn new(scenario: &'a Scenario, mode: Mode, seed: u64, world: World) -> Self {
        let cfg = scenario.config();
        let n = world.starts.len();
        let ucfg = cfg.agents.uav_config();
        let agents: Vec<UavAgent> = (0..n)
            .map(|i| {
                let mut a = UavAgent::new(i as u32, world.starts[i], world.energies[i], &world.map, &ucfg);
                if mode != Mode::GLlm {
                    // Initial brief: waypoint j goes to UAV j mod n.
                    a.state.residual_waypoints = world.waypoints.iter().skip(i).step_by(n).copied().collect();
                }
                a
            })
            .collect();
        let channels = (0..n).map(|i| Channel::new(cfg.link.clone(), seed, i as u64 + 1)).collect();
        let bs = BsAgent::new(
            world.map.width(),
            world.map.height(),
            cfg.agents.constraints(),
            cfg.ga.clone(),
            cfg.agents.reflection.clone(),
            cfg.agents.planner_params(),
            seed,
        )
        .with_mission(world.waypoints.clone());
        Self {
            mode,
            seed,
            remaining: world.waypoints.iter().copied().collect(),
            costs: cfg.costs.clone(),
            tools: scenario.registry(),
            timeout: cfg.agents.sync_timeout,
            tick_seconds: cfg.sim.tick_seconds,
            tick_limit: cfg.sim.tick_limit,
            agents,
            channels,
            bs,
            stats: vec![
                LatencyStats {
                    sum: 0.0,
                    max: 0.0,
                    count: 0
                };
                n
            ],
            mission_time: vec![0.0; n],
            offload: (0..n).map(|_| None).collect(),
            log: EventLog::default(),
            ticks: 0,
            bs_energy: 0.0,
            sync_attempts: 0,
            summary_bytes: 0,
            raw_window_bytes: 0,
            errors: Vec::new(),
            world,
        }
    }

    fn run(&mut self) {
        while self.ticks < self.tick_limit {
            if self.remaining.is_empty() || !self.agents.iter().any(UavAgent::is_alive) {
                break;
            }
            let tick = self.ticks;
            let now = tick as f64 * self.tick_seconds;
            match self.mode {
                Mode::LSlm => self.tick_local(tick, now),
                Mode::SlmLlm => self.tick_collaborative(tick, now),
                Mode::GLlm => self.tick_offloaded(tick, now),
            }
            self.ticks += 1;
        }
    }

    fn fail(&mut self, i: usize, e: impl std::fmt::Display) {
        self.errors.push(format!("uav {i}: {e}"));
    }

    fn record_decision(&mut self, tick: u64, i: usize, out: TickOutcome, sync: Option<SyncOutcome>, energy_after: f64, now: f64) {
        let uav = i as u32;
        let total = out.latency.total();
        let s = &mut self.stats[i];
        s.sum += total;
        s.max = s.max.max(total);
        s.count += 1;
        self.log.decisions.push(DecisionRecord {
            tick,
            uav,
            index: out.decision_count,
            latency: out.latency,
            total,
            verdict: out.verdict,
            sync,
        });
        self.log.actions.push(ActionRecord {
            tick,
            uav,
            action: out.action,
            decision: true,
            energy_after,
            floor: self.agents[i].constraints.energy_reserve_floor,
        });
        for receipt in out.tools {
            self.log.tools.push(ToolRecord {
                tick,
                uav: Some(uav),
                receipt,
            });
        }
        if let Some(cell) = out.completed {
            self.remaining.remove(&cell);
            self.mission_time[i] = now + total;
            self.log.completions.push(CompletionRecord {
                tick,
                uav,
                cell,
                time: now + total,
            });
        }
    }

    fn send(&mut self, i: usize, direction: Direction, payload: Payload, at: f64) -> Option<DeliveryOutcome> {
        let (from, to) = match direction {
            Direction::Uplink => (NodeId::Uav(i as u32), NodeId::BaseStation),
            Direction::Downlink => (NodeId::BaseStation, NodeId::Uav(i as u32)),
        };
        let msg = Message::new(from, to, at, payload);
        match self.channels[i].transmit(direction, msg, at) {
            Ok(o) => Some(o),
            // The oldest queued message was dropped; the new one is queued.
            Err(_) => Some(DeliveryOutcome::Queued),
        }
    }

    /// Collects uplink deliveries: collaboration requests are counted here,
    /// radio energy is charged to the sender, the rest is returned.
    fn drain_uplink(&mut self) -> Vec<(usize, Delivery)> {
        let mut out = Vec::new();
        for i in 0..self.channels.len() {
            for d in self.channels[i].take_delivered(Direction::Uplink) {
                if self.agents[i].is_alive() {
                    if let Err(e) = self.agents[i].charge_transmit(d.message.payload_bytes(), &self.costs) {
                        self.fail(i, e);
                    }
                }
                match d.message.payload {
                    Payload::CollabRequest(_) => self.bs.collab_requests += 1,
                    _ => out.push((i, d)),
                }
            }
        }
        out
    }

    fn advance_channels(&mut self, tick: u64, now: f64) {
        for ch in &mut self.channels {
            ch.advance_to(tick, now);
        }
    }

    fn tick_local(&mut self, tick: u64, now: f64) {
        for i in 0..self.agents.len() {
            if !self.agents[i].is_alive() {
                continue;
            }
            match self.agents[i].uav_tick(&self.world.map, self.tools, &self.costs, now) {
                Ok(out) => {
                    let e = self.agents[i].state.energy;
                    self.record_decision(tick, i, out, None, e, now);
                }
                Err(e) => self.fail(i, e),
            }
        }
    }

    fn tick_collaborative(&mut self, tick: u64, now: f64) {
        self.advance_channels(tick, now);
        for (_, d) in self.drain_uplink() {
            if let Payload::Summary(s) = d.message.payload {
                self.bs.ingest_late(s);
            }
        }
        // Updates that arrive after their timeout are discarded.
        for ch in &mut self.channels {
            ch.take_delivered(Direction::Downlink);
        }

        let n = self.agents.len();
        let mut decided: Vec<Option<(TickOutcome, f64, Option<PendingSync>)>> = (0..n).map(|_| None).collect();
        for (i, slot) in decided.iter_mut().enumerate() {
            if !self.agents[i].is_alive() {
                continue;
            }
            let out = match self.agents[i].uav_tick(&self.world.map, self.tools, &self.costs, now) {
                Ok(out) => out,
                Err(e) => {
                    self.fail(i, e);
                    continue;
                }
            };
            let energy_after = self.agents[i].state.energy;
            let send_at = now + out.latency.total();
            if let Some(req) = out.collab.clone() {
                self.send(i, Direction::Uplink, Payload::CollabRequest(req), send_at);
            }
            let window_bytes = self.agents[i].stm.window_bytes() as u64;
            let pending = self.agents[i].begin_sync(now).map(|summary| {
                self.sync_attempts += 1;
                self.summary_bytes += summary.payload_bytes() as u64;
                self.raw_window_bytes += window_bytes;
                let round = summary.sync_round;
                self.log.syncs.push(SyncRecord {
                    tick,
                    uav: i as u32,
                    decision_count: self.agents[i].state.decision_count,
                    round,
                    outcome: SyncOutcome::Sent,
                    summary_bytes: summary.payload_bytes() as u64,
                    window_bytes,
                });
                self.send(i, Direction::Uplink, Payload::Summary(summary), send_at);
                PendingSync { round, send_at }
            });
            *slot = Some((out, energy_after, pending));
        }

        // Base station: plan jointly over this tick's fresh summaries.
        let mut batch: Vec<(usize, f64, EpisodeSummary)> = Vec::new();
        for (i, d) in self.drain_uplink() {
            if let Payload::Summary(s) = d.message.payload {
                let fresh = matches!(&decided[i], Some((_, _, Some(p))) if p.round == s.sync_round);
                if fresh {
                    batch.push((i, d.at, s));
                } else {
                    self.bs.ingest_late(s);
                }
            }
        }
        let mut applied: BTreeMap<usize, (StrategyUpdate, LatencyParts)> = BTreeMap::new();
        if !batch.is_empty() {
            let (bs_time, bs_energy, receipt) = self.bs.processing_cost(self.tools, &self.costs);
            self.bs_energy += bs_energy;
            if let Some(receipt) = receipt {
                self.log.tools.push(ToolRecord { tick, uav: None, receipt });
            }
            match self.bs.handle_round(batch.iter().map(|(_, _, s)| s.clone()).collect()) {
                Ok(updates) => {
                    for (i, up_at, _) in &batch {
                        let Some(update) = updates.get(&(*i as u32)) else { continue };
                        let Some((_, _, Some(p))) = &decided[*i] else { continue };
                        let send_at = p.send_at;
                        let sent = up_at + bs_time;
                        let outcome = self.send(*i, Direction::Downlink, Payload::Update(update.clone()), sent);
                        self.channels[*i].take_delivered(Direction::Downlink);
                        if let Some(DeliveryOutcome::Delivered { at }) = outcome {
                            if at - send_at <= self.timeout {
                                let extra = LatencyParts {
                                    transfer: (up_at - send_at) + (at - sent),
                                    waiting: bs_time,
                                    ..LatencyParts::default()
                                };
                                applied.insert(*i, (update.clone(), extra));
                            }
                        }
                    }
                }
                Err(e) => self.errors.push(format!("tick {tick}: base station: {e}")),
            }
        }

        let mut sync_idx = self.log.syncs.len();
        let mut sync_rows: Vec<usize> = Vec::new();
        for i in (0..n).rev() {
            if matches!(&decided[i], Some((_, _, Some(_)))) {
                sync_idx -= 1;
                sync_rows.push(sync_idx);
            } else {
                sync_rows.push(usize::MAX);
            }
        }
        sync_rows.reverse();

        for (i, slot) in decided.into_iter().enumerate() {
            let Some((mut out, energy_after, pending)) = slot else { continue };
            let sync = pending.map(|_| match applied.remove(&i) {
                Some((update, extra)) => {
                    out.latency.transfer += extra.transfer;
                    out.latency.waiting += extra.waiting;
                    self.agents[i].finish_sync(Some(&update))
                }
                None => {
                    out.latency.waiting += self.timeout;
                    self.agents[i].finish_sync(None)
                }
            });
            if let Some(o) = sync {
                self.log.syncs[sync_rows[i]].outcome = o;
            }
            self.record_decision(tick, i, out, sync, energy_after, now);
        }
    }

    fn tick_offloaded(&mut self, tick: u64, now: f64) {
        self.advance_channels(tick, now);
        for ch in &mut self.channels {
            ch.take_delivered(Direction::Downlink);
        }
        let mut batch = self.drain_uplink();
        for i in 0..self.agents.len() {
            if !self.agents[i].is_alive() || self.offload[i].is_some() {
                continue;
            }
            let (fs, pre) = self.agents[i].offload_observe(&self.world.map, self.tools, now);
            self.offload[i] = Some(PendingOffload { sent_at: now, pre });
            self.send(i, Direction::Uplink, Payload::FullState(fs), now);
        }
        batch.extend(self.drain_uplink());
        let mut states: Vec<(usize, f64, FullState)> = batch
            .into_iter()
            .filter_map(|(i, d)| match d.message.payload {
                Payload::FullState(fs) => Some((i, d.at, fs)),
                _ => None,
            })
            .collect();
        states.sort_by_key(|(i, _, _)| *i);

        if !states.is_empty() {
            let fulls: Vec<FullState> = states.iter().map(|(_, _, fs)| fs.clone()).collect();
            match self.bs.command_round(&fulls) {
                Ok((commands, replanned)) => {
                    self.bs_energy += self.costs.e_llm * states.len() as f64;
                    let mut planning_latency = 0.0;
                    if replanned {
                        let (_, _, receipt) = self.bs.processing_cost(self.tools, &self.costs);
                        if let Some(r) = receipt {
                            planning_latency = r.latency_cost;
                            self.bs_energy += r.energy_cost;
                            self.log.tools.push(ToolRecord {
                                tick,
                                uav: None,
                                receipt: r,
                            });
                        }
                    }
                    for (i, up_at, fs) in states {
                        let Some(pending) = self.offload[i].take() else { continue };
                        let cmd = commands[&fs.uav_id].clone();
                        let up = transfer_time(self.channels[i].params(), fs_bytes(&fs));
                        let up_sent = up_at - up;
                        let cmd_sent = up_at + self.costs.t_llm + planning_latency;
                        match self.send(i, Direction::Downlink, Payload::Command(cmd.clone()), cmd_sent) {
                            Some(DeliveryOutcome::Delivered { at }) => {
                                self.channels[i].take_delivered(Direction::Downlink);
                                let mut pre = pending.pre;
                                pre.latency.inference += self.costs.t_llm;
                                pre.latency.tool += planning_latency;
                                pre.latency.transfer += up + (at - cmd_sent);
                                pre.latency.waiting += up_sent - pending.sent_at;
                                match self.agents[i].execute_command(&cmd, self.tools, &self.costs, now, pre) {
                                    Ok(out) => {
                                        let energy_after = self.agents[i].state.energy;
                                        let total = out.latency.total();
                                        if let Some(req) = out.collab.clone() {
                                            self.send(i, Direction::Uplink, Payload::CollabRequest(req), now + total);
                                        }
                                        self.record_decision(tick, i, out, None, energy_after, now);
                                    }
                                    Err(e) => self.fail(i, e),
                                }
                            }
                            // Never expected: uplink and downlink share availability within a tick.
                            _ => self.errors.push(format!("tick {tick}: command for uav {i} not delivered")),
                        }
                    }
                }
                Err(e) => {
                    self.errors.push(format!("tick {tick}: base station: {e}"));
                    for (i, _, _) in states {
                        self.offload[i] = None;
                    }
                }
            }
        }
        // Anyone still waiting on the base station hovers.
        for i in 0..self.agents.len() {
            if self.offload[i].is_none() || !self.agents[i].is_alive() {
                continue;
            }
            match self.agents[i].wait(&self.costs) {
                Ok(out) => self.log.actions.push(ActionRecord {
                    tick,
                    uav: i as u32,
                    action: out.action,
                    decision: false,
                    energy_after: self.agents[i].state.energy,
                    floor: self.agents[i].constraints.energy_reserve_floor,
                }),
                Err(e) => self.fail(i, e),
            }
        }
        // Drain any collaboration requests sent this tick.
        let leftover = self.drain_uplink();
        debug_assert!(leftover.is_empty());
    }

    fn finish(self) -> RunOutput {
        let uavs: Vec<UavReport> = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let s = self.stats[i];
                UavReport {
                    uav_id: a.id(),
                    trajectory_length: a.state.trajectory_length,
                    decisions: a.state.decision_count,
                    mean_latency: if s.count == 0 { 0.0 } else { s.sum / f64::from(s.count) },
                    max_latency: s.max,
                    energy: a.energy_used.total(),
                    energy_breakdown: a.energy_used,
                    energy_remaining: a.state.energy,
                    uplink_bytes: self.channels[i].uplink_bytes(),
                    downlink_bytes: self.channels[i].downlink_bytes(),
                    fallback_count: a.fallback_count,
                    waypoints_completed: a.waypoints_completed,
                    mission_time: self.mission_time[i],
                    failed: !a.is_alive(),
                }
            })
            .collect();
        let mission_complete = self.remaining.is_empty();
        let report = RunReport {
            mode: self.mode,
            seed: self.seed,
            ticks: self.ticks,
            mission_complete,
            tick_limit_exceeded: !mission_complete
                && self.ticks >= self.tick_limit
                && self.agents.iter().any(UavAgent::is_alive),
            waypoints_total: self.world.waypoints.len() as u64,
            aggregate: Aggregate::of(&uavs),
            uavs,
            bs_energy: self.bs_energy,
            bs_plans: self.bs.plans,
            collab_requests: self.bs.collab_requests,
            sync_attempts: self.sync_attempts,
            summary_bytes: self.summary_bytes,
            raw_window_bytes: self.raw_window_bytes,
            link_dropped: self.channels.iter().map(Channel::dropped).sum(),
            errors: self.errors,
        };
        RunOutput {
            report,
            log: self.log,
            world: self.world,
            memory: self.bs.lts,
        }
    }
}

fn fs_bytes(fs: &FullState) -> usize {
    use crate::wire::Canonical;
    fs.encoded_len()
}
