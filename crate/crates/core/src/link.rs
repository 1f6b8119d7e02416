//! Air-ground channel model.
//!
//! Availability is a two-state Markov chain (Up/Down) stepped once per model
//! tick with exactly one random draw. While Up, a message arrives after
//! `rtt / 2 + bytes / bandwidth`; while Down it waits in a bounded FIFO queue
//! for its direction and is flushed at the next Up tick. Byte counters only
//! move on delivery.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{CollabRequest, Command, FullState, StrategyUpdate};
use crate::memory::EpisodeSummary;
use crate::wire::Canonical;

pub const DEFAULT_QUEUE_CAPACITY: usize = 64;

/// A forced outage window in ticks; `end_tick` of `None` lasts to the end of the run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outage {
    pub start_tick: u64,
    #[serde(default)]
    pub end_tick: Option<u64>,
}

impl Outage {
    pub fn covers(&self, tick: u64) -> bool {
        tick >= self.start_tick && self.end_tick.is_none_or(|end| tick < end)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkParams {
    pub p_down: f64,
    pub p_up: f64,
    pub bandwidth: f64,
    pub rtt: f64,
    pub queue_capacity: usize,
    pub outage: Option<Outage>,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            p_down: 0.05,
            p_up: 0.25,
            bandwidth: 10_000.0,
            rtt: 0.05,
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            outage: None,
        }
    }
}

impl LinkParams {
    pub fn perfect() -> Self {
        Self {
            p_down: 0.0,
            p_up: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.p_down) {
            return Err(format!("link.p_down: {} not in [0, 1]", self.p_down));
        }
        if !(0.0..=1.0).contains(&self.p_up) {
            return Err(format!("link.p_up: {} not in [0, 1]", self.p_up));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(format!("link.bandwidth: {} must be positive", self.bandwidth));
        }
        if !(self.rtt >= 0.0 && self.rtt.is_finite()) {
            return Err(format!("link.rtt: {} must be non-negative", self.rtt));
        }
        if self.queue_capacity == 0 {
            return Err("link.queue_capacity: must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkState {
    Up,
    Down,
}

/// One Markov step, consuming exactly one draw from `rng`.
pub fn step_link(state: LinkState, params: &LinkParams, rng: &mut impl Rng) -> LinkState {
    let u: f64 = rng.gen();
    match state {
        LinkState::Up if u < params.p_down => LinkState::Down,
        LinkState::Down if u < params.p_up => LinkState::Up,
        s => s,
    }
}

/// One-way delay for a payload.
pub fn transfer_time(params: &LinkParams, payload_bytes: usize) -> f64 {
    params.rtt / 2.0 + payload_bytes as f64 / params.bandwidth
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeId {
    Uav(u32),
    BaseStation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    SemanticSummary,
    StrategyUpdate,
    FullState,
    Command,
    CollabRequest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Summary(EpisodeSummary),
    Update(StrategyUpdate),
    FullState(FullState),
    Command(Command),
    CollabRequest(CollabRequest),
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::Summary(_) => MessageKind::SemanticSummary,
            Payload::Update(_) => MessageKind::StrategyUpdate,
            Payload::FullState(_) => MessageKind::FullState,
            Payload::Command(_) => MessageKind::Command,
            Payload::CollabRequest(_) => MessageKind::CollabRequest,
        }
    }

    fn encoded_len(&self) -> usize {
        match self {
            Payload::Summary(p) => p.encoded_len(),
            Payload::Update(p) => p.encoded_len(),
            Payload::FullState(p) => p.encoded_len(),
            Payload::Command(p) => p.encoded_len(),
            Payload::CollabRequest(p) => p.encoded_len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub created_at: f64,
    payload_bytes: usize,
    pub payload: Payload,
}

impl Message {
    pub fn new(sender: NodeId, receiver: NodeId, created_at: f64, payload: Payload) -> Self {
        Self {
            sender,
            receiver,
            created_at,
            payload_bytes: payload.encoded_len(),
            payload,
        }
    }

    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }

    pub fn payload_bytes(&self) -> usize {
        self.payload_bytes
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Uplink,
    Downlink,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DeliveryOutcome {
    Delivered { at: f64 },
    Queued,
    Dropped,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Delivery {
    pub message: Message,
    pub at: f64,
    pub tick: u64,
}

#[derive(Debug, Error)]
#[error("link queue overflow ({direction:?}): dropped oldest {:?} message", .dropped.kind())]
pub struct QueueOverflow {
    pub direction: Direction,
    pub dropped: Box<Message>,
}

/// One UAV's channel to the base station. Uplink and downlink share availability.
#[derive(Clone, Debug)]
pub struct Channel {
    params: LinkParams,
    rng: ChaCha8Rng,
    chain: LinkState,
    tick: u64,
    now: f64,
    uplink_queue: VecDeque<Message>,
    downlink_queue: VecDeque<Message>,
    uplink_inbox: Vec<Delivery>,
    downlink_inbox: Vec<Delivery>,
    uplink_bytes: u64,
    downlink_bytes: u64,
    dropped: u64,
    history: Vec<LinkState>,
}

impl Channel {
    /// `stream` separates independent channels derived from the same seed.
    pub fn new(params: LinkParams, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut ch = Self {
            params,
            rng,
            chain: LinkState::Up,
            tick: 0,
            now: 0.0,
            uplink_queue: VecDeque::new(),
            downlink_queue: VecDeque::new(),
            uplink_inbox: Vec::new(),
            downlink_inbox: Vec::new(),
            uplink_bytes: 0,
            downlink_bytes: 0,
            dropped: 0,
            history: Vec::new(),
        };
        ch.history.push(ch.state());
        ch
    }

    pub fn params(&self) -> &LinkParams {
        &self.params
    }

    /// Effective state at the current tick, with any scripted outage applied.
    pub fn state(&self) -> LinkState {
        match self.params.outage {
            Some(o) if o.covers(self.tick) => LinkState::Down,
            _ => self.chain,
        }
    }

    pub fn is_up(&self) -> bool {
        self.state() == LinkState::Up
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Advances to `tick` (one Markov step per tick) and flushes queues if the link is Up.
    pub fn advance_to(&mut self, tick: u64, now: f64) {
        while self.tick < tick {
            self.chain = step_link(self.chain, &self.params, &mut self.rng);
            self.tick += 1;
            self.history.push(self.state());
        }
        self.now = now;
        if self.is_up() {
            while let Some(m) = self.uplink_queue.pop_front() {
                self.deliver(Direction::Uplink, m, now);
            }
            while let Some(m) = self.downlink_queue.pop_front() {
                self.deliver(Direction::Downlink, m, now);
            }
        }
    }

    fn deliver(&mut self, direction: Direction, message: Message, sent_at: f64) -> f64 {
        let at = sent_at + transfer_time(&self.params, message.payload_bytes());
        let bytes = message.payload_bytes() as u64;
        let d = Delivery {
            message,
            at,
            tick: self.tick,
        };
        match direction {
            Direction::Uplink => {
                self.uplink_bytes += bytes;
                self.uplink_inbox.push(d);
            }
            Direction::Downlink => {
                self.downlink_bytes += bytes;
                self.downlink_inbox.push(d);
            }
        }
        at
    }

    /// Sends `msg` at model time `now`. On overflow the new message is queued and the
    /// oldest one in that direction is dropped and returned in the error.
    pub fn transmit(&mut self, direction: Direction, msg: Message, now: f64) -> Result<DeliveryOutcome, QueueOverflow> {
        if self.is_up() {
            let at = self.deliver(direction, msg, now);
            return Ok(DeliveryOutcome::Delivered { at });
        }
        let cap = self.params.queue_capacity;
        let queue = match direction {
            Direction::Uplink => &mut self.uplink_queue,
            Direction::Downlink => &mut self.downlink_queue,
        };
        queue.push_back(msg);
        if queue.len() > cap {
            let dropped = queue.pop_front().expect("queue is non-empty");
            self.dropped += 1;
            return Err(QueueOverflow {
                direction,
                dropped: Box::new(dropped),
            });
        }
        Ok(DeliveryOutcome::Queued)
    }

    pub fn take_delivered(&mut self, direction: Direction) -> Vec<Delivery> {
        match direction {
            Direction::Uplink => std::mem::take(&mut self.uplink_inbox),
            Direction::Downlink => std::mem::take(&mut self.downlink_inbox),
        }
    }

    pub fn queued(&self, direction: Direction) -> usize {
        match direction {
            Direction::Uplink => self.uplink_queue.len(),
            Direction::Downlink => self.downlink_queue.len(),
        }
    }

    pub fn uplink_bytes(&self) -> u64 {
        self.uplink_bytes
    }

    pub fn downlink_bytes(&self) -> u64 {
        self.downlink_bytes
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Effective state at every tick so far, index = tick.
    pub fn history(&self) -> &[LinkState] {
        &self.history
    }
}
