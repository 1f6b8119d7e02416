//! Two-tier agent memory.
//!
//! UAVs keep a bounded [`ShortTermMemory`] of recent observations and
//! decisions. At each sync they send an [`EpisodeSummary`]: a delta keyed on
//! what the base station already knows, not the raw window. The base station
//! appends summaries to a [`LongTermStore`] indexed by `(uav_id, sync_round)`
//! and merges obstacle reports into its global map.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::FallbackReason;
use crate::wire::{cell_state_tag, Canonical, Reader, WireError, Writer};
use crate::world::{Cell, CellState, KnownState, LocalMapCache};

pub const DEFAULT_STM_CAPACITY: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntryKind {
    Observation,
    Decision,
    Fallback,
    SyncMarker,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum EntryPayload {
    Observation {
        revealed: Vec<(Cell, CellState)>,
    },
    Decision {
        from: Cell,
        to: Cell,
        target: Option<Cell>,
        completed: Option<Cell>,
        latency: f64,
    },
    Fallback {
        reason: FallbackReason,
        at: Cell,
    },
    SyncMarker {
        round: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryEntry {
    pub timestamp: f64,
    pub payload: EntryPayload,
}

impl MemoryEntry {
    pub fn new(timestamp: f64, payload: EntryPayload) -> Self {
        Self { timestamp, payload }
    }

    pub fn kind(&self) -> EntryKind {
        match self.payload {
            EntryPayload::Observation { .. } => EntryKind::Observation,
            EntryPayload::Decision { .. } => EntryKind::Decision,
            EntryPayload::Fallback { .. } => EntryKind::Fallback,
            EntryPayload::SyncMarker { .. } => EntryKind::SyncMarker,
        }
    }
}

impl Canonical for MemoryEntry {
    fn encode(&self, w: &mut Writer) {
        w.real(self.timestamp);
        match &self.payload {
            EntryPayload::Observation { revealed } => {
                w.tag(0);
                w.counter(revealed.len() as u32);
                for &(c, s) in revealed {
                    w.cell(c);
                    w.tag(cell_state_tag(s));
                }
            }
            EntryPayload::Decision {
                from,
                to,
                target,
                completed,
                latency,
            } => {
                w.tag(1);
                w.cell(*from);
                w.cell(*to);
                w.opt_cell(*target);
                w.opt_cell(*completed);
                w.real(*latency);
            }
            EntryPayload::Fallback { reason, at } => {
                w.tag(2);
                w.tag(reason.code());
                w.cell(*at);
            }
            EntryPayload::SyncMarker { round } => {
                w.tag(3);
                w.counter(*round);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RefreshDirective {
    None,
    Clear,
    TruncateTo(u32),
}

impl RefreshDirective {
    pub(crate) fn encode(&self, w: &mut Writer) {
        match *self {
            RefreshDirective::None => {
                w.tag(0);
                w.counter(0);
            }
            RefreshDirective::Clear => {
                w.tag(1);
                w.counter(0);
            }
            RefreshDirective::TruncateTo(n) => {
                w.tag(2);
                w.counter(n);
            }
        }
    }
}

/// Bounded FIFO of recent entries. The "window" is every entry after the most
/// recent sync marker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortTermMemory {
    entries: VecDeque<MemoryEntry>,
    capacity: usize,
    last_synced_round: u32,
}

impl ShortTermMemory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "short-term memory capacity must be positive");
        Self {
            entries: VecDeque::with_capacity(capacity),
            capacity,
            last_synced_round: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn last_synced_round(&self) -> u32 {
        self.last_synced_round
    }

    pub fn entries(&self) -> impl Iterator<Item = &MemoryEntry> {
        self.entries.iter()
    }

    pub fn record(&mut self, entry: MemoryEntry) {
        debug_assert!(
            self.entries.back().is_none_or(|e| e.timestamp <= entry.timestamp),
            "short-term memory entries must be timestamp ordered"
        );
        if let EntryPayload::SyncMarker { round } = entry.payload {
            self.last_synced_round = round;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    pub fn window(&self) -> impl Iterator<Item = &MemoryEntry> {
        let start = self
            .entries
            .iter()
            .rposition(|e| e.kind() == EntryKind::SyncMarker)
            .map_or(0, |i| i + 1);
        self.entries.iter().skip(start)
    }

    /// Canonical size of the raw window, i.e. what a full context backhaul would cost.
    pub fn window_bytes(&self) -> usize {
        self.window().map(Canonical::encoded_len).sum()
    }

    pub fn apply_refresh(&mut self, directive: RefreshDirective) {
        match directive {
            RefreshDirective::None => {}
            RefreshDirective::Clear => self.entries.clear(),
            RefreshDirective::TruncateTo(n) => {
                let n = n as usize;
                while self.entries.len() > n {
                    self.entries.pop_front();
                }
            }
        }
    }
}

/// State a UAV attaches to a summary that is not derivable from its memory window.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryContext {
    pub uav_id: u32,
    pub sync_round: u32,
    pub timestamp: f64,
    pub position: Cell,
    pub residual: Vec<Cell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub uav_id: u32,
    pub sync_round: u32,
    pub timestamp: f64,
    pub position: Cell,
    pub obstacle_deltas: Vec<(Cell, KnownState)>,
    pub waypoints_completed: Vec<Cell>,
    pub residual: Vec<Cell>,
    pub latency_mean: f64,
    pub latency_max: f64,
    pub decision_count: u32,
    pub fallback_count: u32,
}

impl EpisodeSummary {
    pub fn residual_count(&self) -> usize {
        self.residual.len()
    }

    pub fn payload_bytes(&self) -> usize {
        self.encoded_len()
    }

    pub fn key(&self) -> IndexKey {
        IndexKey {
            uav_id: self.uav_id,
            sync_round: self.sync_round,
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let uav_id = r.counter()?;
        let sync_round = r.counter()?;
        let timestamp = r.real()?;
        let position = r.cell()?;
        let n = r.counter()? as usize;
        let obstacle_deltas = (0..n).map(|_| r.cell_report()).collect::<Result<_, _>>()?;
        let waypoints_completed = r.cells()?;
        let residual = r.cells()?;
        let latency_mean = r.real()?;
        let latency_max = r.real()?;
        let decision_count = r.counter()?;
        let fallback_count = r.counter()?;
        r.finish()?;
        Ok(Self {
            uav_id,
            sync_round,
            timestamp,
            position,
            obstacle_deltas,
            waypoints_completed,
            residual,
            latency_mean,
            latency_max,
            decision_count,
            fallback_count,
        })
    }
}

impl Canonical for EpisodeSummary {
    fn encode(&self, w: &mut Writer) {
        w.counter(self.uav_id);
        w.counter(self.sync_round);
        w.real(self.timestamp);
        w.cell(self.position);
        w.counter(self.obstacle_deltas.len() as u32);
        for &(c, s) in &self.obstacle_deltas {
            w.cell_report(c, s);
        }
        w.cells(&self.waypoints_completed);
        w.cells(&self.residual);
        w.real(self.latency_mean);
        w.real(self.latency_max);
        w.counter(self.decision_count);
        w.counter(self.fallback_count);
    }
}

/// Condenses the current window into a summary. Obstacles the base station
/// already knows (`bs_known`) are left out.
pub fn summarize(stm: &ShortTermMemory, ctx: SummaryContext, bs_known: &BTreeSet<Cell>) -> EpisodeSummary {
    let mut obstacles = BTreeSet::new();
    let mut completed = Vec::new();
    let mut latency_sum = 0.0;
    let mut latency_max: f64 = 0.0;
    let mut decisions = 0u32;
    let mut fallbacks = 0u32;
    for e in stm.window() {
        match &e.payload {
            EntryPayload::Observation { revealed } => {
                obstacles.extend(
                    revealed
                        .iter()
                        .filter(|(c, s)| *s == CellState::Obstacle && !bs_known.contains(c))
                        .map(|(c, _)| *c),
                );
            }
            EntryPayload::Decision {
                completed: done, latency, ..
            } => {
                decisions += 1;
                latency_sum += latency;
                latency_max = latency_max.max(*latency);
                if let Some(c) = done {
                    completed.push(*c);
                }
            }
            EntryPayload::Fallback { .. } => fallbacks += 1,
            EntryPayload::SyncMarker { .. } => {}
        }
    }
    EpisodeSummary {
        uav_id: ctx.uav_id,
        sync_round: ctx.sync_round,
        timestamp: ctx.timestamp,
        position: ctx.position,
        obstacle_deltas: obstacles.into_iter().map(|c| (c, KnownState::Obstacle)).collect(),
        waypoints_completed: completed,
        residual: ctx.residual,
        latency_mean: if decisions == 0 {
            0.0
        } else {
            latency_sum / f64::from(decisions)
        },
        latency_max,
        decision_count: decisions,
        fallback_count: fallbacks,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IndexKey {
    pub uav_id: u32,
    pub sync_round: u32,
}

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("duplicate episode for uav {} round {}", .0.uav_id, .0.sync_round)]
    DuplicateEpisode(IndexKey),
    #[error("log line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("log line {line}: {source}")]
    Wire {
        line: usize,
        #[source]
        source: WireError,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Base-station long-term memory: append-only episode log, its index, and the
/// merged global obstacle map.
#[derive(Clone, Debug)]
pub struct LongTermStore {
    episodes: Vec<EpisodeSummary>,
    index: BTreeMap<IndexKey, usize>,
    global_map: LocalMapCache,
    duplicates_ignored: u64,
}

impl LongTermStore {
    pub fn new(width: u16, height: u16) -> Self {
        Self {
            episodes: Vec::new(),
            index: BTreeMap::new(),
            global_map: LocalMapCache::unknown(width, height),
            duplicates_ignored: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn episodes(&self) -> &[EpisodeSummary] {
        &self.episodes
    }

    pub fn keys(&self) -> impl Iterator<Item = IndexKey> + '_ {
        self.index.keys().copied()
    }

    pub fn global_map(&self) -> &LocalMapCache {
        &self.global_map
    }

    pub fn duplicates_ignored(&self) -> u64 {
        self.duplicates_ignored
    }

    pub fn known_obstacles(&self) -> BTreeSet<Cell> {
        self.global_map.known_obstacles().collect()
    }

    pub fn ingest(&mut self, summary: EpisodeSummary) -> Result<IndexKey, MemoryError> {
        let key = summary.key();
        if self.index.contains_key(&key) {
            self.duplicates_ignored += 1;
            return Err(MemoryError::DuplicateEpisode(key));
        }
        for &(c, s) in &summary.obstacle_deltas {
            self.global_map.merge_report(c, s, summary.timestamp);
        }
        self.index.insert(key, self.episodes.len());
        self.episodes.push(summary);
        Ok(key)
    }

    pub fn retrieve(&self, key: IndexKey) -> Option<&EpisodeSummary> {
        self.index.get(&key).map(|&i| &self.episodes[i])
    }

    /// The most recent `rounds` episodes for one UAV, newest last.
    pub fn recent(&self, uav_id: u32, rounds: usize) -> Vec<&EpisodeSummary> {
        let lo = IndexKey { uav_id, sync_round: 0 };
        let hi = IndexKey {
            uav_id,
            sync_round: u32::MAX,
        };
        let mut v: Vec<&EpisodeSummary> = self
            .index
            .range(lo..=hi)
            .rev()
            .take(rounds)
            .map(|(_, &i)| &self.episodes[i])
            .collect();
        v.reverse();
        v
    }

    /// Writes one log record: decimal byte length, a space, the canonical bytes in hex.
    pub fn write_record(w: &mut impl Write, summary: &EpisodeSummary) -> io::Result<()> {
        let bytes = summary.to_bytes();
        writeln!(w, "{} {}", bytes.len(), hex::encode(bytes))
    }

    pub fn write_log(&self, w: &mut impl Write) -> io::Result<()> {
        for e in &self.episodes {
            Self::write_record(w, e)?;
        }
        Ok(())
    }

    /// Rebuilds a store by re-ingesting every record of a log.
    pub fn replay(r: impl BufRead, width: u16, height: u16) -> Result<Self, MemoryError> {
        let mut store = Self::new(width, height);
        for (i, line) in r.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (len, body) = line.split_once(' ').ok_or_else(|| MemoryError::CorruptLog {
                line: line_no,
                reason: "missing length prefix".into(),
            })?;
            let len: usize = len.parse().map_err(|_| MemoryError::CorruptLog {
                line: line_no,
                reason: format!("bad length {len:?}"),
            })?;
            let bytes = hex::decode(body).map_err(|e| MemoryError::CorruptLog {
                line: line_no,
                reason: e.to_string(),
            })?;
            if bytes.len() != len {
                return Err(MemoryError::CorruptLog {
                    line: line_no,
                    reason: format!("length prefix {len} but {} bytes", bytes.len()),
                });
            }
            let summary =
                EpisodeSummary::decode(&bytes).map_err(|source| MemoryError::Wire { line: line_no, source })?;
            store.ingest(summary)?;
        }
        Ok(store)
    }
}
