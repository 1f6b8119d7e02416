//! Tool registry with capability tags and tier placement.
//!
//! UAVs only ever see Onboard tools; the base station may use Ground ones.
//! Retrieval is a conjunctive tag filter followed by a stable sort on
//! `(latency_cost, energy_cost, name)`; the per-tag index only narrows the
//! candidate set.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::UavState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    Onboard,
    Ground,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TierConstraint {
    Onboard,
    Ground,
    Any,
}

impl TierConstraint {
    pub fn admits(self, tier: Tier) -> bool {
        match self {
            TierConstraint::Any => true,
            TierConstraint::Onboard => tier == Tier::Onboard,
            TierConstraint::Ground => tier == Tier::Ground,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolDescriptor {
    pub name: String,
    pub tier: Tier,
    pub tags: BTreeSet<String>,
    pub latency_cost: f64,
    pub energy_cost: f64,
    #[serde(default)]
    pub resource_floor: f64,
}

impl ToolDescriptor {
    pub fn new(name: &str, tier: Tier, tags: &[&str], latency_cost: f64, energy_cost: f64) -> Self {
        Self {
            name: name.to_string(),
            tier,
            tags: tags.iter().map(|t| t.to_string()).collect(),
            latency_cost,
            energy_cost,
            resource_floor: 0.0,
        }
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.resource_floor = floor;
        self
    }

    pub fn matches(&self, query: &ToolQuery) -> bool {
        query.tier_constraint.admits(self.tier)
            && self.resource_floor <= query.available_energy
            && query.required_tags.iter().all(|t| self.tags.contains(t))
    }

    fn rank_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.latency_cost
            .total_cmp(&other.latency_cost)
            .then_with(|| self.energy_cost.total_cmp(&other.energy_cost))
            .then_with(|| self.name.cmp(&other.name))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolQuery {
    pub required_tags: BTreeSet<String>,
    pub tier_constraint: TierConstraint,
    pub available_energy: f64,
    pub k: usize,
}

impl ToolQuery {
    pub fn new(tags: &[&str], tier_constraint: TierConstraint, available_energy: f64, k: usize) -> Self {
        Self {
            required_tags: tags.iter().map(|t| t.to_string()).collect(),
            tier_constraint,
            available_energy,
            k,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolError {
    #[error("duplicate tool name {0:?}")]
    DuplicateName(String),
    #[error("tool {name:?}: {reason}")]
    InvalidDescriptor { name: String, reason: String },
    #[error("tool {name:?} needs {floor:.6} energy, uav {uav} has {available:.6}")]
    InsufficientEnergy {
        name: String,
        uav: u32,
        floor: f64,
        available: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    tools: Vec<ToolDescriptor>,
    by_name: BTreeMap<String, usize>,
    by_tag: BTreeMap<String, Vec<usize>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_tools(tools: impl IntoIterator<Item = ToolDescriptor>) -> Result<Self, ToolError> {
        let mut r = Self::new();
        for t in tools {
            r.register(t)?;
        }
        Ok(r)
    }

    pub fn register(&mut self, descriptor: ToolDescriptor) -> Result<(), ToolError> {
        if self.by_name.contains_key(&descriptor.name) {
            return Err(ToolError::DuplicateName(descriptor.name));
        }
        for (what, v) in [
            ("latency_cost", descriptor.latency_cost),
            ("energy_cost", descriptor.energy_cost),
            ("resource_floor", descriptor.resource_floor),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ToolError::InvalidDescriptor {
                    name: descriptor.name,
                    reason: format!("{what} must be a finite non-negative number, got {v}"),
                });
            }
        }
        let i = self.tools.len();
        for tag in &descriptor.tags {
            self.by_tag.entry(tag.clone()).or_default().push(i);
        }
        self.by_name.insert(descriptor.name.clone(), i);
        self.tools.push(descriptor);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub fn tools(&self) -> &[ToolDescriptor] {
        &self.tools
    }

    pub fn get(&self, name: &str) -> Option<&ToolDescriptor> {
        self.by_name.get(name).map(|&i| &self.tools[i])
    }

    /// Number of tools indexed under `tag`.
    pub fn tag_count(&self, tag: &str) -> usize {
        self.by_tag.get(tag).map_or(0, Vec::len)
    }

    pub fn select_topk(&self, query: &ToolQuery) -> Vec<&ToolDescriptor> {
        if query.k == 0 {
            return Vec::new();
        }
        // Scan the shortest posting list among the required tags.
        let candidates: Box<dyn Iterator<Item = usize>> = match query
            .required_tags
            .iter()
            .map(|t| self.by_tag.get(t).map_or(&[][..], Vec::as_slice))
            .min_by_key(|l| l.len())
        {
            Some(list) => Box::new(list.iter().copied()),
            None => Box::new(0..self.tools.len()),
        };
        let mut hits: Vec<&ToolDescriptor> = candidates
            .map(|i| &self.tools[i])
            .filter(|t| t.matches(query))
            .collect();
        hits.sort_by(|a, b| a.rank_cmp(b));
        hits.truncate(query.k);
        hits
    }

    /// Best single match, if any.
    pub fn select_one(&self, tags: &[&str], tier: TierConstraint, available_energy: f64) -> Option<&ToolDescriptor> {
        self.select_topk(&ToolQuery::new(tags, tier, available_energy, 1))
            .into_iter()
            .next()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvocationReceipt {
    pub tool: String,
    pub tier: Tier,
    pub latency_cost: f64,
    pub energy_cost: f64,
}

/// Charges `tool` against the UAV's battery.
pub fn invoke(tool: &ToolDescriptor, uav: &mut UavState) -> Result<InvocationReceipt, ToolError> {
    if tool.resource_floor > uav.energy || tool.energy_cost > uav.energy {
        return Err(ToolError::InsufficientEnergy {
            name: tool.name.clone(),
            uav: uav.id,
            floor: tool.resource_floor.max(tool.energy_cost),
            available: uav.energy,
        });
    }
    uav.energy -= tool.energy_cost;
    Ok(receipt(tool))
}

/// A receipt for a tool run somewhere that has no battery (the base station).
pub fn receipt(tool: &ToolDescriptor) -> InvocationReceipt {
    InvocationReceipt {
        tool: tool.name.clone(),
        tier: tool.tier,
        latency_cost: tool.latency_cost,
        energy_cost: tool.energy_cost,
    }
}
