//! Simulator for hierarchical UAV / base-station decision making over an
//! unreliable link.

pub mod agents;
pub mod experiment;
pub mod link;
pub mod memory;
pub mod planner;
pub mod scenario;
pub mod toolkit;
pub mod wire;
pub mod world;

pub use experiment::{compare, run, run_with_log, CostModel, Mode, RunReport};
pub use scenario::{Scenario, ScenarioConfig, ScenarioError};
pub use world::{Cell, GridMap};
