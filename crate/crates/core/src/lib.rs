//! Cell-level simulation of explicit-rate ABR flow control on
//! point-to-multipoint virtual circuits.
//!
//! A scenario describes a network of sources, switches and destinations,
//! the VCs that cross it and the branch-point consolidation algorithm
//! in use. [`engine::run`] replays it event by event and returns a
//! [`metrics::MetricsBundle`]; [`output`] turns that into CSV files.

pub mod cells;
pub mod check;
pub mod consolidation;
pub mod endpoints;
pub mod engine;
pub mod erica;
pub mod metrics;
pub mod output;
pub mod scenario;

pub use consolidation::{AlgorithmId, BranchPoint};
pub use engine::{run, EngineError};
pub use metrics::MetricsBundle;
pub use scenario::{load_scenario, parse_scenario, Scenario, ScenarioError};
