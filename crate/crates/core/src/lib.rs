//! Deterministic data-grid replication simulator.
//!
//! A scenario describes sites, links, files and jobs. The [`engine`] replays
//! the jobs' file requests under a replication strategy from
//! [`strategies`], producing an [`engine::EventLog`] from which
//! [`metrics`] computes response time, network usage, hit ratio and the
//! distribution-quality metrics. The [`mining`] module holds the correlated
//! pattern miner the RSCP strategy is built on.

pub mod cli;
pub mod distribution;
pub mod engine;
pub mod grid;
pub mod metrics;
pub mod mining;
pub mod report;
pub mod scenario;
pub mod strategies;
pub mod workload;

pub use engine::{simulate, Event, EventKind, EventLog, SimulationInput, SimulationOutput};
pub use grid::{FileId, FileSpec, GridState, GridTopology, JobId, SiteId, SiteSpec, SiteStats};
pub use metrics::{correct_metric, performance_difference, CorrectionSign, MetricReport};
pub use mining::{mine_mfcp, BinaryContext, MiningThresholds, Pattern};
pub use scenario::{RunResult, Scenario, ScenarioConfig};
pub use strategies::{RscpParams, StrategyKind};
