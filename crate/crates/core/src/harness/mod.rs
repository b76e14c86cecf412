//! Scenario execution, sweeps, metric aggregation and CSV output.
//!
//! The `pandas-das` binary is a thin wrapper over [`commands`].

pub mod commands;
pub mod metrics;

use crate::availability::AvailabilityError;
use crate::simnet::SimError;

pub use commands::{policy_volume, simulate, sweep, write_outputs, OutputFiles};
pub use metrics::{
    aggregate, coverage_after, nearest_rank, read_csv, write_csv, Aggregate, AggregateRow, Percentiles, PhaseMetrics,
    RoundRow, ScenarioResult, Task,
};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Availability(#[from] AvailabilityError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}
