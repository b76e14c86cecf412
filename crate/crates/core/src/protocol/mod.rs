//! Builder and node logic for one slot: seeding plans, boost maps, the
//! adaptive fetcher and the node state machine.
//!
//! Everything here is event-driven and free of I/O. Handlers take the
//! current time and return the messages and timers the runner must act on.

pub mod fetch;
pub mod message;
pub mod node;
pub mod schedule;
pub mod seeding;

pub use fetch::{FetchContext, FetchOutcome, FetchState, PlannedQuery, RoundStats};
pub use message::{BuilderToken, CellBundle, FetchTask, Message, Query, QueryTag, Reply, SeedMessage};
pub use node::{Action, NodeConfig, NodeCounters, NodeReport, NodeState, TimerKind, Verdict};
pub use schedule::{constant_schedule, default_schedule, FetchSchedule};
pub use seeding::{
    build_boost_maps, plan_seeding, BoostIndex, ConsolidationBoostMap, PolicyKind, SeedingPlan, SeedingPolicy,
};
