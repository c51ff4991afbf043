//! A job-shop scheduling toolkit.
//!
//! The crate is organized around a small immutable data model
//! ([`Instance`], [`Schedule`]), a sequential scheduling engine
//! ([`dispatching::Dispatcher`]) with pluggable ready-operation filters and
//! observers, priority dispatching rules ([`rules`]), dynamic scheduling
//! graphs ([`graphs`]), incremental node-feature observers ([`features`]),
//! reward observers ([`rewards`]), reset/step decision environments
//! ([`env`]), and a desk-scale exact solver plus imitation-learning dataset
//! exporter ([`exact`]).

pub mod dispatching;
pub mod env;
pub mod error;
pub mod exact;
pub mod features;
pub mod formats;
pub mod generation;
pub mod graphs;
pub mod instance;
pub mod rewards;
pub mod rules;
pub mod schedule;

pub use error::{
    ConfigError, CoreError, EnvError, ExactError, FormatError, GraphError, RuleError,
};
pub use instance::{Instance, InstanceStats, JobId, MachineId, Operation, OperationId, Time};
pub use schedule::{Schedule, ScheduledOperation, VerifyReport};
