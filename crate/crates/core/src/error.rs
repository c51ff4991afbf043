//! Error types shared across the crate.

use thiserror::Error;

/// Errors from the core data model (instances, schedules).
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("instance has no jobs")]
    EmptyInstance,
    #[error("job {0} has no operations")]
    EmptyJob(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("machine id {machine} out of range (num_machines = {num_machines})")]
    MachineOutOfRange { machine: usize, num_machines: usize },
    #[error("no machine can advance while operations remain (infeasible job sequences)")]
    Deadlock,
    #[error("operation of job {job} dispatched before its predecessor")]
    NotReady { job: usize },
    #[error("schedule is already complete")]
    Complete,
    #[error("machine {expected} required, got {got}")]
    MachineMismatch { expected: usize, got: usize },
}

/// Errors from parsing and writing instance/schedule files.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("serialization failed: {0}")]
    Serialization(String),
    #[error("unknown benchmark instance '{0}'")]
    UnknownInstance(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors from the random instance generator.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid range [{lo}, {hi}]")]
    InvalidRange { lo: usize, hi: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Errors from dispatching rules.
#[derive(Debug, Error)]
pub enum RuleError {
    #[error("no operations available to dispatch")]
    EmptyActionSet,
    #[error("unknown rule '{0}'")]
    UnknownRule(String),
    #[error("unknown filter '{0}'")]
    UnknownFilter(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Errors from graph construction and updates.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node {0} does not exist")]
    UnknownNode(usize),
    #[error("node type {0:?} has no feature matrix")]
    UnknownNodeType(crate::graphs::NodeType),
}

/// Errors from the reset/step environments.
#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("feature width changed mid-episode: {0}")]
    WidthMismatch(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Errors from the exact solver and dataset exporter.
#[derive(Debug, Error)]
pub enum ExactError {
    #[error("optimal-action labeler desynchronized: no available operation is optimal")]
    Desync,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization failed: {0}")]
    Serialization(String),
}
