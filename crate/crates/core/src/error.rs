use std::path::PathBuf;

use thiserror::Error;

use crate::topology::NodeId;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("invalid topology config: {0}")]
    InvalidConfig(String),
    #[error("invalid link {src}-{dst}: {reason}")]
    InvalidLink {
        src: usize,
        dst: usize,
        reason: &'static str,
    },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no path from {src} to {dst}")]
    NoPath { src: NodeId, dst: NodeId },
    #[error("shortest path endpoints must differ (got {0} twice)")]
    SameEndpoints(NodeId),
    #[error("topology is not connected: node {0} unreachable from node 0")]
    Disconnected(NodeId),
}

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("requested {requested} active sources but only {available} are available")]
    TooManySources { requested: usize, available: usize },
    #[error("invalid traffic parameter: {0}")]
    InvalidParam(String),
}

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("no egress link {0}-{1} in topology")]
    MissingEgress(NodeId, NodeId),
    #[error("expected {expected} models (one per combination), got {got}")]
    ModelCount { expected: usize, got: usize },
    #[error("node {0} is not attached to a MEO satellite")]
    Unattached(NodeId),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid route for flow {flow}: hop {hop} ({from} -> {to}) is not a link")]
    InvalidRoute {
        flow: usize,
        hop: usize,
        from: NodeId,
        to: NodeId,
    },
    #[error("route for flow {flow} does not connect its endpoints")]
    RouteEndpoints { flow: usize },
    #[error("policy resolved {got} routes for {expected} flows")]
    RouteCount { expected: usize, got: usize },
    #[error("bit conservation violated: generated {generated} != delivered {delivered} + dropped {dropped} + in flight {in_flight}")]
    Conservation {
        generated: u64,
        delivered: u64,
        dropped: u64,
        in_flight: u64,
    },
    #[error("invalid simulation parameter: {0}")]
    InvalidParam(String),
    #[error("OD pair {0} has no path in the combination")]
    MissingPath(String),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error("trace write failed: {0}")]
    Trace(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape { expected: Vec<usize>, got: Vec<usize> },
    #[error("non-finite {what} during training (step loss {loss})")]
    NonFinite { what: &'static str, loss: f64 },
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid hyperparameter: {0}")]
    InvalidParam(String),
    #[error("no demand samples supplied")]
    NoSamples,
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("oracle failed: {0}")]
    Oracle(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("dnn policy needs checkpoints (routing.checkpoint_dir) or pretrain.enabled = true")]
    MissingCheckpoint,
    #[error("plot needs at least 2 distinct source counts, got {0}")]
    InsufficientPoints(usize),
    #[error("empty sweep result")]
    EmptyResult,
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the configuration rather than the run itself.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            HarnessError::Config(_)
                | HarnessError::MissingCheckpoint
                | HarnessError::Topology(TopologyError::InvalidConfig(_))
        )
    }
}
