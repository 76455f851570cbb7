//! Layered space-air-ground network simulation with shortest-path and
//! CNN-selected path-combination routing.
//!
//! The neural network is generic over its scalar type ([`Scalar`], `f32` or
//! `f64`); the simulator and routing code work in `f64` and integer
//! nanoseconds. Aliases for the concrete types used by the router are
//! defined at the crate root.

pub mod error;
pub mod harness;
pub mod netsim;
pub mod neural;
pub mod routing;
pub mod scalar;
pub mod topology;
pub mod traffic;

pub use error::{HarnessError, NeuralError, RoutingError, SimError, TopologyError, TrafficError};
pub use harness::{ExperimentConfig, Policy, SweepResult, SweepRow};
pub use netsim::{run_fluid_eval, run_packet_sim, MetricsReport, RunParams};
pub use routing::{CombinationSpace, OdDemands, OdPair, PathCombination, RoutingPolicy};
pub use scalar::Scalar;
pub use topology::{build_reference_topology, LinkId, NodeId, NodeKind, Path, Topology, TopologyConfig};
pub use traffic::{select_active_sources, Flow, TrafficConfig};

/// The model type the router runs.
pub type Model = neural::CnnModel<f64>;
/// Single-precision model, for checkpoints half the size.
pub type Model32 = neural::CnnModel<f32>;
pub type Matrix = neural::Tensor<f64>;
