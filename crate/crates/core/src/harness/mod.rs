//! Experiment configuration, source-count sweeps and result files.

mod config;
mod output;
mod sweep;

pub use config::{
    ExperimentConfig, NeuralConfig, Policy, RoutingConfig, SimulationConfig, SweepConfig, ENV_OUT_DIR, ENV_SEED,
};
pub use output::{csv_string, emit_csv, emit_plot, plot_svg, Metric, CSV_HEADER};
pub use sweep::{
    demand_samples, fresh_models, prepare_models, pretrain, routing_policy, run_point, run_sweep, run_sweep_on,
    SweepResult, SweepRow,
};
