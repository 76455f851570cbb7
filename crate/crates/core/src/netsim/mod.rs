//! Packet-level discrete-event simulation and the flow-level (fluid) evaluator.

mod fluid;
mod packet;

pub use fluid::{fluid_state, run_fluid_eval, FluidOracle, FluidState};
pub use packet::{buffer_snapshot, run_packet_sim, QueueState, RunParams, SimDiagnostics, SimState, Simulator};

/// Outcome of one simulated run or interval.
///
/// `delivered + dropped + in_flight = generated` and
/// `throughput = delivered / duration`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub duration_s: f64,
    pub generated_bits: f64,
    pub delivered_bits: f64,
    pub dropped_bits: f64,
    pub in_flight_bits: f64,
    pub throughput_bps: f64,
    pub loss_rate: f64,
    pub mean_delay_s: f64,
    /// Busy fraction of each directed link, indexed by `LinkId`.
    pub per_link_utilization: Vec<f64>,
}

impl MetricsReport {
    pub fn empty(duration_s: f64) -> Self {
        MetricsReport {
            duration_s,
            generated_bits: 0.0,
            delivered_bits: 0.0,
            dropped_bits: 0.0,
            in_flight_bits: 0.0,
            throughput_bps: 0.0,
            loss_rate: 0.0,
            mean_delay_s: 0.0,
            per_link_utilization: Vec::new(),
        }
    }

    pub(crate) fn from_totals(
        duration_s: f64,
        generated: f64,
        delivered: f64,
        dropped: f64,
        in_flight: f64,
        mean_delay_s: f64,
        per_link_utilization: Vec<f64>,
    ) -> Self {
        MetricsReport {
            duration_s,
            generated_bits: generated,
            delivered_bits: delivered,
            dropped_bits: dropped,
            in_flight_bits: in_flight,
            throughput_bps: if duration_s > 0.0 { delivered / duration_s } else { 0.0 },
            loss_rate: if generated > 0.0 {
                (dropped / generated).clamp(0.0, 1.0)
            } else {
                0.0
            },
            mean_delay_s,
            per_link_utilization,
        }
    }

    pub fn offered_bps(&self) -> f64 {
        if self.duration_s > 0.0 {
            self.generated_bits / self.duration_s
        } else {
            0.0
        }
    }
}
