//! Transmission scheduling (TS).
//!
//! Each EOS serves only its longest queue, so link `(k, n)` is worth
//! `max_i Q[k][i] * C[k][n]`. A destination with `M_n` transceivers
//! appears `M_n` times in the assignment.

use ndarray::{Array2, Array3};

use crate::assignment::{max_weight_assignment, AssignmentProblem};
use crate::error::{Error, Result};
use crate::queueing::QueueState;
use crate::scenario::{ChannelState, NetworkConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TsOutput {
    /// `[k, n]` downlink schedule.
    pub y: Array2<bool>,
    /// `[k, n, i]` offered service.
    pub service: Array3<f64>,
    /// `sum Q[k][i*] * y * C` of the chosen matching.
    pub weight: f64,
}

/// Index of the longest queue on each EOS, ties to the lowest flow.
pub fn longest_queues(queues: &QueueState) -> Vec<usize> {
    queues
        .data
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (i, &q) in row.iter().enumerate() {
                if q > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Assigns EOSs to destinations by `weights[k][n]` and gives the whole link
/// capacity to `flows[k]`.
pub(crate) fn schedule_links(weights: Array2<f64>, flows: &[usize], channels: &ChannelState, config: &NetworkConfig) -> TsOutput {
    let (eos, dests) = weights.dim();
    let assignment = max_weight_assignment(&AssignmentProblem::with_multiplicity(weights, config.transceivers.clone()));
    let y = assignment.indicator(eos, dests);
    let mut service = Array3::zeros((eos, dests, config.num_targets));
    for &(k, n) in &assignment.pairs {
        service[[k, n, flows[k]]] = channels.trans[[k, n]];
    }
    TsOutput {
        y,
        service,
        weight: assignment.total_weight,
    }
}

pub fn ts_solve(queues: &QueueState, channels: &ChannelState, config: &NetworkConfig) -> Result<TsOutput> {
    let (targets, eos, dests) = (config.num_targets, config.num_eos, config.num_destinations);
    if queues.data.dim() != (eos, targets) {
        return Err(Error::Dimension("queue state does not match the config".into()));
    }
    if channels.trans.dim() != (eos, dests) || config.transceivers.len() != dests {
        return Err(Error::Dimension("channel state does not match the config".into()));
    }
    let flows = longest_queues(queues);
    let weights = Array2::from_shape_fn((eos, dests), |(k, n)| queues.data[[k, flows[k]]] * channels.trans[[k, n]]);
    Ok(schedule_links(weights, &flows, channels, config))
}
