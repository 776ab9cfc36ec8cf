//! Comparison policies.
//!
//! Random draws feasible matchings greedily in a shuffled order. Fixed-CR
//! matches by raw capacity and always compresses at [`FIXED_RATIO`].

use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::assignment::{max_weight_assignment, AssignmentProblem};
use crate::error::{Error, Result};
use crate::queueing::QueueState;
use crate::scenario::{ChannelState, NetworkConfig};

use super::transmission::{longest_queues, schedule_links};
use super::SlotDecision;

pub const FIXED_RATIO: f64 = 0.25;

/// Visits rows in random order; each row picks uniformly among its
/// still-free partners with positive capacity and "none". Column `c` can be
/// taken `limit[c]` times.
fn random_matching<R: Rng + ?Sized>(capacity: &Array2<f64>, limit: &[usize], rng: &mut R) -> Array2<bool> {
    let (rows, cols) = capacity.dim();
    let mut left = limit.to_vec();
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(rng);
    let mut x = Array2::from_elem((rows, cols), false);
    for r in order {
        let mut options: Vec<Option<usize>> = (0..cols)
            .filter(|&c| left[c] > 0 && capacity[[r, c]] > 0.0)
            .map(Some)
            .collect();
        options.push(None);
        if let Some(&Some(c)) = options.choose(rng) {
            x[[r, c]] = true;
            left[c] -= 1;
        }
    }
    x
}

pub fn random_schedule<R: Rng + ?Sized>(
    queues: &QueueState,
    channels: &ChannelState,
    config: &NetworkConfig,
    rng: &mut R,
) -> Result<SlotDecision> {
    check_dims(queues, channels, config)?;
    let mut decision = SlotDecision::idle(config);

    let x = random_matching(&channels.obs, &vec![1; config.num_eos], rng);
    let mut rho = Array2::zeros(x.dim());
    for ((i, k), &on) in x.indexed_iter() {
        if on {
            rho[[i, k]] = *config.compression_set.choose(rng).expect("compression set is non-empty");
        }
    }
    decision.set_observation(x, rho, channels);

    let y = random_matching(&channels.trans, &config.transceivers, rng);
    for ((k, n), &on) in y.indexed_iter() {
        if !on {
            continue;
        }
        let backlogged: Vec<usize> = (0..config.num_targets).filter(|&i| queues.data[[k, i]] > 0.0).collect();
        if let Some(&i) = backlogged.choose(rng) {
            decision.service[[k, n, i]] = channels.trans[[k, n]];
        }
    }
    decision.y = y;
    Ok(decision)
}

pub fn fixed_cr_schedule(queues: &QueueState, channels: &ChannelState, config: &NetworkConfig) -> Result<SlotDecision> {
    check_dims(queues, channels, config)?;
    if !config.compression_set.contains(&FIXED_RATIO) {
        return Err(Error::config(
            "compression_set",
            format!("the fixed-ratio policy needs {FIXED_RATIO} in the set"),
        ));
    }
    let mut decision = SlotDecision::idle(config);
    let (targets, eos) = channels.obs.dim();
    let x = max_weight_assignment(&AssignmentProblem::unit(channels.obs.clone())).indicator(targets, eos);
    let rho = x.mapv(|on| if on { FIXED_RATIO } else { 0.0 });
    decision.set_observation(x, rho, channels);

    let ts = schedule_links(channels.trans.clone(), &longest_queues(queues), channels, config);
    decision.y = ts.y;
    decision.service = ts.service;
    Ok(decision)
}

fn check_dims(queues: &QueueState, channels: &ChannelState, config: &NetworkConfig) -> Result<()> {
    let (targets, eos, dests) = (config.num_targets, config.num_eos, config.num_destinations);
    if queues.data.dim() != (eos, targets) {
        return Err(Error::Dimension("queue state does not match the config".into()));
    }
    if channels.obs.dim() != (targets, eos) || channels.trans.dim() != (eos, dests) {
        return Err(Error::Dimension("channel state does not match the config".into()));
    }
    Ok(())
}
