//! Per-slot scheduling policies.
//!
//! DMRC splits each slot into two independent subproblems. JOSAP picks the
//! observation matching and compression ratios by dual decomposition
//! ([`josap`]); TS picks the downlink matching by queue-weighted capacity
//! ([`transmission`]). [`baselines`] holds the Random and Fixed-CR
//! comparison policies.
//!
//! All capacities are volumes per slot, as produced by
//! [`crate::scenario::sample_channels`].

pub mod baselines;
pub mod josap;
pub mod transmission;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::queueing::QueueState;
use crate::scenario::{ChannelState, NetworkConfig};

pub use baselines::{fixed_cr_schedule, random_schedule, FIXED_RATIO};
pub use josap::{josap_exact, josap_objective, josap_solve, observation_matching, optimal_arrival, project_ratio, JosapOutput};
pub use transmission::{ts_solve, TsOutput};

/// Dual-loop settings for JOSAP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// Stop once no dual variable moves by more than this.
    pub epsilon: f64,
    pub max_iters: usize,
    /// `lambda_0` in the step rule `lambda_l = lambda_0 / l`.
    pub step_scale: f64,
    /// Starting value of every dual variable.
    pub dual_init: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            epsilon: 1e-6,
            max_iters: 100,
            step_scale: 1.0,
            dual_init: 0.0,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::config("solver.epsilon", "must be a positive real"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("solver.max_iters", "must be at least 1"));
        }
        if !(self.step_scale.is_finite() && self.step_scale > 0.0) {
            return Err(Error::config("solver.step_scale", "must be a positive real"));
        }
        if !(self.dual_init.is_finite() && self.dual_init >= 0.0) {
            return Err(Error::config("solver.dual_init", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Everything a policy decides for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotDecision {
    /// `[i, k]` observation schedule.
    pub x: Array2<bool>,
    /// `[k, n]` downlink schedule.
    pub y: Array2<bool>,
    /// `[i, k]` compression ratio, 0 where nothing is observed.
    pub rho: Array2<f64>,
    /// `[k, i]` compressed volume entering queue `Q[k][i]`.
    pub arrivals: Array2<f64>,
    /// `[k, n, i]` downlink service offered to flow `i` on link `(k, n)`.
    pub service: Array3<f64>,
    /// Dual iterations spent (0 for policies without a dual loop).
    pub iterations: usize,
    pub converged: bool,
}

impl SlotDecision {
    /// Schedules nothing.
    pub fn idle(config: &NetworkConfig) -> Self {
        let (i, k, n) = (config.num_targets, config.num_eos, config.num_destinations);
        SlotDecision {
            x: Array2::from_elem((i, k), false),
            y: Array2::from_elem((k, n), false),
            rho: Array2::zeros((i, k)),
            arrivals: Array2::zeros((k, i)),
            service: Array3::zeros((k, n, i)),
            iterations: 0,
            converged: true,
        }
    }

    /// Builds the observation half from a schedule and ratios, filling in
    /// `A[k][i] = rho * x * B`.
    fn set_observation(&mut self, x: Array2<bool>, rho: Array2<f64>, channels: &ChannelState) {
        for ((i, k), &on) in x.indexed_iter() {
            self.arrivals[[k, i]] = if on { rho[[i, k]] * channels.obs[[i, k]] } else { 0.0 };
        }
        self.x = x;
        self.rho = rho;
    }

    /// `A_i`, the total arrival of each flow this slot.
    pub fn flow_arrivals(&self) -> Array1<f64> {
        self.arrivals.sum_axis(ndarray::Axis(0))
    }

    /// `mu[k][i]`, total service offered to each queue.
    pub fn queue_service(&self) -> Array2<f64> {
        self.service.sum_axis(ndarray::Axis(1))
    }

    /// `sum_i ln(1 + A_i)`.
    pub fn utility(&self) -> f64 {
        self.flow_arrivals().iter().map(|a| a.ln_1p()).sum()
    }
}

/// Checks every per-slot constraint of a decision against the channels it
/// was made for. `slot` only labels the error.
pub fn validate_decision(decision: &SlotDecision, channels: &ChannelState, config: &NetworkConfig, slot: usize) -> Result<()> {
    let fail = |reason: String| Err(Error::Constraint { slot, reason });
    let (targets, eos, dests) = (config.num_targets, config.num_eos, config.num_destinations);
    if decision.x.dim() != (targets, eos)
        || decision.rho.dim() != (targets, eos)
        || decision.y.dim() != (eos, dests)
        || decision.arrivals.dim() != (eos, targets)
        || decision.service.dim() != (eos, dests, targets)
    {
        return Err(Error::Dimension(format!("slot {slot}: decision shape does not match the config")));
    }

    for k in 0..eos {
        if (0..targets).filter(|&i| decision.x[[i, k]]).count() > 1 {
            return fail(format!("EOS {k} observes more than one target"));
        }
        if (0..dests).filter(|&n| decision.y[[k, n]]).count() > 1 {
            return fail(format!("EOS {k} downlinks to more than one destination"));
        }
    }
    for i in 0..targets {
        if (0..eos).filter(|&k| decision.x[[i, k]]).count() > 1 {
            return fail(format!("target {i} observed by more than one EOS"));
        }
    }
    for n in 0..dests {
        let used = (0..eos).filter(|&k| decision.y[[k, n]]).count();
        if used > config.transceivers[n] {
            return fail(format!("destination {n} serves {used} EOSs with {} transceivers", config.transceivers[n]));
        }
    }

    for ((i, k), &on) in decision.x.indexed_iter() {
        let rho = decision.rho[[i, k]];
        let b = channels.obs[[i, k]];
        if on {
            if b <= 0.0 {
                return fail(format!("observation ({i}, {k}) scheduled without capacity"));
            }
            if !config.compression_set.contains(&rho) {
                return fail(format!("ratio {rho} on ({i}, {k}) is not in the compression set"));
            }
        } else if rho != 0.0 {
            return fail(format!("ratio {rho} on unscheduled pair ({i}, {k})"));
        }
        let expected = if on { rho * b } else { 0.0 };
        let got = decision.arrivals[[k, i]];
        if (got - expected).abs() > 1e-9 * expected.abs().max(1.0) {
            return fail(format!("arrival {got} on ({i}, {k}) differs from rho * x * B = {expected}"));
        }
    }

    for ((k, n), &on) in decision.y.indexed_iter() {
        let offered: f64 = (0..targets).map(|i| decision.service[[k, n, i]]).sum();
        if (0..targets).any(|i| !(decision.service[[k, n, i]] >= 0.0)) {
            return fail(format!("negative service on ({k}, {n})"));
        }
        let cap = if on { channels.trans[[k, n]] } else { 0.0 };
        if offered > cap * (1.0 + 1e-12) {
            return fail(format!("service {offered} on ({k}, {n}) exceeds y * C = {cap}"));
        }
    }
    Ok(())
}

/// One DMRC slot: JOSAP for observation and compression, TS for downlink.
pub fn dmrc_step(queues: &QueueState, channels: &ChannelState, config: &NetworkConfig, params: &SolverParams) -> Result<SlotDecision> {
    let josap = josap_solve(queues, channels, config, params)?;
    let ts = ts_solve(queues, channels, config)?;
    let mut decision = SlotDecision::idle(config);
    decision.set_observation(josap.x, josap.rho, channels);
    decision.y = ts.y;
    decision.service = ts.service;
    decision.iterations = josap.iterations;
    decision.converged = josap.converged;
    Ok(decision)
}

/// The policies the simulator can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Dmrc,
    Random,
    FixedCr,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Dmrc, Policy::FixedCr, Policy::Random];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Dmrc => "dmrc",
            Policy::Random => "random",
            Policy::FixedCr => "fixed_cr",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "dmrc" => Ok(Policy::Dmrc),
            "random" => Ok(Policy::Random),
            "fixed_cr" | "fixedcr" => Ok(Policy::FixedCr),
            other => Err(Error::config("policy", format!("unknown policy `{other}` (dmrc, random, fixed_cr)"))),
        }
    }
}
