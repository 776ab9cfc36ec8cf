//! Joint observation scheduling and adaptive processing (JOSAP).
//!
//! The per-slot problem is
//!
//! ```text
//! max  sum_{i,k} [ V ln(1 + A_ik) - (Q[k][i] - P[i]) A_ik ]
//! s.t. A_ik = rho_ik x_ik B_ik,  rho_ik in the compression set,
//!      x a matching between targets and EOSs.
//! ```
//!
//! [`josap_solve`] relaxes the coupling `A <= x B` with duals `alpha >= 0`.
//! For fixed `alpha` the Lagrangian splits into a concave arrival problem
//! per pair, solved in closed form by [`optimal_arrival`] with effective
//! cost `chi = alpha + Q - P`, and a matching with weights `alpha * B`. The
//! duals then take a projected subgradient step of size `lambda_0 / l`.
//!
//! [`josap_exact`] solves the discrete problem exactly: given the matching
//! the objective separates per pair, so the best ratio of every pair is
//! found by enumeration and one assignment over those gains finishes it.

use ndarray::Array2;

use crate::assignment::{max_weight_assignment, AssignmentProblem};
use crate::error::{Error, Result};
use crate::queueing::QueueState;
use crate::scenario::{ChannelState, NetworkConfig};

use super::SolverParams;

/// Result of a JOSAP solve. All matrices are `[i, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JosapOutput {
    pub x: Array2<bool>,
    pub rho: Array2<f64>,
    pub arrivals: Array2<f64>,
    pub iterations: usize,
    /// False when the dual loop stopped at `max_iters`.
    pub converged: bool,
    /// Dual variables after the last update.
    pub duals: Array2<f64>,
}

/// Maximiser of `V ln(1 + A) - chi A` over `A in [0, cap]`.
pub fn optimal_arrival(chi: f64, v: f64, cap: f64) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Parameter(format!("V must be positive, got {v}")));
    }
    if !(cap >= 0.0) {
        return Err(Error::Parameter(format!("arrival cap must be >= 0, got {cap}")));
    }
    if chi >= v {
        Ok(0.0)
    } else if chi <= v / (1.0 + cap) {
        Ok(cap)
    } else {
        Ok((v / chi - 1.0).clamp(0.0, cap))
    }
}

fn ratio_value(v: f64, chi: f64, capacity: f64, rho: f64) -> f64 {
    let a = rho * capacity;
    v * a.ln_1p() - chi * a
}

/// The ratio in `ratios` or 0 that maximises `V ln(1 + rho B) - chi rho B`.
/// Ties go to the larger ratio. `ratios` must be strictly decreasing.
pub fn project_ratio(capacity: f64, ratios: &[f64], v: f64, chi: f64) -> f64 {
    if !(capacity > 0.0) {
        return 0.0;
    }
    let mut best = 0.0;
    let mut best_value = f64::NEG_INFINITY;
    for &rho in ratios.iter().chain(std::iter::once(&0.0)) {
        let value = ratio_value(v, chi, capacity, rho);
        if value > best_value {
            best = rho;
            best_value = value;
        }
    }
    best
}

/// Max-weight matching with weights `alpha * B` (targets to EOSs).
pub fn observation_matching(alpha: &Array2<f64>, capacity: &Array2<f64>) -> Array2<bool> {
    let weights = alpha * capacity;
    let (rows, cols) = weights.dim();
    max_weight_assignment(&AssignmentProblem::unit(weights)).indicator(rows, cols)
}

/// `chi0[i, k] = Q[k][i] - P[i]`, the queue pressure on each pair.
fn queue_pressure(queues: &QueueState, channels: &ChannelState, config: &NetworkConfig) -> Result<Array2<f64>> {
    let (targets, eos) = (config.num_targets, config.num_eos);
    if queues.data.dim() != (eos, targets) || queues.virt.len() != targets {
        return Err(Error::Dimension("queue state does not match the config".into()));
    }
    if channels.obs.dim() != (targets, eos) || channels.trans.dim() != (eos, config.num_destinations) {
        return Err(Error::Dimension("channel state does not match the config".into()));
    }
    Ok(Array2::from_shape_fn((targets, eos), |(i, k)| queues.data[[k, i]] - queues.virt[i]))
}

/// JOSAP objective of a candidate schedule.
pub fn josap_objective(
    queues: &QueueState,
    channels: &ChannelState,
    config: &NetworkConfig,
    x: &Array2<bool>,
    rho: &Array2<f64>,
) -> Result<f64> {
    let chi = queue_pressure(queues, channels, config)?;
    let v = config.control_factor;
    Ok(x.indexed_iter()
        .filter(|(_, on)| **on)
        .map(|((i, k), _)| ratio_value(v, chi[[i, k]], channels.obs[[i, k]], rho[[i, k]]))
        .sum())
}

/// Ratios for a matching, chosen against the true queue pressure. Pairs
/// whose best ratio is 0 are dropped from the schedule.
fn recover_primal(
    matching: &Array2<bool>,
    chi: &Array2<f64>,
    capacity: &Array2<f64>,
    config: &NetworkConfig,
) -> (Array2<bool>, Array2<f64>, f64) {
    let v = config.control_factor;
    let mut x = matching.clone();
    let mut rho = Array2::zeros(matching.dim());
    let mut objective = 0.0;
    for ((i, k), on) in x.indexed_iter_mut() {
        if !*on {
            continue;
        }
        let r = project_ratio(capacity[[i, k]], &config.compression_set, v, chi[[i, k]]);
        if r == 0.0 {
            *on = false;
        } else {
            rho[[i, k]] = r;
            objective += ratio_value(v, chi[[i, k]], capacity[[i, k]], r);
        }
    }
    (x, rho, objective)
}

fn arrivals_of(x: &Array2<bool>, rho: &Array2<f64>, capacity: &Array2<f64>) -> Array2<f64> {
    Array2::from_shape_fn(x.dim(), |(i, k)| if x[[i, k]] { rho[[i, k]] * capacity[[i, k]] } else { 0.0 })
}

/// Dual decomposition solve. Every iterate's matching is turned into a
/// primal schedule by [`project_ratio`]; the best one seen is returned.
pub fn josap_solve(queues: &QueueState, channels: &ChannelState, config: &NetworkConfig, params: &SolverParams) -> Result<JosapOutput> {
    let chi0 = queue_pressure(queues, channels, config)?;
    let v = config.control_factor;
    let capacity = &channels.obs;
    let cap = capacity * config.max_ratio();
    let mut alpha = Array2::from_elem(capacity.dim(), params.dual_init);

    let mut best_x = Array2::from_elem(capacity.dim(), false);
    let mut best_rho = Array2::zeros(capacity.dim());
    let mut best_objective = 0.0;
    let mut iterations = 0;
    let mut converged = false;

    for l in 1..=params.max_iters {
        iterations = l;
        let mut arrival = Array2::zeros(capacity.dim());
        for ((i, k), a) in arrival.indexed_iter_mut() {
            *a = optimal_arrival(alpha[[i, k]] + chi0[[i, k]], v, cap[[i, k]])?;
        }
        let matching = observation_matching(&alpha, capacity);

        let (x, rho, objective) = recover_primal(&matching, &chi0, capacity, config);
        if objective > best_objective {
            best_x = x;
            best_rho = rho;
            best_objective = objective;
        }

        let step = params.step_scale / l as f64;
        let mut delta: f64 = 0.0;
        for ((i, k), a) in alpha.indexed_iter_mut() {
            let supply = if matching[[i, k]] { capacity[[i, k]] } else { 0.0 };
            let next = (*a - step * (supply - arrival[[i, k]])).max(0.0);
            delta = delta.max((next - *a).abs());
            *a = next;
        }
        if delta < params.epsilon {
            converged = true;
            break;
        }
    }

    Ok(JosapOutput {
        arrivals: arrivals_of(&best_x, &best_rho, capacity),
        x: best_x,
        rho: best_rho,
        iterations,
        converged,
        duals: alpha,
    })
}

/// Exact discrete JOSAP solution via per-pair gains and one assignment.
pub fn josap_exact(queues: &QueueState, channels: &ChannelState, config: &NetworkConfig) -> Result<JosapOutput> {
    let chi0 = queue_pressure(queues, channels, config)?;
    let v = config.control_factor;
    let capacity = &channels.obs;
    let mut gains = Array2::zeros(capacity.dim());
    let mut ratios = Array2::zeros(capacity.dim());
    for ((i, k), g) in gains.indexed_iter_mut() {
        let r = project_ratio(capacity[[i, k]], &config.compression_set, v, chi0[[i, k]]);
        ratios[[i, k]] = r;
        *g = ratio_value(v, chi0[[i, k]], capacity[[i, k]], r);
    }
    let (rows, cols) = gains.dim();
    let x = max_weight_assignment(&AssignmentProblem::unit(gains)).indicator(rows, cols);
    let rho = Array2::from_shape_fn(x.dim(), |(i, k)| if x[[i, k]] { ratios[[i, k]] } else { 0.0 });
    Ok(JosapOutput {
        arrivals: arrivals_of(&x, &rho, capacity),
        x,
        rho,
        iterations: 0,
        converged: true,
        duals: Array2::zeros(capacity.dim()),
    })
}
