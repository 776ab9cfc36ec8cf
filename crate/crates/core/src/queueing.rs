//! Data queues, virtual queues and the quadratic Lyapunov function.
//!
//! Data queue `Q[k][i]` holds flow `i`'s backlog on EOS `k` and follows
//! `Q' = max(0, Q - mu) + A`. Virtual queue `P[i]` tracks the shortfall
//! against the rate floor `a[i]` and follows `P' = max(0, P + a - A_i)`.

use ndarray::{Array1, Array2, Zip};

use crate::error::{Error, Result};
use crate::scenario::{ChannelModel, NetworkConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct QueueState {
    /// `[k, i]` data backlog (K x I).
    pub data: Array2<f64>,
    /// `[i]` virtual backlog.
    pub virt: Array1<f64>,
}

impl QueueState {
    pub fn zeros(num_eos: usize, num_targets: usize) -> Self {
        QueueState {
            data: Array2::zeros((num_eos, num_targets)),
            virt: Array1::zeros(num_targets),
        }
    }

    pub fn for_config(config: &NetworkConfig) -> Self {
        Self::zeros(config.num_eos, config.num_targets)
    }

    pub fn total_backlog(&self) -> f64 {
        self.data.sum()
    }

    pub fn total_virtual(&self) -> f64 {
        self.virt.sum()
    }

    /// Multiplies every queue by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        QueueState {
            data: &self.data * factor,
            virt: &self.virt * factor,
        }
    }
}

/// Applies one slot of the data-queue recursion.
pub fn update_data_queues(state: &QueueState, arrivals: &Array2<f64>, services: &Array2<f64>) -> Result<QueueState> {
    if arrivals.dim() != state.data.dim() || services.dim() != state.data.dim() {
        return Err(Error::Dimension(format!(
            "queues are {:?}, arrivals {:?}, services {:?}",
            state.data.dim(),
            arrivals.dim(),
            services.dim()
        )));
    }
    if arrivals.iter().chain(services.iter()).any(|x| !(*x >= 0.0)) {
        return Err(Error::Parameter("arrivals and services must be >= 0".into()));
    }
    let data = Zip::from(&state.data)
        .and(arrivals)
        .and(services)
        .map_collect(|&q, &a, &mu| (q - mu).max(0.0) + a);
    Ok(QueueState {
        data,
        virt: state.virt.clone(),
    })
}

/// Applies one slot of the virtual-queue recursion given each flow's
/// realised arrival this slot.
pub fn update_virtual_queues(state: &QueueState, flow_arrivals: &Array1<f64>, rate_floors: &[f64]) -> QueueState {
    debug_assert_eq!(flow_arrivals.len(), state.virt.len());
    debug_assert_eq!(rate_floors.len(), state.virt.len());
    let virt = Array1::from_shape_fn(state.virt.len(), |i| {
        (state.virt[i] + rate_floors[i] - flow_arrivals[i]).max(0.0)
    });
    QueueState {
        data: state.data.clone(),
        virt,
    }
}

/// `L = 1/2 sum Q^2 + 1/2 sum P^2`.
pub fn lyapunov_value(state: &QueueState) -> f64 {
    0.5 * state.data.iter().map(|q| q * q).sum::<f64>() + 0.5 * state.virt.iter().map(|p| p * p).sum::<f64>()
}

/// A static constant bounding the second-order terms of the one-slot drift
/// under every feasible policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftBound {
    pub gamma: f64,
}

/// Evaluates the drift constant at the capacity extremes: every arrival is at
/// most `rho_1 * B_max * tau`, every service at most `C_max * tau`, and since
/// a target is observed by at most one EOS per slot a flow's total arrival
/// shares the single-pair bound, so `(a_i - A_i)^2 <= max(a_i, A_max - a_i)^2`.
pub fn drift_bound_gamma(config: &NetworkConfig, model: &ChannelModel) -> DriftBound {
    let arrival_max = config.max_ratio() * model.max_obs_rate() * config.slot_length;
    let service_max = model.max_trans_rate() * config.slot_length;
    let pairs = (config.num_targets * config.num_eos) as f64;
    let queue_part = pairs * (arrival_max * arrival_max + service_max * service_max);
    let floor_part: f64 = config
        .rate_floors
        .iter()
        .map(|&a| {
            let worst = a.max(arrival_max - a);
            worst * worst
        })
        .sum();
    DriftBound {
        gamma: 0.5 * (queue_part + floor_part),
    }
}

/// Both sides of the one-slot drift inequality
/// `L(t+1) - L(t) <= Gamma + sum Q (A - mu) + sum P (a - A_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftCheck {
    pub drift: f64,
    pub bound: f64,
}

impl DriftCheck {
    /// Amount by which the drift exceeds the bound (negative when it holds).
    pub fn excess(&self) -> f64 {
        self.drift - self.bound
    }
}

pub fn drift_check(
    before: &QueueState,
    after: &QueueState,
    arrivals: &Array2<f64>,
    services: &Array2<f64>,
    flow_arrivals: &Array1<f64>,
    rate_floors: &[f64],
    gamma: &DriftBound,
) -> DriftCheck {
    let data_term: f64 = Zip::from(&before.data)
        .and(arrivals)
        .and(services)
        .fold(0.0, |acc, &q, &a, &mu| acc + q * (a - mu));
    let virt_term: f64 = (0..before.virt.len())
        .map(|i| before.virt[i] * (rate_floors[i] - flow_arrivals[i]))
        .sum();
    DriftCheck {
        drift: lyapunov_value(after) - lyapunov_value(before),
        bound: gamma.gamma + data_term + virt_term,
    }
}

/// Empirical mean-rate stability proxies `Q(T)/T` and `P(T)/T`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub data_ratios: Array2<f64>,
    pub virtual_ratios: Array1<f64>,
    /// Mean of the data backlog over queues and recorded states.
    pub mean_queue_level: f64,
}

impl StabilityReport {
    pub fn max_data_ratio(&self) -> f64 {
        self.data_ratios.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_virtual_ratio(&self) -> f64 {
        self.virtual_ratios.iter().copied().fold(0.0, f64::max)
    }
}

/// `history[t]` is the state at the start of slot `t`, so the horizon is
/// `history.len() - 1`.
pub fn stability_report(history: &[QueueState]) -> Result<StabilityReport> {
    if history.len() < 2 {
        return Err(Error::Parameter(format!(
            "stability needs at least two recorded states, got {}",
            history.len()
        )));
    }
    let horizon = (history.len() - 1) as f64;
    let last = &history[history.len() - 1];
    let cells = last.data.len().max(1) as f64;
    let mean_queue_level = history.iter().map(QueueState::total_backlog).sum::<f64>() / (history.len() as f64 * cells);
    Ok(StabilityReport {
        data_ratios: &last.data / horizon,
        virtual_ratios: &last.virt / horizon,
        mean_queue_level,
    })
}
