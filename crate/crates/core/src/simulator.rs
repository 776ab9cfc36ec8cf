//! The slot loop, run metrics, V sweeps and policy comparisons.
//!
//! Channels for a run are drawn up front from `seed`, so every policy run
//! with the same seed sees the same capacities. The Random policy draws
//! its choices from a separate stream of the same seed.

use ndarray::{Array1, Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dmrc::{dmrc_step, fixed_cr_schedule, random_schedule, validate_decision, Policy, SlotDecision, SolverParams};
use crate::error::{Error, Result};
use crate::eteg::{build_eteg, Eteg};
use crate::queueing::{drift_bound_gamma, drift_check, update_data_queues, update_virtual_queues, DriftBound, QueueState};
use crate::scenario::{sample_horizon, ChannelModel, ChannelState, ContactPlan, NetworkConfig, SyntheticPlan};

/// A complete scenario: dimensions, visibility and channel distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: NetworkConfig,
    pub plan: ContactPlan,
    pub model: ChannelModel,
}

impl Scenario {
    pub fn new(config: NetworkConfig, plan: ContactPlan, model: ChannelModel) -> Result<Self> {
        config.validate()?;
        model.validate()?;
        plan.check_dims(&config)?;
        Ok(Scenario { config, plan, model })
    }

    /// Desk-scale scenario with `num_eos` satellites and `transceivers` per
    /// destination on the default synthetic plan.
    pub fn desk(num_eos: usize, transceivers: usize) -> Result<Self> {
        let config = NetworkConfig::desk(num_eos, transceivers);
        let plan = SyntheticPlan::DESK.generate(&config)?;
        Scenario::new(config, plan, ChannelModel::default())
    }

    pub fn channels(&self, seed: u64) -> Result<Vec<ChannelState>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_horizon(&self.plan, &self.model, self.config.slot_length, &mut rng)
    }

    pub fn with_control_factor(&self, v: f64) -> Self {
        let mut s = self.clone();
        s.config.control_factor = v;
        s
    }

    pub fn with_rate_floor(&self, floor: f64) -> Self {
        let mut s = self.clone();
        s.config.rate_floors = vec![floor; s.config.num_targets];
        s
    }
}

/// Per-slot metrics of one run. Every vector has one entry per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSeries {
    /// `sum_i ln(1 + A_i(t))`.
    pub utility: Vec<f64>,
    /// `sum Q` at the end of the slot.
    pub backlog: Vec<f64>,
    /// `sum P` at the end of the slot.
    pub virtual_backlog: Vec<f64>,
    /// `[t, i]` arrival volume of flow `i` in slot `t`.
    pub arrivals: Array2<f64>,
    /// `[t, i]` volume of flow `i` delivered to destinations up to slot `t`.
    pub delivered: Array2<f64>,
    /// Observation pairs that produced a positive arrival.
    pub obs_used: Vec<usize>,
    /// Observation pairs with positive capacity.
    pub obs_avail: Vec<usize>,
    /// Downlinks that shipped a positive volume.
    pub trans_used: Vec<usize>,
    /// Downlinks with positive capacity.
    pub trans_avail: Vec<usize>,
}

impl MetricsSeries {
    pub fn with_capacity(horizon: usize, targets: usize) -> Self {
        MetricsSeries {
            utility: Vec::with_capacity(horizon),
            backlog: Vec::with_capacity(horizon),
            virtual_backlog: Vec::with_capacity(horizon),
            arrivals: Array2::zeros((0, targets)),
            delivered: Array2::zeros((0, targets)),
            obs_used: Vec::with_capacity(horizon),
            obs_avail: Vec::with_capacity(horizon),
            trans_used: Vec::with_capacity(horizon),
            trans_avail: Vec::with_capacity(horizon),
        }
    }

    pub fn len(&self) -> usize {
        self.utility.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utility.is_empty()
    }

    pub fn delivered_total(&self, t: usize) -> f64 {
        self.delivered.row(t).sum()
    }
}

/// Time averages of one run, or of several runs averaged field by field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub avg_utility: f64,
    pub avg_backlog: f64,
    pub avg_virtual_backlog: f64,
    /// Time-average arrival per flow.
    pub avg_rate: Vec<f64>,
    pub obs_utilization: f64,
    pub trans_utilization: f64,
    pub obs_used: f64,
    pub obs_avail: f64,
    pub trans_used: f64,
    pub trans_avail: f64,
    pub total_delivered: f64,
}

impl MetricsSummary {
    /// Field-wise mean. Utilization ratios are averaged as ratios.
    pub fn mean(items: &[MetricsSummary]) -> Result<MetricsSummary> {
        let first = items.first().ok_or_else(|| Error::Parameter("nothing to average".into()))?;
        let n = items.len() as f64;
        let avg = |f: fn(&MetricsSummary) -> f64| items.iter().map(f).sum::<f64>() / n;
        let flows = first.avg_rate.len();
        Ok(MetricsSummary {
            avg_utility: avg(|m| m.avg_utility),
            avg_backlog: avg(|m| m.avg_backlog),
            avg_virtual_backlog: avg(|m| m.avg_virtual_backlog),
            avg_rate: (0..flows).map(|i| items.iter().map(|m| m.avg_rate[i]).sum::<f64>() / n).collect(),
            obs_utilization: avg(|m| m.obs_utilization),
            trans_utilization: avg(|m| m.trans_utilization),
            obs_used: avg(|m| m.obs_used),
            obs_avail: avg(|m| m.obs_avail),
            trans_used: avg(|m| m.trans_used),
            trans_avail: avg(|m| m.trans_avail),
            total_delivered: avg(|m| m.total_delivered),
        })
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn ratio(used: f64, avail: f64) -> f64 {
    if avail > 0.0 {
        used / avail
    } else {
        0.0
    }
}

pub fn average_metrics(m: &MetricsSeries) -> MetricsSummary {
    let horizon = m.len();
    let count = |v: &[usize]| v.iter().sum::<usize>() as f64;
    let (obs_used, obs_avail) = (count(&m.obs_used), count(&m.obs_avail));
    let (trans_used, trans_avail) = (count(&m.trans_used), count(&m.trans_avail));
    let avg_rate = if horizon == 0 {
        vec![0.0; m.arrivals.ncols()]
    } else {
        (m.arrivals.sum_axis(ndarray::Axis(0)) / horizon as f64).to_vec()
    };
    MetricsSummary {
        avg_utility: mean(&m.utility),
        avg_backlog: mean(&m.backlog),
        avg_virtual_backlog: mean(&m.virtual_backlog),
        avg_rate,
        obs_utilization: ratio(obs_used, obs_avail),
        trans_utilization: ratio(trans_used, trans_avail),
        obs_used,
        obs_avail,
        trans_used,
        trans_avail,
        total_delivered: if horizon == 0 { 0.0 } else { m.delivered_total(horizon - 1) },
    }
}

/// Drift inequality audit over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftAudit {
    pub gamma: f64,
    /// Largest `drift - bound` over all slots.
    pub max_excess: f64,
    /// Slots where the excess is above `1e-6 * gamma`.
    pub violations: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub policy: Policy,
    pub seed: u64,
    pub metrics: MetricsSeries,
    pub final_queues: QueueState,
    /// `history[t]` is the queue state at the start of slot `t`; the last
    /// entry is the state after the horizon.
    pub history: Vec<QueueState>,
    pub eteg: Eteg,
    pub drift: DriftAudit,
    /// Mean dual iterations per slot (DMRC only).
    pub mean_iterations: f64,
    /// Slots whose dual loop hit `max_iters`.
    pub unconverged_slots: usize,
}

impl RunOutput {
    pub fn summary(&self) -> MetricsSummary {
        average_metrics(&self.metrics)
    }
}

/// Random-policy generator, independent of the channel stream.
fn policy_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Splits offered service into shipped volume, limited by what each queue
/// held at the start of the slot.
fn shipped_volume(queues: &QueueState, service: &Array3<f64>) -> Array3<f64> {
    let (eos, dests, targets) = service.dim();
    let mut shipped = Array3::zeros((eos, dests, targets));
    for k in 0..eos {
        for i in 0..targets {
            let mut left = queues.data[[k, i]];
            for n in 0..dests {
                let s = service[[k, n, i]].min(left);
                shipped[[k, n, i]] = s;
                left -= s;
            }
        }
    }
    shipped
}

pub fn run(scenario: &Scenario, policy: Policy, seed: u64, params: &SolverParams) -> Result<RunOutput> {
    let channels = scenario.channels(seed)?;
    run_with_channels(scenario, &channels, policy, seed, params)
}

/// Runs one policy over pre-sampled channels.
pub fn run_with_channels(
    scenario: &Scenario,
    channels: &[ChannelState],
    policy: Policy,
    seed: u64,
    params: &SolverParams,
) -> Result<RunOutput> {
    let config = &scenario.config;
    params.validate()?;
    let horizon = config.horizon;
    if channels.len() != horizon {
        return Err(Error::Dimension(format!("{} channel states for horizon {horizon}", channels.len())));
    }
    let mut eteg = build_eteg(&scenario.plan, channels)?;
    let gamma: DriftBound = drift_bound_gamma(config, &scenario.model);
    let mut rng = policy_rng(seed);

    let targets = config.num_targets;
    let mut queues = QueueState::for_config(config);
    let mut history = Vec::with_capacity(horizon + 1);
    history.push(queues.clone());
    let mut metrics = MetricsSeries::with_capacity(horizon, targets);
    let mut arrivals_rows = Array2::zeros((horizon, targets));
    let mut delivered_rows = Array2::zeros((horizon, targets));
    let mut delivered = Array1::<f64>::zeros(targets);
    let mut drift = DriftAudit {
        gamma: gamma.gamma,
        max_excess: f64::NEG_INFINITY,
        violations: 0,
    };
    let mut iterations = 0usize;
    let mut unconverged_slots = 0;

    for (t, ch) in channels.iter().enumerate() {
        let decision: SlotDecision = match policy {
            Policy::Dmrc => dmrc_step(&queues, ch, config, params)?,
            Policy::Random => random_schedule(&queues, ch, config, &mut rng)?,
            Policy::FixedCr => fixed_cr_schedule(&queues, ch, config)?,
        };
        validate_decision(&decision, ch, config, t)?;
        iterations += decision.iterations;
        if !decision.converged {
            unconverged_slots += 1;
        }

        let service = decision.queue_service();
        let flow_arrivals = decision.flow_arrivals();
        let shipped = shipped_volume(&queues, &decision.service);
        let after_data = update_data_queues(&queues, &decision.arrivals, &service)?;
        let next = update_virtual_queues(&after_data, &flow_arrivals, &config.rate_floors);
        eteg.record_decision(t, &decision, &shipped, &next.data)?;

        let check = drift_check(&queues, &next, &decision.arrivals, &service, &flow_arrivals, &config.rate_floors, &gamma);
        drift.max_excess = drift.max_excess.max(check.excess());
        if check.excess() > 1e-6 * gamma.gamma {
            drift.violations += 1;
        }

        delivered += &shipped.sum_axis(ndarray::Axis(0)).sum_axis(ndarray::Axis(0));
        arrivals_rows.row_mut(t).assign(&flow_arrivals);
        delivered_rows.row_mut(t).assign(&delivered);
        metrics.utility.push(decision.utility());
        metrics.backlog.push(next.total_backlog());
        metrics.virtual_backlog.push(next.total_virtual());
        metrics.obs_used.push(decision.arrivals.iter().filter(|a| **a > 0.0).count());
        metrics.obs_avail.push(ch.obs.iter().filter(|b| **b > 0.0).count());
        metrics.trans_used.push(
            (0..config.num_eos)
                .flat_map(|k| (0..config.num_destinations).map(move |n| (k, n)))
                .filter(|&(k, n)| (0..targets).any(|i| shipped[[k, n, i]] > 0.0))
                .count(),
        );
        metrics.trans_avail.push(ch.trans.iter().filter(|c| **c > 0.0).count());

        queues = next;
        history.push(queues.clone());
    }
    metrics.arrivals = arrivals_rows;
    metrics.delivered = delivered_rows;
    if horizon == 0 {
        drift.max_excess = 0.0;
    }

    Ok(RunOutput {
        policy,
        seed,
        metrics,
        final_queues: queues,
        history,
        eteg,
        drift,
        mean_iterations: iterations as f64 / horizon.max(1) as f64,
        unconverged_slots,
    })
}

/// Runs one policy for each seed in parallel and averages the summaries.
pub fn average_over_seeds(scenario: &Scenario, policy: Policy, seeds: &[u64], params: &SolverParams) -> Result<MetricsSummary> {
    let summaries = seeds
        .par_iter()
        .map(|&seed| run(scenario, policy, seed, params).map(|out| out.summary()))
        .collect::<Result<Vec<_>>>()?;
    MetricsSummary::mean(&summaries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub v: f64,
    pub avg_utility: f64,
    pub avg_backlog: f64,
}

/// DMRC over each control factor, averaged over `seeds`. Runs for
/// different V differ only in V.
pub fn sweep_v(scenario: &Scenario, values: &[f64], seeds: &[u64], params: &SolverParams) -> Result<Vec<SweepRow>> {
    if seeds.is_empty() {
        return Err(Error::Parameter("sweep needs at least one seed".into()));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::config("v_list", format!("control factors must be positive, got {v}")));
    }
    let jobs: Vec<(usize, u64)> = (0..values.len()).flat_map(|j| seeds.iter().map(move |&s| (j, s))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(j, seed)| run(&scenario.with_control_factor(values[j]), Policy::Dmrc, seed, params).map(|o| o.summary()))
        .collect::<Result<Vec<_>>>()?;
    values
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let m = MetricsSummary::mean(&runs[j * seeds.len()..(j + 1) * seeds.len()])?;
            Ok(SweepRow {
                v,
                avg_utility: m.avg_utility,
                avg_backlog: m.avg_backlog,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub policy: Policy,
    pub summary: MetricsSummary,
}

/// Each policy on identical channel realisations per seed.
pub fn compare_policies(scenario: &Scenario, policies: &[Policy], seeds: &[u64], params: &SolverParams) -> Result<Vec<PolicyRow>> {
    if seeds.is_empty() {
        return Err(Error::Parameter("comparison needs at least one seed".into()));
    }
    let channels = seeds
        .par_iter()
        .map(|&seed| scenario.channels(seed))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..policies.len()).flat_map(|p| (0..seeds.len()).map(move |s| (p, s))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(p, s)| run_with_channels(scenario, &channels[s], policies[p], seeds[s], params).map(|o| o.summary()))
        .collect::<Result<Vec<_>>>()?;
    policies
        .iter()
        .enumerate()
        .map(|(p, &policy)| {
            Ok(PolicyRow {
                policy,
                summary: MetricsSummary::mean(&runs[p * seeds.len()..(p + 1) * seeds.len()])?,
            })
        })
        .collect()
}
