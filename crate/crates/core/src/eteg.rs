//! Extended time-expanded graph in its transformed form.
//!
//! One layer per slot. Each layer has joint observation-compression (JOC)
//! edges `o_i -> s_k` where target `i` is visible to EOS `k`, forward
//! edges `s_k -> d_n` where EOS `k` can reach destination `n`, and a store
//! edge `s_k(t) -> s_k(t+1)` per EOS and flow. The store edge entering slot
//! 0 is fixed at zero; the store edge leaving the last slot holds whatever
//! backlog is still on board at the horizon.
//!
//! The graph doubles as the run ledger: realised volumes are recorded per
//! edge and flow, and [`Eteg::check_flow_conservation`] re-derives the
//! per-EOS balance from them.

use std::io::Write;

use ndarray::{Array2, Array3, Array4};

use crate::dmrc::SlotDecision;
use crate::error::{Error, Result};
use crate::scenario::{ChannelState, ContactPlan};

#[derive(Debug, Clone, PartialEq)]
pub struct Eteg {
    obs_visible: Array3<bool>,
    trans_visible: Array3<bool>,
    /// `[t, i, k]` JOC capacity (raw observation volume of the slot).
    joc_capacity: Array3<f64>,
    /// `[t, k, n]` forward-edge capacity.
    fwd_capacity: Array3<f64>,
    /// `[t, i, k]` compressed volume injected by the JOC edge.
    joc_volume: Array3<f64>,
    /// `[t, k, i]` volume carried from slot `t` into slot `t + 1`.
    store_volume: Array3<f64>,
    /// `[t, k, n, i]` volume shipped on the forward edge.
    fwd_volume: Array4<f64>,
}

/// Outcome of the conservation audit.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservationReport {
    pub max_abs_residual: f64,
    /// `max_abs_residual` divided by the largest edge capacity in the graph.
    pub max_rel_residual: f64,
    /// `(i, k, t)` triples whose residual exceeds the tolerance.
    pub violations: Vec<(usize, usize, usize)>,
}

impl ConservationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Aggregate volumes over the whole horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeTotals {
    pub injected: f64,
    pub delivered: f64,
    pub carried_out: f64,
}

/// Builds the transformed graph with all volumes zero.
pub fn build_eteg(plan: &ContactPlan, states: &[ChannelState]) -> Result<Eteg> {
    let (horizon, targets, eos) = plan.obs_visible.dim();
    let (_, _, dests) = plan.trans_visible.dim();
    if states.len() != horizon {
        return Err(Error::Dimension(format!(
            "{} channel states for a {horizon}-slot plan",
            states.len()
        )));
    }
    let mut joc_capacity = Array3::zeros((horizon, targets, eos));
    let mut fwd_capacity = Array3::zeros((horizon, eos, dests));
    for (t, state) in states.iter().enumerate() {
        if state.obs.dim() != (targets, eos) || state.trans.dim() != (eos, dests) {
            return Err(Error::Dimension(format!("channel state {t} does not match the plan")));
        }
        for ((i, k), &b) in state.obs.indexed_iter() {
            if plan.obs_visible[[t, i, k]] {
                joc_capacity[[t, i, k]] = b;
            } else if b > 0.0 {
                return Err(Error::Consistency(format!(
                    "slot {t}: capacity on invisible observation pair ({i}, {k})"
                )));
            }
        }
        for ((k, n), &c) in state.trans.indexed_iter() {
            if plan.trans_visible[[t, k, n]] {
                fwd_capacity[[t, k, n]] = c;
            } else if c > 0.0 {
                return Err(Error::Consistency(format!(
                    "slot {t}: capacity on invisible transmission pair ({k}, {n})"
                )));
            }
        }
    }
    Ok(Eteg {
        obs_visible: plan.obs_visible.clone(),
        trans_visible: plan.trans_visible.clone(),
        joc_capacity,
        fwd_capacity,
        joc_volume: Array3::zeros((horizon, targets, eos)),
        store_volume: Array3::zeros((horizon, eos, targets)),
        fwd_volume: Array4::zeros((horizon, eos, dests, targets)),
    })
}

impl Eteg {
    pub fn horizon(&self) -> usize {
        self.obs_visible.dim().0
    }

    fn dims(&self) -> (usize, usize, usize, usize) {
        let (t, i, k) = self.obs_visible.dim();
        (t, i, k, self.trans_visible.dim().2)
    }

    pub fn joc_edge_count(&self) -> usize {
        self.obs_visible.iter().filter(|v| **v).count()
    }

    pub fn fwd_edge_count(&self) -> usize {
        self.trans_visible.iter().filter(|v| **v).count()
    }

    /// One store edge per EOS and slot boundary, the carry-out edge included.
    pub fn store_edge_count(&self) -> usize {
        let (t, _, k, _) = self.dims();
        t * k
    }

    pub fn joc_capacity(&self, t: usize, i: usize, k: usize) -> f64 {
        self.joc_capacity[[t, i, k]]
    }

    pub fn fwd_capacity(&self, t: usize, k: usize, n: usize) -> f64 {
        self.fwd_capacity[[t, k, n]]
    }

    pub fn joc_volume(&self, t: usize, i: usize, k: usize) -> f64 {
        self.joc_volume[[t, i, k]]
    }

    pub fn fwd_volume(&self, t: usize, k: usize, n: usize, i: usize) -> f64 {
        self.fwd_volume[[t, k, n, i]]
    }

    /// Volume of flow `i` stored on EOS `k` from slot `t` to `t + 1`.
    pub fn store_volume(&self, t: usize, k: usize, i: usize) -> f64 {
        self.store_volume[[t, k, i]]
    }

    /// Overwrites one store volume, bypassing all checks. Only useful for
    /// exercising the audit.
    pub fn set_store_volume(&mut self, t: usize, k: usize, i: usize, volume: f64) {
        self.store_volume[[t, k, i]] = volume;
    }

    pub fn max_capacity(&self) -> f64 {
        self.joc_capacity
            .iter()
            .chain(self.fwd_capacity.iter())
            .copied()
            .fold(0.0, f64::max)
    }

    /// Records slot `t`: JOC volume `x * B * rho` per matched pair, shipped
    /// volume `shipped[k][n][i]` per forward edge and flow, and the stored
    /// volume `stored[k][i]` carried into the next slot. Nothing is written
    /// if any check fails.
    pub fn record_decision(
        &mut self,
        t: usize,
        decision: &SlotDecision,
        shipped: &Array3<f64>,
        stored: &Array2<f64>,
    ) -> Result<()> {
        let (horizon, targets, eos, dests) = self.dims();
        if t >= horizon {
            return Err(Error::Dimension(format!("slot {t} beyond horizon {horizon}")));
        }
        if decision.x.dim() != (targets, eos)
            || decision.rho.dim() != (targets, eos)
            || decision.y.dim() != (eos, dests)
            || shipped.dim() != (eos, dests, targets)
            || stored.dim() != (eos, targets)
        {
            return Err(Error::Dimension("decision or volumes do not match the graph".into()));
        }

        for ((i, k), &x) in decision.x.indexed_iter() {
            if x && !self.obs_visible[[t, i, k]] {
                return Err(Error::Consistency(format!(
                    "slot {t}: observation scheduled on missing JOC edge ({i}, {k})"
                )));
            }
        }
        for ((k, n, i), &v) in shipped.indexed_iter() {
            if !(v >= 0.0) {
                return Err(Error::Consistency(format!("slot {t}: negative shipped volume on ({k}, {n}) flow {i}")));
            }
            if v > 0.0 {
                if !self.trans_visible[[t, k, n]] {
                    return Err(Error::Consistency(format!(
                        "slot {t}: volume shipped on missing forward edge ({k}, {n})"
                    )));
                }
                if !decision.y[[k, n]] {
                    return Err(Error::Consistency(format!(
                        "slot {t}: volume shipped on unscheduled forward edge ({k}, {n})"
                    )));
                }
            }
        }
        for k in 0..eos {
            for n in 0..dests {
                let total: f64 = (0..targets).map(|i| shipped[[k, n, i]]).sum();
                let cap = self.fwd_capacity[[t, k, n]];
                if total > cap * (1.0 + 1e-12) {
                    return Err(Error::Consistency(format!(
                        "slot {t}: {total} shipped over forward edge ({k}, {n}) of capacity {cap}"
                    )));
                }
            }
        }
        if stored.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Consistency(format!("slot {t}: negative stored volume")));
        }

        for ((i, k), &x) in decision.x.indexed_iter() {
            self.joc_volume[[t, i, k]] = if x {
                self.joc_capacity[[t, i, k]] * decision.rho[[i, k]]
            } else {
                0.0
            };
        }
        for ((k, n, i), &v) in shipped.indexed_iter() {
            self.fwd_volume[[t, k, n, i]] = v;
        }
        for ((k, i), &v) in stored.indexed_iter() {
            self.store_volume[[t, k, i]] = v;
        }
        Ok(())
    }

    /// Audit with a tolerance of `1e-9` times the largest edge capacity.
    pub fn check_flow_conservation(&self) -> ConservationReport {
        self.check_flow_conservation_with(1e-9)
    }

    /// Recomputes `joc_in + stored_in - shipped_out - stored_out` at every
    /// `(i, k, t)` and flags residuals above `rel_tol * max_capacity`.
    pub fn check_flow_conservation_with(&self, rel_tol: f64) -> ConservationReport {
        let (horizon, targets, eos, dests) = self.dims();
        let scale = self.max_capacity();
        let threshold = rel_tol * scale;
        let mut max_abs: f64 = 0.0;
        let mut violations = Vec::new();
        for t in 0..horizon {
            for i in 0..targets {
                for k in 0..eos {
                    let stored_in = if t == 0 { 0.0 } else { self.store_volume[[t - 1, k, i]] };
                    let shipped: f64 = (0..dests).map(|n| self.fwd_volume[[t, k, n, i]]).sum();
                    let residual = (self.joc_volume[[t, i, k]] + stored_in - shipped - self.store_volume[[t, k, i]]).abs();
                    max_abs = max_abs.max(residual);
                    if residual > threshold {
                        violations.push((i, k, t));
                    }
                }
            }
        }
        ConservationReport {
            max_abs_residual: max_abs,
            max_rel_residual: if scale > 0.0 { max_abs / scale } else { max_abs },
            violations,
        }
    }

    pub fn totals(&self) -> VolumeTotals {
        let horizon = self.horizon();
        let carried_out = if horizon == 0 {
            0.0
        } else {
            self.store_volume.index_axis(ndarray::Axis(0), horizon - 1).sum()
        };
        VolumeTotals {
            injected: self.joc_volume.sum(),
            delivered: self.fwd_volume.sum(),
            carried_out,
        }
    }

    /// Line-oriented dump, one edge and flow per line:
    /// `type,t,endpoints,capacity,flow_id,volume`. Store edges have
    /// unbounded capacity, written as `inf`.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let (horizon, targets, eos, dests) = self.dims();
        writeln!(out, "type,t,endpoints,capacity,flow_id,volume")?;
        for t in 0..horizon {
            for i in 0..targets {
                for k in 0..eos {
                    if self.obs_visible[[t, i, k]] {
                        writeln!(
                            out,
                            "joc,{t},o{i}->s{k},{},{i},{}",
                            self.joc_capacity[[t, i, k]],
                            self.joc_volume[[t, i, k]]
                        )?;
                    }
                }
            }
            for k in 0..eos {
                for i in 0..targets {
                    writeln!(out, "store,{t},s{k}->s{k},inf,{i},{}", self.store_volume[[t, k, i]])?;
                }
                for n in 0..dests {
                    if self.trans_visible[[t, k, n]] {
                        for i in 0..targets {
                            writeln!(
                                out,
                                "fwd,{t},s{k}->d{n},{},{i},{}",
                                self.fwd_capacity[[t, k, n]],
                                self.fwd_volume[[t, k, n, i]]
                            )?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
