//! Acceptance suite. Prints one line per criterion. A criterion that fails
//! or overruns its time budget is reported as FAIL; the process exit code
//! reflects failures only when `ACCEPTANCE_STRICT=1` is set, so that the
//! workspace test run still completes and records the report.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dmrc_core::assignment::{brute_force_assignment, max_weight_assignment, AssignmentProblem};
use dmrc_core::dmrc::{josap_exact, josap_objective, josap_solve, optimal_arrival, ts_solve, Policy, SolverParams};
use dmrc_core::queueing::{stability_report, QueueState};
use dmrc_core::scenario::{ChannelState, NetworkConfig};
use dmrc_core::simulator::{average_over_seeds, compare_policies, run, sweep_v, Scenario};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

fn params() -> SolverParams {
    SolverParams::default()
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

fn nondecreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] >= w[0])
}

fn round3(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1000.0).round() / 1000.0).collect()
}

/// Grid maximiser of `V ln(1 + A) - chi A` on `[0, cap]`. The concave
/// objective makes the grid sequence unimodal, so the best grid point is
/// located by a discrete golden-section search and then confirmed by a
/// local scan; the position is finally refined by bisection on the sign of
/// the derivative between the neighbouring grid points.
fn grid_maximiser(v: f64, chi: f64, cap: f64) -> f64 {
    const POINTS: usize = 1_000_000;
    if cap == 0.0 {
        return 0.0;
    }
    let h = cap / (POINTS - 1) as f64;
    let f = |j: usize| {
        let a = j as f64 * h;
        v * a.ln_1p() - chi * a
    };
    let (mut lo, mut hi) = (0usize, POINTS - 1);
    while hi - lo > 8 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let from = lo.saturating_sub(64);
    let to = (hi + 64).min(POINTS - 1);
    let best = (from..=to).max_by(|&a, &b| f(a).total_cmp(&f(b))).unwrap();

    let slope = |a: f64| v / (1.0 + a) - chi;
    let mut left = best.saturating_sub(1) as f64 * h;
    let mut right = ((best + 1).min(POINTS - 1)) as f64 * h;
    if slope(right) >= 0.0 {
        return right;
    }
    if slope(left) <= 0.0 {
        return left;
    }
    for _ in 0..200 {
        let mid = 0.5 * (left + right);
        if slope(mid) > 0.0 {
            left = mid;
        } else {
            right = mid;
        }
    }
    0.5 * (left + right)
}

fn closed_form_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let v = rng.random_range(1.0..20_000.0);
        let cap = if rng.random_bool(0.05) { 0.0 } else { rng.random_range(0.0..1_000.0) };
        let chi = match rng.random_range(0..4) {
            0 => rng.random_range(-v..=v / (1.0 + cap)),
            1 => rng.random_range(v..2.0 * v),
            _ => rng.random_range(v / (1.0 + cap)..=v),
        };
        let closed = optimal_arrival(chi, v, cap).map_err(|e| e.to_string())?;
        let grid = grid_maximiser(v, chi, cap);
        worst = worst.max((closed - grid).abs());
    }
    let detail = format!("max |closed - grid| = {worst:.2e} over 1000 triples");
    if worst <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn matching_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut mismatches = 0;
    for n in 0..200 {
        let rows = rng.random_range(1..=6);
        let cols = rng.random_range(1..=6);
        let weights = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-5..60) as f64);
        let problem = if n % 2 == 0 {
            AssignmentProblem::unit(weights)
        } else {
            let mult = (0..cols).map(|_| rng.random_range(1..=3)).collect();
            AssignmentProblem::with_multiplicity(weights, mult)
        };
        let solved = max_weight_assignment(&problem);
        let oracle = brute_force_assignment(&problem).map_err(|e| e.to_string())?;
        if solved.total_weight != oracle.total_weight {
            mismatches += 1;
        }
    }
    // TS weights come from queue lengths times link capacities.
    for _ in 0..50 {
        let eos = rng.random_range(1..=6);
        let dests = rng.random_range(1..=3);
        let config = NetworkConfig {
            num_targets: 3,
            num_eos: eos,
            num_destinations: dests,
            transceivers: (0..dests).map(|_| rng.random_range(1..=3)).collect(),
            rate_floors: vec![0.0; 3],
            compression_set: vec![0.5, 0.25],
            control_factor: 1.0,
            slot_length: 1.0,
            horizon: 1,
            rng_seed: 0,
        };
        let mut queues = QueueState::for_config(&config);
        queues.data.mapv_inplace(|_| rng.random_range(0..50) as f64);
        let mut channels = ChannelState::zeros(&config);
        channels.trans.mapv_inplace(|_| [0.0, 200.0, 400.0][rng.random_range(0..3)]);
        let ts = ts_solve(&queues, &channels, &config).map_err(|e| e.to_string())?;
        let heads = Array1::from_shape_fn(eos, |k| queues.data.row(k).iter().copied().fold(0.0, f64::max));
        let weights = Array2::from_shape_fn((eos, dests), |(k, n)| heads[k] * channels.trans[[k, n]]);
        let oracle = brute_force_assignment(&AssignmentProblem::with_multiplicity(weights, config.transceivers.clone()))
            .map_err(|e| e.to_string())?;
        if ts.weight != oracle.total_weight {
            mismatches += 1;
        }
    }
    let detail = format!("{mismatches} weight mismatches over 200 assignment + 50 TS instances");
    if mismatches == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn josap_dual_quality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut good = 0;
    let mut worst: f64 = 1.0;
    for _ in 0..100 {
        let targets = rng.random_range(1..=4);
        let eos = rng.random_range(1..=4);
        let config = NetworkConfig {
            num_targets: targets,
            num_eos: eos,
            num_destinations: 1,
            transceivers: vec![1],
            rate_floors: vec![0.0; targets],
            compression_set: vec![2.0 / 3.0, 0.5, 1.0 / 3.0, 0.25],
            control_factor: 8000.0,
            slot_length: 1.0,
            horizon: 1,
            rng_seed: 0,
        };
        let queues = QueueState {
            data: Array2::from_shape_fn((eos, targets), |_| rng.random_range(0.0..400.0)),
            virt: Array1::from_shape_fn(targets, |_| rng.random_range(0.0..150.0)),
        };
        let mut channels = ChannelState::zeros(&config);
        channels.obs.mapv_inplace(|_| [0.0, 600.0, 800.0, 1000.0][rng.random_range(0..4)]);
        let solved = josap_solve(&queues, &channels, &config, &params()).map_err(|e| e.to_string())?;
        let exact = josap_exact(&queues, &channels, &config).map_err(|e| e.to_string())?;
        let a = josap_objective(&queues, &channels, &config, &solved.x, &solved.rho).map_err(|e| e.to_string())?;
        let b = josap_objective(&queues, &channels, &config, &exact.x, &exact.rho).map_err(|e| e.to_string())?;
        let ratio = if b > 0.0 { a / b } else { 1.0 };
        worst = worst.min(ratio);
        if a >= 0.98 * b - 1e-9 {
            good += 1;
        }
    }
    let detail = format!("{good}/100 instances within 2% of exact, worst ratio {worst:.4}");
    if good >= 90 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn full_desk_run() -> Result<(dmrc_core::RunOutput, Duration), String> {
    let scenario = Scenario::desk(12, 2).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = run(&scenario, Policy::Dmrc, SEEDS[0], &params()).map_err(|e| e.to_string())?;
    Ok((out, start.elapsed()))
}

fn flow_conservation() -> Outcome {
    let (out, elapsed) = full_desk_run()?;
    let report = out.eteg.check_flow_conservation();
    let totals = out.eteg.totals();
    let balance = (totals.injected - out.final_queues.total_backlog() - totals.delivered).abs() / totals.injected.max(1.0);
    let detail = format!(
        "max relative residual {:.2e}, {} violations, delivered vs injected - backlog off by {:.2e} (run {:.1}s)",
        report.max_rel_residual,
        report.violations.len(),
        balance,
        elapsed.as_secs_f64()
    );
    if report.max_rel_residual <= 1e-9 && report.violations.is_empty() && balance <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn drift_inequality() -> Outcome {
    let (out, _) = full_desk_run()?;
    let detail = format!(
        "gamma {:.4e}, max (drift - bound) {:.4e}, {} slots over 1e-6 gamma",
        out.drift.gamma, out.drift.max_excess, out.drift.violations
    );
    if out.drift.violations == 0 && out.drift.max_excess <= 1e-6 * out.drift.gamma {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn v_sweep_trends() -> Outcome {
    let scenario = Scenario::desk(12, 2).map_err(|e| e.to_string())?;
    let vs: Vec<f64> = (1..=8).map(|j| j as f64 * 1000.0).chain([50_000.0]).collect();
    let rows = sweep_v(&scenario, &vs, &SEEDS, &params()).map_err(|e| e.to_string())?;
    let utility: Vec<f64> = rows.iter().map(|r| r.avg_utility).collect();
    let backlog: Vec<f64> = rows.iter().map(|r| r.avg_backlog).collect();
    let monotone = nondecreasing(&utility[..8]);
    let gap = (utility[8] - utility[7]).abs() / utility[8];
    let r = pearson(&vs[..8], &backlog[..8]);
    let detail = format!(
        "utility {:?} (nondecreasing: {monotone}), V=8000 vs 50000 gap {:.2}%, backlog-V pearson {r:.4}",
        round3(&utility),
        gap * 100.0
    );
    if monotone && gap <= 0.03 && r >= 0.95 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn policy_ordering() -> Outcome {
    let scenario = Scenario::desk(12, 2).map_err(|e| e.to_string())?;
    let rows = compare_policies(&scenario, &[Policy::Dmrc, Policy::FixedCr, Policy::Random], &SEEDS, &params())
        .map_err(|e| e.to_string())?;
    let (d, f, r) = (&rows[0].summary, &rows[1].summary, &rows[2].summary);
    let utility = d.avg_utility > f.avg_utility && f.avg_utility > r.avg_utility;
    let queue = d.avg_backlog < f.avg_backlog && d.avg_backlog < r.avg_backlog;
    let obs = d.obs_utilization >= f.obs_utilization && d.obs_utilization >= r.obs_utilization;
    let trans = d.trans_utilization >= f.trans_utilization && d.trans_utilization >= r.trans_utilization;
    let detail = format!(
        "utility d/f/r {:.3}/{:.3}/{:.3} [{}]; backlog {:.0}/{:.0}/{:.0} [{}]; obs util {:.4}/{:.4}/{:.4} [{}]; trans util {:.4}/{:.4}/{:.4} [{}]",
        d.avg_utility,
        f.avg_utility,
        r.avg_utility,
        verdict(utility),
        d.avg_backlog,
        f.avg_backlog,
        r.avg_backlog,
        verdict(queue),
        d.obs_utilization,
        f.obs_utilization,
        r.obs_utilization,
        verdict(obs),
        d.trans_utilization,
        f.trans_utilization,
        r.trans_utilization,
        verdict(trans)
    );
    if utility && queue && obs && trans {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

fn rate_floors() -> Outcome {
    let floor = 10.0;
    let scenario = Scenario::desk(12, 2).map_err(|e| e.to_string())?.with_rate_floor(floor);
    let mut worst_rate = f64::INFINITY;
    let mut worst_virtual: f64 = 0.0;
    for &seed in &SEEDS {
        let out = run(&scenario, Policy::Dmrc, seed, &params()).map_err(|e| e.to_string())?;
        let summary = out.summary();
        let stability = stability_report(&out.history).map_err(|e| e.to_string())?;
        for (i, &rate) in summary.avg_rate.iter().enumerate() {
            worst_rate = worst_rate.min(rate);
            worst_virtual = worst_virtual.max(stability.virtual_ratios[i] / rate.max(f64::MIN_POSITIVE));
        }
    }
    let detail = format!(
        "min flow rate {worst_rate:.3} (floor {floor}), max P(T)/T relative to flow rate {:.3}%",
        worst_virtual * 100.0
    );
    if worst_rate >= floor * 0.99 && worst_virtual <= 0.01 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn parameter_trends() -> Outcome {
    let utility = |s: &Scenario| average_over_seeds(s, Policy::Dmrc, &SEEDS, &params()).map(|m| m.avg_utility).map_err(|e| e.to_string());
    let by_k = [4, 6, 8, 10, 12]
        .iter()
        .map(|&k| Scenario::desk(k, 2).map_err(|e| e.to_string()).and_then(|s| utility(&s)))
        .collect::<Result<Vec<_>, _>>()?;
    let by_m = [1, 2, 3, 4]
        .iter()
        .map(|&m| Scenario::desk(12, m).map_err(|e| e.to_string()).and_then(|s| utility(&s)))
        .collect::<Result<Vec<_>, _>>()?;
    let base = Scenario::desk(6, 2).map_err(|e| e.to_string())?;
    let by_a = [0.0, 20.0, 40.0, 60.0]
        .iter()
        .map(|&a| utility(&base.with_rate_floor(a)))
        .collect::<Result<Vec<_>, _>>()?;
    let k_ok = nondecreasing(&by_k);
    let m_ok = nondecreasing(&by_m);
    let a_rev: Vec<f64> = by_a.iter().rev().copied().collect();
    let a_ok = nondecreasing(&a_rev);
    let detail = format!(
        "K {:?} [{}]; M {:?} [{}]; floors {:?} [{}]",
        round3(&by_k),
        verdict(k_ok),
        round3(&by_m),
        verdict(m_ok),
        by_a.iter().map(|x| (x * 10_000.0).round() / 10_000.0).collect::<Vec<_>>(),
        verdict(a_ok)
    );
    if k_ok && m_ok && a_ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, title: "closed-form arrival vs grid search", budget: Duration::from_secs(5), check: closed_form_optimality },
        Criterion { id: 2, title: "matching vs exhaustive oracle", budget: Duration::from_secs(10), check: matching_optimality },
        Criterion { id: 3, title: "dual JOSAP vs exact", budget: Duration::from_secs(30), check: josap_dual_quality },
        Criterion { id: 4, title: "flow conservation on a full desk run", budget: Duration::from_secs(60), check: flow_conservation },
        Criterion { id: 5, title: "one-slot drift inequality", budget: Duration::from_secs(60), check: drift_inequality },
        Criterion { id: 6, title: "V sweep: utility saturates, backlog linear", budget: Duration::from_secs(900), check: v_sweep_trends },
        Criterion { id: 7, title: "policy ordering", budget: Duration::from_secs(300), check: policy_ordering },
        Criterion { id: 8, title: "rate floors met", budget: Duration::from_secs(300), check: rate_floors },
        Criterion { id: 9, title: "monotone K, M and floor trends", budget: Duration::from_secs(900), check: parameter_trends },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.check)();
        let elapsed = start.elapsed();
        let over = elapsed > c.budget;
        let (ok, detail) = match outcome {
            Ok(d) => (!over, d),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        let budget_note = if over { format!(", over the {}s budget", c.budget.as_secs()) } else { String::new() };
        println!(
            "criterion {} {}: {} ({}) [{:.2}s{}]",
            c.id,
            if ok { "PASS" } else { "FAIL" },
            c.title,
            detail,
            elapsed.as_secs_f64(),
            budget_note
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
