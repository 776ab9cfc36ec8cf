use std::path::PathBuf;

use log::info;

use dmrc_core::report::{write_atomic, write_comparison, write_series, write_summaries, write_sweep, Table};
use dmrc_core::simulator::{compare_policies, run, sweep_v, PolicyRow};
use dmrc_core::{MetricsSummary, Policy, Scenario};

use crate::config::{check_v_list, CliConfig};
use crate::{CliError, Command, Common};

const DEFAULT_V_LIST: [f64; 9] = [1000.0, 2000.0, 3000.0, 4000.0, 5000.0, 6000.0, 7000.0, 8000.0, 50_000.0];

struct Context {
    config: CliConfig,
    out: PathBuf,
    written: Vec<PathBuf>,
}

impl Context {
    fn new(common: &Common) -> Result<Self, CliError> {
        let mut config = CliConfig::load(common.config.as_deref())?;
        if let Some(seeds) = &common.seeds {
            config.seeds = seeds.0.clone();
        }
        config.validate()?;
        let out = config.output_dir(common.out.as_deref())?;
        Ok(Context { config, out, written: Vec::new() })
    }

    fn write<F>(&mut self, name: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn std::io::Write) -> std::io::Result<()>,
    {
        let path = self.out.join(name);
        write_atomic(&path, fill).map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))?;
        info!("wrote {}", path.display());
        self.written.push(path);
        Ok(())
    }
}

pub fn dispatch(command: Command) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::Run { common, policy } => {
            let mut ctx = Context::new(&common)?;
            let policy = policy.or(ctx.config.policy).unwrap_or(Policy::Dmrc);
            cmd_run(&mut ctx, policy)?;
            Ok(ctx.written)
        }
        Command::SweepV { common, v_list } => {
            let mut ctx = Context::new(&common)?;
            let vs = resolve_v_list(&ctx.config, v_list.map(|l| l.0))?;
            cmd_sweep_v(&mut ctx, &vs)?;
            Ok(ctx.written)
        }
        Command::Compare { common } => {
            let mut ctx = Context::new(&common)?;
            cmd_compare(&mut ctx)?;
            Ok(ctx.written)
        }
        Command::Figures { common, v_list, k_list, m_list, floor_list } => {
            let mut ctx = Context::new(&common)?;
            let vs = resolve_v_list(&ctx.config, v_list.map(|l| l.0))?;
            cmd_figures(&mut ctx, &vs, &k_list.0, &m_list.0, &floor_list.0)?;
            Ok(ctx.written)
        }
    }
}

fn resolve_v_list(config: &CliConfig, flag: Option<Vec<f64>>) -> Result<Vec<f64>, CliError> {
    let vs = flag.or_else(|| config.v_list.clone()).unwrap_or_else(|| DEFAULT_V_LIST.to_vec());
    check_v_list(&vs)?;
    Ok(vs)
}

fn cmd_run(ctx: &mut Context, policy: Policy) -> Result<(), CliError> {
    let scenario = ctx.config.scenario()?;
    let mut rows = Vec::new();
    for &seed in &ctx.config.seeds.clone() {
        info!("{policy} seed {seed}");
        let out = run(&scenario, policy, seed, &ctx.config.solver)?;
        if !out.eteg.check_flow_conservation().passed() {
            return Err(CliError::Runtime(format!("seed {seed}: flow conservation audit failed")));
        }
        if out.drift.violations > 0 {
            return Err(CliError::Runtime(format!("seed {seed}: drift bound violated on {} slots", out.drift.violations)));
        }
        ctx.write(&format!("series_{policy}_seed{seed}.csv"), |w| write_series(w, &out.metrics))?;
        rows.push((policy.to_string(), seed, out.summary()));
    }
    ctx.write(&format!("summary_{policy}.csv"), |w| write_summaries(w, &rows))
}

fn cmd_sweep_v(ctx: &mut Context, vs: &[f64]) -> Result<(), CliError> {
    let scenario = ctx.config.scenario()?;
    let rows = sweep_v(&scenario, vs, &ctx.config.seeds, &ctx.config.solver)?;
    ctx.write("sweep_v.csv", |w| write_sweep(w, &rows))
}

fn cmd_compare(ctx: &mut Context) -> Result<(), CliError> {
    let scenario = ctx.config.scenario()?;
    let rows = compare_policies(&scenario, &Policy::ALL, &ctx.config.seeds, &ctx.config.solver)?;
    ctx.write("compare.csv", |w| write_comparison(w, &rows))
}

fn policy_rows(scenario: &Scenario, ctx: &Context) -> Result<Vec<PolicyRow>, CliError> {
    Ok(compare_policies(scenario, &Policy::ALL, &ctx.config.seeds, &ctx.config.solver)?)
}

fn push_policy_rows(table: &mut Table, key: String, rows: &[PolicyRow]) {
    for r in rows {
        let s: &MetricsSummary = &r.summary;
        table.push([key.clone(), r.policy.to_string(), s.avg_utility.to_string(), s.avg_backlog.to_string()]);
    }
}

fn cmd_figures(ctx: &mut Context, vs: &[f64], ks: &[usize], ms: &[usize], floors: &[f64]) -> Result<(), CliError> {
    let base = ctx.config.scenario()?;

    let rows = sweep_v(&base, vs, &ctx.config.seeds, &ctx.config.solver)?;
    ctx.write("utility_backlog_vs_v.csv", |w| write_sweep(w, &rows))?;

    let rows = policy_rows(&base, ctx)?;
    let mut util = Table::new(["policy", "obs_utilization", "trans_utilization"]);
    for r in &rows {
        util.push([r.policy.to_string(), r.summary.obs_utilization.to_string(), r.summary.trans_utilization.to_string()]);
    }
    ctx.write("utilization_by_policy.csv", |w| util.write(w))?;

    let mut by_floor = Table::new(["rate_floor", "policy", "avg_utility", "avg_backlog"]);
    for &a in floors {
        if !(a.is_finite() && a >= 0.0) {
            return Err(CliError::Config(format!("config error in `floor_list`: {a} is not a finite value >= 0")));
        }
        push_policy_rows(&mut by_floor, a.to_string(), &policy_rows(&base.with_rate_floor(a), ctx)?);
    }
    ctx.write("utility_backlog_vs_rate_floor.csv", |w| by_floor.write(w))?;

    if !ctx.config.is_synthetic() {
        log::warn!("a contact-plan file fixes the network size; skipping the EOS and transceiver series");
        return Ok(());
    }
    let mut by_k = Table::new(["num_eos", "policy", "avg_utility", "avg_backlog"]);
    for &k in ks {
        let mut network = ctx.config.network.clone();
        network.num_eos = k;
        push_policy_rows(&mut by_k, k.to_string(), &policy_rows(&ctx.config.scenario_for(network)?, ctx)?);
    }
    ctx.write("utility_backlog_vs_eos.csv", |w| by_k.write(w))?;

    let mut by_m = Table::new(["transceivers", "policy", "avg_utility", "avg_backlog"]);
    for &m in ms {
        let mut network = ctx.config.network.clone();
        network.transceivers = vec![m; network.num_destinations];
        push_policy_rows(&mut by_m, m.to_string(), &policy_rows(&ctx.config.scenario_for(network)?, ctx)?);
    }
    ctx.write("utility_backlog_vs_transceivers.csv", |w| by_m.write(w))
}
