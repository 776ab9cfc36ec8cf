//! JSON configuration for the command-line tool.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use dmrc_core::scenario::load_contact_plan;
use dmrc_core::{ChannelModel, NetworkConfig, Policy, Scenario, SolverParams, SyntheticPlan};

use crate::CliError;

/// Output directory used when neither `--out` nor `output_dir` is given.
pub const OUT_DIR_ENV: &str = "DMRC_OUT_DIR";

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanSource {
    /// Contact-plan records, relative to the config file.
    File(PathBuf),
    Synthetic(SyntheticPlan),
}

impl Default for PlanSource {
    fn default() -> Self {
        PlanSource::Synthetic(SyntheticPlan::DESK)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    #[serde(default = "default_network")]
    pub network: NetworkConfig,
    #[serde(default)]
    pub channel: ChannelModel,
    #[serde(default)]
    pub plan: PlanSource,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub policy: Option<Policy>,
    #[serde(default)]
    pub v_list: Option<Vec<f64>>,
}

fn default_network() -> NetworkConfig {
    NetworkConfig::desk(12, 2)
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            network: default_network(),
            channel: ChannelModel::default(),
            plan: PlanSource::default(),
            solver: SolverParams::default(),
            output_dir: None,
            seeds: default_seeds(),
            policy: None,
            v_list: None,
        }
    }
}

impl CliConfig {
    /// Reads a config file. Relative plan paths are resolved against the
    /// file's directory. Without a path the desk defaults are used.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(CliConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: CliConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
        if let PlanSource::File(plan) = &mut config.plan {
            if plan.is_relative() {
                if let Some(dir) = path.parent() {
                    *plan = dir.join(&*plan);
                }
            }
        }
        Ok(config)
    }

    /// Checks everything that does not need a simulation.
    pub fn validate(&self) -> Result<(), CliError> {
        self.network.validate()?;
        self.channel.validate()?;
        self.solver.validate()?;
        if self.seeds.is_empty() {
            return Err(CliError::Config("config error in `seeds`: must not be empty".into()));
        }
        if let Some(vs) = &self.v_list {
            check_v_list(vs)?;
        }
        if let PlanSource::File(path) = &self.plan {
            if !path.is_file() {
                return Err(CliError::Config(format!("config error in `plan.file`: {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        self.scenario_for(self.network.clone())
    }

    /// Scenario with different network dimensions on the same plan source.
    /// A plan file only fits the dimensions it was written for.
    pub fn scenario_for(&self, network: NetworkConfig) -> Result<Scenario, CliError> {
        let plan = match &self.plan {
            PlanSource::File(path) => load_contact_plan(path, &network)?,
            PlanSource::Synthetic(synthetic) => synthetic.generate(&network)?,
        };
        Ok(Scenario::new(network, plan, self.channel.clone())?)
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self.plan, PlanSource::Synthetic(_))
    }

    /// Creates the output directory, preferring `flag`, then the config,
    /// then the environment, then `out`.
    pub fn output_dir(&self, flag: Option<&Path>) -> Result<PathBuf, CliError> {
        let dir = flag
            .map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&dir).map_err(|e| CliError::Config(format!("output directory {} is not writable: {e}", dir.display())))?;
        let meta = fs::metadata(&dir).map_err(|e| CliError::Config(format!("output directory {}: {e}", dir.display())))?;
        if meta.permissions().readonly() {
            return Err(CliError::Config(format!("output directory {} is read-only", dir.display())));
        }
        Ok(dir)
    }
}

pub fn check_v_list(vs: &[f64]) -> Result<(), CliError> {
    if vs.is_empty() {
        return Err(CliError::Config("config error in `v_list`: must not be empty".into()));
    }
    if let Some(v) = vs.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(CliError::Config(format!("config error in `v_list`: {v} is not a positive real")));
    }
    Ok(())
}
