//! Network topology, contact visibility and stochastic channel states.
//!
//! All capacities are handled internally as data volume per slot: configured
//! link rates (Mbit/s) are multiplied by the slot length at sampling time.

use std::fmt;
use std::path::Path;

use ndarray::{Array2, Array3};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// Static dimensions and parameters of one scheduling scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub num_targets: usize,
    pub num_eos: usize,
    pub num_destinations: usize,
    /// Concurrent downlinks each destination supports.
    pub transceivers: Vec<usize>,
    /// Minimum time-average arrival volume per slot, one per flow.
    pub rate_floors: Vec<f64>,
    /// Compression ratios, strictly decreasing, within (0, 1].
    #[serde(deserialize_with = "deserialize_ratios")]
    pub compression_set: Vec<f64>,
    pub control_factor: f64,
    /// Slot length in seconds.
    pub slot_length: f64,
    pub horizon: usize,
    #[serde(default)]
    pub rng_seed: u64,
}

impl NetworkConfig {
    /// The desk-scale replication setup: 8 targets, 2 relay destinations with
    /// `transceivers` each, a 1440-slot horizon and V = 8000.
    pub fn desk(num_eos: usize, transceivers: usize) -> Self {
        NetworkConfig {
            num_targets: 8,
            num_eos,
            num_destinations: 2,
            transceivers: vec![transceivers; 2],
            rate_floors: vec![0.0; 8],
            compression_set: vec![2.0 / 3.0, 0.5, 1.0 / 3.0, 0.25],
            control_factor: 8000.0,
            slot_length: 1.0,
            horizon: 1440,
            rng_seed: 1,
        }
    }

    /// Largest compression ratio, the cap on any single arrival.
    pub fn max_ratio(&self) -> f64 {
        self.compression_set[0]
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_targets == 0 {
            return Err(Error::config("num_targets", "must be positive"));
        }
        if self.num_eos == 0 {
            return Err(Error::config("num_eos", "must be positive"));
        }
        if self.num_destinations == 0 {
            return Err(Error::config("num_destinations", "must be positive"));
        }
        if self.transceivers.len() != self.num_destinations {
            return Err(Error::config(
                "transceivers",
                format!(
                    "expected {} entries, found {}",
                    self.num_destinations,
                    self.transceivers.len()
                ),
            ));
        }
        if self.transceivers.contains(&0) {
            return Err(Error::config("transceivers", "every entry must be positive"));
        }
        if self.rate_floors.len() != self.num_targets {
            return Err(Error::config(
                "rate_floors",
                format!(
                    "expected {} entries, found {}",
                    self.num_targets,
                    self.rate_floors.len()
                ),
            ));
        }
        if self.rate_floors.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::config("rate_floors", "entries must be finite and >= 0"));
        }
        validate_ratios(&self.compression_set)?;
        if !(self.control_factor.is_finite() && self.control_factor > 0.0) {
            return Err(Error::config("control_factor", "must be a positive real"));
        }
        if !(self.slot_length.is_finite() && self.slot_length > 0.0) {
            return Err(Error::config("slot_length", "must be a positive real"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        Ok(())
    }
}

fn validate_ratios(set: &[f64]) -> Result<()> {
    const FIELD: &str = "compression_set";
    let (Some(first), Some(last)) = (set.first(), set.last()) else {
        return Err(Error::config(FIELD, "must not be empty"));
    };
    if set.iter().any(|r| !r.is_finite()) {
        return Err(Error::config(FIELD, "entries must be finite"));
    }
    if *first > 1.0 {
        return Err(Error::config(FIELD, "largest ratio must be <= 1"));
    }
    if *last <= 0.0 {
        return Err(Error::config(FIELD, "smallest ratio must be > 0"));
    }
    if set.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config(FIELD, "ratios must be strictly decreasing"));
    }
    Ok(())
}

/// A ratio written either as a JSON number or as a `"p/q"` string.
#[derive(Deserialize)]
#[serde(untagged)]
enum RatioRepr {
    Number(f64),
    Text(String),
}

fn parse_ratio(text: &str) -> std::result::Result<f64, String> {
    let text = text.trim();
    match text.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| format!("bad ratio `{text}`"))?;
            let den: f64 = den.trim().parse().map_err(|_| format!("bad ratio `{text}`"))?;
            if den == 0.0 {
                return Err(format!("zero denominator in `{text}`"));
            }
            Ok(num / den)
        }
        None => text.parse().map_err(|_| format!("bad ratio `{text}`")),
    }
}

fn deserialize_ratios<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<Vec<f64>, D::Error> {
    let raw = Vec::<RatioRepr>::deserialize(de)?;
    raw.into_iter()
        .map(|r| match r {
            RatioRepr::Number(x) => Ok(x),
            RatioRepr::Text(s) => parse_ratio(&s).map_err(serde::de::Error::custom),
        })
        .collect()
}

/// Finite-support distributions of observation and downlink rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub obs_support: Vec<f64>,
    pub obs_probs: Vec<f64>,
    pub trans_support: Vec<f64>,
    pub trans_probs: Vec<f64>,
}

impl Default for ChannelModel {
    /// Observation rates uniform over {600, 800, 1000} Mbit/s and downlink
    /// rates uniform over {0, 200, 400} Mbit/s.
    fn default() -> Self {
        let third = 1.0 / 3.0;
        ChannelModel {
            obs_support: vec![600.0, 800.0, 1000.0],
            obs_probs: vec![third; 3],
            trans_support: vec![0.0, 200.0, 400.0],
            trans_probs: vec![third; 3],
        }
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        check_distribution("obs_support", "obs_probs", &self.obs_support, &self.obs_probs)?;
        check_distribution(
            "trans_support",
            "trans_probs",
            &self.trans_support,
            &self.trans_probs,
        )
    }

    pub fn max_obs_rate(&self) -> f64 {
        max_of(&self.obs_support)
    }

    pub fn max_trans_rate(&self) -> f64 {
        max_of(&self.trans_support)
    }
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(0.0, f64::max)
}

fn check_distribution(support_field: &str, probs_field: &str, support: &[f64], probs: &[f64]) -> Result<()> {
    if support.is_empty() {
        return Err(Error::config(support_field, "must not be empty"));
    }
    if support.len() != probs.len() {
        return Err(Error::config(
            probs_field,
            format!("expected {} probabilities, found {}", support.len(), probs.len()),
        ));
    }
    if support.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::config(support_field, "values must be finite and >= 0"));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::config(probs_field, "probabilities must be finite and >= 0"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::config(probs_field, format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Which target–EOS and EOS–destination pairs can interact in each slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPlan {
    /// `[t, i, k]`: target `i` visible to EOS `k` during slot `t`.
    pub obs_visible: Array3<bool>,
    /// `[t, k, n]`: EOS `k` can downlink to destination `n` during slot `t`.
    pub trans_visible: Array3<bool>,
}

impl ContactPlan {
    /// A plan with no contacts at all.
    pub fn empty(config: &NetworkConfig) -> Self {
        let t = config.horizon;
        ContactPlan {
            obs_visible: Array3::from_elem((t, config.num_targets, config.num_eos), false),
            trans_visible: Array3::from_elem((t, config.num_eos, config.num_destinations), false),
        }
    }

    /// Every pair visible in every slot.
    pub fn full(config: &NetworkConfig) -> Self {
        let mut plan = Self::empty(config);
        plan.obs_visible.fill(true);
        plan.trans_visible.fill(true);
        plan
    }

    pub fn horizon(&self) -> usize {
        self.obs_visible.dim().0
    }

    pub fn check_dims(&self, config: &NetworkConfig) -> Result<()> {
        let want_obs = (config.horizon, config.num_targets, config.num_eos);
        let want_trans = (config.horizon, config.num_eos, config.num_destinations);
        if self.obs_visible.dim() != want_obs {
            return Err(Error::Dimension(format!(
                "observation visibility is {:?}, config expects {:?}",
                self.obs_visible.dim(),
                want_obs
            )));
        }
        if self.trans_visible.dim() != want_trans {
            return Err(Error::Dimension(format!(
                "transmission visibility is {:?}, config expects {:?}",
                self.trans_visible.dim(),
                want_trans
            )));
        }
        Ok(())
    }

    /// Writes the plan in the line-oriented contact-plan format, one record
    /// per maximal visibility window.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        let (horizon, rows, cols) = self.obs_visible.dim();
        emit_windows(&mut out, "obs", &self.obs_visible, horizon, rows, cols);
        let (_, rows, cols) = self.trans_visible.dim();
        emit_windows(&mut out, "trans", &self.trans_visible, horizon, rows, cols);
        out
    }
}

fn emit_windows(out: &mut String, kind: &str, vis: &Array3<bool>, horizon: usize, rows: usize, cols: usize) {
    use std::fmt::Write;
    for a in 0..rows {
        for b in 0..cols {
            let mut t = 0;
            while t < horizon {
                if vis[[t, a, b]] {
                    let start = t;
                    while t + 1 < horizon && vis[[t + 1, a, b]] {
                        t += 1;
                    }
                    let _ = writeln!(out, "{kind},{a},{b},{start},{t}");
                }
                t += 1;
            }
        }
    }
}

/// A non-fatal condition found while reading a contact-plan file.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanWarning {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for PlanWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Parses contact-plan text. Records are `obs,i,k,t_start,t_end` or
/// `trans,k,n,t_start,t_end` with an inclusive, 0-based slot range. Blank
/// lines and lines starting with `#` are skipped. Windows reaching past the
/// horizon are clipped and reported as warnings.
pub fn parse_contact_plan(text: &str, config: &NetworkConfig) -> Result<(ContactPlan, Vec<PlanWarning>)> {
    let mut plan = ContactPlan::empty(config);
    let mut warnings = Vec::new();
    let horizon = config.horizon;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let record = raw.trim();
        if record.is_empty() || record.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = record.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(Error::parse(line, format!("expected 5 fields, found {}", fields.len())));
        }
        let num = |pos: usize, name: &str| -> Result<usize> {
            fields[pos]
                .parse::<usize>()
                .map_err(|_| Error::parse(line, format!("{name} `{}` is not a non-negative integer", fields[pos])))
        };
        let a = num(1, "first index")?;
        let b = num(2, "second index")?;
        let start = num(3, "t_start")?;
        let end = num(4, "t_end")?;
        if start > end {
            return Err(Error::parse(line, format!("t_start {start} exceeds t_end {end}")));
        }

        let (vis, rows, cols, names) = match fields[0] {
            "obs" => (&mut plan.obs_visible, config.num_targets, config.num_eos, ("target", "eos")),
            "trans" => (&mut plan.trans_visible, config.num_eos, config.num_destinations, ("eos", "destination")),
            other => return Err(Error::parse(line, format!("unknown record type `{other}`"))),
        };
        if a >= rows {
            return Err(Error::Dimension(format!(
                "line {line}: {} index {a} out of range (config has {rows})",
                names.0
            )));
        }
        if b >= cols {
            return Err(Error::Dimension(format!(
                "line {line}: {} index {b} out of range (config has {cols})",
                names.1
            )));
        }

        if start >= horizon {
            warnings.push(PlanWarning {
                line,
                message: format!("window {start}-{end} lies beyond horizon {horizon}; ignored"),
            });
            continue;
        }
        let last = if end >= horizon {
            warnings.push(PlanWarning {
                line,
                message: format!("window {start}-{end} clipped to {start}-{}", horizon - 1),
            });
            horizon - 1
        } else {
            end
        };
        for t in start..=last {
            vis[[t, a, b]] = true;
        }
    }
    Ok((plan, warnings))
}

/// Reads a contact-plan file; warnings are logged.
pub fn load_contact_plan(path: impl AsRef<Path>, config: &NetworkConfig) -> Result<ContactPlan> {
    config.validate()?;
    let text = std::fs::read_to_string(path.as_ref())?;
    let (plan, warnings) = parse_contact_plan(&text, config)?;
    for w in &warnings {
        log::warn!("{}: {w}", path.as_ref().display());
    }
    Ok(plan)
}

/// Parameters of the periodic synthetic visibility model. Observation and
/// downlink contacts may use different periods and duty cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPlan {
    pub obs_period: usize,
    pub obs_duty: f64,
    pub trans_period: usize,
    pub trans_duty: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticPlan {
    /// One-slot target passes every 48 slots per target-EOS pair, and relay
    /// windows covering 70% of a 96-slot cycle.
    pub const DESK: SyntheticPlan = SyntheticPlan {
        obs_period: 48,
        obs_duty: 0.02,
        trans_period: 96,
        trans_duty: 0.7,
        seed: 7,
    };

    pub fn generate(&self, config: &NetworkConfig) -> Result<ContactPlan> {
        let obs_window = window_len(self.obs_period, self.obs_duty)?;
        let trans_window = window_len(self.trans_period, self.trans_duty)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut plan = ContactPlan::empty(config);
        fill_periodic(&mut plan.obs_visible, self.obs_period, obs_window, &mut rng);
        fill_periodic(&mut plan.trans_visible, self.trans_period, trans_window, &mut rng);
        Ok(plan)
    }
}

fn window_len(period: usize, duty: f64) -> Result<usize> {
    if period == 0 {
        return Err(Error::Parameter("period must be at least 1 slot".into()));
    }
    if !(duty > 0.0 && duty <= 1.0) {
        return Err(Error::Parameter(format!("duty {duty} outside (0, 1]")));
    }
    // A positive duty always yields at least one visible slot per period.
    Ok(((duty * period as f64).round() as usize).clamp(1, period))
}

fn fill_periodic(vis: &mut Array3<bool>, period: usize, window: usize, rng: &mut ChaCha8Rng) {
    let (horizon, rows, cols) = vis.dim();
    for a in 0..rows {
        for b in 0..cols {
            let phase = rng.random_range(0..period);
            for t in 0..horizon {
                vis[[t, a, b]] = (t + phase) % period < window;
            }
        }
    }
}

/// Periodic visibility with one shared period and duty cycle for both
/// contact types and a seeded phase offset per pair.
pub fn generate_synthetic_plan(config: &NetworkConfig, period: usize, duty: f64, offset_seed: u64) -> Result<ContactPlan> {
    SyntheticPlan {
        obs_period: period,
        obs_duty: duty,
        trans_period: period,
        trans_duty: duty,
        seed: offset_seed,
    }
    .generate(config)
}

/// Per-slot capacities in data volume per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    /// `[i, k]`: observation capacity (I x K).
    pub obs: Array2<f64>,
    /// `[k, n]`: downlink capacity (K x N).
    pub trans: Array2<f64>,
}

impl ChannelState {
    pub fn zeros(config: &NetworkConfig) -> Self {
        ChannelState {
            obs: Array2::zeros((config.num_targets, config.num_eos)),
            trans: Array2::zeros((config.num_eos, config.num_destinations)),
        }
    }

    pub fn num_targets(&self) -> usize {
        self.obs.nrows()
    }

    pub fn num_eos(&self) -> usize {
        self.obs.ncols()
    }

    pub fn num_destinations(&self) -> usize {
        self.trans.ncols()
    }
}

/// Samples the channel state for slot `t`. Visible entries are drawn
/// independently from the model and scaled by the slot length; invisible
/// entries are zero.
pub fn sample_channels<R: Rng + ?Sized>(
    plan: &ContactPlan,
    model: &ChannelModel,
    slot_length: f64,
    t: usize,
    rng: &mut R,
) -> Result<ChannelState> {
    if t >= plan.horizon() {
        return Err(Error::Parameter(format!("slot {t} beyond horizon {}", plan.horizon())));
    }
    let obs_dist = WeightedIndex::new(&model.obs_probs)
        .map_err(|e| Error::config("obs_probs", e.to_string()))?;
    let trans_dist = WeightedIndex::new(&model.trans_probs)
        .map_err(|e| Error::config("trans_probs", e.to_string()))?;

    let (_, targets, eos) = plan.obs_visible.dim();
    let (_, _, dests) = plan.trans_visible.dim();
    let mut obs = Array2::zeros((targets, eos));
    for ((i, k), cap) in obs.indexed_iter_mut() {
        if plan.obs_visible[[t, i, k]] {
            *cap = model.obs_support[obs_dist.sample(rng)] * slot_length;
        }
    }
    let mut trans = Array2::zeros((eos, dests));
    for ((k, n), cap) in trans.indexed_iter_mut() {
        if plan.trans_visible[[t, k, n]] {
            *cap = model.trans_support[trans_dist.sample(rng)] * slot_length;
        }
    }
    Ok(ChannelState { obs, trans })
}

/// Samples every slot of the horizon from one generator, in slot order.
pub fn sample_horizon<R: Rng + ?Sized>(
    plan: &ContactPlan,
    model: &ChannelModel,
    slot_length: f64,
    rng: &mut R,
) -> Result<Vec<ChannelState>> {
    (0..plan.horizon())
        .map(|t| sample_channels(plan, model, slot_length, t, rng))
        .collect()
}
