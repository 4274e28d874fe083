//! Experiment orchestration: scenario configuration, the protocol ×
//! mobility × speed × seed sweep, CSV emission, and plot-ready tables.
//!
//! A scenario is fully described by its configuration echo; the echo hash is
//! embedded in every CSV row so any row can be reproduced in isolation.
//! Sweep output is a pure function of the sweep spec: rows are emitted in
//! canonical (protocol, mobility, speed, seed) order no matter how many
//! worker threads executed the cells.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::kernel::{fnv1a64, RNG_ALGORITHM};
use crate::metrics::{self, MetricsRecord};
use crate::mobility::{FieldGeometry, MobilityError, MobilityModel, MobilityParams};
use crate::network::RadioParams;
use crate::protocols::{ProtocolConfig, ProtocolKind};
use crate::sim::{self, RunOutput, SimError, TraceOptions};

pub const CSV_HEADER: &str = "protocol,mobility,speed_mps,seed,nodes,sent,delivered_unique,\
duplicates,dropped,in_flight,loss_pct,pdr_as_defined,pdr_unique,config_hash";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {reason}")]
    BadValue {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("line {line}: malformed entry (expected `key = value`)")]
    Malformed { line: usize },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// One fully specified simulation run. Defaults reproduce the standard
/// setup: 100 nodes on a 1000 m × 1000 m field.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub protocol: ProtocolKind,
    pub mobility: MobilityModel,
    /// Node speed, m/s. Sweeps hold every node at exactly this speed.
    pub speed: f64,
    pub nodes: u32,
    pub field_width: f64,
    pub field_height: f64,
    pub seed: u64,
    /// Simulated duration, seconds.
    pub duration: f64,
    /// Radio range, meters.
    pub range: f64,
    /// Per-hop transmission delay, seconds.
    pub tx_delay: f64,
    /// Mobility sampling interval, seconds.
    pub sample_interval: f64,
    /// Random-waypoint pause, seconds.
    pub pause: f64,
    /// Mass-model speed perturbation, m/s per step.
    pub speed_sigma: f64,
    /// Mass-model heading perturbation, radians per step.
    pub turn_sigma: f64,
    /// Re-clustering period, seconds.
    pub round_length: f64,
    pub recovery_retries: u32,
    pub recovery_timeout: f64,
    pub deca_we: f64,
    pub deca_wc: f64,
    pub deca_wm: f64,
    /// GRC zone cell size, meters.
    pub cell_size: f64,
    pub announce_window: f64,
    pub mobility_window: f64,
    pub demc_jitter: f64,
    /// Data generation period per non-head node, seconds.
    pub traffic_period: f64,
    /// No new traffic in the final stretch of a run, seconds.
    pub warm_down: f64,
    /// Per-message transmit cost, joules.
    pub tx_cost: f64,
    /// Per-message receive cost, joules.
    pub rx_cost: f64,
    pub initial_energy: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            protocol: ProtocolKind::Mar,
            mobility: MobilityModel::RandomWaypoint,
            speed: 10.0,
            nodes: 100,
            field_width: 1000.0,
            field_height: 1000.0,
            seed: 1,
            duration: 900.0,
            range: 150.0,
            tx_delay: 0.005,
            sample_interval: 1.0,
            pause: 0.0,
            speed_sigma: 0.5,
            turn_sigma: 0.25,
            round_length: 10.0,
            recovery_retries: 3,
            recovery_timeout: 2.0,
            deca_we: 0.5,
            deca_wc: 0.3,
            deca_wm: 0.2,
            cell_size: 250.0,
            announce_window: 1.0,
            mobility_window: 30.0,
            demc_jitter: 0.1,
            traffic_period: 10.0,
            warm_down: 30.0,
            tx_cost: 50e-6,
            rx_cost: 25e-6,
            initial_energy: 1.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |msg: String| Err(ConfigError::Invalid(msg));
        if !(self.speed >= 0.0) || !self.speed.is_finite() {
            return err(format!("speed must be >= 0, got {}", self.speed));
        }
        if self.nodes == 0 {
            return err("nodes must be >= 1".into());
        }
        if !(self.field_width > 0.0) || !(self.field_height > 0.0) {
            return err(format!(
                "field must be positive, got {} x {}",
                self.field_width, self.field_height
            ));
        }
        if !(self.duration > 0.0) {
            return err(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.range > 0.0) {
            return err(format!("range must be positive, got {}", self.range));
        }
        if !(self.tx_delay >= 0.0) {
            return err(format!("tx_delay must be >= 0, got {}", self.tx_delay));
        }
        if !(self.sample_interval > 0.0) {
            return err(format!(
                "sample_interval must be positive, got {}",
                self.sample_interval
            ));
        }
        if self.speed * self.sample_interval >= self.field_width.min(self.field_height) {
            return err(format!(
                "sample_interval {} too coarse for speed {} on this field: per-step motion must \
                 stay below one field dimension",
                self.sample_interval, self.speed
            ));
        }
        if self.pause < 0.0 || self.speed_sigma < 0.0 || self.turn_sigma < 0.0 {
            return err("pause and sigmas must be >= 0".into());
        }
        if !(self.round_length > 0.0) {
            return err(format!(
                "round_length must be positive, got {}",
                self.round_length
            ));
        }
        if !(self.recovery_timeout > 0.0) {
            return err(format!(
                "recovery_timeout must be positive, got {}",
                self.recovery_timeout
            ));
        }
        let wsum = self.deca_we + self.deca_wc + self.deca_wm;
        if self.deca_we < 0.0 || self.deca_wc < 0.0 || self.deca_wm < 0.0 || (wsum - 1.0).abs() > 1e-9
        {
            return err(format!(
                "deca weights must be non-negative and sum to 1, got ({}, {}, {})",
                self.deca_we, self.deca_wc, self.deca_wm
            ));
        }
        if !(self.cell_size > 0.0) {
            return err(format!("cell_size must be positive, got {}", self.cell_size));
        }
        if !(self.announce_window > 0.0) {
            return err(format!(
                "announce_window must be positive, got {}",
                self.announce_window
            ));
        }
        if self.announce_window * 1.3 + 0.05 >= self.round_length {
            return err(format!(
                "announce_window {} does not fit inside round_length {}",
                self.announce_window, self.round_length
            ));
        }
        if !(self.mobility_window > 0.0) {
            return err(format!(
                "mobility_window must be positive, got {}",
                self.mobility_window
            ));
        }
        if !(0.0..1.0).contains(&self.demc_jitter) {
            return err(format!(
                "demc_jitter must lie in [0, 1), got {}",
                self.demc_jitter
            ));
        }
        if !(self.traffic_period > 0.0) {
            return err(format!(
                "traffic_period must be positive, got {}",
                self.traffic_period
            ));
        }
        if self.warm_down < 0.0 || self.warm_down > self.duration {
            return err(format!(
                "warm_down must lie in [0, duration], got {}",
                self.warm_down
            ));
        }
        if self.tx_cost < 0.0 || self.rx_cost < 0.0 {
            return err("message costs must be >= 0".into());
        }
        if !(self.initial_energy > 0.0) {
            return err(format!(
                "initial_energy must be positive, got {}",
                self.initial_energy
            ));
        }
        Ok(())
    }

    pub fn field(&self) -> Result<FieldGeometry, MobilityError> {
        FieldGeometry::new(self.field_width, self.field_height)
    }

    pub fn radio(&self) -> RadioParams {
        RadioParams {
            range: self.range,
            tx_delay: self.tx_delay,
        }
    }

    pub fn mobility_params(&self) -> MobilityParams {
        MobilityParams {
            model: self.mobility,
            v_min: self.speed,
            v_max: self.speed,
            pause: self.pause,
            speed_sigma: self.speed_sigma,
            turn_sigma: self.turn_sigma,
            sample_interval: self.sample_interval,
        }
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            protocol: self.protocol,
            round_length: self.round_length,
            recovery_retries: self.recovery_retries,
            recovery_timeout: self.recovery_timeout,
            deca_weights: (self.deca_we, self.deca_wc, self.deca_wm),
            cell_size: self.cell_size,
            announce_window: self.announce_window,
            mobility_window: self.mobility_window,
            demc_weight_jitter: self.demc_jitter,
        }
    }

    /// Canonical key = value echo; a run is reproducible from this text alone.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.echo_pairs() {
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    fn echo_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("protocol", self.protocol.name().to_owned()),
            ("mobility", self.mobility.name().to_owned()),
            ("speed", self.speed.to_string()),
            ("nodes", self.nodes.to_string()),
            ("field_width", self.field_width.to_string()),
            ("field_height", self.field_height.to_string()),
            ("seed", self.seed.to_string()),
            ("duration", self.duration.to_string()),
            ("range", self.range.to_string()),
            ("tx_delay", self.tx_delay.to_string()),
            ("sample_interval", self.sample_interval.to_string()),
            ("pause", self.pause.to_string()),
            ("speed_sigma", self.speed_sigma.to_string()),
            ("turn_sigma", self.turn_sigma.to_string()),
            ("round_length", self.round_length.to_string()),
            ("recovery_retries", self.recovery_retries.to_string()),
            ("recovery_timeout", self.recovery_timeout.to_string()),
            ("deca_we", self.deca_we.to_string()),
            ("deca_wc", self.deca_wc.to_string()),
            ("deca_wm", self.deca_wm.to_string()),
            ("cell_size", self.cell_size.to_string()),
            ("announce_window", self.announce_window.to_string()),
            ("mobility_window", self.mobility_window.to_string()),
            ("demc_jitter", self.demc_jitter.to_string()),
            ("traffic_period", self.traffic_period.to_string()),
            ("warm_down", self.warm_down.to_string()),
            ("tx_cost", self.tx_cost.to_string()),
            ("rx_cost", self.rx_cost.to_string()),
            ("initial_energy", self.initial_energy.to_string()),
            ("rng", RNG_ALGORITHM.to_owned()),
        ]
    }

    pub fn config_hash(&self) -> String {
        format!("{:016x}", fnv1a64(self.echo().as_bytes()))
    }

    /// Hash with the seed elided; identifies a sweep cell across seeds.
    pub fn cell_hash(&self) -> String {
        let text: String = self
            .echo_pairs()
            .into_iter()
            .filter(|(k, _)| *k != "seed")
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        format!("{:016x}", fnv1a64(text.as_bytes()))
    }

    fn set_key(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |reason: String| ConfigError::BadValue {
            line,
            key: key.to_owned(),
            reason,
        };
        let parse_f64 = |v: &str| -> Result<f64, ConfigError> {
            v.parse::<f64>()
                .map_err(|e| bad(format!("not a number: {e}")))
        };
        let non_negative = |v: f64, what: &str| -> Result<f64, ConfigError> {
            if v < 0.0 || !v.is_finite() {
                Err(bad(format!("{what} must be >= 0, got {v}")))
            } else {
                Ok(v)
            }
        };
        let positive = |v: f64, what: &str| -> Result<f64, ConfigError> {
            if !(v > 0.0) || !v.is_finite() {
                Err(bad(format!("{what} must be > 0, got {v}")))
            } else {
                Ok(v)
            }
        };
        match key {
            "protocol" => {
                self.protocol = ProtocolKind::parse(value)
                    .ok_or_else(|| bad(format!("unknown protocol `{value}`")))?;
            }
            "mobility" => {
                self.mobility = MobilityModel::parse(value)
                    .ok_or_else(|| bad(format!("unknown mobility model `{value}`")))?;
            }
            "speed" => self.speed = non_negative(parse_f64(value)?, "speed")?,
            "nodes" => {
                self.nodes = value
                    .parse::<u32>()
                    .ok()
                    .filter(|n| *n >= 1)
                    .ok_or_else(|| bad("must be an integer >= 1".into()))?;
            }
            "field_width" => self.field_width = positive(parse_f64(value)?, "field_width")?,
            "field_height" => self.field_height = positive(parse_f64(value)?, "field_height")?,
            "seed" => {
                self.seed = value
                    .parse::<u64>()
                    .map_err(|e| bad(format!("not an unsigned integer: {e}")))?;
            }
            "duration" => self.duration = positive(parse_f64(value)?, "duration")?,
            "range" => self.range = positive(parse_f64(value)?, "range")?,
            "tx_delay" => self.tx_delay = non_negative(parse_f64(value)?, "tx_delay")?,
            "sample_interval" => {
                self.sample_interval = positive(parse_f64(value)?, "sample_interval")?
            }
            "pause" => self.pause = non_negative(parse_f64(value)?, "pause")?,
            "speed_sigma" => self.speed_sigma = non_negative(parse_f64(value)?, "speed_sigma")?,
            "turn_sigma" => self.turn_sigma = non_negative(parse_f64(value)?, "turn_sigma")?,
            "round_length" => self.round_length = positive(parse_f64(value)?, "round_length")?,
            "recovery_retries" => {
                self.recovery_retries = value
                    .parse::<u32>()
                    .map_err(|e| bad(format!("not an unsigned integer: {e}")))?;
            }
            "recovery_timeout" => {
                self.recovery_timeout = positive(parse_f64(value)?, "recovery_timeout")?
            }
            "deca_we" => self.deca_we = non_negative(parse_f64(value)?, "deca_we")?,
            "deca_wc" => self.deca_wc = non_negative(parse_f64(value)?, "deca_wc")?,
            "deca_wm" => self.deca_wm = non_negative(parse_f64(value)?, "deca_wm")?,
            "cell_size" => self.cell_size = positive(parse_f64(value)?, "cell_size")?,
            "announce_window" => {
                self.announce_window = positive(parse_f64(value)?, "announce_window")?
            }
            "mobility_window" => {
                self.mobility_window = positive(parse_f64(value)?, "mobility_window")?
            }
            "demc_jitter" => self.demc_jitter = non_negative(parse_f64(value)?, "demc_jitter")?,
            "traffic_period" => {
                self.traffic_period = positive(parse_f64(value)?, "traffic_period")?
            }
            "warm_down" => self.warm_down = non_negative(parse_f64(value)?, "warm_down")?,
            "tx_cost" => self.tx_cost = non_negative(parse_f64(value)?, "tx_cost")?,
            "rx_cost" => self.rx_cost = non_negative(parse_f64(value)?, "rx_cost")?,
            "initial_energy" => {
                self.initial_energy = positive(parse_f64(value)?, "initial_energy")?
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_owned(),
                })
            }
        }
        Ok(())
    }
}

/// The protocol × mobility × speed × seed cross product.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub protocols: Vec<ProtocolKind>,
    pub mobilities: Vec<MobilityModel>,
    pub speeds: Vec<f64>,
    pub seeds: Vec<u64>,
    pub base: ScenarioConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            protocols: ProtocolKind::ALL.to_vec(),
            mobilities: MobilityModel::ALL.to_vec(),
            speeds: vec![1.0, 5.0, 10.0, 15.0, 20.0],
            seeds: (1..=20).collect(),
            base: ScenarioConfig::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.protocols.is_empty()
            || self.mobilities.is_empty()
            || self.speeds.is_empty()
            || self.seeds.is_empty()
        {
            return Err(ConfigError::Invalid("sweep axes must be non-empty".into()));
        }
        self.base.validate()?;
        for cell in self.cells() {
            cell.validate()?;
        }
        Ok(())
    }

    /// All run configurations in canonical row order.
    pub fn cells(&self) -> Vec<ScenarioConfig> {
        let mut out = Vec::new();
        for &protocol in &self.protocols {
            for &mobility in &self.mobilities {
                for &speed in &self.speeds {
                    for &seed in &self.seeds {
                        let mut cfg = self.base.clone();
                        cfg.protocol = protocol;
                        cfg.mobility = mobility;
                        cfg.speed = speed;
                        cfg.seed = seed;
                        out.push(cfg);
                    }
                }
            }
        }
        out
    }
}

fn split_lines(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        let Some((key, value)) = stripped.split_once('=') else {
            return Err(ConfigError::Malformed { line });
        };
        let key = key.trim().to_owned();
        let value = value.trim().to_owned();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Malformed { line });
        }
        entries.push((line, key, value));
    }
    Ok(entries)
}

/// Parse a line-oriented `key = value` scenario file; `overrides` (from CLI
/// flags) win over file values. Unset keys take their defaults.
pub fn parse_scenario(
    text: &str,
    overrides: &[(String, String)],
) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg = ScenarioConfig::default();
    for (line, key, value) in split_lines(text)? {
        cfg.set_key(&key, &value, line)?;
    }
    for (key, value) in overrides {
        cfg.set_key(key, value, 0)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parse a sweep file: scenario keys set the base configuration; the axis
/// keys `protocols`, `mobilities`, `speeds`, and either `seeds` (count,
/// starting at `base_seed`) or `seed_list` override the default grid.
pub fn parse_sweep(text: &str, overrides: &[(String, String)]) -> Result<SweepSpec, ConfigError> {
    let mut spec = SweepSpec::default();
    let mut base_seed: u64 = 1;
    let mut seed_count: Option<u64> = None;
    let mut entries = split_lines(text)?;
    entries.extend(
        overrides
            .iter()
            .map(|(k, v)| (0usize, k.clone(), v.clone())),
    );

    for (line, key, value) in entries {
        let bad = |reason: String| ConfigError::BadValue {
            line,
            key: key.clone(),
            reason,
        };
        match key.as_str() {
            "protocols" => {
                spec.protocols = value
                    .split(',')
                    .map(|tok| {
                        ProtocolKind::parse(tok.trim())
                            .ok_or_else(|| bad(format!("unknown protocol `{}`", tok.trim())))
                    })
                    .collect::<Result<_, _>>()?;
            }
            "mobilities" => {
                spec.mobilities = value
                    .split(',')
                    .map(|tok| {
                        MobilityModel::parse(tok.trim())
                            .ok_or_else(|| bad(format!("unknown mobility model `{}`", tok.trim())))
                    })
                    .collect::<Result<_, _>>()?;
            }
            "speeds" => {
                spec.speeds = value
                    .split(',')
                    .map(|tok| {
                        tok.trim()
                            .parse::<f64>()
                            .map_err(|e| bad(format!("bad speed `{}`: {e}", tok.trim())))
                    })
                    .collect::<Result<_, _>>()?;
            }
            "seeds" => {
                seed_count = Some(
                    value
                        .parse::<u64>()
                        .ok()
                        .filter(|n| *n >= 1)
                        .ok_or_else(|| bad("must be an integer >= 1".into()))?,
                );
            }
            "base_seed" => {
                base_seed = value
                    .parse::<u64>()
                    .map_err(|e| bad(format!("not an unsigned integer: {e}")))?;
            }
            "seed_list" => {
                spec.seeds = value
                    .split(',')
                    .map(|tok| {
                        tok.trim()
                            .parse::<u64>()
                            .map_err(|e| bad(format!("bad seed `{}`: {e}", tok.trim())))
                    })
                    .collect::<Result<_, _>>()?;
                seed_count = None;
            }
            _ => spec.base.set_key(&key, &value, line)?,
        }
    }
    if let Some(count) = seed_count {
        spec.seeds = (0..count).map(|i| base_seed + i).collect();
    }
    spec.validate()?;
    Ok(spec)
}

/// Result of a single run: the full output plus the reproducibility echo.
#[derive(Clone, Debug)]
pub struct RunOneResult {
    pub output: RunOutput,
    pub echo: String,
    pub config_hash: String,
}

/// Build, run, and finalize one scenario.
pub fn run_one(cfg: &ScenarioConfig) -> Result<RunOneResult, SimError> {
    run_one_traced(cfg, TraceOptions::default())
}

pub fn run_one_traced(cfg: &ScenarioConfig, opts: TraceOptions) -> Result<RunOneResult, SimError> {
    let output = sim::run_scenario(cfg, opts)?;
    Ok(RunOneResult {
        output,
        echo: cfg.echo(),
        config_hash: cfg.config_hash(),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => String::new(),
    }
}

/// One CSV run row in the fixed column order.
pub fn csv_row(cfg: &ScenarioConfig, metrics: &MetricsRecord) -> String {
    let c = metrics.counters;
    format!(
        "{},{},{:.6},{},{},{},{},{},{},{},{},{},{},{}",
        cfg.protocol,
        cfg.mobility,
        cfg.speed,
        cfg.seed,
        cfg.nodes,
        c.sent,
        c.delivered_unique,
        c.duplicates,
        c.dropped,
        c.in_flight_at_end,
        fmt_opt(metrics.loss_pct),
        fmt_opt(metrics.pdr_as_defined),
        fmt_opt(metrics.pdr_unique),
        cfg.config_hash(),
    )
}

fn csv_failed_row(cfg: &ScenarioConfig) -> String {
    format!(
        "{},{},{:.6},{},{},,,,,,,,,{}",
        cfg.protocol,
        cfg.mobility,
        cfg.speed,
        cfg.seed,
        cfg.nodes,
        cfg.config_hash(),
    )
}

fn csv_aggregate_row(cfg: &ScenarioConfig, group: &[MetricsRecord]) -> String {
    // Aggregates must be recomputable from the CSV itself, so average the
    // 6-decimal values the run rows carry, not the full-precision ones.
    let quantize = |v: f64| (v * 1e6).round() / 1e6;
    let mean_of = |f: &dyn Fn(&MetricsRecord) -> f64| -> String {
        if group.is_empty() {
            String::new()
        } else {
            let sum: f64 = group.iter().map(|m| quantize(f(m))).sum();
            format!("{:.6}", sum / group.len() as f64)
        }
    };
    let mean_opt = |f: &dyn Fn(&MetricsRecord) -> Option<f64>| -> String {
        let vals: Vec<f64> = group.iter().filter_map(f).map(quantize).collect();
        if vals.is_empty() {
            String::new()
        } else {
            format!("{:.6}", vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    format!(
        "{},{},{:.6},mean,{},{},{},{},{},{},{},{},{},{}",
        cfg.protocol,
        cfg.mobility,
        cfg.speed,
        cfg.nodes,
        mean_of(&|m| m.counters.sent as f64),
        mean_of(&|m| m.counters.delivered_unique as f64),
        mean_of(&|m| m.counters.duplicates as f64),
        mean_of(&|m| m.counters.dropped as f64),
        mean_of(&|m| m.counters.in_flight_at_end as f64),
        mean_opt(&|m| m.loss_pct),
        mean_opt(&|m| m.pdr_as_defined),
        mean_opt(&|m| m.pdr_unique),
        cfg.cell_hash(),
    )
}

/// Run a sweep with a custom per-cell runner (used by tests to inject
/// failures). Cells execute with up to `jobs` worker threads; a failed cell
/// becomes a row with empty metric columns and never aborts the sweep. The
/// output is byte-identical for any `jobs` value.
pub fn run_sweep_with<F>(spec: &SweepSpec, jobs: usize, runner: F) -> Result<String, ConfigError>
where
    F: Fn(&ScenarioConfig) -> Result<MetricsRecord, String> + Sync,
{
    spec.validate()?;
    let cells = spec.cells();
    let results: Vec<Result<MetricsRecord, String>> = if jobs <= 1 {
        cells.iter().map(&runner).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(&runner).collect())
    };

    let seeds_per_cell = spec.seeds.len();
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (group_idx, chunk) in results.chunks(seeds_per_cell).enumerate() {
        let group_cells = &cells[group_idx * seeds_per_cell..(group_idx + 1) * seeds_per_cell];
        let mut ok_records = Vec::new();
        for (cfg, result) in group_cells.iter().zip(chunk) {
            match result {
                Ok(metrics) => {
                    out.push_str(&csv_row(cfg, metrics));
                    ok_records.push(*metrics);
                }
                Err(_) => out.push_str(&csv_failed_row(cfg)),
            }
            out.push('\n');
        }
        out.push_str(&csv_aggregate_row(&group_cells[0], &ok_records));
        out.push('\n');
    }
    Ok(out)
}

/// Run the full sweep with the real simulator.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<String, ConfigError> {
    run_sweep_with(spec, jobs, |cfg| {
        sim::run_scenario(cfg, TraceOptions::default())
            .map(|o| o.metrics)
            .map_err(|e| e.to_string())
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotMetric {
    Loss,
    Pdr,
}

impl PlotMetric {
    pub fn parse(s: &str) -> Option<PlotMetric> {
        match s.to_ascii_lowercase().as_str() {
            "loss" => Some(PlotMetric::Loss),
            "pdr" => Some(PlotMetric::Pdr),
            _ => None,
        }
    }

    fn column(&self) -> usize {
        match self {
            PlotMetric::Loss => 10,
            PlotMetric::Pdr => 11,
        }
    }
}

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("CSV is missing cells: {0}")]
    MissingCells(String),
    #[error("malformed CSV row {0}")]
    MalformedRow(usize),
}

/// Condense a sweep CSV into one plot-ready table for a figure: x = speed,
/// one (mean, ci95) series per protocol, restricted to one mobility model.
/// Tab-separated; the CI columns are omitted when every cell has a single
/// replication.
pub fn emit_plotdata(
    csv: &str,
    metric: PlotMetric,
    model: MobilityModel,
) -> Result<String, PlotError> {
    let mut cells: BTreeMap<(usize, u64), Vec<f64>> = BTreeMap::new();
    let mut expected: std::collections::BTreeSet<(usize, u64)> = std::collections::BTreeSet::new();
    let mut protocols_seen = [false; 6];
    let proto_index = |p: ProtocolKind| ProtocolKind::ALL.iter().position(|q| *q == p).unwrap();

    for (idx, line) in csv.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 14 {
            return Err(PlotError::MalformedRow(idx + 1));
        }
        if fields[3] == "mean" {
            continue; // aggregate rows are recomputable; use run rows only
        }
        let Some(protocol) = ProtocolKind::parse(fields[0]) else {
            return Err(PlotError::MalformedRow(idx + 1));
        };
        let Some(mobility) = MobilityModel::parse(fields[1]) else {
            return Err(PlotError::MalformedRow(idx + 1));
        };
        if mobility != model {
            continue;
        }
        let speed: f64 = fields[2].parse().map_err(|_| PlotError::MalformedRow(idx + 1))?;
        let p = proto_index(protocol);
        protocols_seen[p] = true;
        // Key speeds at micro-precision to keep the map ordered and exact.
        let speed_key = (speed * 1e6).round() as u64;
        expected.insert((p, speed_key));
        let value = fields[metric.column()];
        if value.is_empty() {
            continue; // failed or zero-traffic run contributes no value
        }
        let value: f64 = value.parse().map_err(|_| PlotError::MalformedRow(idx + 1))?;
        cells.entry((p, speed_key)).or_default().push(value);
    }

    let protocols: Vec<ProtocolKind> = ProtocolKind::ALL
        .into_iter()
        .filter(|p| protocols_seen[proto_index(*p)])
        .collect();
    if protocols.is_empty() {
        return Err(PlotError::MissingCells(format!(
            "no run rows for mobility model {model}"
        )));
    }
    let speeds: Vec<u64> = {
        let mut s: Vec<u64> = expected.iter().map(|(_, speed)| *speed).collect();
        s.sort_unstable();
        s.dedup();
        s
    };

    let mut missing = Vec::new();
    for p in &protocols {
        for s in &speeds {
            if !cells.contains_key(&(proto_index(*p), *s)) {
                missing.push(format!("{p}@{}m/s", *s as f64 / 1e6));
            }
        }
    }
    if !missing.is_empty() {
        return Err(PlotError::MissingCells(missing.join(", ")));
    }

    let with_ci = cells.values().any(|v| v.len() > 1);
    let mut out = String::from("speed");
    for p in &protocols {
        out.push_str(&format!("\t{p}_mean"));
        if with_ci {
            out.push_str(&format!("\t{p}_ci95"));
        }
    }
    out.push('\n');
    for s in &speeds {
        out.push_str(&format!("{:.6}", *s as f64 / 1e6));
        for p in &protocols {
            let values = &cells[&(proto_index(*p), *s)];
            let agg = metrics::aggregate(values).expect("non-empty cell");
            out.push_str(&format!("\t{:.6}", agg.mean));
            if with_ci {
                match agg.ci95_half {
                    Some(ci) => out.push_str(&format!("\t{ci:.6}")),
                    None => out.push('\t'),
                }
            }
        }
        out.push('\n');
    }
    Ok(out)
}
