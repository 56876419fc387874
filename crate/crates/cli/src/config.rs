//! Experiment configuration: a JSON document with a fixed key set, merged
//! with command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use segregation_core::{ModelParams, ParamError, Variant};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("sweep parameter `{0}` is not one of temperature, forgetting_rate, theta")]
    UnknownSweepParameter(String),
    #[error("sweep values must not be empty")]
    EmptySweep,
    #[error("{0}")]
    Invalid(String),
}

/// Parameters that a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Temperature,
    ForgettingRate,
    /// Symmetric markets: theta1 = theta, theta2 = 1 - theta.
    Theta,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Temperature => "temperature",
            SweepParameter::ForgettingRate => "forgetting_rate",
            SweepParameter::Theta => "theta",
        }
    }

    pub fn parse(name: &str) -> Result<Self, ConfigError> {
        match name {
            "temperature" => Ok(SweepParameter::Temperature),
            "forgetting_rate" => Ok(SweepParameter::ForgettingRate),
            "theta" => Ok(SweepParameter::Theta),
            other => Err(ConfigError::UnknownSweepParameter(other.to_string())),
        }
    }

    pub fn apply(self, params: &ModelParams, value: f64) -> ModelParams {
        match self {
            SweepParameter::Temperature => params.clone().with_temperature(value),
            SweepParameter::ForgettingRate => params.clone().with_forgetting_rate(value),
            SweepParameter::Theta => params.clone().with_symmetric_theta(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub parameter: String,
    pub values: Vec<f64>,
}

/// The config file as written: every key optional, unknown keys rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub n_agents: Option<usize>,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub mu_ask: Option<f64>,
    pub mu_bid: Option<f64>,
    pub sigma_ask: Option<f64>,
    pub sigma_bid: Option<f64>,
    pub temperature: Option<f64>,
    pub forgetting_rate: Option<f64>,
    pub horizon: Option<usize>,
    pub variant: Option<Variant>,
    pub group_buy_prefs: Option<[f64; 2]>,
    pub n_runs: Option<usize>,
    pub master_seed: Option<u64>,
    pub record_last: Option<usize>,
    pub persistence_burn_in: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub sweep: Option<Sweep>,
    pub histogram_bins: Option<[usize; 2]>,
    pub flow_grid: Option<usize>,
    pub tc_bracket: Option<[f64; 2]>,
    pub phase_thetas: Option<Vec<f64>>,
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        if text.trim().is_empty() {
            return Ok(RawConfig::default());
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    /// Keys set in `over` replace keys in `self`.
    pub fn overlay(self, over: RawConfig) -> RawConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RawConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            n_agents, theta1, theta2, mu_ask, mu_bid, sigma_ask, sigma_bid, temperature, forgetting_rate,
            horizon, variant, group_buy_prefs, n_runs, master_seed, record_last, persistence_burn_in,
            output_dir, sweep, histogram_bins, flow_grid, tc_bracket, phase_thetas
        )
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub n_runs: usize,
    pub master_seed: u64,
    pub record_last: usize,
    pub persistence_burn_in: usize,
    pub output_dir: PathBuf,
    pub sweep: Option<Sweep>,
    pub histogram_bins: [usize; 2],
    pub flow_grid: usize,
    pub tc_bracket: [f64; 2],
    pub phase_thetas: Vec<f64>,
}

pub const DEFAULT_OUTPUT_DIR: &str = "segsim-out";

fn default_temperature_sweep() -> Vec<f64> {
    vec![0.05, 0.1, 0.14, 0.17, 0.2, 0.23, 0.26, 0.29, 0.35, 0.4, 0.5]
}

fn default_phase_thetas() -> Vec<f64> {
    (1..=10).map(|k| 0.05 * k as f64).collect()
}

impl ExperimentConfig {
    pub fn resolve(raw: RawConfig) -> Result<Self, ConfigError> {
        let defaults = ModelParams::default();
        let variant = raw.variant.unwrap_or(defaults.variant);
        let base = match variant {
            Variant::FourAction => defaults,
            Variant::TwoGroup => ModelParams::two_group(),
        };
        let params = ModelParams {
            n_agents: raw.n_agents.unwrap_or(base.n_agents),
            theta: [raw.theta1.unwrap_or(base.theta[0]), raw.theta2.unwrap_or(base.theta[1])],
            mu_ask: raw.mu_ask.unwrap_or(base.mu_ask),
            mu_bid: raw.mu_bid.unwrap_or(base.mu_bid),
            sigma_ask: raw.sigma_ask.unwrap_or(base.sigma_ask),
            sigma_bid: raw.sigma_bid.unwrap_or(base.sigma_bid),
            temperature: raw.temperature.unwrap_or(base.temperature),
            forgetting_rate: raw.forgetting_rate.unwrap_or(base.forgetting_rate),
            horizon: raw.horizon.unwrap_or(base.horizon),
            variant,
            group_buy_prefs: raw.group_buy_prefs.unwrap_or(base.group_buy_prefs),
        }
        .validated()?;

        if let Some(sweep) = &raw.sweep {
            let parameter = SweepParameter::parse(&sweep.parameter)?;
            if sweep.values.is_empty() {
                return Err(ConfigError::EmptySweep);
            }
            for &v in &sweep.values {
                parameter.apply(&params, v).validate()?;
            }
        }
        let n_runs = raw.n_runs.unwrap_or(100);
        if n_runs == 0 {
            return Err(ConfigError::Invalid("n_runs must be at least 1".into()));
        }
        let histogram_bins = raw.histogram_bins.unwrap_or([50, 50]);
        if histogram_bins.contains(&0) {
            return Err(ConfigError::Invalid("histogram_bins must be positive".into()));
        }
        let flow_grid = raw.flow_grid.unwrap_or(21);
        if flow_grid == 0 {
            return Err(ConfigError::Invalid("flow_grid must be positive".into()));
        }
        let tc_bracket = raw.tc_bracket.unwrap_or([0.05, 1.0]);
        if !(tc_bracket[0] > 0.0 && tc_bracket[0] < tc_bracket[1]) {
            return Err(ConfigError::Invalid(format!("tc_bracket {tc_bracket:?} must satisfy 0 < lo < hi")));
        }
        let phase_thetas = raw.phase_thetas.unwrap_or_else(default_phase_thetas);
        if phase_thetas.is_empty() || phase_thetas.iter().any(|t| !(*t > 0.0 && *t <= 0.5)) {
            return Err(ConfigError::Invalid("phase_thetas must be a non-empty list in (0, 0.5]".into()));
        }

        Ok(ExperimentConfig {
            params,
            n_runs,
            master_seed: raw.master_seed.unwrap_or(1),
            record_last: raw.record_last.unwrap_or(100),
            persistence_burn_in: raw.persistence_burn_in.unwrap_or(0),
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
            sweep: raw.sweep,
            histogram_bins,
            flow_grid,
            tc_bracket,
            phase_thetas,
        })
    }

    /// The resolved configuration in file form, every key present.
    pub fn to_raw(&self) -> RawConfig {
        let p = &self.params;
        RawConfig {
            n_agents: Some(p.n_agents),
            theta1: Some(p.theta[0]),
            theta2: Some(p.theta[1]),
            mu_ask: Some(p.mu_ask),
            mu_bid: Some(p.mu_bid),
            sigma_ask: Some(p.sigma_ask),
            sigma_bid: Some(p.sigma_bid),
            temperature: Some(p.temperature),
            forgetting_rate: Some(p.forgetting_rate),
            horizon: Some(p.horizon),
            variant: Some(p.variant),
            group_buy_prefs: Some(p.group_buy_prefs),
            n_runs: Some(self.n_runs),
            master_seed: Some(self.master_seed),
            record_last: Some(self.record_last),
            persistence_burn_in: Some(self.persistence_burn_in),
            output_dir: Some(self.output_dir.clone()),
            sweep: self.sweep.clone(),
            histogram_bins: Some(self.histogram_bins),
            flow_grid: Some(self.flow_grid),
            tc_bracket: Some(self.tc_bracket),
            phase_thetas: Some(self.phase_thetas.clone()),
        }
    }

    /// The sweep to run, defaulting to the temperature scan.
    pub fn sweep_or_default(&self) -> (SweepParameter, Vec<f64>) {
        match &self.sweep {
            Some(s) => (SweepParameter::parse(&s.parameter).expect("checked in resolve"), s.values.clone()),
            None => (SweepParameter::Temperature, default_temperature_sweep()),
        }
    }
}
