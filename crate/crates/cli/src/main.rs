//! `segsim`: run two-market segregation experiments and mean-field analyses.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use segregation_core::Variant;

use crate::commands::CliError;
use crate::config::{ExperimentConfig, RawConfig, Sweep};

const OUT_DIR_ENV: &str = "SEGSIM_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "segsim", version, about = "Two-market segregation simulations and mean-field analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an ensemble at one parameter set; writes histograms and a summary.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Number of final periods recorded per run.
        #[arg(long)]
        record_last: Option<usize>,
        /// Histogram bins along x and y.
        #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
        bins: Option<Vec<usize>>,
    },
    /// Binder cumulant and persistence over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// temperature, forgetting_rate or theta.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Option<Vec<f64>>,
        #[arg(long)]
        record_last: Option<usize>,
    },
    /// Mean-field flow on a grid of group fractions, plus its fixed points.
    MeanfieldFlow {
        #[command(flatten)]
        common: Common,
        /// Grid points per axis.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Mean-field critical temperature.
    MeanfieldTc {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bracket: Bracket,
    },
    /// Critical temperature across symmetric market pairs.
    MeanfieldPhase {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bracket: Bracket,
        /// Comma-separated theta values in (0, 0.5].
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        thetas: Option<Vec<f64>>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory [default: $SEGSIM_OUT_DIR, else ./segsim-out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// four_action or two_group.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<Variant>,
    #[arg(long)]
    n_agents: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    temperature: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    forgetting_rate: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Symmetric markets: theta1 = THETA, theta2 = 1 - THETA.
    #[arg(long, allow_negative_numbers = true, conflicts_with_all = ["theta1", "theta2"])]
    theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    theta1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    theta2: Option<f64>,
}

#[derive(Debug, Args)]
struct Bracket {
    /// Lower end of the temperature bracket.
    #[arg(long, allow_negative_numbers = true)]
    t_lo: Option<f64>,
    /// Upper end of the temperature bracket.
    #[arg(long, allow_negative_numbers = true)]
    t_hi: Option<f64>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown variant `{s}`, expected four_action or two_group"))
}

impl Common {
    fn flags(&self) -> RawConfig {
        RawConfig {
            master_seed: self.seed,
            n_runs: self.runs,
            output_dir: self.out.clone(),
            variant: self.variant,
            n_agents: self.n_agents,
            temperature: self.temperature,
            forgetting_rate: self.forgetting_rate,
            horizon: self.horizon,
            theta1: self.theta.or(self.theta1),
            theta2: self.theta.map(|t| 1.0 - t).or(self.theta2),
            ..Default::default()
        }
    }
}

impl Bracket {
    fn merge(&self, file: Option<[f64; 2]>) -> Option<[f64; 2]> {
        match (self.t_lo, self.t_hi, file) {
            (None, None, f) => f,
            (lo, hi, f) => {
                let [flo, fhi] = f.unwrap_or([0.05, 1.0]);
                Some([lo.unwrap_or(flo), hi.unwrap_or(fhi)])
            }
        }
    }
}

type Runner = fn(&ExperimentConfig) -> Result<(), CliError>;

/// Loads the config file, applies flag overrides and resolves defaults.
fn resolve(cli: Cli) -> Result<(ExperimentConfig, Runner), CliError> {
    let (common, runner): (&Common, Runner) = match &cli.command {
        Command::Simulate { common, .. } => (common, commands::simulate),
        Command::Sweep { common, .. } => (common, commands::sweep),
        Command::MeanfieldFlow { common, .. } => (common, commands::meanfield_flow),
        Command::MeanfieldTc { common, .. } => (common, commands::meanfield_tc),
        Command::MeanfieldPhase { common, .. } => (common, commands::meanfield_phase),
    };
    let file = match &common.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    let mut flags = common.flags();
    match &cli.command {
        Command::Simulate { record_last, bins, .. } => {
            flags.record_last = *record_last;
            flags.histogram_bins = bins.as_ref().map(|b| [b[0], b[1]]);
        }
        Command::Sweep { param, values, record_last, .. } => {
            flags.record_last = *record_last;
            if param.is_some() || values.is_some() {
                let (fp, fv) = file.sweep.clone().map_or((None, None), |s| (Some(s.parameter), Some(s.values)));
                flags.sweep = Some(Sweep {
                    parameter: param.clone().or(fp).unwrap_or_else(|| "temperature".into()),
                    values: values.clone().or(fv).unwrap_or_default(),
                });
            }
        }
        Command::MeanfieldFlow { grid, .. } => flags.flow_grid = *grid,
        Command::MeanfieldTc { bracket, .. } => flags.tc_bracket = bracket.merge(file.tc_bracket),
        Command::MeanfieldPhase { bracket, thetas, .. } => {
            flags.tc_bracket = bracket.merge(file.tc_bracket);
            flags.phase_thetas = thetas.clone();
        }
    }
    let meanfield = !matches!(cli.command, Command::Simulate { .. } | Command::Sweep { .. });
    let mut raw = file.overlay(flags);
    if meanfield && raw.variant.is_none() {
        raw.variant = Some(Variant::TwoGroup);
    }
    if raw.output_dir.is_none() {
        raw.output_dir = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    }
    Ok((ExperimentConfig::resolve(raw)?, runner))
}

fn fail(kind: &str, code: u8, message: &str) -> ExitCode {
    let line = serde_json::json!({ "error": kind, "code": code, "message": message });
    eprintln!("{line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            return fail("config", 1, first);
        }
    };
    let result = resolve(cli).and_then(|(cfg, run)| run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.exit_code(), &e.to_string()),
    }
}

