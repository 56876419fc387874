//! Subcommand implementations. Every command writes its CSV tables and a
//! `config.json` echo of the resolved configuration into the output directory.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use log::{info, warn};
use thiserror::Error;

use segregation_core::engine::{run_ensemble, RunOptions};
use segregation_core::meanfield::{
    critical_temperature, find_fixed_points, flow_field, phase_diagram, write_fixed_points_csv,
    write_flow_field_csv, write_phase_csv, MeanFieldError, PhasePoint,
};
use segregation_core::report::{fmt_float, write_table};
use segregation_core::{downward_crossing, EnsembleStats, Histogram2d, Recording};

use crate::config::{ConfigError, ExperimentConfig, SweepParameter};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Output { .. } => "io",
            CliError::Numerical(_) => "numerical",
        }
    }
}

impl From<MeanFieldError> for CliError {
    fn from(e: MeanFieldError) -> Self {
        match e {
            MeanFieldError::Params(p) => CliError::Config(p.into()),
            MeanFieldError::WrongVariant(_) => CliError::Config(ConfigError::Invalid(e.to_string())),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

struct OutDir(PathBuf);

impl OutDir {
    fn create(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let dir = cfg.output_dir.clone();
        fs::create_dir_all(&dir).map_err(|source| CliError::Output { path: dir.clone(), source })?;
        let out = OutDir(dir);
        let echo = serde_json::to_string_pretty(&cfg.to_raw()).expect("config serializes");
        out.write("config.json", |w| writeln!(w, "{echo}"))?;
        Ok(out)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn open(&self, name: &str) -> Result<Table, CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|source| CliError::Output { path: path.clone(), source })?;
        Ok(Table { path, w: BufWriter::new(file) })
    }

    fn write(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), CliError> {
        let mut t = self.open(name)?;
        let res = body(&mut t.w).and_then(|_| t.w.flush());
        res.map_err(|source| CliError::Output { path: t.path, source })
    }
}

/// A CSV file written row by row and flushed after each row.
struct Table {
    path: PathBuf,
    w: BufWriter<File>,
}

impl Table {
    fn row(&mut self, cells: &[String]) -> Result<(), CliError> {
        writeln!(self.w, "{}", cells.join(","))
            .and_then(|_| self.w.flush())
            .map_err(|source| CliError::Output { path: self.path.clone(), source })
    }
}

fn header(cells: &[&str]) -> Vec<String> {
    cells.iter().map(|s| s.to_string()).collect()
}

fn ensemble_options(cfg: &ExperimentConfig) -> RunOptions {
    RunOptions {
        recording: Recording::Last(cfg.record_last),
        persistence: true,
        persistence_burn_in: cfg.persistence_burn_in,
        population_means: false,
    }
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = OutDir::create(cfg)?;
    let p = &cfg.params;
    info!(
        "simulate: {:?}, N={}, T={}, r={}, {} runs x {} periods",
        p.variant, p.n_agents, p.temperature, p.forgetting_rate, cfg.n_runs, p.horizon
    );
    let stats = run_ensemble(p, cfg.n_runs, cfg.master_seed, ensemble_options(cfg), true);
    let [nx, ny] = cfg.histogram_bins;
    let column = |f: fn(&segregation_core::ReducedCoords) -> f64| stats.samples.iter().map(f).collect::<Vec<_>>();
    let attr = Histogram2d::from_samples(&column(|c| c.delta_bs), &column(|c| c.delta_12), nx, ny);
    let pref = Histogram2d::from_samples(&column(|c| c.p_buy), &column(|c| c.p_market1), nx, ny);
    out.write("histogram2d_attr.csv", |w| attr.write_csv(w))?;
    out.write("histogram2d_pref.csv", |w| pref.write_csv(w))?;

    let b = stats.binder();
    let pers = &stats.persistence;
    let (attr_peaks, pref_peaks) = (attr.regions_above(0.5), pref.regions_above(0.5));
    out.write("summary.csv", |w| {
        write_table(
            w,
            &[
                "n_runs", "n_samples", "binder_bs", "binder_12", "binder_mean", "stderr", "mean_t",
                "mean_completed", "censored_fraction", "attr_peaks", "pref_peaks",
            ],
            [vec![
                cfg.n_runs.to_string(),
                stats.n_samples.to_string(),
                fmt_float(b.binder_bs),
                fmt_float(b.binder_12),
                fmt_float(b.binder_mean),
                fmt_float(b.stderr),
                fmt_float(pers.mean_duration()),
                fmt_float(pers.mean_completed()),
                fmt_float(pers.censored_fraction()),
                attr_peaks.to_string(),
                pref_peaks.to_string(),
            ]],
        )
    })?;
    info!("binder_mean={:.4} (stderr {:.4}), {} attraction peaks", b.binder_mean, b.stderr, attr_peaks);
    check_binder(&stats, cfg.params.temperature)
}

fn check_binder(stats: &EnsembleStats, at: f64) -> Result<(), CliError> {
    let b = stats.binder();
    if b.binder_mean.is_finite() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "Binder cumulant undefined at {at} ({} samples, degenerate or too few)",
            stats.n_samples
        )))
    }
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = OutDir::create(cfg)?;
    let (parameter, values) = cfg.sweep_or_default();
    let name = parameter.name();
    let mut binder = out.open("binder_vs_T.csv")?;
    let mut persistence = out.open("persistence_vs_T.csv")?;
    binder.row(&header(&[name, "binder_bs", "binder_12", "binder_mean", "stderr"]))?;
    persistence.row(&header(&[name, "mean_t", "censored_fraction", "mean_completed", "lower_bound"]))?;

    let mut means = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        let params = parameter.apply(&cfg.params, v);
        info!("sweep {}/{}: {name}={v}", i + 1, values.len());
        let stats = run_ensemble(&params, cfg.n_runs, cfg.master_seed, ensemble_options(cfg), false);
        let b = stats.binder();
        let pers = &stats.persistence;
        binder.row(&[fmt_float(v), fmt_float(b.binder_bs), fmt_float(b.binder_12), fmt_float(b.binder_mean), fmt_float(b.stderr)])?;
        persistence.row(&[
            fmt_float(v),
            fmt_float(pers.mean_duration()),
            fmt_float(pers.censored_fraction()),
            fmt_float(pers.mean_completed()),
            pers.is_lower_bound().to_string(),
        ])?;
        check_binder(&stats, v)?;
        means.push(b.binder_mean);
    }
    if parameter == SweepParameter::Temperature {
        match downward_crossing(&values, &means, 1.0 / 3.0) {
            Some(t) => info!("binder_mean crosses 1/3 at T ~ {t:.4}"),
            None => warn!("binder_mean does not cross 1/3 on this grid"),
        }
    }
    Ok(())
}

pub fn meanfield_flow(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = OutDir::create(cfg)?;
    let p = &cfg.params;
    let arrows = flow_field(p, cfg.flow_grid)?;
    out.write("flowfield.csv", |w| write_flow_field_csv(w, &arrows))?;
    let points = find_fixed_points(p, p.temperature)?;
    out.write("fixed_points.csv", |w| write_fixed_points_csv(w, &points, p.temperature))?;
    let stable = points.iter().filter(|f| f.stable).count();
    info!("T={}: {} fixed points, {} stable", p.temperature, points.len(), stable);
    Ok(())
}

pub fn meanfield_tc(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = OutDir::create(cfg)?;
    let p = &cfg.params;
    let [lo, hi] = cfg.tc_bracket;
    let c = critical_temperature(p, (lo, hi))?;
    out.write("fixed_points.csv", |w| write_fixed_points_csv(w, std::slice::from_ref(&c.fixed_point), c.t_c))?;
    let row = PhasePoint { theta: p.theta[0], t_c: Some(c.t_c) };
    out.write("phase_boundary.csv", |w| write_phase_csv(w, &[row]))?;
    info!(
        "T_c = {:.6} after {} bisection steps, leading eigenvalue {:.3e}",
        c.t_c,
        c.bisection_steps,
        c.fixed_point.leading_real_part()
    );
    Ok(())
}

pub fn meanfield_phase(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let out = OutDir::create(cfg)?;
    let [lo, hi] = cfg.tc_bracket;
    let rows = phase_diagram(&cfg.params, &cfg.phase_thetas, (lo, hi));
    out.write("phase_boundary.csv", |w| write_phase_csv(w, &rows))?;
    for r in rows.iter().filter(|r| r.t_c.is_none()) {
        warn!("no critical temperature in [{lo}, {hi}] at theta={}", r.theta);
    }
    if rows.iter().all(|r| r.t_c.is_none()) {
        return Err(CliError::Numerical(format!("no critical temperature found in [{lo}, {hi}]")));
    }
    Ok(())
}

