//! One scenario run: integrate, analyse, and emit CSV, SVG and a JSON report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use moneyflow_core::dynamics::energy;
use moneyflow_core::indicators::{
    compare_indicators, recursive_pvi_nvi, sample_indicators, stylized_continuous_pvi, DivergenceReport,
    IndicatorSeries,
};
use moneyflow_core::integrator::closure_residuals;
use moneyflow_core::linear::{classify, envelope_fit, linearize, EnvelopeFit, LinearPrediction, Regime};
use moneyflow_core::{
    integrate, Error as CoreError, IntegratorConfig, ModelParams, RawParams, State, Termination, Trajectory,
};
use serde::Serialize;

use crate::config::{Sampling, ScenarioConfig};
use crate::error::{CliError, Result};
use crate::table::{self, Table, INDICATOR_COLUMNS, TRAJECTORY_COLUMNS};

/// Largest closure defect, in ulps of the largest term, allowed in emitted rows.
pub const CLOSURE_ULP_BOUND: f64 = 4.0;

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const INDICATORS_CSV: &str = "indicators.csv";
pub const REPORT_JSON: &str = "report.json";
pub const TRAJECTORY_SVG: &str = "trajectory.svg";
pub const VOLUME_RETURN_SVG: &str = "volume_return.svg";
pub const VOLUME_INDEX_SVG: &str = "volume_indices.svg";

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub preset: Option<String>,
    pub overrides: BTreeMap<String, String>,
    pub params: ModelParams,
    pub raw: Option<RawParams>,
    pub initial_state: State,
    pub c0: f64,
    pub eta_prime0: f64,
    pub integrator: IntegratorConfig,
    pub sampling: Sampling,
    pub termination: Termination,
    pub samples: usize,
    pub t_end: f64,
    pub regime: Regime,
    pub linear: Option<LinearPrediction>,
    pub linear_error: Option<String>,
    pub envelope: Option<EnvelopeFit>,
    pub envelope_error: Option<String>,
    /// `max |E(tau) - E(0)|` over stored samples.
    pub energy_drift: f64,
    pub max_closure_ulps: f64,
    pub max_closure_residual: f64,
    /// Recursive against stylized PVI.
    pub indicator_divergence: Option<DivergenceReport>,
    pub indicator_error: Option<String>,
    pub files: Vec<String>,
}

/// Everything a run produces, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub trajectory: Trajectory,
    pub trajectory_table: Table,
    pub indicators: Option<IndicatorSeries>,
    pub indicator_table: Option<Table>,
    pub report: Report,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub report: Report,
}

impl RunOutcome {
    /// 0, or 3 when the run stopped at the `rho` boundary.
    pub fn exit_code(&self) -> i32 {
        match self.report.termination {
            Termination::Completed => 0,
            Termination::BoundaryReached { .. } => 3,
        }
    }
}

fn trajectory_table(traj: &Trajectory) -> (Table, f64, f64) {
    let beta = traj.params.beta;
    let n = traj.len();
    let mut cols: Vec<Vec<f64>> = (0..TRAJECTORY_COLUMNS.len()).map(|_| Vec::with_capacity(n)).collect();
    let (mut max_ulps, mut max_abs) = (0.0f64, 0.0f64);
    for ((sample, d), (abs, ulps)) in traj.samples().zip(traj.sample_derivatives()).zip(closure_residuals(traj)) {
        let s = sample.state;
        let row = [
            sample.tau,
            s.eta,
            s.upsilon,
            s.rho,
            s.rho_tilde(),
            s.eta_tilde(),
            s.rate(beta),
            d.rho_prime.abs(),
            d.eta_prime / beta,
            energy(&traj.params, traj.c0, &s).unwrap_or(f64::NAN),
            abs,
        ];
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
        max_ulps = max_ulps.max(ulps);
        max_abs = max_abs.max(abs);
    }
    (Table::new(TRAJECTORY_COLUMNS, cols), max_ulps, max_abs)
}

fn indicator_table(series: &IndicatorSeries, stylized: &[f64]) -> Table {
    Table::new(
        INDICATOR_COLUMNS,
        vec![
            series.taus.clone(),
            series.volume.clone(),
            series.ret.clone(),
            series.pvi.clone(),
            series.nvi.clone(),
            stylized.to_vec(),
        ],
    )
}

fn energy_drift(traj: &Trajectory) -> f64 {
    let e = |s: &State| energy(&traj.params, traj.c0, s).unwrap_or(f64::NAN);
    let e0 = e(&traj.initial_state());
    traj.samples().map(|s| (e(&s.state) - e0).abs()).fold(0.0, f64::max)
}

fn config_or_core(e: CoreError) -> CliError {
    match e {
        CoreError::InvalidParams(m) | CoreError::Domain(m) => CliError::Config(m),
        other => CliError::Core(other),
    }
}

/// Analyse an integrated trajectory. Fails only if the closure bound is broken.
pub fn analyse(cfg: &ScenarioConfig, traj: Trajectory) -> Result<Simulation> {
    let (trajectory_table, max_ulps, max_abs) = trajectory_table(&traj);
    if max_ulps.is_nan() || max_ulps > CLOSURE_ULP_BOUND {
        return Err(CliError::Invariant(format!(
            "closure residual {max_ulps} ulps exceeds {CLOSURE_ULP_BOUND}"
        )));
    }
    let params = traj.params;
    let (linear, linear_error) = match linearize(&params, &cfg.initial) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (envelope, envelope_error) = match envelope_fit(&traj) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (indicators, indicator_table, indicator_divergence, indicator_error) =
        match sample_indicators(&traj, params.beta, cfg.sampling.dtau) {
            Ok(mut series) => {
                series.base = cfg.sampling.base;
                let series = recursive_pvi_nvi(series);
                let stylized = stylized_continuous_pvi(&series);
                let divergence = compare_indicators(&series.taus, &series.pvi, &stylized).ok();
                let table = indicator_table(&series, &stylized);
                (Some(series), Some(table), divergence, None)
            }
            Err(e) => (None, None, None, Some(e.to_string())),
        };

    let report = Report {
        preset: cfg.preset.clone(),
        overrides: cfg.overrides.clone(),
        params,
        raw: cfg.raw,
        initial_state: cfg.initial.state0,
        c0: traj.c0,
        eta_prime0: traj.eta_prime0,
        integrator: cfg.integrator()?,
        sampling: cfg.sampling,
        termination: traj.termination,
        samples: traj.len(),
        t_end: traj.t_end(),
        regime: classify(&params, traj.c0),
        linear,
        linear_error,
        envelope,
        envelope_error,
        energy_drift: energy_drift(&traj),
        max_closure_ulps: max_ulps,
        max_closure_residual: max_abs,
        indicator_divergence,
        indicator_error,
        files: Vec::new(),
    };
    Ok(Simulation {
        trajectory: traj,
        trajectory_table,
        indicators,
        indicator_table,
        report,
    })
}

/// Integrate and analyse without writing anything. A step failure is returned
/// with the partial trajectory, if any.
pub fn simulate(cfg: &ScenarioConfig) -> Result<Simulation, (CliError, Option<Box<Trajectory>>)> {
    cfg.validate().map_err(|e| (e, None))?;
    let params = cfg.params().map_err(|e| (e, None))?;
    let icfg = cfg.integrator().map_err(|e| (e, None))?;
    let traj = match integrate(&params, &cfg.initial, &icfg) {
        Ok(t) => t,
        Err(CoreError::StepFailure { tau, step, partial }) => {
            let err = CliError::Integration {
                message: format!("step size underflow (h = {step:e}) at tau = {tau}"),
                partial: None,
            };
            return Err((err, partial));
        }
        Err(e) => return Err((config_or_core(e), None)),
    };
    analyse(cfg, traj).map_err(|e| (e, None))
}

fn write_text(dir: &Path, name: &str, text: &str, files: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(CliError::io(&path))?;
    files.push(name.to_string());
    Ok(())
}

/// Write the artifacts of a finished simulation into `dir`.
pub fn emit(sim: &Simulation, dir: &Path, svg: bool) -> Result<Report> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut files = Vec::new();
    sim.trajectory_table.write(&dir.join(TRAJECTORY_CSV))?;
    files.push(TRAJECTORY_CSV.to_string());
    if let Some(t) = &sim.indicator_table {
        t.write(&dir.join(INDICATORS_CSV))?;
        files.push(INDICATORS_CSV.to_string());
    }
    if svg {
        let label = sim.report.preset.as_deref().unwrap_or("scenario");
        write_text(dir, TRAJECTORY_SVG, &table::trajectory_svg(&sim.trajectory_table, label)?, &mut files)?;
        if let Some(t) = &sim.indicator_table {
            write_text(dir, VOLUME_RETURN_SVG, &table::volume_return_svg(t, label)?, &mut files)?;
            write_text(dir, VOLUME_INDEX_SVG, &table::volume_index_svg(t, label)?, &mut files)?;
        }
    }
    files.push(REPORT_JSON.to_string());
    let mut report = sim.report.clone();
    report.files = files;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Invariant(format!("report serialization failed: {e}")))?;
    let path = dir.join(REPORT_JSON);
    std::fs::write(&path, json + "\n").map_err(CliError::io(&path))?;
    Ok(report)
}

/// Run a scenario and write its artifacts into `cfg.output.dir`.
///
/// On a step failure the accepted part of the trajectory is written to
/// `trajectory.csv` before the error is returned.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    let dir = cfg.output.dir.clone();
    match simulate(cfg) {
        Ok(sim) => {
            let report = emit(&sim, &dir, cfg.output.svg)?;
            Ok(RunOutcome { dir, report })
        }
        Err((CliError::Integration { message, .. }, partial)) => {
            let written = match partial {
                Some(traj) => {
                    std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
                    let path = dir.join(TRAJECTORY_CSV);
                    trajectory_table(&traj).0.write(&path)?;
                    Some(path)
                }
                None => None,
            };
            Err(CliError::Integration { message, partial: written })
        }
        Err((e, _)) => Err(e),
    }
}
