//! Parameter sweeps: one run per value, executed in parallel, summarized in order.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use toml::Value;

use crate::config::{canonical_key, ScenarioConfig};
use crate::error::{CliError, Result};
use crate::scenario::{run_scenario, Report};

pub const SUMMARY_CSV: &str = "summary.csv";

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub damping: Option<f64>,
    pub omega: Option<f64>,
    pub drift: Option<f64>,
    pub regime: Option<String>,
    /// `ok`, `boundary-reached`, or the failure message.
    pub status: String,
    /// Exit code the item would have had as a single run.
    pub exit_code: i32,
    pub dir: PathBuf,
    #[serde(skip)]
    pub report: Option<Report>,
}

fn item_dir(root: &Path, axis: &str, index: usize, value: f64) -> PathBuf {
    let short = axis.rsplit('.').next().unwrap_or(axis);
    root.join(format!("{index:03}_{short}={value}"))
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Run `base` once per value of `axis`, with each run writing into its own
/// subdirectory of `root`. Failed items are flagged in the summary; the sweep
/// itself only fails on a bad axis or an unwritable summary.
pub fn sweep(base: &ScenarioConfig, axis: &str, values: &[f64], root: &Path) -> Result<Vec<SweepRow>> {
    let axis = canonical_key(axis)?;
    if axis.starts_with("output.") || axis == "model.variant" {
        return Err(CliError::Config(format!("{axis} is not a numeric axis")));
    }
    let configs: Vec<(f64, Result<ScenarioConfig>)> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut cfg = base.clone();
            let value = if axis == "raw.agents" && v.fract() == 0.0 && v > 0.0 {
                Value::Integer(v as i64)
            } else {
                Value::Float(v)
            };
            let applied = cfg.set(axis, &value).map(|_| {
                cfg.output.dir = item_dir(root, axis, i, v);
                cfg
            });
            (v, applied)
        })
        .collect();

    let rows: Vec<SweepRow> = configs
        .into_par_iter()
        .enumerate()
        .map(|(i, (value, cfg))| {
            let dir = item_dir(root, axis, i, value);
            let empty = |e: CliError| SweepRow {
                value,
                damping: None,
                omega: None,
                drift: None,
                regime: None,
                status: e.to_string(),
                exit_code: e.exit_code(),
                dir: dir.clone(),
                report: None,
            };
            let cfg = match cfg {
                Ok(c) => c,
                Err(e) => return empty(e),
            };
            match run_scenario(&cfg) {
                Ok(outcome) => {
                    let exit_code = outcome.exit_code();
                    let status = match exit_code {
                        0 => "ok".to_string(),
                        _ => "boundary-reached".to_string(),
                    };
                    let r = outcome.report;
                    SweepRow {
                        value,
                        damping: r.envelope.map(|e| e.damping),
                        omega: r.envelope.map(|e| e.omega),
                        drift: r.envelope.map(|e| e.drift),
                        regime: Some(r.regime.name().to_string()),
                        status,
                        exit_code,
                        dir: dir.clone(),
                        report: Some(r),
                    }
                }
                Err(e) => empty(e),
            }
        })
        .collect();

    std::fs::create_dir_all(root).map_err(CliError::io(root))?;
    let path = root.join(SUMMARY_CSV);
    let mut w = csv::Writer::from_path(&path).map_err(CliError::csv(&path))?;
    w.write_record(["value", "damping", "omega", "drift", "regime", "status"])
        .map_err(CliError::csv(&path))?;
    for r in &rows {
        w.write_record([
            r.value.to_string(),
            cell(r.damping),
            cell(r.omega),
            cell(r.drift),
            r.regime.clone().unwrap_or_default(),
            r.status.clone(),
        ])
        .map_err(CliError::csv(&path))?;
    }
    w.flush().map_err(CliError::io(&path))?;
    Ok(rows)
}

/// Parse `0,0.5,1` or `start:stop:count` (inclusive, evenly spaced).
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Config(format!("--values: `{s}` is not a number")))
    };
    if let [a, b, n] = text.split(':').collect::<Vec<_>>().as_slice() {
        let (a, b) = (num(a)?, num(b)?);
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("--values: `{n}` is not a count")))?;
        return Ok(match n {
            0 => Vec::new(),
            1 => vec![a],
            _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
        });
    }
    text.split(',').map(num).collect()
}
