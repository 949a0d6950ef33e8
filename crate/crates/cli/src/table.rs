//! Column-oriented numeric tables written as CSV with round-trip number formatting.

use std::path::Path;

use crate::error::{CliError, Result};
use crate::svg::{self, LineStyle, Series};

pub const TRAJECTORY_COLUMNS: &[&str] = &[
    "tau",
    "eta",
    "upsilon",
    "rho",
    "rho_tilde",
    "eta_tilde",
    "S",
    "V",
    "R",
    "energy",
    "closure_residual",
];

pub const INDICATOR_COLUMNS: &[&str] = &["tau", "V", "R", "PVI", "NVI", "PVI_stylized"];

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(headers: &[&str], columns: Vec<Vec<f64>>) -> Self {
        assert_eq!(headers.len(), columns.len());
        debug_assert!(columns.windows(2).all(|w| w[0].len() == w[1].len()));
        Self {
            headers: headers.iter().map(|s| s.to_string()).collect(),
            columns,
        }
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| CliError::Config(format!("missing column `{name}`")))
    }

    /// `f64` `Display` is the shortest string that parses back to the same value.
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e| CliError::Invariant(format!("in-memory csv write failed: {e}"));
        w.write_record(&self.headers).map_err(err)?;
        let mut record = Vec::with_capacity(self.columns.len());
        for r in 0..self.rows() {
            record.clear();
            record.extend(self.columns.iter().map(|c| c[r].to_string()));
            w.write_record(&record).map_err(err)?;
        }
        w.into_inner()
            .map_err(|e| CliError::Invariant(format!("in-memory csv flush failed: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_bytes()?).map_err(CliError::io(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(CliError::csv(path))?;
        let headers: Vec<String> = r
            .headers()
            .map_err(CliError::csv(path))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut columns = vec![Vec::new(); headers.len()];
        for (line, record) in r.records().enumerate() {
            let record = record.map_err(CliError::csv(path))?;
            for (i, field) in record.iter().enumerate() {
                let v = field.trim().parse::<f64>().map_err(|_| {
                    CliError::Config(format!(
                        "{}: row {}, column `{}`: `{field}` is not a number",
                        path.display(),
                        line + 1,
                        headers[i]
                    ))
                })?;
                columns[i].push(v);
            }
        }
        Ok(Self { headers, columns })
    }
}

/// `rho - 1/2` solid, `upsilon + eta` dashed, `eta` dot-dashed, `upsilon` dotted.
pub fn trajectory_svg(t: &Table, title: &str) -> Result<String> {
    let tau = t.column("tau")?;
    let line = |label, col, style| -> Result<Series<'_>> {
        Ok(Series {
            label,
            xs: tau,
            ys: t.column(col)?,
            style,
            width: 1.5,
        })
    };
    Ok(svg::render(
        title,
        "tau",
        &[
            line("rho - 1/2", "rho_tilde", LineStyle::Solid)?,
            line("upsilon + eta", "eta_tilde", LineStyle::Dashed)?,
            line("eta", "eta", LineStyle::DotDash)?,
            line("upsilon", "upsilon", LineStyle::Dotted)?,
        ],
    ))
}

/// Volume bold solid, return bold dot-dashed.
pub fn volume_return_svg(t: &Table, title: &str) -> Result<String> {
    let tau = t.column("tau")?;
    Ok(svg::render(
        title,
        "tau",
        &[
            Series { label: "V = |rho'|", xs: tau, ys: t.column("V")?, style: LineStyle::Solid, width: 2.5 },
            Series { label: "R = eta'/beta", xs: tau, ys: t.column("R")?, style: LineStyle::DotDash, width: 2.5 },
        ],
    ))
}

pub fn volume_index_svg(t: &Table, title: &str) -> Result<String> {
    let tau = t.column("tau")?;
    Ok(svg::render(
        title,
        "tau",
        &[
            Series { label: "PVI", xs: tau, ys: t.column("PVI")?, style: LineStyle::Solid, width: 1.5 },
            Series { label: "NVI", xs: tau, ys: t.column("NVI")?, style: LineStyle::Dashed, width: 1.5 },
            Series {
                label: "PVI (stylized)",
                xs: tau,
                ys: t.column("PVI_stylized")?,
                style: LineStyle::Dotted,
                width: 1.5,
            },
        ],
    ))
}
