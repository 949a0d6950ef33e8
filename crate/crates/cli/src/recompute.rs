//! Rebuild volume indices from a trajectory CSV written by an earlier run.

use std::path::Path;

use moneyflow_core::indicators::{
    compare_indicators, recursive_pvi_nvi, stylized_continuous_pvi, DivergenceReport, IndicatorSeries,
};

use crate::error::{CliError, Result};
use crate::scenario::{INDICATORS_CSV, VOLUME_INDEX_SVG, VOLUME_RETURN_SVG};
use crate::table::{self, Table, INDICATOR_COLUMNS};

/// Reads `tau`, `V`, `R` and `S` on the file's own time grid.
pub fn recompute(input: &Path, out_dir: &Path, base: f64, svg: bool) -> Result<DivergenceReport> {
    let t = Table::read(input)?;
    let series = IndicatorSeries::from_parts(
        t.column("tau")?.to_vec(),
        t.column("V")?.to_vec(),
        t.column("R")?.to_vec(),
        t.column("S")?.to_vec(),
        base,
    )
    .map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
    let series = recursive_pvi_nvi(series);
    let stylized = stylized_continuous_pvi(&series);
    let report = compare_indicators(&series.taus, &series.pvi, &stylized)?;

    std::fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let out = Table::new(
        INDICATOR_COLUMNS,
        vec![series.taus, series.volume, series.ret, series.pvi, series.nvi, stylized],
    );
    out.write(&out_dir.join(INDICATORS_CSV))?;
    if svg {
        for (name, text) in [
            (VOLUME_RETURN_SVG, table::volume_return_svg(&out, "indicators")?),
            (VOLUME_INDEX_SVG, table::volume_index_svg(&out, "indicators")?),
        ] {
            let path = out_dir.join(name);
            std::fs::write(&path, text).map_err(CliError::io(&path))?;
        }
    }
    Ok(report)
}
