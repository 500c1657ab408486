use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::audit::ReportBundle;
use crate::error::{Error, Result};

pub const PLOT_FILE: &str = "fidelity_long.csv";

/// One per-group fidelity value in long format; `value` is empty when the
/// metric is undefined for the group or the cell failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub dataset: String,
    pub blackbox: String,
    pub explainer: String,
    pub metric: String,
    pub group: String,
    pub seed: u64,
    pub value: Option<f64>,
}

/// Rows ordered by explainer, seed, metric, group.
pub fn plot_rows(bundle: &ReportBundle) -> Vec<PlotRow> {
    let mut rows = Vec::new();
    for name in bundle.config.explainer_names() {
        for &seed in &bundle.config.seeds {
            let cell = bundle.cells.iter().find(|c| c.explainer == name && c.seed == seed);
            for &metric in &bundle.config.metrics {
                let gap = cell.and_then(|c| c.gap(metric));
                for (g, group) in bundle.group_names.iter().enumerate() {
                    rows.push(PlotRow {
                        dataset: bundle.dataset.clone(),
                        blackbox: bundle.blackbox.name().to_string(),
                        explainer: name.clone(),
                        metric: metric.name().to_string(),
                        group: group.clone(),
                        seed,
                        value: gap.and_then(|r| r.per_group.get(g).copied().flatten()),
                    });
                }
            }
        }
    }
    rows
}

pub fn write_plot_csv<W: Write>(out: W, rows: &[PlotRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["dataset", "blackbox", "explainer", "metric", "group", "seed", "value"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<plot data>", e))?;
    Ok(())
}

pub fn read_plot_csv<R: Read>(input: R) -> Result<Vec<PlotRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| Ok(row?)).collect()
}

/// Writes the long-format fidelity table into `dir` and returns its path.
pub fn emit_plot_data(bundle: &ReportBundle, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(PLOT_FILE);
    let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_plot_csv(f, &plot_rows(bundle))?;
    Ok(path)
}
