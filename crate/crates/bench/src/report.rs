//! CSV output shared by every figure.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use segsum::{Error, Result};

pub const HEADER: [&str; 9] = [
    "dataset",
    "method",
    "query_type",
    "k_or_filters",
    "mean_err",
    "std_err",
    "trials",
    "seed",
    "ms",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub dataset: String,
    pub method: String,
    pub query_type: String,
    /// Interval length, filter count, or the swept parameter.
    pub k_or_filters: String,
    pub mean_err: f64,
    pub std_err: f64,
    pub trials: usize,
    pub seed: u64,
    pub ms: f64,
}

pub fn write_rows<W: Write>(rows: &[Row], out: W) -> Result<()> {
    let err = |e: csv::Error| Error::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER).map_err(err)?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.method.clone(),
            r.query_type.clone(),
            r.k_or_filters.clone(),
            format!("{:.6e}", r.mean_err),
            format!("{:.6e}", r.std_err),
            r.trials.to_string(),
            r.seed.to_string(),
            format!("{:.1}", r.ms),
        ])
        .map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows_to(rows: &[Row], path: &Path) -> Result<()> {
    write_rows(rows, File::create(path)?)
}
