//! Output emission: results.csv (RFC-4180, header always, atomic rename),
//! summary.json, and optional tidy plot data.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;

/// Formats a float with 17 significant digits so text round-trips exactly.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// Accumulates rows and summary sections while a command runs, so partial
/// results can still be flushed when the command fails midway.
pub struct Output {
    pub out_dir: PathBuf,
    pub emit_plot_data: bool,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub verdicts: Vec<serde_json::Value>,
    pub bounds: Vec<serde_json::Value>,
    pub fits: Vec<serde_json::Value>,
    /// (series, t_or_k, value) triplets for --emit-plot-data.
    pub plot: Vec<(String, f64, f64)>,
    /// Lines of the one-screen human summary.
    pub notes: Vec<String>,
}

impl Output {
    pub fn new(out_dir: PathBuf, emit_plot_data: bool) -> Self {
        Self {
            out_dir,
            emit_plot_data,
            header: Vec::new(),
            rows: Vec::new(),
            verdicts: Vec::new(),
            bounds: Vec::new(),
            fits: Vec::new(),
            plot: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn set_header(&mut self, cols: &[&str]) {
        self.header = cols.iter().map(|c| c.to_string()).collect();
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn push_verdict(&mut self, v: &impl Serialize) {
        self.verdicts.push(serde_json::to_value(v).expect("serializable verdict"));
    }

    pub fn push_bounds(&mut self, b: &impl Serialize) {
        self.bounds.push(serde_json::to_value(b).expect("serializable bounds"));
    }

    pub fn push_fit(&mut self, f: &impl Serialize) {
        self.fits.push(serde_json::to_value(f).expect("serializable fit"));
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn plot_point(&mut self, series: &str, t_or_k: f64, value: f64) {
        if self.emit_plot_data {
            self.plot.push((series.to_string(), t_or_k, value));
        }
    }

    /// Writes results.csv, summary.json, and (optionally) plot.csv, then
    /// prints the human summary. `partial` marks an interrupted run.
    pub fn flush(&self, config: &RunConfig, wall_clock_secs: f64, partial: bool) -> Result<(), String> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| format!("cannot create {}: {e}", self.out_dir.display()))?;

        let mut csv_rows: Vec<Vec<String>> = Vec::with_capacity(self.rows.len() + 1);
        csv_rows.push(self.header.clone());
        csv_rows.extend(self.rows.iter().cloned());
        write_csv_atomic(&self.out_dir.join("results.csv"), &csv_rows)?;

        if self.emit_plot_data {
            let mut plot_rows: Vec<Vec<String>> =
                vec![vec!["series".into(), "t_or_k".into(), "value".into()]];
            for (series, t, v) in &self.plot {
                plot_rows.push(vec![series.clone(), fmt_f64(*t), fmt_f64(*v)]);
            }
            write_csv_atomic(&self.out_dir.join("plot.csv"), &plot_rows)?;
        }

        let summary = serde_json::json!({
            "config": config,
            "verdicts": self.verdicts,
            "bounds": self.bounds,
            "fits": self.fits,
            "timing": { "wall_clock_secs": wall_clock_secs },
            "partial": partial,
            "version": env!("CARGO_PKG_VERSION"),
        });
        let text = serde_json::to_string_pretty(&summary).expect("serializable summary");
        write_atomic(&self.out_dir.join("summary.json"), text.as_bytes())?;

        for line in &self.notes {
            println!("{line}");
        }
        println!(
            "wrote {} rows to {} ({:.2}s{})",
            self.rows.len(),
            self.out_dir.join("results.csv").display(),
            wall_clock_secs,
            if partial { ", PARTIAL" } else { "" }
        );
        Ok(())
    }
}

/// Writes complete CSV content to a temp file and renames it into place, so
/// readers never observe a truncated file.
fn write_csv_atomic(path: &Path, rows: &[Vec<String>]) -> Result<(), String> {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    for row in rows {
        w.write_record(row).map_err(|e| format!("csv encode: {e}"))?;
    }
    let bytes = w.into_inner().map_err(|e| format!("csv flush: {e}"))?;
    write_atomic(path, &bytes)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), String> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| format!("cannot write {}: {e}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| format!("cannot move {} into place: {e}", tmp.display()))
}
