//! CSV output for external plotting.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! parsing a file gives back the exact values. Missing values are empty fields.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::PnlSample;
use crate::stats::SummaryStats;
use crate::verify::Check;

pub trait CsvRecord {
    fn header() -> &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_csv<R: CsvRecord>(path: &Path, records: &[R]) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut writer = ::csv::Writer::from_writer(file);
    writer.write_record(R::header()).map_err(csv_err)?;
    for r in records {
        writer.write_record(r.fields()).map_err(csv_err)?;
    }
    writer.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRow {
    pub path_id: usize,
    pub terminal_pnl: f64,
    pub q_min: i64,
    pub q_max: i64,
    pub n_buy_fills: u64,
    pub n_sell_fills: u64,
}

impl PathRow {
    /// One row per path; multi-asset paths report their summed tallies.
    pub fn from_sample(sample: &PnlSample) -> Vec<Self> {
        sample
            .paths
            .iter()
            .enumerate()
            .map(|(path_id, p)| {
                let t = p.tally();
                Self {
                    path_id,
                    terminal_pnl: p.terminal_pnl,
                    q_min: t.q_min,
                    q_max: t.q_max,
                    n_buy_fills: t.n_buy_fills,
                    n_sell_fills: t.n_sell_fills,
                }
            })
            .collect()
    }
}

impl CsvRecord for PathRow {
    fn header() -> &'static [&'static str] {
        &["path_id", "terminal_pnl", "q_min", "q_max", "n_buy_fills", "n_sell_fills"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.path_id.to_string(),
            fmt_f64(self.terminal_pnl),
            self.q_min.to_string(),
            self.q_max.to_string(),
            self.n_buy_fills.to_string(),
            self.n_sell_fills.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegRow {
    pub path_id: usize,
    pub asset: usize,
    pub q_min: i64,
    pub q_max: i64,
    pub n_buy_fills: u64,
    pub n_sell_fills: u64,
    pub final_inventory: i64,
}

impl LegRow {
    pub fn from_sample(sample: &PnlSample) -> Vec<Self> {
        sample
            .paths
            .iter()
            .enumerate()
            .flat_map(|(path_id, p)| {
                p.legs.iter().enumerate().map(move |(asset, l)| Self {
                    path_id,
                    asset,
                    q_min: l.q_min,
                    q_max: l.q_max,
                    n_buy_fills: l.n_buy_fills,
                    n_sell_fills: l.n_sell_fills,
                    final_inventory: l.final_inventory,
                })
            })
            .collect()
    }
}

impl CsvRecord for LegRow {
    fn header() -> &'static [&'static str] {
        &["path_id", "asset", "q_min", "q_max", "n_buy_fills", "n_sell_fills", "final_inventory"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.path_id.to_string(),
            self.asset.to_string(),
            self.q_min.to_string(),
            self.q_max.to_string(),
            self.n_buy_fills.to_string(),
            self.n_sell_fills.to_string(),
            self.final_inventory.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub stats: SummaryStats,
}

impl CsvRecord for SummaryRow {
    fn header() -> &'static [&'static str] {
        &[
            "label", "mean", "median", "sd", "skewness", "excess_kurtosis", "q01", "q05", "q25", "q75", "q95", "q99",
            "sharpe",
        ]
    }

    fn fields(&self) -> Vec<String> {
        let s = &self.stats;
        let mut out = vec![self.label.clone(), fmt_f64(s.mean), fmt_f64(s.median), fmt_f64(s.sd)];
        out.push(fmt_opt(s.skewness));
        out.push(fmt_opt(s.excess_kurtosis));
        out.extend(s.quantiles.iter().map(|&q| fmt_f64(q)));
        out.push(fmt_opt(s.sharpe));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeseriesRow {
    pub path_id: usize,
    pub step: usize,
    pub t: f64,
    pub s: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub q: i64,
    pub x: f64,
}

impl TimeseriesRow {
    /// Rows of path `path_id`, empty when the path kept no time series.
    pub fn from_sample(sample: &PnlSample, path_id: usize) -> Vec<Self> {
        let Some(series) = sample.paths.get(path_id).and_then(|p| p.timeseries.as_ref()) else {
            return Vec::new();
        };
        series
            .iter()
            .enumerate()
            .map(|(step, r)| Self {
                path_id,
                step,
                t: r.t,
                s: r.s,
                delta_plus: r.delta_plus,
                delta_minus: r.delta_minus,
                q: r.q,
                x: r.x,
            })
            .collect()
    }
}

impl CsvRecord for TimeseriesRow {
    fn header() -> &'static [&'static str] {
        &["path_id", "step", "t", "s", "delta_plus", "delta_minus", "q", "x"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.path_id.to_string(),
            self.step.to_string(),
            fmt_f64(self.t),
            fmt_f64(self.s),
            fmt_f64(self.delta_plus),
            fmt_f64(self.delta_minus),
            self.q.to_string(),
            fmt_f64(self.x),
        ]
    }
}

/// A ranked inventory configuration; components are joined with `;`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsoRiskRow {
    pub rank: usize,
    pub inventory: Vec<i64>,
    pub risk: f64,
}

impl CsvRecord for IsoRiskRow {
    fn header() -> &'static [&'static str] {
        &["rank", "inventory", "risk"]
    }

    fn fields(&self) -> Vec<String> {
        let q: Vec<String> = self.inventory.iter().map(i64::to_string).collect();
        vec![self.rank.to_string(), q.join(";"), fmt_f64(self.risk)]
    }
}

impl CsvRecord for Check {
    fn header() -> &'static [&'static str] {
        &["check", "computed", "reference", "tolerance", "passed"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.name.clone(),
            fmt_f64(self.computed),
            fmt_f64(self.reference),
            fmt_f64(self.tolerance),
            self.passed.to_string(),
        ]
    }
}
