use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::predict::Setting;
use crate::rfm::Component;

/// Mean and spread of test RMSE for one dataset and setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub setting: Setting,
    pub rmse_mean: f64,
    /// Population standard deviation over repeats.
    pub rmse_std: f64,
    pub repeats: usize,
}

/// Number of clusters used per component.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChosenK {
    pub ts: BTreeMap<Component, usize>,
    pub tda: BTreeMap<Component, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
    pub chosen_k: ChosenK,
    pub customers: usize,
    pub num_periods: usize,
    pub cutoff_period: usize,
    pub rejected_lines: usize,
    /// Per-repeat test RMSE, keyed by setting code.
    pub rmse_runs: BTreeMap<Setting, Vec<f64>>,
    pub runtime_secs: f64,
    pub config: RunConfig,
}

impl RunReport {
    /// Whether a clustering-based setting beat plain RFM; `None` when the
    /// report lacks the needed rows.
    pub fn structure_beats_rfm(&self) -> Option<bool> {
        let get = |s: Setting| self.rows.iter().find(|r| r.setting == s).map(|r| r.rmse_mean);
        let rfm = get(Setting::Rfm)?;
        let best = [get(Setting::TsRfm), get(Setting::TdaRfm)].into_iter().flatten().reduce(f64::min)?;
        Some(best < rfm)
    }
}

const REPORT_HEADER: [&str; 5] = ["dataset", "model", "rmse_mean", "rmse_std", "repeats"];

/// Full-precision report rows; `read_report_csv` restores them exactly.
pub fn write_report_csv<W: Write>(rows: &[ReportRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(REPORT_HEADER)?;
    for r in rows {
        w.write_record([
            r.dataset.as_str(),
            r.setting.label(),
            &r.rmse_mean.to_string(),
            &r.rmse_std.to_string(),
            &r.repeats.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<report csv>", e))?;
    Ok(())
}

pub fn read_report_csv<R: Read>(reader: R) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    if rdr.headers()?.iter().ne(REPORT_HEADER) {
        return Err(Error::Data(format!("report header must be {}", REPORT_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::Line { line: i + 2, reason: format!("bad {what}") };
        let num = |j: usize, what: &str| rec[j].parse::<f64>().map_err(|_| bad(what));
        rows.push(ReportRow {
            dataset: rec[0].to_string(),
            setting: Setting::from_label(&rec[1]).ok_or_else(|| bad("model"))?,
            rmse_mean: num(2, "rmse_mean")?,
            rmse_std: num(3, "rmse_std")?,
            repeats: rec[4].parse().map_err(|_| bad("repeats"))?,
        });
    }
    Ok(rows)
}

/// Results table with columns Dataset, Model, RMSE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultsTable {
    pub csv: String,
    pub text: String,
}

/// Two decimals with trailing zeros dropped: 13.0 → "13", 12.5649 → "12.56".
pub fn format_rmse(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

pub fn emit_results_table(rows: &[ReportRow]) -> Result<ResultsTable> {
    if rows.is_empty() {
        return Err(Error::Data("empty report".into()));
    }
    let header = ["Dataset", "Model", "RMSE"];
    let cells: Vec<[String; 3]> =
        rows.iter().map(|r| [r.dataset.clone(), r.setting.label().to_string(), format_rmse(r.rmse_mean)]).collect();

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for c in &cells {
        w.write_record(c)?;
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| Error::Internal(e.to_string()))?)
        .map_err(|e| Error::Internal(e.to_string()))?;

    let mut widths = header.map(str::len);
    for c in &cells {
        for (w, cell) in widths.iter_mut().zip(c) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |c: [&str; 3]| {
        format!("{:<w0$}  {:<w1$}  {:>w2$}\n", c[0], c[1], c[2], w0 = widths[0], w1 = widths[1], w2 = widths[2])
    };
    let mut text = line(header);
    text.push_str(&format!("{}\n", "-".repeat(widths.iter().sum::<usize>() + 4)));
    for c in &cells {
        text.push_str(&line([&c[0], &c[1], &c[2]]));
    }
    Ok(ResultsTable { csv, text })
}
