use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{PeriodGrid, TransactionLog};
use crate::money::Money;
use crate::rfm::{recency_from_counts, rfm_score, rfm_snapshot, Component};
use crate::scalar::Scalar;

/// The four experimental settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Setting {
    #[serde(rename = "NO_RFM")]
    NoRfm,
    #[serde(rename = "RFM")]
    Rfm,
    #[serde(rename = "TS_RFM")]
    TsRfm,
    #[serde(rename = "TDA_RFM")]
    TdaRfm,
}

impl Setting {
    pub const ALL: [Setting; 4] = [Setting::NoRfm, Setting::Rfm, Setting::TsRfm, Setting::TdaRfm];

    pub fn code(self) -> &'static str {
        match self {
            Setting::NoRfm => "NO_RFM",
            Setting::Rfm => "RFM",
            Setting::TsRfm => "TS_RFM",
            Setting::TdaRfm => "TDA_RFM",
        }
    }

    /// Row label used in the results table.
    pub fn label(self) -> &'static str {
        match self {
            Setting::NoRfm => "No RFM",
            Setting::Rfm => "RFM",
            Setting::TsRfm => "TS RFM",
            Setting::TdaRfm => "TDA RFM",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Setting::ALL.into_iter().find(|s| s.label() == label || s.code() == label)
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(['-', ' '], "_");
        Setting::ALL
            .into_iter()
            .find(|x| x.code() == norm)
            .ok_or_else(|| Error::Config(format!("unknown setting `{s}` (expected NO_RFM, RFM, TS_RFM, TDA_RFM)")))
    }
}

/// Cluster label per customer, for each of R, F and M.
pub type ComponentLabels = BTreeMap<Component, BTreeMap<String, usize>>;

/// Base numeric columns present in every setting.
pub const BASE_FEATURES: [&str; 5] =
    ["txn_count", "total_monetary", "mean_gap_periods", "tenure_periods", "recency_periods"];

/// Per-customer feature rows plus the regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable<F> {
    pub setting: Setting,
    pub customer_ids: Vec<String>,
    pub numeric_names: Vec<String>,
    /// Row-major, `numeric_names.len()` values per row.
    pub numeric: Vec<Vec<F>>,
    pub categorical_names: Vec<String>,
    pub categorical: Vec<Vec<u32>>,
    pub target: Vec<F>,
}

const CAT_PREFIX: &str = "cat:";

impl<F: Scalar> FeatureTable<F> {
    pub fn len(&self) -> usize {
        self.customer_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.customer_ids.is_empty()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.numeric_names.iter().chain(&self.categorical_names).cloned().collect()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        FeatureTable {
            setting: self.setting,
            customer_ids: indices.iter().map(|&i| self.customer_ids[i].clone()).collect(),
            numeric_names: self.numeric_names.clone(),
            numeric: indices.iter().map(|&i| self.numeric[i].clone()).collect(),
            categorical_names: self.categorical_names.clone(),
            categorical: indices.iter().map(|&i| self.categorical[i].clone()).collect(),
            target: indices.iter().map(|&i| self.target[i]).collect(),
        }
    }

    /// Headered CSV: `customer_id`, numeric columns, `cat:`-prefixed
    /// categorical columns, `target`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["customer_id".to_string()];
        header.extend(self.numeric_names.iter().cloned());
        header.extend(self.categorical_names.iter().map(|n| format!("{CAT_PREFIX}{n}")));
        header.push("target".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![self.customer_ids[i].clone()];
            row.extend(self.numeric[i].iter().map(|v| v.to_string()));
            row.extend(self.categorical[i].iter().map(|v| v.to_string()));
            row.push(self.target[i].to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// Reads the layout written by [`FeatureTable::write_csv`]. The setting
    /// is inferred from the columns present.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols: Vec<&str> = headers.iter().collect();
        if cols.first() != Some(&"customer_id") || cols.last() != Some(&"target") {
            return Err(Error::Data("feature csv must start with customer_id and end with target".into()));
        }
        let middle = &cols[1..cols.len() - 1];
        let numeric_names: Vec<String> =
            middle.iter().filter(|c| !c.starts_with(CAT_PREFIX)).map(|c| c.to_string()).collect();
        let categorical_names: Vec<String> =
            middle.iter().filter_map(|c| c.strip_prefix(CAT_PREFIX)).map(str::to_string).collect();
        if middle.iter().position(|c| c.starts_with(CAT_PREFIX)).is_some_and(|p| p < numeric_names.len()) {
            return Err(Error::Data("categorical columns must follow numeric columns".into()));
        }
        let setting = if categorical_names.iter().any(|c| c.starts_with("tda_")) {
            Setting::TdaRfm
        } else if categorical_names.iter().any(|c| c.starts_with("ts_")) {
            Setting::TsRfm
        } else if numeric_names.iter().any(|c| c.starts_with("rfm_")) {
            Setting::Rfm
        } else {
            Setting::NoRfm
        };
        let mut table = FeatureTable {
            setting,
            customer_ids: Vec::new(),
            numeric: Vec::new(),
            categorical: Vec::new(),
            target: Vec::new(),
            numeric_names,
            categorical_names,
        };
        let nn = table.numeric_names.len();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let num = |s: &str| -> Result<F> {
                s.parse::<f64>().map(F::lit).map_err(|_| Error::Data(format!("line {line}: bad number `{s}`")))
            };
            if record.len() != cols.len() {
                return Err(Error::Data(format!("line {line}: expected {} fields", cols.len())));
            }
            table.customer_ids.push(record[0].to_string());
            table.numeric.push((1..=nn).map(|i| num(&record[i])).collect::<Result<_>>()?);
            table.categorical.push(
                (nn + 1..cols.len() - 1)
                    .map(|i| {
                        record[i]
                            .parse::<u32>()
                            .map_err(|_| Error::Data(format!("line {line}: bad level `{}`", &record[i])))
                    })
                    .collect::<Result<_>>()?,
            );
            table.target.push(num(&record[cols.len() - 1])?);
        }
        Ok(table)
    }
}

struct BaseRow {
    count: u32,
    total: Money,
    mean_gap: f64,
    tenure: usize,
    recency: u32,
    target: Money,
}

/// Assembles the feature table for `setting`.
///
/// Rows are the customers with at least one purchase in periods
/// `0..=cutoff`. The target is their total monetary in the periods after
/// `cutoff`.
pub fn build_features<F: Scalar>(
    log: &TransactionLog,
    grid: &PeriodGrid,
    cutoff: usize,
    setting: Setting,
    ts_labels: Option<&ComponentLabels>,
    tda_labels: Option<&ComponentLabels>,
) -> Result<FeatureTable<F>> {
    let required = match setting {
        Setting::TsRfm => Some(("ts", ts_labels)),
        Setting::TdaRfm => Some(("tda", tda_labels)),
        _ => None,
    };
    let label_maps: Option<(&str, [&BTreeMap<String, usize>; 3])> = match required {
        None => None,
        Some((prefix, maps)) => {
            let maps =
                maps.ok_or_else(|| Error::Config(format!("setting {setting} requires {prefix} cluster labels")))?;
            let get = |c: Component| {
                maps.get(&c).ok_or_else(|| {
                    Error::Config(format!(
                        "setting {setting} requires {prefix} labels for component {c}, found {}",
                        maps.len()
                    ))
                })
            };
            Some((prefix, [get(Component::Recency)?, get(Component::Frequency)?, get(Component::Monetary)?]))
        }
    };

    let snapshot = rfm_snapshot(log, grid, cutoff)?;
    let scores = if setting == Setting::Rfm { Some(rfm_score(&snapshot)?) } else { None };

    let mut rows: BTreeMap<&str, BaseRow> = BTreeMap::new();
    for (id, txs) in log.by_customer() {
        if !snapshot.customers.contains_key(id) {
            continue;
        }
        let mut counts = vec![0u32; cutoff + 1];
        let mut total = Money::ZERO;
        let mut target = Money::ZERO;
        for t in txs {
            match grid.period_of(t.date) {
                Some(p) if p <= cutoff => {
                    counts[p] += 1;
                    total += t.monetary;
                }
                Some(_) => target += t.monetary,
                None => {}
            }
        }
        let active: Vec<usize> = (0..=cutoff).filter(|&p| counts[p] > 0).collect();
        let mean_gap = if active.len() > 1 {
            (active[active.len() - 1] - active[0]) as f64 / (active.len() - 1) as f64
        } else {
            0.0
        };
        rows.insert(
            id,
            BaseRow {
                count: counts.iter().sum(),
                total,
                mean_gap,
                tenure: cutoff - active[0],
                recency: recency_from_counts(&counts)[cutoff],
                target,
            },
        );
    }

    let mut numeric_names: Vec<String> = BASE_FEATURES.iter().map(|s| s.to_string()).collect();
    if scores.is_some() {
        numeric_names.extend(["rfm_r", "rfm_f", "rfm_m"].map(String::from));
    }
    let categorical_names: Vec<String> = match label_maps {
        Some((prefix, _)) => Component::ALL.iter().map(|c| format!("{prefix}_{}", c.code().to_lowercase())).collect(),
        None => Vec::new(),
    };

    let mut table = FeatureTable {
        setting,
        customer_ids: Vec::with_capacity(rows.len()),
        numeric_names,
        numeric: Vec::with_capacity(rows.len()),
        categorical_names,
        categorical: Vec::with_capacity(rows.len()),
        target: Vec::with_capacity(rows.len()),
    };
    for (id, row) in rows {
        let mut num = vec![
            F::lit(f64::from(row.count)),
            row.total.to_scalar(),
            F::lit(row.mean_gap),
            F::from_usize_lossy(row.tenure),
            F::lit(f64::from(row.recency)),
        ];
        if let Some(scores) = &scores {
            let s = scores[id];
            num.extend([s.r, s.f, s.m].map(|d| F::lit(f64::from(d))));
        }
        let cat = match &label_maps {
            Some((prefix, maps)) => maps
                .iter()
                .map(|m| {
                    m.get(id)
                        .map(|&l| l as u32)
                        .ok_or_else(|| Error::Data(format!("no {prefix} cluster label for customer {id}")))
                })
                .collect::<Result<Vec<u32>>>()?,
            None => Vec::new(),
        };
        table.customer_ids.push(id.to_string());
        table.numeric.push(num);
        table.categorical.push(cat);
        table.target.push(row.target.to_scalar());
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{bucketize, Transaction};
    use chrono::NaiveDate;

    fn tx(id: &str, day: i64, cents: i64) -> Transaction {
        Transaction {
            customer_id: id.into(),
            date: NaiveDate::from_ymd_opt(2021, 3, 1).unwrap() + chrono::Duration::days(day),
            quantity: 1,
            monetary: Money::from_cents(cents),
        }
    }

    fn fixture() -> (TransactionLog, PeriodGrid) {
        let log = TransactionLog::new(vec![
            tx("a", 0, 1000),
            tx("a", 15, 500),
            tx("a", 50, 700),
            tx("b", 3, 200),
            tx("b", 60, 900),
            tx("c", 8, 100),
            tx("late", 55, 300),
        ])
        .unwrap();
        let grid = bucketize(&log, 7).unwrap();
        (log, grid)
    }

    fn labels(n_components: usize) -> ComponentLabels {
        Component::ALL
            .iter()
            .take(n_components)
            .map(|&c| (c, ["a", "b", "c"].iter().map(|id| (id.to_string(), 1usize)).collect()))
            .collect()
    }

    #[test]
    fn no_rfm_has_five_numeric_columns() {
        let (log, grid) = fixture();
        let t = build_features::<f64>(&log, &grid, 4, Setting::NoRfm, None, None).unwrap();
        assert_eq!(t.numeric_names.len(), 5);
        assert!(t.categorical_names.is_empty());
        assert_eq!(t.customer_ids, vec!["a", "b", "c"]);
        // a: periods 0 and 2, cutoff 4.
        assert_eq!(t.numeric[0], vec![2.0, 15.0, 2.0, 4.0, 2.0]);
        assert_eq!(t.target, vec![7.0, 9.0, 0.0]);
    }

    #[test]
    fn rfm_adds_digits() {
        let (log, grid) = fixture();
        let t = build_features::<f64>(&log, &grid, 4, Setting::Rfm, None, None).unwrap();
        assert_eq!(t.numeric_names.len(), 8);
        assert!(t.numeric.iter().all(|r| r[5..].iter().all(|&d| (1.0..=5.0).contains(&d))));
    }

    #[test]
    fn missing_label_map_is_config_error() {
        let (log, grid) = fixture();
        let two = labels(2);
        let err = build_features::<f64>(&log, &grid, 4, Setting::TsRfm, Some(&two), None).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        assert!(err.to_string().contains("TS_RFM"));
        assert!(build_features::<f64>(&log, &grid, 4, Setting::TdaRfm, None, None).is_err());
        let three = labels(3);
        let t = build_features::<f64>(&log, &grid, 4, Setting::TsRfm, Some(&three), None).unwrap();
        assert_eq!(t.categorical_names, vec!["ts_r", "ts_f", "ts_m"]);
    }

    #[test]
    fn csv_round_trip() {
        let (log, grid) = fixture();
        let three = labels(3);
        let t = build_features::<f64>(&log, &grid, 4, Setting::TdaRfm, None, Some(&three)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(FeatureTable::<f64>::read_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn setting_parsing() {
        assert_eq!("ts-rfm".parse::<Setting>().unwrap(), Setting::TsRfm);
        assert_eq!("NO_RFM".parse::<Setting>().unwrap(), Setting::NoRfm);
        assert!("foo".parse::<Setting>().is_err());
        assert_eq!(Setting::from_label("TDA RFM"), Some(Setting::TdaRfm));
    }
}
