//! Quintile RFM scoring and per-customer Recency/Frequency/Monetary series.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{PeriodGrid, TransactionLog};
use crate::money::Money;
use crate::scalar::Scalar;

/// Point-in-time RFM aggregates for one customer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RfmRecord {
    pub recency_days: u32,
    pub frequency: u32,
    pub monetary: Money,
}

/// RFM aggregates at a cutoff, keyed by customer id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RfmSnapshot {
    pub cutoff_period: usize,
    pub customers: BTreeMap<String, RfmRecord>,
}

impl RfmSnapshot {
    pub fn len(&self) -> usize {
        self.customers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty()
    }
}

/// Quintile digits, each in `1..=5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RfmScore {
    pub r: u8,
    pub f: u8,
    pub m: u8,
}

impl RfmScore {
    /// The three-digit code `100r + 10f + m`.
    pub fn composite(&self) -> u16 {
        100 * u16::from(self.r) + 10 * u16::from(self.f) + u16::from(self.m)
    }
}

impl fmt::Display for RfmScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.composite())
    }
}

/// Which of the three series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Component {
    #[serde(rename = "R")]
    Recency,
    #[serde(rename = "F")]
    Frequency,
    #[serde(rename = "M")]
    Monetary,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Recency, Component::Frequency, Component::Monetary];

    pub fn code(self) -> &'static str {
        match self {
            Component::Recency => "R",
            Component::Frequency => "F",
            Component::Monetary => "M",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "R" | "r" => Some(Component::Recency),
            "F" | "f" => Some(Component::Frequency),
            "M" | "m" => Some(Component::Monetary),
            _ => None,
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Recency, frequency and monetary series over the period grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfmSeries<F> {
    pub recency: Vec<F>,
    pub frequency: Vec<F>,
    pub monetary: Vec<F>,
}

impl<F: Scalar> RfmSeries<F> {
    pub fn component(&self, c: Component) -> &[F] {
        match c {
            Component::Recency => &self.recency,
            Component::Frequency => &self.frequency,
            Component::Monetary => &self.monetary,
        }
    }

    pub fn len(&self) -> usize {
        self.recency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recency.is_empty()
    }

    /// The first `periods` entries of every component.
    pub fn truncated(&self, periods: usize) -> Self {
        let n = periods.min(self.len());
        RfmSeries {
            recency: self.recency[..n].to_vec(),
            frequency: self.frequency[..n].to_vec(),
            monetary: self.monetary[..n].to_vec(),
        }
    }
}

/// Aggregates recency (days), frequency and monetary over periods
/// `0..=cutoff_period`. Customers without a purchase in that window are
/// left out.
pub fn rfm_snapshot(log: &TransactionLog, grid: &PeriodGrid, cutoff_period: usize) -> Result<RfmSnapshot> {
    if cutoff_period >= grid.num_periods {
        return Err(Error::Range {
            what: "cutoff period",
            detail: format!("{cutoff_period} not below {} periods", grid.num_periods),
        });
    }
    let cutoff_day = grid.last_day_of(cutoff_period);
    let mut customers = BTreeMap::new();
    for (id, txs) in log.by_customer() {
        let window: Vec<_> = txs.iter().filter(|t| t.date <= cutoff_day && t.date >= grid.origin).collect();
        let Some(last) = window.iter().map(|t| t.date).max() else { continue };
        customers.insert(
            id.to_string(),
            RfmRecord {
                recency_days: (cutoff_day - last).num_days() as u32,
                frequency: window.len() as u32,
                monetary: window.iter().map(|t| t.monetary).sum(),
            },
        );
    }
    Ok(RfmSnapshot { cutoff_period, customers })
}

/// Digits from 1-based ranks: `ceil(5 * rank / n)`.
fn quintile_digits<K: Ord + Copy>(snapshot: &RfmSnapshot, key: impl Fn(&RfmRecord) -> K) -> BTreeMap<&str, u8> {
    let n = snapshot.len();
    let mut order: Vec<(&str, K)> = snapshot.customers.iter().map(|(id, rec)| (id.as_str(), key(rec))).collect();
    order.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    order
        .into_iter()
        .enumerate()
        .map(|(i, (id, _))| {
            let rank = i + 1;
            (id, ((5 * rank).div_ceil(n)) as u8)
        })
        .collect()
}

/// Rank-based quintile scores. Larger frequency and monetary are better;
/// smaller recency is better. Ties go to the lexicographically smaller id
/// receiving the lower rank.
pub fn rfm_score(snapshot: &RfmSnapshot) -> Result<BTreeMap<String, RfmScore>> {
    if snapshot.is_empty() {
        return Err(Error::Data("cannot score an empty RFM snapshot".into()));
    }
    let r = quintile_digits(snapshot, |rec| std::cmp::Reverse(rec.recency_days));
    let f = quintile_digits(snapshot, |rec| rec.frequency);
    let m = quintile_digits(snapshot, |rec| rec.monetary);
    Ok(snapshot
        .customers
        .keys()
        .map(|id| (id.clone(), RfmScore { r: r[id.as_str()], f: f[id.as_str()], m: m[id.as_str()] }))
        .collect())
}

/// Per-period counts and totals for one customer.
fn period_activity(grid: &PeriodGrid, txs: &[crate::ingest::Transaction]) -> (Vec<u32>, Vec<Money>) {
    let mut counts = vec![0u32; grid.num_periods];
    let mut totals = vec![Money::ZERO; grid.num_periods];
    for t in txs {
        if let Some(p) = grid.period_of(t.date) {
            counts[p] += 1;
            totals[p] += t.monetary;
        }
    }
    (counts, totals)
}

/// Recency by the recurrence: 0 in an active period, +1 per idle period
/// after that, and `t + 1` before the first purchase.
pub(crate) fn recency_from_counts(counts: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(counts.len());
    let mut last_active: Option<usize> = None;
    for (t, &c) in counts.iter().enumerate() {
        if c > 0 {
            last_active = Some(t);
        }
        out.push(match last_active {
            Some(a) => (t - a) as u32,
            None => t as u32 + 1,
        });
    }
    out
}

/// Builds the three period-indexed series for every customer.
pub fn rfm_series<F: Scalar>(log: &TransactionLog, grid: &PeriodGrid) -> BTreeMap<String, RfmSeries<F>> {
    log.by_customer()
        .map(|(id, txs)| {
            let (counts, totals) = period_activity(grid, txs);
            let recency = recency_from_counts(&counts);
            (
                id.to_string(),
                RfmSeries {
                    recency: recency.into_iter().map(|r| F::lit(f64::from(r))).collect(),
                    frequency: counts.into_iter().map(|c| F::lit(f64::from(c))).collect(),
                    monetary: totals.into_iter().map(Money::to_scalar).collect(),
                },
            )
        })
        .collect()
}

/// Wide CSV: one row per (customer, component), columns `p0..p{n-1}`.
pub fn write_series_csv<F: Scalar, W: Write>(series: &BTreeMap<String, RfmSeries<F>>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let width = series.values().map(RfmSeries::len).max().unwrap_or(0);
    let mut header = vec!["customer_id".to_string(), "component".to_string()];
    header.extend((0..width).map(|i| format!("p{i}")));
    w.write_record(&header)?;
    for (id, s) in series {
        for c in Component::ALL {
            let mut row = vec![id.clone(), c.code().to_string()];
            row.extend(s.component(c).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Score table CSV: `customer_id,recency_days,frequency,monetary,r,f,m,rfm`.
pub fn write_scores_csv<W: Write>(
    snapshot: &RfmSnapshot,
    scores: &BTreeMap<String, RfmScore>,
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["customer_id", "recency_days", "frequency", "monetary", "r", "f", "m", "rfm"])?;
    for (id, rec) in &snapshot.customers {
        let s = scores[id];
        w.write_record([
            id.clone(),
            rec.recency_days.to_string(),
            rec.frequency.to_string(),
            rec.monetary.to_string(),
            s.r.to_string(),
            s.f.to_string(),
            s.m.to_string(),
            s.composite().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
