//! Transaction file parsing and period bucketing.
//!
//! Two input shapes are supported: the whitespace-delimited CDNOW layout
//! (`customer_id YYYYMMDD quantity amount`, no header) and a headered
//! comma-separated file whose columns are named by a [`GenericSchema`].
//! Bad lines are collected in the [`Parsed`] outcome rather than aborting
//! the parse; only a file with no usable line is an error.

use std::io::{BufRead, Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::money::Money;

/// One purchase event.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transaction {
    pub customer_id: String,
    pub date: NaiveDate,
    pub quantity: u64,
    pub monetary: Money,
}

/// Canonically ordered transactions plus their inclusive date horizon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionLog {
    transactions: Vec<Transaction>,
    first_date: NaiveDate,
    last_date: NaiveDate,
}

impl TransactionLog {
    /// Sorts the transactions into canonical order and derives the horizon.
    pub fn new(mut transactions: Vec<Transaction>) -> Result<Self> {
        if transactions.is_empty() {
            return Err(Error::Data("no transactions".into()));
        }
        for t in &transactions {
            if t.monetary.is_negative() {
                return Err(Error::Data(format!("negative monetary for customer {}", t.customer_id)));
            }
        }
        transactions.sort_by(|a, b| {
            (&a.customer_id, a.date, a.quantity, a.monetary).cmp(&(&b.customer_id, b.date, b.quantity, b.monetary))
        });
        let first_date = transactions.iter().map(|t| t.date).min().expect("non-empty");
        let last_date = transactions.iter().map(|t| t.date).max().expect("non-empty");
        Ok(TransactionLog { transactions, first_date, last_date })
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    pub fn horizon(&self) -> (NaiveDate, NaiveDate) {
        (self.first_date, self.last_date)
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn total_monetary(&self) -> Money {
        self.transactions.iter().map(|t| t.monetary).sum()
    }

    /// Distinct customer ids in ascending order.
    pub fn customers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for t in &self.transactions {
            if out.last() != Some(&t.customer_id.as_str()) {
                out.push(&t.customer_id);
            }
        }
        out
    }

    /// Transactions grouped per customer, in customer order.
    pub fn by_customer(&self) -> impl Iterator<Item = (&str, &[Transaction])> {
        self.transactions
            .chunk_by(|a, b| a.customer_id == b.customer_id)
            .map(|chunk| (chunk[0].customer_id.as_str(), chunk))
    }

    /// Writes the log in the generic CSV layout understood by
    /// [`parse_generic`] with [`GenericSchema::canonical`].
    pub fn write_generic<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["customer_id", "date", "quantity", "monetary"])?;
        for t in &self.transactions {
            w.write_record([
                t.customer_id.as_str(),
                &t.date.format("%Y-%m-%d").to_string(),
                &t.quantity.to_string(),
                &t.monetary.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// A line that was skipped during parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejected {
    pub line: usize,
    pub reason: String,
}

/// Parse outcome: the log plus every rejected line.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub log: TransactionLog,
    pub rejected: Vec<Rejected>,
}

impl Parsed {
    /// The one-line reject summary written to standard error.
    pub fn reject_summary(&self) -> String {
        format!("rejected: {} lines", self.rejected.len())
    }
}

fn finish(transactions: Vec<Transaction>, rejected: Vec<Rejected>) -> Result<Parsed> {
    if transactions.is_empty() {
        let detail = match rejected.first() {
            Some(r) => {
                format!("no transactions ({} rejected lines; first at line {}: {})", rejected.len(), r.line, r.reason)
            }
            None => "no transactions".to_string(),
        };
        return Err(Error::Data(detail));
    }
    Ok(Parsed { log: TransactionLog::new(transactions)?, rejected })
}

fn parse_amount(raw: &str) -> std::result::Result<Money, String> {
    let m: Money = raw.parse().map_err(|e| format!("{e}"))?;
    if m.is_negative() {
        return Err(format!("negative monetary `{raw}`"));
    }
    Ok(m)
}

fn parse_quantity(raw: &str) -> std::result::Result<u64, String> {
    raw.trim().parse::<u64>().map_err(|_| format!("invalid quantity `{raw}`"))
}

/// Parses one CDNOW line; `Err` carries the reject reason.
pub fn parse_cdnow_line(line: &str) -> std::result::Result<Transaction, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 fields, found {}", fields.len()));
    }
    let date = NaiveDate::parse_from_str(fields[1], "%Y%m%d").map_err(|_| format!("malformed date `{}`", fields[1]))?;
    if fields[1].len() != 8 {
        return Err(format!("malformed date `{}`", fields[1]));
    }
    Ok(Transaction {
        customer_id: fields[0].to_string(),
        date,
        quantity: parse_quantity(fields[2])?,
        monetary: parse_amount(fields[3])?,
    })
}

/// Parses the CDNOW layout: one `customer_id YYYYMMDD quantity amount`
/// record per line. Blank lines are ignored.
pub fn parse_cdnow<R: Read>(reader: R) -> Result<Parsed> {
    let reader = std::io::BufReader::new(reader);
    let mut transactions = Vec::new();
    let mut rejected = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Data(format!("line {line_no}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_cdnow_line(&line) {
            Ok(t) => transactions.push(t),
            Err(reason) => rejected.push(Rejected { line: line_no, reason }),
        }
    }
    finish(transactions, rejected)
}

/// Column names used by [`parse_generic`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenericSchema {
    pub id: String,
    pub date: String,
    /// When absent every row gets quantity 1.
    #[serde(default)]
    pub quantity: Option<String>,
    pub monetary: String,
}

impl GenericSchema {
    /// The layout written by [`TransactionLog::write_generic`].
    pub fn canonical() -> Self {
        GenericSchema {
            id: "customer_id".into(),
            date: "date".into(),
            quantity: Some("quantity".into()),
            monetary: "monetary".into(),
        }
    }

    /// Parses `id=cust,date=day,monetary=amt[,quantity=q]`.
    pub fn parse_mapping(mapping: &str) -> Result<Self> {
        let mut id = None;
        let mut date = None;
        let mut quantity = None;
        let mut monetary = None;
        for part in mapping.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("schema entry `{part}` is not key=column")))?;
            let slot = match key.trim() {
                "id" => &mut id,
                "date" => &mut date,
                "quantity" => &mut quantity,
                "monetary" => &mut monetary,
                other => return Err(Error::Config(format!("unknown schema key `{other}`"))),
            };
            *slot = Some(value.trim().to_string());
        }
        Ok(GenericSchema {
            id: id.ok_or_else(|| Error::Config("schema is missing `id`".into()))?,
            date: date.ok_or_else(|| Error::Config("schema is missing `date`".into()))?,
            quantity,
            monetary: monetary.ok_or_else(|| Error::Config("schema is missing `monetary`".into()))?,
        })
    }
}

impl Default for GenericSchema {
    fn default() -> Self {
        Self::canonical()
    }
}

/// ISO-8601 calendar date; a trailing time part (`T...` or ` ...`) is ignored.
fn parse_iso_date(raw: &str) -> std::result::Result<NaiveDate, String> {
    let s = raw.trim();
    let day = s.split(['T', ' ']).next().unwrap_or(s);
    NaiveDate::parse_from_str(day, "%Y-%m-%d").map_err(|_| format!("malformed date `{raw}`"))
}

/// Parses a headered comma-separated file using `schema` to locate columns.
pub fn parse_generic<R: Read>(reader: R, schema: &GenericSchema) -> Result<Parsed> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Config(format!("column `{name}` not found in header")))
    };
    let id_col = column(&schema.id)?;
    let date_col = column(&schema.date)?;
    let money_col = column(&schema.monetary)?;
    let qty_col = schema.quantity.as_deref().map(column).transpose()?;

    let mut transactions = Vec::new();
    let mut rejected = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line_no = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let parsed = (|| -> std::result::Result<Transaction, String> {
            let field = |i: usize| record.get(i).ok_or_else(|| format!("missing field {}", i + 1));
            let id = field(id_col)?.trim();
            if id.is_empty() {
                return Err("empty customer id".into());
            }
            let quantity = match qty_col {
                Some(c) => match record.get(c).map(str::trim) {
                    None | Some("") => 1,
                    Some(q) => parse_quantity(q)?,
                },
                None => 1,
            };
            Ok(Transaction {
                customer_id: id.to_string(),
                date: parse_iso_date(field(date_col)?)?,
                quantity,
                monetary: parse_amount(field(money_col)?)?,
            })
        })();
        match parsed {
            Ok(t) => transactions.push(t),
            Err(reason) => rejected.push(Rejected { line: line_no, reason }),
        }
    }
    finish(transactions, rejected)
}

/// Uniform grid of `period_length_days`-day periods starting at the log's
/// first date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodGrid {
    pub period_length_days: u32,
    pub num_periods: usize,
    pub origin: NaiveDate,
}

impl PeriodGrid {
    /// Period index of `date`, or `None` outside the grid.
    pub fn period_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.origin).num_days();
        if offset < 0 {
            return None;
        }
        let idx = (offset / i64::from(self.period_length_days)) as usize;
        (idx < self.num_periods).then_some(idx)
    }

    /// Last calendar day belonging to `period`.
    pub fn last_day_of(&self, period: usize) -> NaiveDate {
        let days = (period as i64 + 1) * i64::from(self.period_length_days) - 1;
        self.origin + chrono::Duration::days(days)
    }

    /// Monetary total per period.
    pub fn monetary_by_period(&self, log: &TransactionLog) -> Vec<Money> {
        let mut out = vec![Money::ZERO; self.num_periods];
        for t in log.transactions() {
            if let Some(p) = self.period_of(t.date) {
                out[p] += t.monetary;
            }
        }
        out
    }
}

/// Builds the period grid covering the log's horizon.
pub fn bucketize(log: &TransactionLog, period_length_days: u32) -> Result<PeriodGrid> {
    if period_length_days == 0 {
        return Err(Error::Range { what: "period length", detail: "must be at least 1 day".into() });
    }
    let (first, last) = log.horizon();
    let span = (last - first).num_days() + 1;
    let len = i64::from(period_length_days);
    let num_periods = ((span + len - 1) / len) as usize;
    Ok(PeriodGrid { period_length_days, num_periods, origin: first })
}
