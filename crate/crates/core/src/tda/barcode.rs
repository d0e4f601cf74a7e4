use std::cmp::Ordering;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{mean, pop_std, Scalar};

/// Half-open interval `[birth, death)`; `death` may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bar<F> {
    pub birth: F,
    pub death: F,
}

impl<F: Scalar> Bar<F> {
    pub fn is_infinite(&self) -> bool {
        self.death.is_infinite()
    }

    pub fn persistence(&self) -> F {
        self.death - self.birth
    }

    /// Whether `[a, b)` lies inside the class's lifetime.
    pub fn spans(&self, a: F, b: F) -> bool {
        self.birth <= a && self.death > b
    }
}

fn bar_order<F: Scalar>(a: &Bar<F>, b: &Bar<F>) -> Ordering {
    a.birth
        .partial_cmp(&b.birth)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.death.partial_cmp(&b.death).unwrap_or(Ordering::Equal))
}

/// Bars for homology dimensions 0 and 1, each sorted by (birth, death).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Barcode<F> {
    h0: Vec<Bar<F>>,
    h1: Vec<Bar<F>>,
}

impl<F: Scalar> Barcode<F> {
    /// Canonicalizes order; bars with `death <= birth` are dropped.
    pub fn new(mut h0: Vec<Bar<F>>, mut h1: Vec<Bar<F>>) -> Self {
        for bars in [&mut h0, &mut h1] {
            bars.retain(|b| b.death > b.birth);
            bars.sort_by(bar_order);
        }
        Barcode { h0, h1 }
    }

    pub fn h0(&self) -> &[Bar<F>] {
        &self.h0
    }

    pub fn h1(&self) -> &[Bar<F>] {
        &self.h1
    }

    pub fn dim(&self, dim: usize) -> &[Bar<F>] {
        match dim {
            0 => &self.h0,
            1 => &self.h1,
            _ => &[],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.h0.is_empty() && self.h1.is_empty()
    }

    /// Largest finite endpoint, or zero.
    pub fn max_finite(&self) -> F {
        self.h0
            .iter()
            .chain(&self.h1)
            .flat_map(|b| [b.birth, b.death])
            .filter(|v| v.is_finite())
            .fold(F::zero(), F::max)
    }

    pub fn diagram(&self) -> PersistenceDiagram<F> {
        let pts = |bars: &[Bar<F>]| bars.iter().map(|b| (b.birth, b.death)).collect();
        PersistenceDiagram { h0: pts(&self.h0), h1: pts(&self.h1) }
    }
}

/// Birth/death pairs as planar points, per dimension.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PersistenceDiagram<F> {
    pub h0: Vec<(F, F)>,
    pub h1: Vec<(F, F)>,
}

impl<F: Scalar> PersistenceDiagram<F> {
    pub fn points(&self, dim: usize) -> &[(F, F)] {
        match dim {
            0 => &self.h0,
            1 => &self.h1,
            _ => &[],
        }
    }

    pub fn above_diagonal(&self) -> bool {
        self.h0.iter().chain(&self.h1).all(|&(b, d)| d > b)
    }
}

pub const FEATURES_PER_DIM: usize = 8;

/// Summary statistics of a barcode, eight per homology dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoFeatureVector<F> {
    pub dims: Vec<usize>,
    pub values: Vec<F>,
}

impl<F: Scalar> TopoFeatureVector<F> {
    pub const NAMES: [&'static str; FEATURES_PER_DIM] = [
        "bar_count",
        "max_persistence",
        "total_persistence",
        "mean_persistence",
        "persistence_stddev",
        "mean_birth",
        "mean_death",
        "persistence_entropy",
    ];

    pub fn names(&self) -> Vec<String> {
        self.dims.iter().flat_map(|d| Self::NAMES.iter().map(move |n| format!("h{d}_{n}"))).collect()
    }

    /// Value of `name` (e.g. `"h1_total_persistence"`).
    pub fn get(&self, name: &str) -> Option<F> {
        self.names().iter().position(|n| n == name).map(|i| self.values[i])
    }
}

fn dim_features<F: Scalar>(bars: &[Bar<F>], cap: F) -> [F; FEATURES_PER_DIM] {
    if bars.is_empty() {
        return [F::zero(); FEATURES_PER_DIM];
    }
    let births: Vec<F> = bars.iter().map(|b| b.birth).collect();
    let deaths: Vec<F> = bars.iter().map(|b| if b.death.is_finite() { b.death } else { cap }).collect();
    let pers: Vec<F> = births.iter().zip(&deaths).map(|(&b, &d)| d - b).collect();
    let total: F = pers.iter().copied().sum();
    let mean_p = mean(&pers);
    let entropy = if bars.len() <= 1 || total <= F::zero() {
        F::zero()
    } else {
        -pers
            .iter()
            .filter(|&&p| p > F::zero())
            .map(|&p| {
                let q = p / total;
                q * q.ln()
            })
            .sum::<F>()
    };
    [
        F::from_usize_lossy(bars.len()),
        pers.iter().copied().fold(F::zero(), F::max),
        total,
        mean_p,
        pop_std(&pers, mean_p),
        mean(&births),
        mean(&deaths),
        entropy,
    ]
}

/// Features for dimensions 0 and 1 (16 values); infinite deaths become `cap`.
pub fn barcode_features<F: Scalar>(barcode: &Barcode<F>, cap: F) -> TopoFeatureVector<F> {
    barcode_features_for(barcode, cap, &[0, 1])
}

/// Features restricted to the given homology dimensions.
pub fn barcode_features_for<F: Scalar>(barcode: &Barcode<F>, cap: F, dims: &[usize]) -> TopoFeatureVector<F> {
    let values = dims.iter().flat_map(|&d| dim_features(barcode.dim(d), cap)).collect();
    TopoFeatureVector { dims: dims.to_vec(), values }
}

/// One row per bar: `customer_id,component,dim,birth,death`, death `inf`
/// for infinite bars.
pub fn write_barcodes_csv<'a, F, W, I>(rows: I, writer: W) -> Result<()>
where
    F: Scalar,
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a str, &'a Barcode<F>)>,
{
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["customer_id", "component", "dim", "birth", "death"])?;
    for (id, component, bc) in rows {
        for dim in 0..2 {
            for bar in bc.dim(dim) {
                let death = if bar.is_infinite() { "inf".to_string() } else { bar.death.to_string() };
                w.write_record([id, component, &dim.to_string(), &bar.birth.to_string(), &death])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Reads back the barcode CSV as `(customer_id, component, barcode)`.
pub fn read_barcodes_csv<F: Scalar, R: Read>(reader: R) -> Result<Vec<(String, String, Barcode<F>)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    type Row<F> = (String, String, Vec<Bar<F>>, Vec<Bar<F>>);
    let mut out: Vec<Row<F>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let bad = |what: &str| Error::Data(format!("barcode csv: bad {what} in {:?}", record));
        let id = record.get(0).ok_or_else(|| bad("customer_id"))?;
        let component = record.get(1).ok_or_else(|| bad("component"))?;
        let dim: usize = record.get(2).and_then(|v| v.parse().ok()).ok_or_else(|| bad("dim"))?;
        let birth = record.get(3).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| bad("birth"))?;
        let death = match record.get(4) {
            Some("inf") => f64::INFINITY,
            Some(v) => v.parse::<f64>().map_err(|_| bad("death"))?,
            None => return Err(bad("death")),
        };
        let bar = Bar { birth: F::lit(birth), death: F::lit(death) };
        let pos = match out.iter().position(|(i, c, _, _)| i == id && c == component) {
            Some(p) => p,
            None => {
                out.push((id.to_string(), component.to_string(), Vec::new(), Vec::new()));
                out.len() - 1
            }
        };
        match dim {
            0 => out[pos].2.push(bar),
            1 => out[pos].3.push(bar),
            _ => return Err(bad("dim")),
        }
    }
    Ok(out.into_iter().map(|(i, c, h0, h1)| (i, c, Barcode::new(h0, h1))).collect())
}
