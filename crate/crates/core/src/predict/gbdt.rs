use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::features::FeatureTable;
use super::metrics::rmse;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub depth: usize,
    pub rounds: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams { depth: 4, rounds: 200, learning_rate: 0.1, min_leaf: 5, seed: 0 }
    }
}

/// Numeric columns pass through; each categorical column expands to one
/// indicator per level seen in training. Unseen levels encode as all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotEncoder {
    pub numeric_names: Vec<String>,
    pub categorical_names: Vec<String>,
    pub levels: Vec<Vec<u32>>,
}

impl OneHotEncoder {
    pub fn fit<F: Scalar>(table: &FeatureTable<F>) -> Self {
        let levels = (0..table.categorical_names.len())
            .map(|c| {
                let mut lv: Vec<u32> = table.categorical.iter().map(|r| r[c]).collect();
                lv.sort_unstable();
                lv.dedup();
                lv
            })
            .collect();
        OneHotEncoder {
            numeric_names: table.numeric_names.clone(),
            categorical_names: table.categorical_names.clone(),
            levels,
        }
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = self.numeric_names.clone();
        for (name, lv) in self.categorical_names.iter().zip(&self.levels) {
            names.extend(lv.iter().map(|l| format!("{name}={l}")));
        }
        names
    }

    pub fn width(&self) -> usize {
        self.numeric_names.len() + self.levels.iter().map(Vec::len).sum::<usize>()
    }

    fn check_schema<F: Scalar>(&self, table: &FeatureTable<F>) -> Result<()> {
        let mismatch = |expected: &[String], got: &[String], kind: &str| -> Result<()> {
            for i in 0..expected.len().max(got.len()) {
                match (expected.get(i), got.get(i)) {
                    (Some(e), Some(g)) if e == g => {}
                    (Some(e), _) => return Err(Error::Shape(format!("{kind} column `{e}` missing or out of order"))),
                    (None, Some(g)) => return Err(Error::Shape(format!("unexpected {kind} column `{g}`"))),
                    (None, None) => unreachable!(),
                }
            }
            Ok(())
        };
        mismatch(&self.numeric_names, &table.numeric_names, "numeric")?;
        mismatch(&self.categorical_names, &table.categorical_names, "categorical")
    }

    /// Column-major encoded matrix, one `Vec` per encoded feature.
    pub fn encode<F: Scalar>(&self, table: &FeatureTable<F>) -> Result<Vec<Vec<F>>> {
        self.check_schema(table)?;
        let mut cols: Vec<Vec<F>> =
            (0..self.numeric_names.len()).map(|c| table.numeric.iter().map(|r| r[c]).collect()).collect();
        for (c, lv) in self.levels.iter().enumerate() {
            for &level in lv {
                cols.push(table.categorical.iter().map(|r| if r[c] == level { F::one() } else { F::zero() }).collect());
            }
        }
        Ok(cols)
    }
}

/// Regression tree node. Rows with `value <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node<F> {
    Leaf { value: F },
    Split { feature: usize, threshold: F, left: Box<Node<F>>, right: Box<Node<F>> },
}

impl<F: Scalar> Node<F> {
    fn eval(&self, cols: &[Vec<F>], row: usize) -> F {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    node = if cols[*feature][row] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel<F> {
    pub encoder: OneHotEncoder,
    pub base_prediction: F,
    pub learning_rate: F,
    pub trees: Vec<Node<F>>,
    pub params: GbdtParams,
    /// Training RMSE of the base prediction, then after each round.
    pub train_rmse: Vec<F>,
}

impl<F: Scalar + Serialize> GbdtModel<F> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct Split<F> {
    gain: F,
    feature: usize,
    /// Rows before this position of the feature's sorted list go left.
    position: usize,
    threshold: F,
}

struct TreeBuilder<'a, F> {
    cols: &'a [Vec<F>],
    residual: &'a [F],
    min_leaf: usize,
}

impl<F: Scalar> TreeBuilder<'_, F> {
    fn leaf(&self, rows: &[u32]) -> Node<F> {
        let sum: F = rows.iter().map(|&r| self.residual[r as usize]).sum();
        Node::Leaf { value: sum / F::from_usize_lossy(rows.len()) }
    }

    fn best_for_feature(&self, feature: usize, sorted: &[u32], total: F) -> Option<Split<F>> {
        let n = sorted.len();
        let col = &self.cols[feature];
        let nf = F::from_usize_lossy(n);
        let parent = total * total / nf;
        let mut left_sum = F::zero();
        let mut best: Option<Split<F>> = None;
        for p in 1..n {
            left_sum = left_sum + self.residual[sorted[p - 1] as usize];
            if p < self.min_leaf || n - p < self.min_leaf {
                continue;
            }
            let (lo, hi) = (col[sorted[p - 1] as usize], col[sorted[p] as usize]);
            if lo >= hi {
                continue;
            }
            let right_sum = total - left_sum;
            let (nl, nr) = (F::from_usize_lossy(p), F::from_usize_lossy(n - p));
            let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                let mut threshold = lo + (hi - lo) / F::lit(2.0);
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Split { gain, feature, position: p, threshold });
            }
        }
        best
    }

    /// `sorted[f]` lists this node's rows ordered by feature `f`.
    fn build(&self, sorted: Vec<Vec<u32>>, depth_left: usize, mask: &mut [bool]) -> Node<F> {
        let rows = &sorted[0];
        if depth_left == 0 || rows.len() < 2 * self.min_leaf.max(1) {
            return self.leaf(rows);
        }
        let total: F = rows.iter().map(|&r| self.residual[r as usize]).sum();
        let candidates: Vec<Option<Split<F>>> =
            sorted.par_iter().enumerate().map(|(f, s)| self.best_for_feature(f, s, total)).collect();
        let mut best: Option<Split<F>> = None;
        for c in candidates.into_iter().flatten() {
            if best.as_ref().is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
        let Some(best) = best.filter(|b| b.gain > F::zero()) else {
            return self.leaf(rows);
        };

        for &r in &sorted[best.feature][..best.position] {
            mask[r as usize] = true;
        }
        let (left, right): (Vec<Vec<u32>>, Vec<Vec<u32>>) =
            sorted.iter().map(|s| s.iter().partition::<Vec<u32>, _>(|&&r| mask[r as usize])).unzip();
        for &r in &sorted[best.feature][..best.position] {
            mask[r as usize] = false;
        }
        drop(sorted);
        Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(self.build(left, depth_left - 1, mask)),
            right: Box::new(self.build(right, depth_left - 1, mask)),
        }
    }
}

/// Stagewise squared-error boosting with exact greedy splits.
pub fn gbdt_fit<F: Scalar>(train: &FeatureTable<F>, params: GbdtParams) -> Result<GbdtModel<F>> {
    let encoder = OneHotEncoder::fit(train);
    if encoder.width() == 0 {
        return Err(Error::Config("gradient boosting needs at least one feature column".into()));
    }
    let n = train.len();
    if n == 0 || n < params.min_leaf {
        return Err(Error::Data(format!("{n} training rows is below the minimum leaf size {}", params.min_leaf)));
    }
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
        return Err(Error::Range { what: "learning rate", detail: format!("{} not in (0, 1]", params.learning_rate) });
    }
    let cols = encoder.encode(train)?;
    let y = &train.target;
    let base = y.iter().copied().sum::<F>() / F::from_usize_lossy(n);
    let lr = F::lit(params.learning_rate);

    let presorted: Vec<Vec<u32>> = cols
        .iter()
        .map(|c| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| c[a as usize].partial_cmp(&c[b as usize]).unwrap_or(std::cmp::Ordering::Equal));
            idx
        })
        .collect();

    let mut pred = vec![base; n];
    let mut trace = vec![rmse(&pred, y)?];
    let mut trees = Vec::with_capacity(params.rounds);
    let mut mask = vec![false; n];
    for _ in 0..params.rounds {
        let residual: Vec<F> = y.iter().zip(&pred).map(|(&t, &p)| t - p).collect();
        let builder = TreeBuilder { cols: &cols, residual: &residual, min_leaf: params.min_leaf.max(1) };
        let tree = builder.build(presorted.clone(), params.depth, &mut mask);
        for (i, p) in pred.iter_mut().enumerate() {
            *p = *p + lr * tree.eval(&cols, i);
        }
        trace.push(rmse(&pred, y)?);
        trees.push(tree);
    }
    Ok(GbdtModel { encoder, base_prediction: base, learning_rate: lr, trees, params, train_rmse: trace })
}

/// `base + learning_rate · Σ tree(row)` for each row.
pub fn gbdt_predict<F: Scalar>(model: &GbdtModel<F>, rows: &FeatureTable<F>) -> Result<Vec<F>> {
    let cols = model.encoder.encode(rows)?;
    Ok((0..rows.len())
        .into_par_iter()
        .map(|i| {
            let sum: F = model.trees.iter().map(|t| t.eval(&cols, i)).sum();
            model.base_prediction + model.learning_rate * sum
        })
        .collect())
}
