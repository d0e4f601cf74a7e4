//! K-means over barcode feature vectors, with elbow selection of `k`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sq_euclidean, Scalar};

/// Per-column z-scoring; zero-variance columns are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer<F> {
    pub input_dim: usize,
    pub kept: Vec<usize>,
    pub means: Vec<F>,
    pub stds: Vec<F>,
}

impl<F: Scalar> Standardizer<F> {
    pub fn fit(vectors: &[Vec<F>]) -> Result<Self> {
        let input_dim = vectors.first().map_or(0, Vec::len);
        if vectors.iter().any(|v| v.len() != input_dim) {
            return Err(Error::Shape("feature vectors of differing length".into()));
        }
        let n = F::from_usize_lossy(vectors.len().max(1));
        let (mut kept, mut means, mut stds) = (Vec::new(), Vec::new(), Vec::new());
        for c in 0..input_dim {
            let mu = vectors.iter().map(|v| v[c]).sum::<F>() / n;
            let var = vectors.iter().map(|v| (v[c] - mu) * (v[c] - mu)).sum::<F>() / n;
            let sd = var.sqrt();
            if sd > F::zero() && sd.is_finite() {
                kept.push(c);
                means.push(mu);
                stds.push(sd);
            }
        }
        Ok(Standardizer { input_dim, kept, means, stds })
    }

    pub fn transform(&self, v: &[F]) -> Vec<F> {
        self.kept.iter().enumerate().map(|(i, &c)| (v[c] - self.means[i]) / self.stds[i]).collect()
    }
}

/// Fitted K-means partition. Centroids live in standardized space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel<F> {
    pub k: usize,
    pub seed: u64,
    pub standardizer: Standardizer<F>,
    pub centroids: Vec<Vec<F>>,
    pub labels: Vec<usize>,
    /// Within-cluster sum of squared distances.
    pub inertia: F,
    pub iterations_run: usize,
    /// Inertia after each assignment step.
    pub inertia_trace: Vec<F>,
}

/// JSON document for a fitted model, labels keyed by customer id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansDocument<F> {
    pub k: usize,
    pub seed: u64,
    pub inertia: F,
    pub standardizer: Standardizer<F>,
    pub centroids: Vec<Vec<F>>,
    pub labels: BTreeMap<String, usize>,
}

impl<F: Scalar + Serialize> KMeansModel<F> {
    pub fn to_document(&self, keys: &[String]) -> Result<KMeansDocument<F>> {
        if keys.len() != self.labels.len() {
            return Err(Error::Shape(format!("{} keys for {} labels", keys.len(), self.labels.len())));
        }
        Ok(KMeansDocument {
            k: self.k,
            seed: self.seed,
            inertia: self.inertia,
            standardizer: self.standardizer.clone(),
            centroids: self.centroids.clone(),
            labels: keys.iter().cloned().zip(self.labels.iter().copied()).collect(),
        })
    }
}

fn nearest<F: Scalar>(x: &[F], centroids: &[Vec<F>]) -> (usize, F) {
    let mut best = (0, F::infinity());
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_euclidean(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn kmeans_pp<F: Scalar>(data: &[Vec<F>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<F>> {
    let n = data.len();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<F> = data.iter().map(|x| sq_euclidean(x, &data[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().map(|d| d.to_f64_lossy()).sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, d) in d2.iter().enumerate() {
                let w = d.to_f64_lossy();
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total weight")
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("n >= k")
        };
        chosen.push(next);
        for (i, x) in data.iter().enumerate() {
            d2[i] = d2[i].min(sq_euclidean(x, &data[next]));
        }
    }
    chosen.into_iter().map(|i| data[i].clone()).collect()
}

struct LloydResult<F> {
    centroids: Vec<Vec<F>>,
    labels: Vec<usize>,
    trace: Vec<F>,
}

/// Lloyd iterations from the given centroids until the assignment is a
/// fixed point or `max_iter` is reached.
fn lloyd<F: Scalar>(data: &[Vec<F>], mut centroids: Vec<Vec<F>>, max_iter: usize) -> LloydResult<F> {
    let n = data.len();
    let k = centroids.len();
    let dim = data.first().map_or(0, Vec::len);
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    for _ in 0..max_iter.max(1) {
        let assigned: Vec<(usize, F)> = data.par_iter().map(|x| nearest(x, &centroids)).collect();
        let mut new_labels: Vec<usize> = assigned.iter().map(|a| a.0).collect();
        let mut dists: Vec<F> = assigned.iter().map(|a| a.1).collect();

        // Reseed empty clusters with the point farthest from its centroid.
        loop {
            let mut sizes = vec![0usize; k];
            for &l in &new_labels {
                sizes[l] += 1;
            }
            let Some(empty) = sizes.iter().position(|&s| s == 0) else { break };
            let far = (0..n).filter(|&i| sizes[new_labels[i]] > 1).fold(None, |best: Option<usize>, i| match best {
                Some(b) if dists[b] >= dists[i] => Some(b),
                _ => Some(i),
            });
            let Some(far) = far else { break };
            centroids[empty] = data[far].clone();
            new_labels[far] = empty;
            dists[far] = F::zero();
        }

        trace.push(dists.iter().copied().sum());
        let stable = new_labels == labels;
        labels = new_labels;
        if stable {
            break;
        }
        let mut sums = vec![vec![F::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &l) in data.iter().zip(&labels) {
            counts[l] += 1;
            for (s, &v) in sums[l].iter_mut().zip(x) {
                *s = *s + v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let c = F::from_usize_lossy(counts[j]);
                centroids[j] = sums[j].iter().map(|&s| s / c).collect();
            }
        }
    }
    LloydResult { centroids, labels, trace }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Range { what: "cluster count", detail: "k must be at least 1".into() });
    }
    if n < k {
        return Err(Error::Range { what: "cluster count", detail: format!("k = {k} exceeds {n} vectors") });
    }
    Ok(())
}

fn finish<F: Scalar>(k: usize, seed: u64, standardizer: Standardizer<F>, run: LloydResult<F>) -> KMeansModel<F> {
    KMeansModel {
        k,
        seed,
        standardizer,
        inertia: run.trace.last().copied().unwrap_or_else(F::zero),
        iterations_run: run.trace.len(),
        centroids: run.centroids,
        labels: run.labels,
        inertia_trace: run.trace,
    }
}

/// Standardizes the columns, seeds with k-means++, then runs Lloyd.
pub fn kmeans_fit<F: Scalar>(vectors: &[Vec<F>], k: usize, seed: u64, max_iter: usize) -> Result<KMeansModel<F>> {
    check_k(vectors.len(), k)?;
    let standardizer = Standardizer::fit(vectors)?;
    let data: Vec<Vec<F>> = vectors.iter().map(|v| standardizer.transform(v)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = kmeans_pp(&data, k, &mut rng);
    Ok(finish(k, seed, standardizer, lloyd(&data, init, max_iter)))
}

pub const DEFAULT_MAX_ITER: usize = 300;

/// Fits every `k` in `1..=k_max` (capped at `n`). Each `k > 1` also tries
/// a warm start from the `k - 1` solution plus its farthest point, and
/// keeps the lower-inertia fit, so the curve never increases.
pub fn elbow_sweep<F: Scalar>(vectors: &[Vec<F>], k_max: usize, seed: u64) -> Result<Vec<KMeansModel<F>>> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::Range { what: "vector count", detail: format!("elbow needs at least 2 vectors, got {n}") });
    }
    let k_max = k_max.clamp(1, n);
    let standardizer = Standardizer::fit(vectors)?;
    let data: Vec<Vec<F>> = vectors.iter().map(|v| standardizer.transform(v)).collect();
    let mut models: Vec<KMeansModel<F>> = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let fresh = kmeans_fit(vectors, k, seed, DEFAULT_MAX_ITER)?;
        let chosen = match models.last() {
            None => fresh,
            Some(prev) => {
                let mut init = prev.centroids.clone();
                let far = data
                    .iter()
                    .enumerate()
                    .map(|(i, x)| (i, nearest(x, &init).1))
                    .fold((0, F::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best });
                init.push(data[far.0].clone());
                let warm = finish(k, seed, standardizer.clone(), lloyd(&data, init, DEFAULT_MAX_ITER));
                if warm.inertia < fresh.inertia {
                    warm
                } else {
                    fresh
                }
            }
        };
        models.push(chosen);
    }
    Ok(models)
}

/// Index (1-based `k`) of the point farthest from the chord joining the
/// first and last points of the curve, with inertia rescaled to `[0, 1]`.
/// Ties go to the smaller `k`.
pub fn elbow_choice<F: Scalar>(inertia: &[F]) -> usize {
    let kk = inertia.len();
    if kk <= 1 {
        return 1;
    }
    let lo = inertia.iter().copied().fold(F::infinity(), F::min);
    let hi = inertia.iter().copied().fold(F::neg_infinity(), F::max);
    let span = hi - lo;
    if span <= F::zero() {
        return 1;
    }
    let y: Vec<F> = inertia.iter().map(|&v| (v - lo) / span).collect();
    let (y1, yk) = (y[0], y[kk - 1]);
    let dx = F::from_usize_lossy(kk - 1);
    let dy = yk - y1;
    let norm = (dx * dx + dy * dy).sqrt();
    let mut best = (1, F::neg_infinity());
    for (i, &yi) in y.iter().enumerate() {
        let x = F::from_usize_lossy(i);
        let dist = (dy * x - dx * (yi - y1)).abs() / norm;
        if dist > best.1 {
            best = (i + 1, dist);
        }
    }
    best.0
}

/// Elbow choice of `k` over `1..=k_max`.
pub fn elbow_select<F: Scalar>(vectors: &[Vec<F>], k_max: usize, seed: u64) -> Result<usize> {
    let models = elbow_sweep(vectors, k_max, seed)?;
    let curve: Vec<F> = models.iter().map(|m| m.inertia).collect();
    Ok(elbow_choice(&curve))
}
