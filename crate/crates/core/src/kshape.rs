//! Shape-based time-series clustering.
//!
//! [`sbd`] compares two series by their best normalized cross-correlation
//! over all shifts, [`shape_extract`] computes a cluster centroid as the
//! dominant eigenvector of the aligned members' scatter matrix, and
//! [`kshape_fit`] alternates the two until the partition is stable.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{mean, pop_std, Scalar};

/// Equal-length series keyed by customer id.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMatrix<F> {
    rows: Vec<Vec<F>>,
    keys: Vec<String>,
}

impl<F: Scalar> SeriesMatrix<F> {
    pub fn new(keys: Vec<String>, rows: Vec<Vec<F>>) -> Result<Self> {
        if keys.len() != rows.len() {
            return Err(Error::Shape(format!("{} keys for {} rows", keys.len(), rows.len())));
        }
        if let Some(first) = rows.first() {
            if first.len() < 2 {
                return Err(Error::Shape(format!("series length {} is below 2", first.len())));
            }
            if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != first.len()) {
                return Err(Error::Shape(format!("row {i} has length {}, expected {}", r.len(), first.len())));
            }
        }
        Ok(SeriesMatrix { rows, keys })
    }

    /// Rows keyed `0..n` as strings.
    pub fn from_rows(rows: Vec<Vec<F>>) -> Result<Self> {
        let keys = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(keys, rows)
    }

    pub fn rows(&self) -> &[Vec<F>] {
        &self.rows
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn series_len(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

/// Zero mean, unit population standard deviation. Constant input maps to
/// the zero vector.
pub fn znorm<F: Scalar>(series: &[F]) -> Vec<F> {
    let mu = mean(series);
    let sd = pop_std(series, mu);
    if sd <= F::zero() || !sd.is_finite() {
        return vec![F::zero(); series.len()];
    }
    series.iter().map(|&v| (v - mu) / sd).collect()
}

fn sum_sq<F: Scalar>(xs: &[F]) -> F {
    xs.iter().map(|&v| v * v).sum()
}

/// Result of a shape-based comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment<F> {
    /// `1 - max NCC`, in `[0, 2]`.
    pub distance: F,
    /// Shift applied to `y`; positive moves it to the right.
    pub shift: isize,
    /// z-normalized `y` shifted by `shift`, zero padded to the input length.
    pub aligned: Vec<F>,
}

/// Shifts in tie-break order: 0, -1, 1, -2, 2, ...
fn shift_order(len: usize) -> impl Iterator<Item = isize> {
    let max = len as isize - 1;
    std::iter::once(0).chain((1..=max).flat_map(|s| [-s, s]))
}

/// `sum_i x[i] * y[i - s]` over the overlap.
fn cross_correlation<F: Scalar>(x: &[F], y: &[F], shift: isize) -> F {
    let len = x.len() as isize;
    let lo = shift.max(0);
    let hi = (len + shift).min(len);
    (lo..hi).map(|i| x[i as usize] * y[(i - shift) as usize]).sum()
}

fn shifted<F: Scalar>(y: &[F], shift: isize) -> Vec<F> {
    let len = y.len() as isize;
    (0..len)
        .map(|i| {
            let j = i - shift;
            if (0..len).contains(&j) {
                y[j as usize]
            } else {
                F::zero()
            }
        })
        .collect()
}

/// SBD on inputs that are already z-normalized, with their squared norms.
fn sbd_normalized<F: Scalar>(x: &[F], x_sq: F, y: &[F], y_sq: F) -> (F, isize) {
    let denom = (x_sq * y_sq).sqrt();
    if denom <= F::zero() {
        return (F::one(), 0);
    }
    let mut best = F::neg_infinity();
    let mut best_shift = 0;
    for s in shift_order(x.len()) {
        let cc = cross_correlation(x, y, s);
        if cc > best {
            best = cc;
            best_shift = s;
        }
    }
    let dist = F::one() - best / denom;
    (dist.max(F::zero()).min(F::lit(2.0)), best_shift)
}

/// Shape-based distance between `x` and `y`, with `y` aligned to `x`.
pub fn sbd<F: Scalar>(x: &[F], y: &[F]) -> Result<Alignment<F>> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("sbd inputs have lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Shape("sbd needs series of length at least 2".into()));
    }
    let xz = znorm(x);
    let yz = znorm(y);
    let (distance, shift) = sbd_normalized(&xz, sum_sq(&xz), &yz, sum_sq(&yz));
    Ok(Alignment { distance, shift, aligned: shifted(&yz, shift) })
}

fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn normalize<F: Scalar>(v: &mut [F]) -> F {
    let n = sum_sq(v).sqrt();
    if n > F::zero() {
        v.iter_mut().for_each(|x| *x = *x / n);
    }
    n
}

/// Dominant eigenvector of `sum_i a_i a_i^T` by power iteration.
fn leading_eigenvector<F: Scalar>(vectors: &[Vec<F>], len: usize) -> Option<Vec<F>> {
    // Dense scatter matrix; members outnumber the length in practice.
    let mut m = vec![F::zero(); len * len];
    for a in vectors {
        for i in 0..len {
            if a[i] == F::zero() {
                continue;
            }
            let row = &mut m[i * len..(i + 1) * len];
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = *cell + a[i] * a[j];
            }
        }
    }
    let matvec = |v: &[F]| -> Vec<F> { (0..len).map(|i| dot(&m[i * len..(i + 1) * len], v)).collect() };

    let mut v: Vec<F> = vec![F::zero(); len];
    for a in vectors {
        v.iter_mut().zip(a).for_each(|(x, &y)| *x = *x + y);
    }
    if normalize(&mut v) <= F::zero() {
        let col = (0..len).max_by(|&i, &j| m[i * len + i].partial_cmp(&m[j * len + j]).unwrap())?;
        if m[col * len + col] <= F::zero() {
            return None;
        }
        v = m[col * len..(col + 1) * len].to_vec();
        normalize(&mut v);
    }
    let tol = F::epsilon().sqrt() * F::lit(1e-2);
    for _ in 0..10_000 {
        let mut w = matvec(&v);
        if normalize(&mut w) <= F::zero() {
            return None;
        }
        let delta = w.iter().zip(&v).map(|(&a, &b)| (a - b) * (a - b)).sum::<F>().sqrt();
        v = w;
        if delta < tol {
            break;
        }
    }
    Some(v)
}

/// New centroid for `members`, each aligned to `reference` first. A zero
/// reference skips alignment.
pub fn shape_extract<F: Scalar>(members: &[&[F]], reference: &[F]) -> Vec<F> {
    let len = reference.len();
    if members.is_empty() {
        return vec![F::zero(); len];
    }
    let reference_is_zero = reference.iter().all(|&v| v == F::zero());
    let ref_z = znorm(reference);
    let ref_sq = sum_sq(&ref_z);
    let aligned: Vec<Vec<F>> = members
        .iter()
        .map(|m| {
            let mz = znorm(m);
            let a = if reference_is_zero {
                mz
            } else {
                let (_, s) = sbd_normalized(&ref_z, ref_sq, &mz, sum_sq(&mz));
                shifted(&mz, s)
            };
            // Re-normalize after zero padding, then center (the Q projection).
            let mut a = znorm(&a);
            let mu = mean(&a);
            a.iter_mut().for_each(|x| *x = *x - mu);
            a
        })
        .collect();

    let Some(v) = leading_eigenvector(&aligned, len) else {
        return vec![F::zero(); len];
    };
    let centroid = znorm(&v);
    let cost = |sign: F| -> F {
        aligned.iter().map(|a| a.iter().zip(&centroid).map(|(&x, &c)| (x - sign * c) * (x - sign * c)).sum::<F>()).sum()
    };
    if cost(-F::one()) < cost(F::one()) {
        centroid.iter().map(|&c| -c).collect()
    } else {
        centroid
    }
}

/// Fitted K-Shape partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KShapeModel<F> {
    pub k: usize,
    pub seed: u64,
    pub centroids: Vec<Vec<F>>,
    pub labels: Vec<usize>,
    pub row_keys: Vec<String>,
    /// Sum of member distances to their own centroid.
    pub inertia: F,
    pub iterations_run: usize,
    /// Inertia after each iteration.
    pub inertia_trace: Vec<F>,
}

/// JSON document written for a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KShapeDocument<F> {
    pub k: usize,
    pub seed: u64,
    pub inertia: F,
    pub iterations_run: usize,
    pub centroids: Vec<Vec<F>>,
    pub labels: BTreeMap<String, usize>,
}

impl<F: Scalar + Serialize> KShapeModel<F> {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn labels_by_key(&self) -> BTreeMap<String, usize> {
        self.row_keys.iter().cloned().zip(self.labels.iter().copied()).collect()
    }

    pub fn to_document(&self) -> KShapeDocument<F> {
        KShapeDocument {
            k: self.k,
            seed: self.seed,
            inertia: self.inertia,
            iterations_run: self.iterations_run,
            centroids: self.centroids.clone(),
            labels: self.labels_by_key(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }
}

impl<F: Scalar> KShapeDocument<F> {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in self.labels.values() {
            if l < self.k {
                sizes[l] += 1;
            }
        }
        sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KShapeParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for KShapeParams {
    fn default() -> Self {
        KShapeParams { k: 4, seed: 0, max_iter: 100 }
    }
}

struct Prepared<F> {
    z: Vec<Vec<F>>,
    sq: Vec<F>,
}

impl<F: Scalar> Prepared<F> {
    fn distance(&self, centroid: &[F], centroid_sq: F, row: usize) -> F {
        sbd_normalized(centroid, centroid_sq, &self.z[row], self.sq[row]).0
    }
}

/// Clusters the rows of `data` into `params.k` shape clusters.
pub fn kshape_fit<F: Scalar>(data: &SeriesMatrix<F>, params: KShapeParams) -> Result<KShapeModel<F>> {
    let n = data.len();
    let k = params.k;
    if k == 0 {
        return Err(Error::Range { what: "cluster count", detail: "k must be at least 1".into() });
    }
    if n < k {
        return Err(Error::Range { what: "cluster count", detail: format!("k = {k} exceeds {n} series") });
    }
    let len = data.series_len();
    let prep = {
        let z: Vec<Vec<F>> = data.rows().iter().map(|r| znorm(r)).collect();
        let sq = z.iter().map(|r| sum_sq(r)).collect();
        Prepared { z, sq }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    let mut centroids = vec![vec![F::zero(); len]; k];
    // Distance of each row to its own centroid; a zero centroid is at 1.
    let mut own = vec![F::one(); n];
    repair_empty(&prep, &mut labels, &mut centroids, &mut own, k);

    let mut trace = Vec::new();
    let mut iterations_run = 0;
    for _ in 0..params.max_iter.max(1) {
        let prev = labels.clone();

        let refined: Vec<Vec<F>> = (0..k)
            .into_par_iter()
            .map(|j| {
                let members: Vec<usize> = (0..n).filter(|&i| labels[i] == j).collect();
                if members.is_empty() {
                    return centroids[j].clone();
                }
                let rows: Vec<&[F]> = members.iter().map(|&i| data.rows()[i].as_slice()).collect();
                let candidate = shape_extract(&rows, &centroids[j]);
                let cand_sq = sum_sq(&candidate);
                let new_cost: F = members.iter().map(|&i| prep.distance(&candidate, cand_sq, i)).sum();
                let old_cost: F = members.iter().map(|&i| own[i]).sum();
                // Keep the old centroid when the eigenvector step would not
                // lower the cluster's total distance.
                if new_cost <= old_cost {
                    candidate
                } else {
                    centroids[j].clone()
                }
            })
            .collect();
        centroids = refined;

        let sq: Vec<F> = centroids.iter().map(|c| sum_sq(c)).collect();
        let assigned: Vec<(usize, F)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut best = (0, F::infinity());
                for (j, c) in centroids.iter().enumerate() {
                    let d = prep.distance(c, sq[j], i);
                    if d < best.1 {
                        best = (j, d);
                    }
                }
                best
            })
            .collect();
        for (i, (j, d)) in assigned.into_iter().enumerate() {
            labels[i] = j;
            own[i] = d;
        }
        repair_empty(&prep, &mut labels, &mut centroids, &mut own, k);

        trace.push(own.iter().copied().sum::<F>());
        iterations_run += 1;
        if labels == prev {
            break;
        }
    }

    Ok(KShapeModel {
        k,
        seed: params.seed,
        centroids,
        labels,
        row_keys: data.keys().to_vec(),
        inertia: own.iter().copied().sum(),
        iterations_run,
        inertia_trace: trace,
    })
}

/// Moves the worst-fitting row of a multi-member cluster into each empty
/// cluster and makes it that cluster's centroid. Constant rows are only
/// used when nothing else is available.
fn repair_empty<F: Scalar>(
    prep: &Prepared<F>,
    labels: &mut [usize],
    centroids: &mut [Vec<F>],
    own: &mut [F],
    k: usize,
) {
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else { return };
        let pick = |allow_constant: bool| {
            (0..labels.len()).filter(|&i| sizes[labels[i]] > 1 && (allow_constant || prep.sq[i] > F::zero())).fold(
                None,
                |best: Option<usize>, i| match best {
                    Some(b) if own[b] >= own[i] => Some(b),
                    _ => Some(i),
                },
            )
        };
        let Some(row) = pick(false).or_else(|| pick(true)) else { return };
        labels[row] = empty;
        centroids[empty] = prep.z[row].clone();
        own[row] = prep.distance(&centroids[empty], prep.sq[row], row);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn znorm_examples() {
        assert_eq!(znorm(&[5.0, 5.0, 5.0]), vec![0.0, 0.0, 0.0]);
        let z = znorm(&[1.0, 2.0, 3.0]);
        let expect = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((z[0] + expect).abs() < 1e-12 && z[1].abs() < 1e-12 && (z[2] - expect).abs() < 1e-12);
        assert!((z[2] - 1.2247).abs() < 1e-4);
        let zz = znorm(&z);
        assert!(z.iter().zip(&zz).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn sbd_identity_is_zero_at_shift_zero() {
        let x = [0.3, -1.0, 2.5, 0.7, 0.1];
        let a = sbd(&x, &x).unwrap();
        assert_eq!(a.distance, 0.0);
        assert_eq!(a.shift, 0);
    }

    /// Brute force: z-normalize, zero-pad, try every shift.
    fn brute_sbd(x: &[f64], y: &[f64]) -> f64 {
        let zx = znorm(x);
        let zy = znorm(y);
        let l = x.len() as i64;
        let nx: f64 = zx.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny: f64 = zy.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut best = f64::NEG_INFINITY;
        for s in -(l - 1)..l {
            let mut padded = vec![0.0; x.len()];
            for i in 0..l {
                if (0..l).contains(&(i - s)) {
                    padded[i as usize] = zy[(i - s) as usize];
                }
            }
            best = best.max(zx.iter().zip(&padded).map(|(a, b)| a * b).sum::<f64>());
        }
        1.0 - best / (nx * ny)
    }

    #[test]
    fn sbd_impulse_example() {
        let x = [0.0, 1.0, 0.0];
        let y = [0.0, 0.0, 1.0];
        let a = sbd(&x, &y).unwrap();
        let oracle = brute_sbd(&x, &y);
        assert!((oracle - 1.0 / 6.0).abs() < 1e-12);
        assert!((a.distance - oracle).abs() < 1e-12);
        assert!((a.distance - 0.1667).abs() < 1e-3);
        assert_eq!(a.shift, -1);
        // The impulse of y now sits under the impulse of x.
        assert!(a.aligned[1] > a.aligned[0] && a.aligned[1] > a.aligned[2]);
    }

    #[test]
    fn sbd_length_mismatch() {
        assert!(matches!(sbd(&[1.0, 2.0], &[1.0, 2.0, 3.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn sbd_constant_input_is_one() {
        let a = sbd(&[2.0, 2.0, 2.0], &[1.0, 5.0, 2.0]).unwrap();
        assert_eq!(a.distance, 1.0);
    }

    #[test]
    fn shift_tie_prefers_small_negative() {
        assert_eq!(shift_order(3).collect::<Vec<_>>(), vec![0, -1, 1, -2, 2]);
    }

    #[test]
    fn shape_extract_single_and_duplicate_members() {
        let m: [f64; 5] = [1.0, 3.0, 2.0, 5.0, 4.0];
        let z = znorm(&m);
        for members in [vec![&m[..]], vec![&m[..], &m[..]]] {
            let c = shape_extract(&members, &[0.0; 5]);
            assert!(c.iter().zip(&z).all(|(a, b)| (a - b).abs() < 1e-6), "{c:?}");
            let c = shape_extract(&members, &z);
            assert!(c.iter().zip(&z).all(|(a, b)| (a - b).abs() < 1e-6), "{c:?}");
        }
    }

    #[test]
    fn kshape_single_cluster() {
        let rows = vec![vec![1.0, 2.0, 3.0, 2.0], vec![2.0, 3.0, 4.0, 3.5], vec![0.0, 1.0, 0.0, 1.0]];
        let data = SeriesMatrix::from_rows(rows.clone()).unwrap();
        let model = kshape_fit(&data, KShapeParams { k: 1, seed: 3, max_iter: 100 }).unwrap();
        assert_eq!(model.labels, vec![0, 0, 0]);
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let expect = shape_extract(&refs, &[0.0; 4]);
        let again = shape_extract(&refs, &expect);
        let close = |c: &[f64]| c.iter().zip(&model.centroids[0]).all(|(a, b)| (a - b).abs() < 1e-9);
        assert!(close(&expect) || close(&again));
    }

    #[test]
    fn kshape_rejects_too_many_clusters() {
        let data = SeriesMatrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(kshape_fit(&data, KShapeParams { k: 3, seed: 0, max_iter: 10 }).is_err());
    }

    #[test]
    fn series_matrix_validates_shape() {
        assert!(SeriesMatrix::from_rows(vec![vec![1.0f64]]).is_err());
        assert!(SeriesMatrix::from_rows(vec![vec![1.0f64, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn repair_fills_every_cluster() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| (0..8).map(|t| ((t * (i + 1)) as f64).sin()).collect()).collect();
        let data = SeriesMatrix::from_rows(rows).unwrap();
        let model = kshape_fit(&data, KShapeParams { k: 6, seed: 1, max_iter: 20 }).unwrap();
        assert!(model.cluster_sizes().iter().all(|&s| s == 1));
        assert!(model.inertia.abs() < 1e-9);
    }

    #[test]
    fn works_in_f32() {
        let a = sbd(&[0.0f32, 1.0, 0.0], &[0.0, 0.0, 1.0]).unwrap();
        assert!((a.distance - 1.0 / 6.0).abs() < 1e-5);
    }
}
