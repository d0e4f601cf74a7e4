#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use chrono::{Duration, NaiveDate};
use loyalty_topo::ingest::{parse_cdnow, Transaction, TransactionLog};
use loyalty_topo::tda::PointCloud;
use loyalty_topo::Money;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn cdnow_fixture() -> PathBuf {
    data_path("cdnow_synth.txt")
}

pub fn cdnow_log() -> TransactionLog {
    let file = std::fs::File::open(cdnow_fixture()).expect("fixture present");
    parse_cdnow(file).expect("fixture parses").log
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform points in the unit cube.
pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> PointCloud<f64> {
    PointCloud::new((0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()).unwrap()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Connected components of the graph joining points at distance `<= r`,
/// by depth-first search.
pub fn components_within(cloud: &PointCloud<f64>, r: f64) -> usize {
    let pts = cloud.points();
    let n = pts.len();
    let mut seen = vec![false; n];
    let mut count = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if !seen[v] && euclid(&pts[u], &pts[v]) <= r {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    count
}

/// Gaussian blobs around the given centers, `per` points each.
pub fn blobs(centers: &[[f64; 2]], per: usize, sd: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng(seed);
    let noise = Normal::new(0.0, sd).unwrap();
    centers
        .iter()
        .flat_map(|c| {
            (0..per).map(|_| vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]).collect::<Vec<_>>()
        })
        .collect()
}

/// 30 noisy sinusoids followed by 30 noisy square waves: length 128,
/// 16 cycles, each with a random phase and amplitude. Returns the series
/// and the true class of each.
///
/// With short cycles any phase offset is undone by a shift of at most
/// half a period, so zero padding costs little overlap and shape rather
/// than phase dominates the distance.
pub fn sinusoid_vs_square(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = rng(seed);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let (len, cycles) = (128, 16.0);
    let mut series = Vec::new();
    let mut truth = Vec::new();
    for class in 0..2 {
        for _ in 0..30 {
            let phase = rng.random_range(0.0..2.0 * PI);
            let amp = rng.random_range(1.0..3.0);
            let s = (0..len)
                .map(|t| {
                    let x = 2.0 * PI * cycles * t as f64 / len as f64 + phase;
                    let base = if class == 0 { x.sin() } else { x.sin().signum() };
                    amp * base + noise.sample(&mut rng)
                })
                .collect();
            series.push(s);
            truth.push(class);
        }
    }
    (series, truth)
}

/// Share of pairs on which two labelings agree about being together.
pub fn rand_index(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let mut agree = 0usize;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            pairs += 1;
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / pairs as f64
}

/// Exhaustive normalized cross-correlation distance over all zero-padded
/// shifts, written directly from the definition.
pub fn sbd_brute(x: &[f64], y: &[f64]) -> f64 {
    let z = |v: &[f64]| {
        let n = v.len() as f64;
        let mu = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|a| (a - mu) * (a - mu)).sum::<f64>() / n).sqrt();
        if sd == 0.0 {
            vec![0.0; v.len()]
        } else {
            v.iter().map(|a| (a - mu) / sd).collect::<Vec<_>>()
        }
    };
    let (x, y) = (z(x), z(y));
    let norm = (x.iter().map(|a| a * a).sum::<f64>() * y.iter().map(|a| a * a).sum::<f64>()).sqrt();
    if norm == 0.0 {
        return 1.0;
    }
    let l = x.len() as isize;
    let mut best = f64::NEG_INFINITY;
    for s in -(l - 1)..l {
        let mut cc = 0.0;
        for i in 0..l {
            let j = i - s;
            if (0..l).contains(&j) {
                cc += x[i as usize] * y[j as usize];
            }
        }
        best = best.max(cc / norm);
    }
    (1.0 - best).clamp(0.0, 2.0)
}

/// A single purchase `day` days into 2020.
pub fn tx(id: &str, day: i64, cents: i64) -> Transaction {
    Transaction {
        customer_id: id.to_string(),
        date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + Duration::days(day),
        quantity: 1,
        monetary: Money::from_cents(cents),
    }
}

/// Two customers with identical point RFM values but opposite purchase
/// histories: A buys heavily early and tapers off, B starts small and
/// grows. Both finish with a purchase in the last week, four purchases
/// and the same total, among eight lighter filler customers.
pub fn two_faces() -> TransactionLog {
    let mut txs = vec![
        tx("A", 0, 40_00),
        tx("A", 7, 30_00),
        tx("A", 14, 20_00),
        tx("A", 62, 10_00),
        tx("B", 35, 10_00),
        tx("B", 42, 20_00),
        tx("B", 49, 30_00),
        tx("B", 62, 40_00),
    ];
    for (i, id) in ["c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8"].iter().enumerate() {
        let i = i as i64;
        txs.push(tx(id, 3 + i, 5_00 + i * 100));
        if i % 2 == 0 {
            txs.push(tx(id, 20 + i, 3_00));
        }
    }
    TransactionLog::new(txs).unwrap()
}
