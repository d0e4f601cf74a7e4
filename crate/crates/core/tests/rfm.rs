mod common;

use std::collections::BTreeMap;

use common::{two_faces, tx};
use loyalty_topo::ingest::{bucketize, Transaction, TransactionLog};
use loyalty_topo::rfm::{rfm_score, rfm_series, rfm_snapshot, RfmSnapshot};
use loyalty_topo::Money;
use proptest::prelude::*;

#[test]
fn equal_scores_can_hide_different_histories() {
    let log = two_faces();
    let grid = bucketize(&log, 7).unwrap();
    assert_eq!(grid.num_periods, 9);
    let cutoff = grid.num_periods - 1;
    let snapshot = rfm_snapshot(&log, &grid, cutoff).unwrap();
    assert_eq!(snapshot.customers["A"], snapshot.customers["B"]);
    let scores = rfm_score(&snapshot).unwrap();
    assert_eq!(scores["A"].composite(), 555);
    assert_eq!(scores["B"].composite(), 555);

    let series = rfm_series::<f64>(&log, &grid);
    let (a, b) = (&series["A"], &series["B"]);
    assert_ne!(a, b);
    assert_eq!(a.frequency, vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    assert_eq!(b.frequency, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
    assert_eq!(a.recency, vec![0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 0.0]);
    assert_eq!(b.recency, vec![1.0, 2.0, 3.0, 4.0, 5.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn ten_distinct_frequencies_fill_each_digit_twice() {
    let txs: Vec<Transaction> = (0..10).flat_map(|i| (0..=i).map(move |k| tx(&format!("cust{i}"), k, 100))).collect();
    let log = TransactionLog::new(txs).unwrap();
    let grid = bucketize(&log, 7).unwrap();
    let snapshot = rfm_snapshot(&log, &grid, grid.num_periods - 1).unwrap();
    let scores = rfm_score(&snapshot).unwrap();
    let mut per_digit = [0; 6];
    for s in scores.values() {
        per_digit[s.f as usize] += 1;
    }
    assert_eq!(per_digit, [0, 2, 2, 2, 2, 2]);
}

fn snapshot_strategy() -> impl Strategy<Value = RfmSnapshot> {
    prop::collection::vec((0u32..400, 1u32..30, 1i64..1_000_000), 1..60).prop_map(|rows| RfmSnapshot {
        cutoff_period: 0,
        customers: rows
            .into_iter()
            .enumerate()
            .map(|(i, (r, f, m))| {
                (
                    format!("{i:03}"),
                    loyalty_topo::rfm::RfmRecord { recency_days: r, frequency: f, monetary: Money::from_cents(m) },
                )
            })
            .collect(),
    })
}

proptest! {
    #[test]
    fn scores_survive_monotone_transforms(snapshot in snapshot_strategy()) {
        let before = rfm_score(&snapshot).unwrap();
        let mut squared = snapshot.clone();
        for rec in squared.customers.values_mut() {
            let c = rec.monetary.cents();
            rec.monetary = Money::from_cents(c * c);
            rec.recency_days = rec.recency_days * 3 + 7;
        }
        prop_assert_eq!(rfm_score(&squared).unwrap(), before);
    }

    #[test]
    fn digits_are_balanced(snapshot in snapshot_strategy()) {
        let n = snapshot.len();
        let scores = rfm_score(&snapshot).unwrap();
        let mut counts = [0usize; 6];
        for s in scores.values() {
            prop_assert!((1..=5).contains(&s.r) && (1..=5).contains(&s.f) && (1..=5).contains(&s.m));
            prop_assert!((111..=555).contains(&s.composite()));
            counts[s.m as usize] += 1;
        }
        // Distinct ranks make the digit histogram independent of the data.
        for (d, &count) in counts.iter().enumerate().skip(1) {
            let brute = (1..=n).filter(|&rank| (5 * rank).div_ceil(n) == d).count();
            prop_assert_eq!(count, brute);
        }
    }

    #[test]
    fn series_conserve_snapshot_totals(
        rows in prop::collection::vec((0u8..6, 0i64..120, 0i64..10_000), 1..60),
        len in 1u32..15,
    ) {
        let txs: Vec<Transaction> = rows.iter().map(|&(c, d, m)| tx(&format!("k{c}"), d, m)).collect();
        let log = TransactionLog::new(txs).unwrap();
        let grid = bucketize(&log, len).unwrap();
        let last = grid.num_periods - 1;
        let snapshot = rfm_snapshot(&log, &grid, last).unwrap();
        let series = rfm_series::<f64>(&log, &grid);
        let by_id: BTreeMap<_, _> = snapshot.customers.iter().collect();
        prop_assert_eq!(series.len(), by_id.len());
        for (id, s) in &series {
            let rec = by_id[id];
            prop_assert_eq!(s.frequency.iter().sum::<f64>(), f64::from(rec.frequency));
            let cents: f64 = s.monetary.iter().map(|v| (v * 100.0).round()).sum();
            prop_assert_eq!(cents, rec.monetary.cents() as f64);
            for t in 0..s.len() {
                prop_assert_eq!(s.recency[t] == 0.0, s.frequency[t] > 0.0);
                if t + 1 < s.len() && s.frequency[t + 1] == 0.0 {
                    prop_assert_eq!(s.recency[t + 1], s.recency[t] + 1.0);
                }
            }
        }
    }
}
