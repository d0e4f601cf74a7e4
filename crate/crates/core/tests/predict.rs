mod common;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, NaiveDate};
use loyalty_topo::ingest::bucketize;
use loyalty_topo::pipeline::cutoff_period;
use loyalty_topo::predict::{
    build_features, gbdt_fit, gbdt_predict, rmse, split, ComponentLabels, FeatureTable, GbdtParams, Setting,
    BASE_FEATURES,
};
use loyalty_topo::rfm::Component;
use loyalty_topo::Error;

/// Customer id, date and amount in cents straight from the raw fixture text.
fn raw_rows() -> Vec<(String, NaiveDate, i64)> {
    std::fs::read_to_string(common::cdnow_fixture())
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            let date = NaiveDate::parse_from_str(f[1], "%Y%m%d").unwrap();
            let (units, frac) = f[3].split_once('.').unwrap();
            let cents = units.parse::<i64>().unwrap() * 100 + frac.parse::<i64>().unwrap();
            (f[0].to_string(), date, cents)
        })
        .collect()
}

/// Every observed customer in one cluster per component.
fn single_cluster(ids: &[String]) -> ComponentLabels {
    Component::ALL.iter().map(|&c| (c, ids.iter().map(|id| (id.clone(), 0)).collect())).collect()
}

/// Label by customer id parity, a stand-in for real cluster output.
fn parity_labels(ids: &[String]) -> ComponentLabels {
    Component::ALL
        .iter()
        .enumerate()
        .map(|(k, &c)| (c, ids.iter().enumerate().map(|(i, id)| (id.clone(), (i + k) % 3)).collect()))
        .collect()
}

fn fixture_tables() -> Vec<FeatureTable<f64>> {
    let log = common::cdnow_log();
    let grid = bucketize(&log, 7).unwrap();
    let cutoff = cutoff_period(grid.num_periods, 0.7).unwrap();
    let base: FeatureTable<f64> = build_features(&log, &grid, cutoff, Setting::NoRfm, None, None).unwrap();
    let labels = parity_labels(&base.customer_ids);
    Setting::ALL
        .iter()
        .map(|&s| build_features(&log, &grid, cutoff, s, Some(&labels), Some(&labels)).unwrap())
        .collect()
}

#[test]
fn target_is_the_spend_after_the_cutoff() {
    let log = common::cdnow_log();
    let grid = bucketize(&log, 7).unwrap();
    let cutoff = cutoff_period(grid.num_periods, 0.7).unwrap();
    let table: FeatureTable<f64> = build_features(&log, &grid, cutoff, Setting::NoRfm, None, None).unwrap();

    let rows = raw_rows();
    let origin = rows.iter().map(|r| r.1).min().unwrap();
    let boundary = origin + Duration::days(7 * (cutoff as i64 + 1));
    let observed: BTreeSet<&str> = rows.iter().filter(|r| r.1 < boundary).map(|r| r.0.as_str()).collect();
    let mut future: BTreeMap<&str, i64> = observed.iter().map(|&id| (id, 0)).collect();
    for (id, date, cents) in &rows {
        if *date >= boundary {
            if let Some(v) = future.get_mut(id.as_str()) {
                *v += cents;
            }
        }
    }

    assert_eq!(table.customer_ids, observed.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    for (id, y) in table.customer_ids.iter().zip(&table.target) {
        assert_eq!((y * 100.0).round() as i64, future[id.as_str()], "customer {id}");
    }
    let total: i64 = table.target.iter().map(|y| (y * 100.0).round() as i64).sum();
    assert_eq!(total, future.values().sum::<i64>());
}

#[test]
fn settings_extend_the_base_columns() {
    let tables = fixture_tables();
    let base = &tables[0];
    assert_eq!(base.numeric_names, BASE_FEATURES.map(String::from));
    assert!(base.categorical_names.is_empty());
    for t in &tables[1..] {
        assert_eq!(t.customer_ids, base.customer_ids);
        assert_eq!(t.target, base.target);
        assert_eq!(&t.numeric_names[..5], &base.numeric_names[..]);
        for (row, b) in t.numeric.iter().zip(&base.numeric) {
            assert_eq!(&row[..5], &b[..]);
        }
    }
    assert_eq!(tables[1].numeric_names.len(), 8);
    assert_eq!(tables[2].categorical_names, ["ts_r", "ts_f", "ts_m"]);
    assert_eq!(tables[3].categorical_names, ["tda_r", "tda_f", "tda_m"]);
}

#[test]
fn cluster_settings_need_all_three_label_maps() {
    let log = common::cdnow_log();
    let grid = bucketize(&log, 7).unwrap();
    let cutoff = cutoff_period(grid.num_periods, 0.7).unwrap();
    let base: FeatureTable<f64> = build_features(&log, &grid, cutoff, Setting::NoRfm, None, None).unwrap();
    let mut partial = single_cluster(&base.customer_ids);
    partial.remove(&Component::Monetary);

    let missing = build_features::<f64>(&log, &grid, cutoff, Setting::TsRfm, None, None);
    assert!(matches!(missing, Err(Error::Config(_))), "{missing:?}");
    let two = build_features::<f64>(&log, &grid, cutoff, Setting::TdaRfm, None, Some(&partial));
    assert!(matches!(two, Err(Error::Config(_))), "{two:?}");
}

#[test]
fn feature_csv_round_trips() {
    for table in fixture_tables() {
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let back: FeatureTable<f64> = FeatureTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, table);
    }
}

#[test]
fn training_error_never_rises_in_any_setting() {
    for table in fixture_tables() {
        let (train, test) = split(&table, 0.7, 3).unwrap();
        let model = gbdt_fit(&train, GbdtParams { rounds: 60, ..GbdtParams::default() }).unwrap();
        assert_eq!(model.train_rmse.len(), 61);
        for w in model.train_rmse.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{}: {:?}", table.setting, model.train_rmse);
        }
        let pred = gbdt_predict(&model, &test).unwrap();
        assert!(rmse(&pred, &test.target).unwrap().is_finite());
    }
}

#[test]
fn constant_target_is_reproduced_exactly() {
    let mut table = fixture_tables().swap_remove(3);
    for y in &mut table.target {
        *y = 42.5;
    }
    let model = gbdt_fit(&table, GbdtParams::default()).unwrap();
    for p in gbdt_predict(&model, &table).unwrap() {
        assert!((p - 42.5).abs() <= 1e-12, "{p}");
    }
}

#[test]
fn rmse_of_a_known_residual() {
    let r = rmse(&[0.0, 0.0, 0.0, 0.0], &[1.0, 1.0, 1.0, 3.0]).unwrap();
    assert!((r - 3f64.sqrt()).abs() < 1e-15);
    assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
}
