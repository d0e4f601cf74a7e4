use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::config::{cutoff_period, RunConfig, TdaConfig};
use super::report::{emit_results_table, write_report_csv, ChosenK, ReportRow, RunReport};
use super::svg::{render_barcode_svg_titled, render_centroid_lines};
use crate::cluster::{elbow_choice, elbow_sweep, KMeansModel};
use crate::error::{Error, Result};
use crate::ingest::{bucketize, PeriodGrid, TransactionLog};
use crate::kshape::{kshape_fit, KShapeModel, KShapeParams, SeriesMatrix};
use crate::predict::{build_features, gbdt_fit, gbdt_predict, rmse, split, ComponentLabels, FeatureTable, Setting};
use crate::rfm::{rfm_series, rfm_snapshot, Component, RfmSeries};
use crate::tda::{barcode_features_for, delay_embed, persistence, rips_filtration, write_barcodes_csv, Barcode};

/// Customers active in the observation window with their series cut to
/// periods `0..=cutoff`.
pub fn observed_series(
    log: &TransactionLog,
    grid: &PeriodGrid,
    cutoff: usize,
) -> Result<BTreeMap<String, RfmSeries<f64>>> {
    let snapshot = rfm_snapshot(log, grid, cutoff)?;
    let mut all = rfm_series::<f64>(log, grid);
    all.retain(|id, _| snapshot.customers.contains_key(id));
    Ok(all.into_iter().map(|(id, s)| (id, s.truncated(cutoff + 1))).collect())
}

/// One K-Shape partition per RFM component.
#[derive(Debug, Clone)]
pub struct TsClustering {
    pub models: BTreeMap<Component, KShapeModel<f64>>,
    /// Inertia for `k = 1..` when `k` was chosen by elbow; empty otherwise.
    pub elbow_curves: BTreeMap<Component, Vec<f64>>,
}

impl TsClustering {
    pub fn labels(&self) -> ComponentLabels {
        self.models.iter().map(|(&c, m)| (c, m.labels_by_key())).collect()
    }

    pub fn chosen_k(&self) -> BTreeMap<Component, usize> {
        self.models.iter().map(|(&c, m)| (c, m.k)).collect()
    }
}

/// K-Shape on each component; `k` is capped at the customer count.
pub fn cluster_ts(
    series: &BTreeMap<String, RfmSeries<f64>>,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<TsClustering> {
    let keys: Vec<String> = series.keys().cloned().collect();
    let models = Component::ALL
        .par_iter()
        .map(|&c| {
            let rows = series.values().map(|s| s.component(c).to_vec()).collect();
            let data = SeriesMatrix::new(keys.clone(), rows)?;
            let params = KShapeParams { k: k.min(data.len()), seed, max_iter };
            Ok((c, kshape_fit(&data, params)?))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(TsClustering { models, elbow_curves: BTreeMap::new() })
}

/// K-Shape on each component with `k` picked by elbow over
/// `1..=min(k_max, n)`.
pub fn cluster_ts_elbow(
    series: &BTreeMap<String, RfmSeries<f64>>,
    k_max: usize,
    seed: u64,
    max_iter: usize,
) -> Result<TsClustering> {
    let keys: Vec<String> = series.keys().cloned().collect();
    let fitted = Component::ALL
        .par_iter()
        .map(|&c| {
            let rows = series.values().map(|s| s.component(c).to_vec()).collect();
            let data = SeriesMatrix::new(keys.clone(), rows)?;
            let mut sweep = (1..=k_max.min(data.len()))
                .into_par_iter()
                .map(|k| kshape_fit(&data, KShapeParams { k, seed, max_iter }))
                .collect::<Result<Vec<_>>>()?;
            let curve: Vec<f64> = sweep.iter().map(|m| m.inertia).collect();
            let model = sweep.swap_remove(elbow_choice(&curve) - 1);
            Ok((c, model, curve))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = TsClustering { models: BTreeMap::new(), elbow_curves: BTreeMap::new() };
    for (c, model, curve) in fitted {
        out.models.insert(c, model);
        out.elbow_curves.insert(c, curve);
    }
    Ok(out)
}

/// K-Shape as configured: fixed `kshape_k`, or elbow-selected when
/// `kshape_elbow` is set.
pub fn cluster_ts_with(series: &BTreeMap<String, RfmSeries<f64>>, config: &RunConfig) -> Result<TsClustering> {
    if config.kshape_elbow {
        cluster_ts_elbow(series, config.elbow_k_max, config.seed, config.kshape_max_iter)
    } else {
        cluster_ts(series, config.kshape_k, config.seed, config.kshape_max_iter)
    }
}

/// Per-component barcodes, topological features and the elbow-selected
/// K-means partition.
#[derive(Debug, Clone)]
pub struct TdaClustering {
    pub keys: Vec<String>,
    /// Barcode and feature cap (the filtration radius) per customer.
    pub barcodes: BTreeMap<Component, Vec<(Barcode<f64>, f64)>>,
    pub features: BTreeMap<Component, Vec<Vec<f64>>>,
    pub feature_names: Vec<String>,
    /// Inertia for `k = 1..` from the elbow sweep.
    pub elbow_curves: BTreeMap<Component, Vec<f64>>,
    pub models: BTreeMap<Component, KMeansModel<f64>>,
}

impl TdaClustering {
    pub fn labels(&self) -> ComponentLabels {
        self.models
            .iter()
            .map(|(&c, m)| (c, self.keys.iter().cloned().zip(m.labels.iter().copied()).collect()))
            .collect()
    }

    pub fn chosen_k(&self) -> BTreeMap<Component, usize> {
        self.models.iter().map(|(&c, m)| (c, m.k)).collect()
    }
}

/// Barcode of the delay embedding of `series`, with the radius that
/// bounded the filtration.
pub fn series_barcode(series: &[f64], tda: &TdaConfig) -> Result<(Barcode<f64>, f64)> {
    let cloud = delay_embed(series, tda.dim, tda.delay)?.dedup();
    let complex = rips_filtration(&cloud, tda.max_radius)?;
    Ok((persistence(&complex), complex.max_radius))
}

pub fn cluster_tda(
    series: &BTreeMap<String, RfmSeries<f64>>,
    tda: &TdaConfig,
    k_max: usize,
    seed: u64,
) -> Result<TdaClustering> {
    let keys: Vec<String> = series.keys().cloned().collect();

    // Many customers share a series (e.g. a single early purchase), so
    // each distinct series is reduced once.
    let mut unique: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    let mut distinct: Vec<&[f64]> = Vec::new();
    let mut slot: BTreeMap<Component, Vec<usize>> = BTreeMap::new();
    for &c in &Component::ALL {
        let idx = series
            .values()
            .map(|s| {
                let v = s.component(c);
                let key: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
                *unique.entry(key).or_insert_with(|| {
                    distinct.push(v);
                    distinct.len() - 1
                })
            })
            .collect();
        slot.insert(c, idx);
    }
    let computed: Vec<(Barcode<f64>, f64)> =
        distinct.par_iter().map(|s| series_barcode(s, tda)).collect::<Result<_>>()?;

    let feature_names =
        crate::tda::TopoFeatureVector::<f64> { dims: tda.homology_dims.clone(), values: Vec::new() }.names();
    let mut barcodes = BTreeMap::new();
    let mut features = BTreeMap::new();
    let mut elbow_curves = BTreeMap::new();
    let mut models = BTreeMap::new();
    for &c in &Component::ALL {
        let bars: Vec<(Barcode<f64>, f64)> = slot[&c].iter().map(|&i| computed[i].clone()).collect();
        let vectors: Vec<Vec<f64>> =
            bars.iter().map(|(bc, cap)| barcode_features_for(bc, *cap, &tda.homology_dims).values).collect();
        let sweep = elbow_sweep(&vectors, k_max, seed)?;
        let curve: Vec<f64> = sweep.iter().map(|m| m.inertia).collect();
        let k = elbow_choice(&curve);
        models
            .insert(c, sweep.into_iter().nth(k - 1).ok_or_else(|| Error::Internal("elbow index out of range".into()))?);
        elbow_curves.insert(c, curve);
        barcodes.insert(c, bars);
        features.insert(c, vectors);
    }
    Ok(TdaClustering { keys, barcodes, features, feature_names, elbow_curves, models })
}

/// Test RMSE for each repeat: split with `seed + r`, fit, predict.
pub fn evaluate(table: &FeatureTable<f64>, config: &RunConfig) -> Result<Vec<f64>> {
    (0..config.repeats)
        .into_par_iter()
        .map(|r| {
            let seed = config.seed.wrapping_add(r as u64);
            let (train, test) = split(table, config.split_ratio, seed)?;
            let model = gbdt_fit(&train, crate::predict::GbdtParams { seed, ..config.gbdt })?;
            let pred = gbdt_predict(&model, &test)?;
            rmse(&pred, &test.target)
        })
        .collect()
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `customer_id,R,F,M` label file.
pub fn write_component_labels<W: Write>(labels: &ComponentLabels, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let comps: Vec<Component> = labels.keys().copied().collect();
    let mut header = vec!["customer_id".to_string()];
    header.extend(comps.iter().map(|c| c.code().to_string()));
    w.write_record(&header)?;
    let ids: Vec<&String> = labels.values().next().map(|m| m.keys().collect()).unwrap_or_default();
    for id in ids {
        let mut rec = vec![id.clone()];
        for c in &comps {
            let l = labels[c].get(id).ok_or_else(|| Error::Shape(format!("customer {id} has no {c} label")))?;
            rec.push(l.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<labels csv>", e))?;
    Ok(())
}

pub fn read_component_labels<R: Read>(reader: R) -> Result<ComponentLabels> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("customer_id") {
        return Err(Error::Data("label file must start with a customer_id column".into()));
    }
    let comps: Vec<Component> = header
        .iter()
        .skip(1)
        .map(|h| Component::from_code(h).ok_or_else(|| Error::Data(format!("unknown component column `{h}`"))))
        .collect::<Result<_>>()?;
    let mut out: ComponentLabels = comps.iter().map(|&c| (c, BTreeMap::new())).collect();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (j, c) in comps.iter().enumerate() {
            let l = rec[j + 1].parse().map_err(|_| Error::Line { line: i + 2, reason: format!("bad {c} label") })?;
            out.get_mut(c).expect("component present").insert(rec[0].to_string(), l);
        }
    }
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(contents.as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Writes K-Shape models, labels and centroid figures under `out`.
pub fn write_ts_artifacts(ts: &TsClustering, out: &Path, figures: bool) -> Result<()> {
    for (c, m) in &ts.models {
        write_file(&out.join(format!("models/kshape_{}.json", c.code())), &m.to_json()?)?;
        if figures {
            let title = format!("{c} centroids (K-Shape, k={})", m.k);
            write_file(
                &out.join(format!("figures/centroids_{}.svg", c.code())),
                &render_centroid_lines(&m.centroids, &m.cluster_sizes(), &title),
            )?;
        }
    }
    if !ts.elbow_curves.is_empty() {
        let mut w = csv::Writer::from_writer(create(&out.join("models/kshape_elbow.csv"))?);
        w.write_record(["component", "k", "inertia", "chosen"])?;
        for (c, curve) in &ts.elbow_curves {
            for (i, v) in curve.iter().enumerate() {
                let chosen = (ts.models[c].k == i + 1).to_string();
                w.write_record([c.code(), &(i + 1).to_string(), &v.to_string(), &chosen])?;
            }
        }
        w.flush().map_err(|e| Error::io("models/kshape_elbow.csv", e))?;
    }
    write_component_labels(&ts.labels(), create(&out.join("labels/ts_labels.csv"))?)
}

/// Writes barcodes, features, elbow curves, K-means models, labels and one
/// barcode figure per cluster under `out`.
pub fn write_tda_artifacts(tda: &TdaClustering, out: &Path, figures: bool) -> Result<()> {
    let rows = tda
        .barcodes
        .iter()
        .flat_map(|(c, bars)| tda.keys.iter().zip(bars).map(move |(id, (bc, _))| (id.as_str(), c.code(), bc)));
    write_barcodes_csv(rows, create(&out.join("tda/barcodes.csv"))?)?;

    let mut w = csv::Writer::from_writer(create(&out.join("tda/features.csv"))?);
    let mut header = vec!["customer_id".to_string(), "component".to_string()];
    header.extend(tda.feature_names.iter().cloned());
    w.write_record(&header)?;
    for (c, vectors) in &tda.features {
        for (id, v) in tda.keys.iter().zip(vectors) {
            let mut rec = vec![id.clone(), c.code().to_string()];
            rec.extend(v.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("tda/features.csv", e))?;

    let mut w = csv::Writer::from_writer(create(&out.join("tda/elbow.csv"))?);
    w.write_record(["component", "k", "inertia", "chosen"])?;
    for (c, curve) in &tda.elbow_curves {
        for (i, v) in curve.iter().enumerate() {
            let chosen = (tda.models[c].k == i + 1).to_string();
            w.write_record([c.code(), &(i + 1).to_string(), &v.to_string(), &chosen])?;
        }
    }
    w.flush().map_err(|e| Error::io("tda/elbow.csv", e))?;

    for (c, m) in &tda.models {
        let doc = m.to_document(&tda.keys)?;
        write_file(&out.join(format!("models/kmeans_{}.json", c.code())), &serde_json::to_string_pretty(&doc)?)?;
        if figures {
            // First customer (in id order) of each cluster as its exemplar.
            for j in 0..m.k {
                let Some(i) = m.labels.iter().position(|&l| l == j) else { continue };
                let (bc, cap) = &tda.barcodes[c][i];
                let title = format!("{c} barcode, cluster {j}, customer {}", tda.keys[i]);
                write_file(
                    &out.join(format!("figures/barcode_{}_cluster{j}.svg", c.code())),
                    &render_barcode_svg_titled(bc, *cap, &title),
                )?;
            }
        }
    }
    write_component_labels(&tda.labels(), create(&out.join("labels/tda_labels.csv"))?)
}

/// Runs the configured experiment end to end and writes every artifact to
/// `config.out_dir`.
pub fn run_pipeline(config: &RunConfig) -> Result<RunReport> {
    let started = Instant::now();
    config.validate()?;
    let dataset = config.dataset_name();
    let at = |stage: &'static str| {
        let dataset = dataset.clone();
        move |e: Error| e.in_stage(stage, &dataset)
    };

    let parsed = config.load_dataset().map_err(at("ingest"))?;
    let log = parsed.log;
    let grid = bucketize(&log, config.period_length).map_err(at("bucketize"))?;
    let cutoff = cutoff_period(grid.num_periods, config.cutoff_fraction).map_err(at("bucketize"))?;
    let series = observed_series(&log, &grid, cutoff).map_err(at("rfm"))?;

    let out = config.out_dir.as_path();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut echo = config.clone();
    echo.dataset = fs::canonicalize(&config.dataset).unwrap_or_else(|_| config.dataset.clone());
    write_file(&out.join("config.json"), &serde_json::to_string_pretty(&echo)?)?;

    let want = |s: Setting| config.settings.contains(&s);
    let (ts, tda) = rayon::join(
        || want(Setting::TsRfm).then(|| cluster_ts_with(&series, config)).transpose(),
        || {
            want(Setting::TdaRfm)
                .then(|| cluster_tda(&series, &config.tda, config.elbow_k_max, config.seed))
                .transpose()
        },
    );
    let ts = ts.map_err(at("cluster-ts"))?;
    let tda = tda.map_err(at("cluster-tda"))?;
    if let Some(ts) = &ts {
        write_ts_artifacts(ts, out, config.figures).map_err(at("cluster-ts"))?;
    }
    if let Some(tda) = &tda {
        write_tda_artifacts(tda, out, config.figures).map_err(at("cluster-tda"))?;
    }
    let ts_labels = ts.as_ref().map(TsClustering::labels);
    let tda_labels = tda.as_ref().map(TdaClustering::labels);

    let mut settings = config.settings.clone();
    settings.dedup();
    let results: Vec<(Setting, FeatureTable<f64>, Vec<f64>)> = settings
        .par_iter()
        .map(|&s| {
            let table = build_features(&log, &grid, cutoff, s, ts_labels.as_ref(), tda_labels.as_ref())?;
            let runs = evaluate(&table, config)?;
            Ok((s, table, runs))
        })
        .collect::<Result<_>>()
        .map_err(at("predict"))?;

    let mut rows = Vec::new();
    let mut rmse_runs = BTreeMap::new();
    for (s, table, runs) in &results {
        table.write_csv(create(&out.join(format!("features/{}.csv", s.code())))?)?;
        let (mean, std) = mean_std(runs);
        rows.push(ReportRow {
            dataset: dataset.clone(),
            setting: *s,
            rmse_mean: mean,
            rmse_std: std,
            repeats: runs.len(),
        });
        rmse_runs.insert(*s, runs.clone());
    }
    write_report_csv(&rows, create(&out.join("report.csv"))?)?;
    let table = emit_results_table(&rows)?;
    write_file(&out.join("results.csv"), &table.csv)?;
    write_file(&out.join("results.txt"), &table.text)?;

    let report = RunReport {
        rows,
        chosen_k: ChosenK {
            ts: ts.as_ref().map(TsClustering::chosen_k).unwrap_or_default(),
            tda: tda.as_ref().map(TdaClustering::chosen_k).unwrap_or_default(),
        },
        customers: series.len(),
        num_periods: grid.num_periods,
        cutoff_period: cutoff,
        rejected_lines: parsed.rejected.len(),
        rmse_runs,
        runtime_secs: started.elapsed().as_secs_f64(),
        config: echo,
    };
    write_file(&out.join("run.json"), &serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

/// Output paths produced by a run, relative to the output directory.
pub fn artifact_paths(out: &Path) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, root: &Path, acc: &mut Vec<PathBuf>) -> Result<()> {
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(&path, root, acc)?;
            } else if let Ok(rel) = path.strip_prefix(root) {
                acc.push(rel.to_path_buf());
            }
        }
        Ok(())
    }
    let mut acc = Vec::new();
    walk(out, out, &mut acc)?;
    acc.sort();
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tda::Radius;

    #[test]
    fn mean_std_population() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }

    #[test]
    fn labels_round_trip() {
        let mut labels = ComponentLabels::new();
        for c in Component::ALL {
            labels.insert(c, [("a".to_string(), 0), ("b".to_string(), c as usize)].into_iter().collect());
        }
        let mut buf = Vec::new();
        write_component_labels(&labels, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("customer_id,R,F,M\n"));
        assert_eq!(read_component_labels(buf.as_slice()).unwrap(), labels);
    }

    #[test]
    fn constant_series_has_single_point_barcode() {
        let (bc, cap) = series_barcode(&[2.0; 6], &TdaConfig::default()).unwrap();
        assert_eq!(cap, 0.0);
        assert_eq!(bc.h0().len(), 1);
        assert!(bc.h1().is_empty());
        let err = series_barcode(&[1.0, 2.0], &TdaConfig::default()).unwrap_err();
        assert!(err.to_string().contains("minimum length is 3"), "{err}");
        let fixed = TdaConfig { max_radius: Radius::Fixed(0.5), ..Default::default() };
        assert_eq!(series_barcode(&[0.0, 1.0, 0.0, 1.0], &fixed).unwrap().1, 0.5);
    }
}
