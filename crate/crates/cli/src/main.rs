use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use loyalty_topo::ingest::bucketize;
use loyalty_topo::kshape::KShapeDocument;
use loyalty_topo::pipeline::{
    cluster_tda, cluster_ts_with, cutoff_period, emit_results_table, evaluate, observed_series, read_component_labels,
    render_barcode_svg_titled, render_centroid_lines, run_pipeline, write_report_csv, write_tda_artifacts,
    write_ts_artifacts, DatasetFormat, ReportRow, RunConfig,
};
use loyalty_topo::predict::{build_features, FeatureTable, Setting};
use loyalty_topo::rfm::{rfm_score, rfm_snapshot, write_scores_csv, write_series_csv, Component};
use loyalty_topo::tda::{read_barcodes_csv, Radius};
use loyalty_topo::{Error, Result};

const THREADS_VAR: &str = "LOYALTY_TOPO_THREADS";

/// Customer-loyalty segmentation: RFM scores, K-Shape and topological
/// clustering of RFM series, and a boosted-tree comparison.
#[derive(Debug, Parser)]
#[command(name = "loyalty-topo", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Flags override the JSON config.
#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Transaction file.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["cdnow", "generic"])]
    format: Option<String>,
    /// Column mapping for the generic format, e.g. `id=cust,date=day,monetary=amt`.
    #[arg(long, global = true)]
    schema: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Train/test repeats per setting.
    #[arg(long, global = true)]
    repeats: Option<usize>,
    /// Comma-separated settings: NO_RFM, RFM, TS_RFM, TDA_RFM.
    #[arg(long, global = true, value_delimiter = ',')]
    settings: Option<Vec<String>>,
    /// Days per period.
    #[arg(long, global = true)]
    period_length: Option<u32>,
    /// Share of periods in the observation window.
    #[arg(long, global = true)]
    cutoff_fraction: Option<f64>,
    /// K-Shape cluster count.
    #[arg(long, global = true)]
    kshape_k: Option<usize>,
    /// Choose the K-Shape cluster count by elbow over 1..=k-max.
    #[arg(long, global = true)]
    kshape_elbow: bool,
    /// Largest k tried by the elbow sweep.
    #[arg(long, global = true)]
    k_max: Option<usize>,
    /// Delay-embedding dimension.
    #[arg(long, global = true)]
    tda_dim: Option<usize>,
    /// Delay-embedding lag.
    #[arg(long, global = true)]
    tda_delay: Option<usize>,
    /// Filtration radius; `diameter` or a positive number.
    #[arg(long, global = true)]
    max_radius: Option<String>,
    /// Homology dimensions used as features, e.g. `1` or `0,1`.
    #[arg(long, global = true, value_delimiter = ',')]
    homology_dims: Option<Vec<usize>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a transaction file and write it in the canonical CSV layout.
    Ingest,
    /// RFM scores at the cutoff and the per-period R/F/M series.
    Rfm,
    /// K-Shape clustering of each RFM series.
    ClusterTs,
    /// Persistent-homology features and elbow-selected K-means per series.
    ClusterTda,
    /// Repeated train/test evaluation of the boosted-tree model.
    Predict(PredictArgs),
    /// Full experiment over the requested settings.
    Run,
    /// Render figures from saved artifacts.
    #[command(subcommand)]
    Plot(PlotCommand),
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Prebuilt feature table; otherwise features are built from the dataset.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Label file from `cluster-ts`, needed for TS_RFM.
    #[arg(long)]
    ts_labels: Option<PathBuf>,
    /// Label file from `cluster-tda`, needed for TDA_RFM.
    #[arg(long)]
    tda_labels: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum PlotCommand {
    /// Barcode of one customer's series from a barcodes CSV.
    Barcode {
        #[arg(long)]
        barcodes: PathBuf,
        #[arg(long)]
        customer: String,
        #[arg(long, default_value = "R")]
        component: String,
        /// Axis extent for infinite bars; defaults to the largest finite death.
        #[arg(long)]
        cap: Option<f64>,
    },
    /// Centroids of a saved K-Shape model.
    Centroids {
        #[arg(long)]
        model: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return exit(&e);
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit(&e)
        }
    }
}

fn exit(e: &Error) -> ExitCode {
    ExitCode::from(e.exit_code() as u8)
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_VAR} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))
}

/// Config file (if any) with flag overrides applied.
fn merged_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &c.dataset {
        cfg.dataset = v.clone();
    }
    if let Some(v) = &c.format {
        cfg.format = v.parse()?;
    }
    if let Some(v) = &c.schema {
        cfg.schema = Some(loyalty_topo::ingest::GenericSchema::parse_mapping(v)?);
        cfg.format = DatasetFormat::Generic;
    }
    if let Some(v) = &c.out {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.repeats {
        cfg.repeats = v;
    }
    if let Some(list) = &c.settings {
        cfg.settings =
            list.iter().filter(|s| !s.trim().is_empty()).map(|s| s.parse::<Setting>()).collect::<Result<Vec<_>>>()?;
    }
    if let Some(v) = c.period_length {
        cfg.period_length = v;
    }
    if let Some(v) = c.cutoff_fraction {
        cfg.cutoff_fraction = v;
    }
    if let Some(v) = c.kshape_k {
        cfg.kshape_k = v;
    }
    if c.kshape_elbow {
        cfg.kshape_elbow = true;
    }
    if let Some(v) = &c.homology_dims {
        cfg.tda.homology_dims = v.clone();
    }
    if let Some(v) = c.k_max {
        cfg.elbow_k_max = v;
    }
    if let Some(v) = c.tda_dim {
        cfg.tda.dim = v;
    }
    if let Some(v) = c.tda_delay {
        cfg.tda.delay = v;
    }
    if let Some(v) = &c.max_radius {
        cfg.tda.max_radius = match v.as_str() {
            "diameter" => Radius::Diameter,
            r => Radius::Fixed(r.parse().map_err(|_| Error::Config(format!("bad --max-radius `{r}`")))?),
        };
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Command::Plot(plot) = &cli.command {
        return run_plot(plot, cli.common.out.as_deref());
    }
    let cfg = merged_config(&cli.common)?;
    if cfg.dataset.as_os_str().is_empty() && !matches!(&cli.command, Command::Predict(p) if p.features.is_some()) {
        return Err(Error::Config("no dataset given (use --dataset or a config file)".into()));
    }
    match cli.command {
        Command::Run => run(&cfg),
        Command::Predict(args) => predict(&cfg, &args),
        other => staged(&cfg, &other),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn run(cfg: &RunConfig) -> Result<()> {
    let report = run_pipeline(cfg)?;
    eprintln!("rejected: {} lines", report.rejected_lines);
    print!("{}", emit_results_table(&report.rows)?.text);
    for (name, ks) in [("K-Shape k", &report.chosen_k.ts), ("elbow k", &report.chosen_k.tda)] {
        if !ks.is_empty() {
            let parts: Vec<String> = ks.iter().map(|(c, k)| format!("{c}={k}")).collect();
            println!("{name}: {}", parts.join(" "));
        }
    }
    if let Some(beats) = report.structure_beats_rfm() {
        println!("info: TS/TDA RFM beats plain RFM: {}", if beats { "yes" } else { "no" });
    }
    println!("runtime: {:.1} s, output: {}", report.runtime_secs, cfg.out_dir.display());
    Ok(())
}

/// `ingest`, `rfm`, `cluster-ts` and `cluster-tda`.
fn staged(cfg: &RunConfig, command: &Command) -> Result<()> {
    cfg.validate()?;
    let parsed = cfg.load_dataset()?;
    eprintln!("{}", parsed.reject_summary());
    let log = &parsed.log;
    let out = cfg.out_dir.as_path();
    let grid = bucketize(log, cfg.period_length)?;
    let cutoff = || cutoff_period(grid.num_periods, cfg.cutoff_fraction);
    match command {
        Command::Ingest => {
            let path = out.join("transactions.csv");
            log.write_generic(create(&path)?)?;
            let (first, last) = log.horizon();
            println!(
                "transactions: {}, customers: {}, total monetary: {}, span: {first} to {last}, periods: {} of {} days",
                log.len(),
                log.customers().len(),
                log.total_monetary(),
                grid.num_periods,
                grid.period_length_days
            );
            println!("wrote {}", path.display());
        }
        Command::Rfm => {
            let cutoff = cutoff()?;
            let snapshot = rfm_snapshot(log, &grid, cutoff)?;
            let scores = rfm_score(&snapshot)?;
            write_scores_csv(&snapshot, &scores, create(&out.join("rfm_scores.csv"))?)?;
            let series = observed_series(log, &grid, cutoff)?;
            write_series_csv(&series, create(&out.join("rfm_series.csv"))?)?;
            println!("{} customers scored at period {cutoff} of {}", scores.len(), grid.num_periods);
            println!("wrote {} and {}", out.join("rfm_scores.csv").display(), out.join("rfm_series.csv").display());
        }
        Command::ClusterTs => {
            let series = observed_series(log, &grid, cutoff()?)?;
            let ts = cluster_ts_with(&series, cfg)?;
            write_ts_artifacts(&ts, out, cfg.figures)?;
            for (c, m) in &ts.models {
                println!("{c}: k={} inertia={:.6} sizes={:?}", m.k, m.inertia, m.cluster_sizes());
            }
        }
        Command::ClusterTda => {
            let series = observed_series(log, &grid, cutoff()?)?;
            let tda = cluster_tda(&series, &cfg.tda, cfg.elbow_k_max, cfg.seed)?;
            write_tda_artifacts(&tda, out, cfg.figures)?;
            for (c, m) in &tda.models {
                println!("{c}: elbow k={} inertia={:.6}", m.k, m.inertia);
            }
        }
        _ => unreachable!("handled in dispatch"),
    }
    Ok(())
}

fn predict(cfg: &RunConfig, args: &PredictArgs) -> Result<()> {
    let mut tables: Vec<(String, FeatureTable<f64>)> = Vec::new();
    if let Some(path) = &args.features {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let name = path.file_stem().map_or_else(|| "features".into(), |s| s.to_string_lossy().into_owned());
        tables.push((name, FeatureTable::read_csv(file)?));
    } else {
        cfg.validate()?;
        let parsed = cfg.load_dataset()?;
        eprintln!("{}", parsed.reject_summary());
        let grid = bucketize(&parsed.log, cfg.period_length)?;
        let cutoff = cutoff_period(grid.num_periods, cfg.cutoff_fraction)?;
        let load = |p: &Option<PathBuf>| -> Result<_> {
            p.as_ref().map(|p| File::open(p).map_err(|e| io_err(p, e)).and_then(read_component_labels)).transpose()
        };
        let (ts, tda) = (load(&args.ts_labels)?, load(&args.tda_labels)?);
        for &s in &cfg.settings {
            let table = build_features(&parsed.log, &grid, cutoff, s, ts.as_ref(), tda.as_ref())?;
            tables.push((cfg.dataset_name(), table));
        }
    }
    let mut rows = Vec::new();
    for (dataset, table) in &tables {
        let runs = evaluate(table, cfg)?;
        let mean = runs.iter().sum::<f64>() / runs.len() as f64;
        let std = (runs.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / runs.len() as f64).sqrt();
        rows.push(ReportRow {
            dataset: dataset.clone(),
            setting: table.setting,
            rmse_mean: mean,
            rmse_std: std,
            repeats: runs.len(),
        });
    }
    let out = cfg.out_dir.as_path();
    write_report_csv(&rows, create(&out.join("report.csv"))?)?;
    let table = emit_results_table(&rows)?;
    create(&out.join("results.txt"))?.write_all(table.text.as_bytes()).map_err(|e| io_err(out, e))?;
    print!("{}", table.text);
    Ok(())
}

fn run_plot(plot: &PlotCommand, out: Option<&Path>) -> Result<()> {
    let out = out.unwrap_or(Path::new("."));
    let (path, svg) = match plot {
        PlotCommand::Barcode { barcodes, customer, component, cap } => {
            let comp = Component::from_code(component)
                .ok_or_else(|| Error::Config(format!("component must be R, F or M, got `{component}`")))?;
            let file = File::open(barcodes).map_err(|e| io_err(barcodes, e))?;
            let all = read_barcodes_csv::<f64, _>(file)?;
            let (_, _, bc) = all
                .into_iter()
                .find(|(id, c, _)| id == customer && c == comp.code())
                .ok_or_else(|| Error::Data(format!("no {comp} barcode for customer `{customer}`")))?;
            let cap = cap.unwrap_or_else(|| bc.max_finite());
            let title = format!("{comp} barcode, customer {customer}");
            (out.join(format!("barcode_{customer}_{}.svg", comp.code())), render_barcode_svg_titled(&bc, cap, &title))
        }
        PlotCommand::Centroids { model } => {
            let file = File::open(model).map_err(|e| io_err(model, e))?;
            let doc: KShapeDocument<f64> =
                serde_json::from_reader(file).map_err(|e| Error::Data(format!("{}: {e}", model.display())))?;
            let stem = model.file_stem().map_or_else(|| "kshape".into(), |s| s.to_string_lossy().into_owned());
            let title = format!("centroids (K-Shape, k={})", doc.k);
            (
                out.join(format!("{stem}_centroids.svg")),
                render_centroid_lines(&doc.centroids, &doc.cluster_sizes(), &title),
            )
        }
    };
    create(&path)?.write_all(svg.as_bytes()).map_err(|e| io_err(&path, e))?;
    println!("wrote {}", path.display());
    Ok(())
}
