//! End-to-end experiment: ingest, RFM, the two clustering variants and the
//! boosted-tree comparison, plus report and figure output.

mod config;
mod report;
mod run;
mod svg;

pub use config::{cutoff_period, load_dataset, DatasetFormat, RunConfig, TdaConfig};
pub use report::{
    emit_results_table, format_rmse, read_report_csv, write_report_csv, ChosenK, ReportRow, ResultsTable, RunReport,
};
pub use run::{
    artifact_paths, cluster_tda, cluster_ts, cluster_ts_elbow, cluster_ts_with, evaluate, observed_series,
    read_component_labels, run_pipeline, series_barcode, write_component_labels, write_tda_artifacts,
    write_ts_artifacts, TdaClustering, TsClustering,
};
pub use svg::{render_barcode_svg, render_barcode_svg_titled, render_centroid_lines, render_centroids_svg};
