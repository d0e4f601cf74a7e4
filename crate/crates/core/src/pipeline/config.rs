use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{self, GenericSchema, Parsed};
use crate::predict::{GbdtParams, Setting};
use crate::tda::Radius;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    #[default]
    Cdnow,
    Generic,
}

impl std::str::FromStr for DatasetFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cdnow" => Ok(DatasetFormat::Cdnow),
            "generic" => Ok(DatasetFormat::Generic),
            other => Err(Error::Config(format!("unknown format `{other}` (expected cdnow or generic)"))),
        }
    }
}

/// Delay-embedding and filtration settings for the topological variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TdaConfig {
    pub dim: usize,
    pub delay: usize,
    pub max_radius: Radius<f64>,
    /// Homology dimensions whose barcode features feed K-means.
    pub homology_dims: Vec<usize>,
}

impl Default for TdaConfig {
    fn default() -> Self {
        TdaConfig { dim: 3, delay: 1, max_radius: Radius::Diameter, homology_dims: vec![0, 1] }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub dataset: PathBuf,
    /// Name used in the report; defaults to the dataset file stem.
    pub dataset_name: Option<String>,
    pub format: DatasetFormat,
    /// Column mapping for the generic format.
    pub schema: Option<GenericSchema>,
    pub period_length: u32,
    /// Share of periods in the observation window.
    pub cutoff_fraction: f64,
    pub kshape_k: usize,
    /// Pick the K-Shape `k` by elbow over `1..=elbow_k_max` instead.
    pub kshape_elbow: bool,
    pub kshape_max_iter: usize,
    pub tda: TdaConfig,
    pub elbow_k_max: usize,
    pub gbdt: GbdtParams,
    pub split_ratio: f64,
    pub seed: u64,
    pub repeats: usize,
    pub settings: Vec<Setting>,
    pub out_dir: PathBuf,
    /// Barcode figures written per component (one per TDA cluster).
    pub figures: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: PathBuf::new(),
            dataset_name: None,
            format: DatasetFormat::Cdnow,
            schema: None,
            period_length: 7,
            cutoff_fraction: 0.7,
            kshape_k: 4,
            kshape_elbow: false,
            kshape_max_iter: 100,
            tda: TdaConfig::default(),
            elbow_k_max: 10,
            gbdt: GbdtParams::default(),
            split_ratio: 0.7,
            seed: 0,
            repeats: 5,
            settings: Setting::ALL.to_vec(),
            out_dir: PathBuf::from("out"),
            figures: true,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(file).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn dataset_name(&self) -> String {
        self.dataset_name.clone().unwrap_or_else(|| {
            self.dataset.file_stem().map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned())
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !self.dataset.exists() {
            return bad(format!("dataset `{}` does not exist", self.dataset.display()));
        }
        if !(self.cutoff_fraction > 0.0 && self.cutoff_fraction < 1.0) {
            return bad(format!("cutoff fraction {} not in (0, 1)", self.cutoff_fraction));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!("split ratio {} not in (0, 1)", self.split_ratio));
        }
        if self.period_length == 0 {
            return bad("period length must be at least 1 day".into());
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.settings.is_empty() {
            return bad("no settings requested".into());
        }
        if self.kshape_k == 0 || self.elbow_k_max == 0 {
            return bad("cluster counts must be at least 1".into());
        }
        if self.tda.dim < 2 || self.tda.delay == 0 {
            return bad(format!("embedding needs d >= 2 and tau >= 1, got d={} tau={}", self.tda.dim, self.tda.delay));
        }
        if self.tda.homology_dims.is_empty() || self.tda.homology_dims.iter().any(|&d| d > 1) {
            return bad("homology dims must be a non-empty subset of {0, 1}".into());
        }
        Ok(())
    }

    /// Parses the dataset named by this config.
    pub fn load_dataset(&self) -> Result<Parsed> {
        load_dataset(&self.dataset, self.format, self.schema.as_ref())
    }
}

pub fn load_dataset(path: &Path, format: DatasetFormat, schema: Option<&GenericSchema>) -> Result<Parsed> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        DatasetFormat::Cdnow => ingest::parse_cdnow(file),
        DatasetFormat::Generic => ingest::parse_generic(file, &schema.cloned().unwrap_or_default()),
    }
}

/// Observation window length: `round(fraction · n)`, kept within
/// `1..=n-1` so the target horizon is never empty. Returns the index of
/// the last observed period.
pub fn cutoff_period(num_periods: usize, fraction: f64) -> Result<usize> {
    if num_periods < 2 {
        return Err(Error::Data(format!(
            "{num_periods} period(s) cannot be split into observation and target windows"
        )));
    }
    let observed = ((fraction * num_periods as f64).round() as usize).clamp(1, num_periods - 1);
    Ok(observed - 1)
}
