//! Customer-loyalty segmentation from transaction logs.
//!
//! Three ways of summarizing a customer's purchase history feed a boosted
//! tree demand model:
//!
//! * quintile RFM scores ([`rfm`]),
//! * K-Shape clusters of the per-period R/F/M series ([`kshape`]),
//! * K-means clusters of persistent-homology features of the delay-embedded
//!   series ([`tda`], [`cluster`]).
//!
//! [`pipeline`] runs all of them end to end and writes the results table.
//! The numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`, which the pipeline uses.

pub mod cluster;
pub mod error;
pub mod ingest;
pub mod kshape;
pub mod money;
pub mod pipeline;
pub mod predict;
pub mod rfm;
pub mod scalar;
pub mod tda;

pub use error::{Error, Result};
pub use money::Money;
pub use scalar::Scalar;

pub type RfmSeries64 = rfm::RfmSeries<f64>;
pub type SeriesMatrix64 = kshape::SeriesMatrix<f64>;
pub type KShapeModel64 = kshape::KShapeModel<f64>;
pub type PointCloud64 = tda::PointCloud<f64>;
pub type FilteredComplex64 = tda::FilteredComplex<f64>;
pub type Barcode64 = tda::Barcode<f64>;
pub type TopoFeatureVector64 = tda::TopoFeatureVector<f64>;
pub type KMeansModel64 = cluster::KMeansModel<f64>;
pub type FeatureTable64 = predict::FeatureTable<f64>;
pub type GbdtModel64 = predict::GbdtModel<f64>;

pub type RfmSeries32 = rfm::RfmSeries<f32>;
pub type Barcode32 = tda::Barcode<f32>;
pub type KShapeModel32 = kshape::KShapeModel<f32>;
