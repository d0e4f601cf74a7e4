//! Persistent homology of delay-embedded series.
//!
//! The flow is [`delay_embed`] → [`rips_filtration`] → [`persistence`] →
//! [`barcode_features`]. [`h0_oracle`] recomputes the dimension-0 barcode
//! with a sorted-edge union-find so the matrix reduction can be checked
//! against an independent route.

mod barcode;
mod embed;
mod oracle;
mod reduce;
mod rips;

pub use barcode::{
    barcode_features, barcode_features_for, read_barcodes_csv, write_barcodes_csv, Bar, Barcode, PersistenceDiagram,
    TopoFeatureVector, FEATURES_PER_DIM,
};
pub use embed::{delay_embed, PointCloud};
pub use oracle::{h0_oracle, DisjointSet};
pub use reduce::{persistence, BoundaryMatrix};
pub use rips::{diameter, distance_matrix, rips_filtration, FilteredComplex, Radius, Simplex};
