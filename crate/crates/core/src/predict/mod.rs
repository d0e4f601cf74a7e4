//! Feature assembly for the four experimental settings, a squared-error
//! gradient-boosted tree regressor, and RMSE scoring.

mod features;
mod gbdt;
mod metrics;
mod split;

pub use features::{build_features, ComponentLabels, FeatureTable, Setting, BASE_FEATURES};
pub use gbdt::{gbdt_fit, gbdt_predict, GbdtModel, GbdtParams, Node, OneHotEncoder};
pub use metrics::rmse;
pub use split::{split, split_indices};
