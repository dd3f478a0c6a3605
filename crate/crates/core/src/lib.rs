//! Hydrocarbon prospectivity mapping.
//!
//! The crate turns raw geological, geochemical and geophysical inputs into
//! normalized factor rasters, integrates them with a multilayer perceptron or
//! a first-order Sugeno ANFIS trained against known oil-field cells, and
//! validates the resulting potential maps with Pearson R, RMSE and Cohen's
//! kappa.
//!
//! # Raster convention
//!
//! Every [`raster::Grid`] stores its cells row-major with the **top** map row
//! first, exactly as they appear in an ESRI ASCII grid file. Cell `(0, 0)` is
//! the top-left (north-west) cell; row indices grow southwards and column
//! indices grow eastwards.

pub mod anfis;
pub mod error;
pub mod evaluate;
pub mod geochem;
pub mod geoprocess;
mod io;
mod linalg;
pub mod mlp;
pub mod model;
pub mod pipeline;
pub mod raster;

pub use error::{Error, Result};
pub use model::{predict_grid, Predictor, TrainedModel};
pub use raster::{Grid, GridHeader};

/// Toolkit version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
