//! Calibration diagnostics for spatial point process models.
//!
//! Pixel counts of an observed pattern are compared with their distribution
//! under a fitted model, either exactly (Poisson) or through ranks among
//! simulated replicates (Gibbs models).

pub mod calib;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod geometry;
pub mod io;
pub mod models;
pub mod registry;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod svg;

pub use error::{Error, Result};
pub use geometry::{pixel_counts, CountVector, PixelGrid, Point, PointPattern, Window};
pub use models::{Family, LogLinearIntensity, ModelParams, ModelSpec, Term};
pub use rng::{derive_seed, RngStream};
