//! Two-shell Gaussian splatting.
//!
//! A scene is split into a distant background, modeled as Gaussians confined
//! to a spherical shell around the navigation area, and a nearby foreground
//! optimized afterwards on top of the frozen background.

pub mod envmap;
pub mod error;
pub mod ingest;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod render;
pub mod segmentation;
pub mod shell_init;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
