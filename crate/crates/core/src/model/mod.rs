//! Core scene types: Gaussian clouds, cameras, the background shell and
//! per-stage configuration.

pub mod camera;
pub mod cloud;
pub mod config;
pub mod ply;
pub mod rotation;
pub mod sh;

pub use camera::{Camera, CameraView, FloatMap, Image, Intrinsics, Mask, Pose};
pub use cloud::{logit, sigmoid, Activated, GaussianCloud, Group, Params, SceneShell};
pub use config::{LearningRates, StageConfig};
