use crate::error::{Error, Result};

/// Per-group Adam learning rates. Position rates are in scene units and are
/// multiplied by the stage's spatial scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningRates {
    pub position_init: f64,
    pub position_final: f64,
    pub rotation: f64,
    pub scale: f64,
    pub opacity: f64,
    pub sh_dc: f64,
    pub sh_rest: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        LearningRates {
            position_init: 1.6e-4,
            position_final: 1.6e-6,
            rotation: 1e-3,
            scale: 5e-3,
            opacity: 5e-2,
            sh_dc: 2.5e-3,
            sh_rest: 2.5e-3 / 20.0,
        }
    }
}

/// Settings for one optimization stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageConfig {
    pub lambda_shell: f64,
    pub lambda_planarity: f64,
    pub epsilon: f64,
    pub lambda_dssim: f64,
    pub iterations: usize,

    pub densify_from: usize,
    pub densify_until: usize,
    pub densify_interval: usize,
    /// Threshold on the mean NDC-space gradient norm of the projected mean.
    pub densify_grad_threshold: f64,
    /// Gaussians with max scale above `percent_dense * spatial_scale` are split, smaller ones cloned.
    pub percent_dense: f64,
    pub max_gaussians: usize,
    pub prune_interval: usize,
    pub opacity_prune_threshold: f64,
    /// Opacity reset period inside the densification window (0 disables).
    pub opacity_reset_interval: usize,

    pub lr: LearningRates,
    /// Scene-extent multiplier for the position learning rate and densify size test.
    pub spatial_scale: f64,
    pub background: [f64; 3],
    pub rng_seed: u64,
    /// Print a progress line every this many iterations (0 disables).
    pub log_interval: usize,
}

impl Default for StageConfig {
    fn default() -> Self {
        StageConfig {
            lambda_shell: 1.0,
            lambda_planarity: 0.01,
            epsilon: 1e-8,
            lambda_dssim: 0.2,
            iterations: 7000,
            densify_from: 500,
            densify_until: 5000,
            densify_interval: 100,
            densify_grad_threshold: 2e-4,
            percent_dense: 0.01,
            max_gaussians: 200_000,
            prune_interval: 100,
            opacity_prune_threshold: 0.005,
            opacity_reset_interval: 3000,
            lr: LearningRates::default(),
            spatial_scale: 1.0,
            background: [0.0; 3],
            rng_seed: 0,
            log_interval: 0,
        }
    }
}

impl StageConfig {
    /// Stage-2 defaults: photometric loss only.
    pub fn foreground() -> Self {
        StageConfig {
            lambda_shell: 0.0,
            lambda_planarity: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_shell < 0.0 || !self.lambda_shell.is_finite() {
            return Err(Error::NegativeWeight("lambda_shell"));
        }
        if self.lambda_planarity < 0.0 || !self.lambda_planarity.is_finite() {
            return Err(Error::NegativeWeight("lambda_planarity"));
        }
        if !(0.0..=1.0).contains(&self.lambda_dssim) {
            return Err(Error::Config(format!(
                "lambda_dssim must lie in [0, 1], got {}",
                self.lambda_dssim
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if self.densify_interval == 0 || self.prune_interval == 0 {
            return Err(Error::Config("densify/prune intervals must be positive".into()));
        }
        Ok(())
    }

    /// Exponentially decayed position learning rate at `step` (0-based).
    pub fn position_lr(&self, step: usize) -> f64 {
        let t = (step as f64 / self.iterations.max(1) as f64).clamp(0.0, 1.0);
        let lr = (self.lr.position_init.ln() * (1.0 - t) + self.lr.position_final.ln() * t).exp();
        lr * self.spatial_scale
    }

    /// Stable `key=value` rendering used for config hashing and metadata.
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("lambda_shell", self.lambda_shell.to_string()),
            ("lambda_planarity", self.lambda_planarity.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("lambda_dssim", self.lambda_dssim.to_string()),
            ("iterations", self.iterations.to_string()),
            ("densify_from", self.densify_from.to_string()),
            ("densify_until", self.densify_until.to_string()),
            ("densify_interval", self.densify_interval.to_string()),
            ("densify_grad_threshold", self.densify_grad_threshold.to_string()),
            ("percent_dense", self.percent_dense.to_string()),
            ("max_gaussians", self.max_gaussians.to_string()),
            ("prune_interval", self.prune_interval.to_string()),
            ("opacity_prune_threshold", self.opacity_prune_threshold.to_string()),
            ("opacity_reset_interval", self.opacity_reset_interval.to_string()),
            ("lr_position_init", self.lr.position_init.to_string()),
            ("lr_position_final", self.lr.position_final.to_string()),
            ("lr_rotation", self.lr.rotation.to_string()),
            ("lr_scale", self.lr.scale.to_string()),
            ("lr_opacity", self.lr.opacity.to_string()),
            ("lr_sh_dc", self.lr.sh_dc.to_string()),
            ("lr_sh_rest", self.lr.sh_rest.to_string()),
            ("spatial_scale", self.spatial_scale.to_string()),
            (
                "background",
                format!("{},{},{}", self.background[0], self.background[1], self.background[2]),
            ),
            ("rng_seed", self.rng_seed.to_string()),
        ];
        kv.sort();
        kv.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}
