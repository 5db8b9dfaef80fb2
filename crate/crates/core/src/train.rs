//! The two optimization stages.
//!
//! Stage 1 fits the background cloud to the background pixels of every view
//! under the shell and planarity regularizers. Stage 2 fits a foreground
//! cloud to the full images while the background is rendered jointly but
//! never updated.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::SparsePointCloud;
use crate::loss::{total_loss, LossBreakdown};
use crate::model::{logit, ply, rotation, CameraView, GaussianCloud, Group, Mask, SceneShell, StageConfig};
use crate::optim::Adam;
use crate::render::{render, render_backward};

/// Opacity assigned by a periodic opacity reset.
pub const RESET_OPACITY: f64 = 0.01;
/// Scale divisor applied to split children.
pub const SPLIT_SCALE_DIVISOR: f64 = 1.6;
pub const INITIAL_FOREGROUND_OPACITY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    Background,
    Foreground,
}

/// Removal counts of one prune (or totals over a run).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PruneReport {
    pub removed_by_visibility: usize,
    pub removed_by_opacity: usize,
    pub removed_by_radius: usize,
    /// Always zero: size-based pruning is not part of this pipeline.
    pub removed_by_size: usize,
}

impl PruneReport {
    pub fn total(&self) -> usize {
        self.removed_by_visibility + self.removed_by_opacity + self.removed_by_radius + self.removed_by_size
    }

    fn add(&mut self, o: &PruneReport) {
        self.removed_by_visibility += o.removed_by_visibility;
        self.removed_by_opacity += o.removed_by_opacity;
        self.removed_by_radius += o.removed_by_radius;
        self.removed_by_size += o.removed_by_size;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DensifyReport {
    pub cloned: usize,
    pub split: usize,
    /// Densification rounds skipped because the cloud would exceed its cap.
    pub skipped: usize,
}

/// One row of the loss log.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    pub iteration: usize,
    pub loss: LossBreakdown,
    pub n: usize,
}

/// Screen-space gradient statistics used to pick densification candidates.
#[derive(Debug, Clone, Default)]
pub struct GradStats {
    pub accum: Vec<f64>,
    pub count: Vec<u32>,
}

impl GradStats {
    pub fn new(n: usize) -> Self {
        GradStats {
            accum: vec![0.0; n],
            count: vec![0; n],
        }
    }

    pub fn mean(&self, i: usize) -> f64 {
        if self.count[i] == 0 {
            0.0
        } else {
            self.accum[i] / self.count[i] as f64
        }
    }

    fn retain(&mut self, keep: &[bool]) {
        let mut k = keep.iter();
        self.accum.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.count.retain(|_| *k.next().unwrap());
    }

    fn reset(&mut self, n: usize) {
        *self = GradStats::new(n);
    }
}

/// Clones small and splits large Gaussians whose mean screen-space gradient
/// reaches the threshold. With `clamp_to`, split children are projected
/// radially into the shell.
pub fn densify(
    cloud: &mut GaussianCloud,
    adam: &mut Adam,
    stats: &GradStats,
    config: &StageConfig,
    clamp_to: Option<&SceneShell>,
    rng: &mut ChaCha8Rng,
) -> DensifyReport {
    let n = cloud.len();
    let size_limit = config.percent_dense * config.spatial_scale;
    let mut clone = Vec::new();
    let mut split = Vec::new();
    for i in 0..n {
        if stats.mean(i) < config.densify_grad_threshold {
            continue;
        }
        if cloud.scales(i).max() > size_limit {
            split.push(i);
        } else {
            clone.push(i);
        }
    }
    let mut report = DensifyReport::default();
    if clone.is_empty() && split.is_empty() {
        return report;
    }
    if n + clone.len() + split.len() > config.max_gaussians {
        log::info!(
            "densify skipped: {} + {} clones + {} splits exceeds cap {}",
            n,
            clone.len(),
            split.len(),
            config.max_gaussians
        );
        report.skipped = 1;
        return report;
    }
    for &i in &clone {
        cloud.params.push_copy(i);
        cloud.visibility_counts.push(cloud.visibility_counts[i]);
        adam.push(None);
    }
    let shrink = SPLIT_SCALE_DIVISOR.ln();
    for &i in &split {
        let r = rotation::to_matrix(cloud.quaternion(i));
        let s = cloud.scales(i);
        let parent = cloud.position(i);
        // the first child takes the parent's slot, the second is appended
        cloud.params.push_copy(i);
        cloud.visibility_counts.push(cloud.visibility_counts[i]);
        adam.push(None);
        for slot in [i, cloud.len() - 1] {
            let z = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
            let mut p = parent + r * s.component_mul(&z);
            if let Some(shell) = clamp_to {
                p = shell.clamp(&p);
            }
            cloud.set_position(slot, p);
            for ax in 0..3 {
                cloud.params.log_scales[3 * slot + ax] -= shrink;
            }
        }
    }
    // the split parent's slot now holds a new Gaussian
    for &i in &split {
        adam.zero_slot(i);
    }
    report.cloned = clone.len();
    report.split = split.len();
    report
}

/// Applies the pruning rules and resets visibility counters.
///
/// Opacity below the threshold and a zero visibility count always prune;
/// `radius_limit` additionally removes Gaussians farther than `r_inner`
/// from the center. There is no size-based rule.
pub fn prune(
    cloud: &mut GaussianCloud,
    adam: &mut Adam,
    stats: Option<&mut GradStats>,
    opacity_threshold: f64,
    visibility: bool,
    radius_limit: Option<&SceneShell>,
) -> PruneReport {
    let mut report = PruneReport::default();
    let mut keep = vec![true; cloud.len()];
    for (i, k) in keep.iter_mut().enumerate() {
        if cloud.opacity(i) < opacity_threshold {
            report.removed_by_opacity += 1;
            *k = false;
        } else if visibility && cloud.visibility_counts[i] == 0 {
            report.removed_by_visibility += 1;
            *k = false;
        } else if let Some(shell) = radius_limit {
            if shell.radius_of(&cloud.position(i)) > shell.r_inner {
                report.removed_by_radius += 1;
                *k = false;
            }
        }
    }
    if report.total() > 0 {
        cloud.retain(&keep);
        adam.retain(&keep);
        if let Some(s) = stats {
            s.retain(&keep);
        }
    }
    cloud.reset_visibility();
    report
}

/// Foreground Gaussians from sparse points: isotropic scale from the RMS
/// distance to the three nearest neighbors, opacity 0.1, point colors.
pub fn init_foreground_cloud(points: &SparsePointCloud, sh_degree: usize) -> GaussianCloud {
    let n = points.len();
    let scales: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = [f64::INFINITY; 3];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d2 = (points.points[i] - points.points[j]).norm_squared();
                if d2 < best[2] {
                    best[2] = d2;
                    best.sort_by(f64::total_cmp);
                }
            }
            let found: Vec<f64> = best.iter().copied().filter(|v| v.is_finite()).collect();
            if found.is_empty() {
                return 0.01;
            }
            (found.iter().sum::<f64>() / found.len() as f64).sqrt().max(1e-7)
        })
        .collect();
    let mut cloud = GaussianCloud::empty(sh_degree);
    for i in 0..n {
        cloud.push(
            points.points[i],
            [1.0, 0.0, 0.0, 0.0],
            Vector3::repeat(scales[i].ln()),
            INITIAL_FOREGROUND_OPACITY,
            points.colors[i],
        );
    }
    cloud
}

/// Outcome of a full stage.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub cloud: GaussianCloud,
    pub log: Vec<LossRecord>,
    pub prune: PruneReport,
    pub densify: DensifyReport,
    pub iterations: usize,
}

struct TrainView<'a> {
    view: &'a CameraView,
    valid: Option<Mask>,
}

/// Step-wise optimizer for one stage.
pub struct Trainer<'a> {
    pub cloud: GaussianCloud,
    background: Option<&'a GaussianCloud>,
    views: Vec<TrainView<'a>>,
    shell: SceneShell,
    config: StageConfig,
    kind: StageKind,
    adam: Adam,
    stats: GradStats,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    iteration: usize,
    pub log: Vec<LossRecord>,
    pub prune_totals: PruneReport,
    pub densify_totals: DensifyReport,
    loss_csv: Option<BufWriter<File>>,
    dump_dir: Option<PathBuf>,
}

impl<'a> Trainer<'a> {
    /// Stage 1. Each view's background mask selects the pixels that enter
    /// the loss; views without background pixels are skipped.
    pub fn background(cloud: GaussianCloud, views: &'a [CameraView], shell: SceneShell, config: StageConfig) -> Result<Self> {
        let mut train_views = Vec::new();
        for v in views {
            v.validate()?;
            match &v.mask {
                Some(m) if m.count() == 0 => {
                    log::info!("view `{}` has no background pixels, skipped", v.name);
                }
                Some(m) => train_views.push(TrainView {
                    view: v,
                    valid: Some(m.clone()),
                }),
                None => train_views.push(TrainView { view: v, valid: None }),
            }
        }
        Self::new(cloud, None, train_views, shell, config, StageKind::Background)
    }

    /// Stage 2 over `background`, which must be flagged frozen.
    pub fn foreground(
        background: &'a GaussianCloud,
        cloud: GaussianCloud,
        views: &'a [CameraView],
        shell: SceneShell,
        config: StageConfig,
    ) -> Result<Self> {
        if !background.frozen {
            return Err(Error::Config("the background cloud must be frozen for stage 2".into()));
        }
        if background.is_empty() {
            log::warn!("background cloud is empty");
        }
        let mut train_views = Vec::new();
        for v in views {
            v.validate()?;
            train_views.push(TrainView { view: v, valid: None });
        }
        Self::new(cloud, Some(background), train_views, shell, config, StageKind::Foreground)
    }

    fn new(
        mut cloud: GaussianCloud,
        background: Option<&'a GaussianCloud>,
        views: Vec<TrainView<'a>>,
        shell: SceneShell,
        config: StageConfig,
        kind: StageKind,
    ) -> Result<Self> {
        config.validate()?;
        shell.validate()?;
        if views.is_empty() {
            return Err(Error::TooFewViews { found: 0, required: 1 });
        }
        if let Some(bg) = background {
            if bg.sh_degree() != cloud.sh_degree() && !bg.is_empty() && !cloud.is_empty() {
                log::debug!("background SH degree {} differs from foreground {}", bg.sh_degree(), cloud.sh_degree());
            }
        }
        cloud.frozen = false;
        cloud.reset_visibility();
        let n = cloud.len();
        Ok(Trainer {
            adam: Adam::new(&cloud),
            stats: GradStats::new(n),
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            order: Vec::new(),
            cursor: 0,
            iteration: 0,
            cloud,
            background,
            views,
            shell,
            config,
            kind,
            log: Vec::new(),
            prune_totals: PruneReport::default(),
            densify_totals: DensifyReport::default(),
            loss_csv: None,
            dump_dir: None,
        })
    }

    /// Appends one CSV row per iteration to `path`.
    pub fn with_loss_csv(mut self, path: &Path) -> Result<Self> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        writeln!(w, "iteration,l1,dssim,shell,planarity,total,n").map_err(|e| Error::io(path, e))?;
        self.loss_csv = Some(w);
        Ok(self)
    }

    /// Where to dump the cloud if the loss stops being finite.
    pub fn with_dump_dir(mut self, dir: &Path) -> Self {
        self.dump_dir = Some(dir.to_path_buf());
        self
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn config(&self) -> &StageConfig {
        &self.config
    }

    pub fn adam(&self) -> &Adam {
        &self.adam
    }

    fn next_view(&mut self) -> usize {
        if self.cursor >= self.order.len() {
            self.order = (0..self.views.len()).collect();
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }

    /// One iteration: render, loss, backward, Adam, then any scheduled
    /// densify, prune or opacity reset.
    pub fn step(&mut self) -> Result<LossBreakdown> {
        let it = self.iteration;
        let vi = self.next_view();
        let tv = &self.views[vi];
        let mut clouds: Vec<&GaussianCloud> = Vec::with_capacity(2);
        if let Some(bg) = self.background {
            clouds.push(bg);
        }
        clouds.push(&self.cloud);
        let trainable = clouds.len() - 1;
        let out = render(&clouds, &tv.view.camera, self.config.background)?;
        let geometry = match self.kind {
            StageKind::Background => Some((&self.cloud, &self.shell)),
            StageKind::Foreground => None,
        };
        let eval = total_loss(&out.image, &tv.view.image, tv.valid.as_ref(), geometry, &self.config)?;
        if !eval.breakdown.total.is_finite() {
            if let Some(dir) = &self.dump_dir {
                let path = dir.join(format!("diverged_{it}.ply"));
                if let Err(e) = ply::save(&self.cloud, &path) {
                    log::error!("could not dump state: {e}");
                } else {
                    log::error!("non-finite loss, state dumped to {}", path.display());
                }
            }
            return Err(Error::Diverged { iteration: it });
        }
        let mut grads = render_backward(&out, &clouds, &eval.d_image)?
            .swap_remove(trainable)
            .expect("trainable cloud has gradients");
        if let Some(g) = &eval.d_geometry {
            grads.params.add_assign(g);
        }
        let visible = out.visible[trainable].clone();
        drop(out);

        self.cloud.record_visibility(&visible);
        if it < self.config.densify_until {
            for (i, &v) in visible.iter().enumerate() {
                if v {
                    self.stats.accum[i] += grads.mean2d_ndc_norm[i];
                    self.stats.count[i] += 1;
                }
            }
        }
        let pos_lr = self.config.position_lr(it);
        let lr = self.config.lr.clone();
        let skipped = self.adam.step(&mut self.cloud, &grads.params, |g| match g {
            Group::Position => pos_lr,
            Group::Rotation => lr.rotation,
            Group::Scale => lr.scale,
            Group::Opacity => lr.opacity,
            Group::ShDc => lr.sh_dc,
            Group::ShRest => lr.sh_rest,
        });
        if !skipped.is_empty() {
            log::warn!("iteration {it}: non-finite gradients, skipped {skipped:?}");
        }

        let step = it + 1;
        let cfg = &self.config;
        if step > cfg.densify_from && step <= cfg.densify_until && step % cfg.densify_interval == 0 {
            let clamp = (self.kind == StageKind::Background && cfg.lambda_shell > 0.0).then_some(&self.shell);
            let r = densify(&mut self.cloud, &mut self.adam, &self.stats, cfg, clamp, &mut self.rng);
            self.densify_totals.cloned += r.cloned;
            self.densify_totals.split += r.split;
            self.densify_totals.skipped += r.skipped;
            self.stats.reset(self.cloud.len());
        }
        if step % cfg.prune_interval == 0 {
            let radius = (self.kind == StageKind::Foreground).then_some(&self.shell);
            let r = prune(
                &mut self.cloud,
                &mut self.adam,
                Some(&mut self.stats),
                cfg.opacity_prune_threshold,
                true,
                radius,
            );
            self.prune_totals.add(&r);
        }
        // a reset needs as many steps to recover as the warm-up before densification
        if cfg.opacity_reset_interval > 0
            && step % cfg.opacity_reset_interval == 0
            && step <= cfg.densify_until
            && cfg.iterations - step >= cfg.densify_from
        {
            let cap = logit(RESET_OPACITY);
            for v in &mut self.cloud.params.opacity_logits {
                *v = v.min(cap);
            }
            self.adam.reset_group(Group::Opacity);
        }

        let record = LossRecord {
            iteration: step,
            loss: eval.breakdown.clone(),
            n: self.cloud.len(),
        };
        if let Some(w) = &mut self.loss_csv {
            let l = &record.loss;
            let _ = writeln!(
                w,
                "{},{},{},{},{},{},{}",
                record.iteration, l.l1, l.dssim, l.shell, l.planarity, l.total, record.n
            );
        }
        if cfg.log_interval > 0 && step % cfg.log_interval == 0 {
            log::info!(
                "{:?} iter {step}/{} loss {:.5} N={}",
                self.kind,
                cfg.iterations,
                record.loss.total,
                record.n
            );
        }
        self.log.push(record);
        self.iteration += 1;
        Ok(eval.breakdown)
    }

    /// Runs the remaining iterations. Stage 2 ends with a radius prune so
    /// that no foreground Gaussian lies beyond `r_inner`.
    pub fn run(mut self) -> Result<TrainOutcome> {
        while self.iteration < self.config.iterations {
            self.step()?;
        }
        if self.kind == StageKind::Foreground {
            let r = prune(
                &mut self.cloud,
                &mut self.adam,
                Some(&mut self.stats),
                0.0,
                false,
                Some(&self.shell),
            );
            self.prune_totals.add(&r);
        }
        if let Some(w) = &mut self.loss_csv {
            let _ = w.flush();
        }
        Ok(TrainOutcome {
            cloud: self.cloud,
            log: self.log,
            prune: self.prune_totals,
            densify: self.densify_totals,
            iterations: self.iteration,
        })
    }
}

/// Runs stage 1 to completion.
pub fn stage1_train(cloud: GaussianCloud, views: &[CameraView], shell: SceneShell, config: StageConfig) -> Result<TrainOutcome> {
    Trainer::background(cloud, views, shell, config)?.run()
}

/// Runs stage 2 to completion over a frozen background.
pub fn stage2_train(
    background: &GaussianCloud,
    foreground: GaussianCloud,
    views: &[CameraView],
    shell: SceneShell,
    config: StageConfig,
) -> Result<TrainOutcome> {
    Trainer::foreground(background, foreground, views, shell, config)?.run()
}
