//! End-to-end orchestration over a scene directory and an output directory.
//!
//! Output layout:
//!
//! ```text
//! out/
//!   scene_params.txt        shell, seed, scale
//!   split.txt               train/test view ids
//!   foreground_points.txt   sparse points inside r_inner
//!   masks/{stem}_bgmask.png
//!   background/point_cloud.ply  (+ .meta, loss.csv)
//!   foreground/point_cloud.ply  (+ .meta, loss.csv)
//!   envmap/face_*.png, equirect.png
//!   eval/metrics.csv, eval/renders/*.png
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::envmap::{cubemap_to_equirect, render_cubemap, save_cubemap, CubemapOptions};
use crate::error::{Error, Result};
use crate::ingest::{
    compute_origin, load_depth, load_image, navigation_diameter, parse_colmap, save_image, ColmapModel, Provenance,
    SceneParams, SparsePointCloud,
};
use crate::metrics::{split, EvalReport, SplitManifest};
use crate::model::{ply, CameraView, GaussianCloud, SceneShell, StageConfig};
use crate::render::render;
use crate::segmentation::{
    apply_scale, align_scale, distance_map, mask_file_name, read_mask_png, segment, serve, write_mask_png,
    DepthConvention, SegmentationSession,
};
use crate::shell_init::{build_icosphere, init_background_cloud, init_colors, radial_placement, PlacementMode};
use crate::train::{init_foreground_cloud, Trainer, TrainOutcome};

pub const SCENE_PARAMS_FILE: &str = "scene_params.txt";
pub const SPLIT_FILE: &str = "split.txt";
pub const FOREGROUND_POINTS_FILE: &str = "foreground_points.txt";
pub const CHECKPOINT_FILE: &str = "point_cloud.ply";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Ablation {
    NoShell,
    NoPlanarity,
    DistanceInit,
}

impl Ablation {
    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::NoShell => "no-shell",
            Ablation::NoPlanarity => "no-planarity",
            Ablation::DistanceInit => "distance-init",
        }
    }
}

impl FromStr for Ablation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "no-shell" => Ok(Ablation::NoShell),
            "no-planarity" => Ok(Ablation::NoPlanarity),
            "distance-init" => Ok(Ablation::DistanceInit),
            other => Err(Error::Config(format!("unknown ablation `{other}`"))),
        }
    }
}

/// Everything one run needs. Built from defaults, a `key=value` file and
/// command-line overrides, in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub colmap_dir: PathBuf,
    pub images_dir: PathBuf,
    pub depths_dir: PathBuf,
    pub output_dir: PathBuf,

    pub seed: u64,
    pub center: Option<Vector3<f64>>,
    pub r_inner: Option<f64>,
    pub r_outer: Option<f64>,
    /// SfM-to-metric factor; estimated from depth when absent.
    pub scale: Option<f64>,
    pub depth_convention: DepthConvention,

    pub level: u32,
    pub sh_degree: usize,
    pub stage1: StageConfig,
    pub stage2: StageConfig,
    pub ablations: Vec<Ablation>,

    pub face_res: usize,
    pub equirect_width: usize,
    pub envmap_center: Option<Vector3<f64>>,
    /// Defaults to `r_inner`.
    pub near_cut: Option<f64>,

    pub port: u16,
}

impl RunConfig {
    /// Inputs at `scene/{colmap,images,depths}`.
    pub fn for_scene(scene: &Path, output: &Path) -> Self {
        RunConfig {
            colmap_dir: scene.join("colmap"),
            images_dir: scene.join("images"),
            depths_dir: scene.join("depths"),
            output_dir: output.to_path_buf(),
            seed: 0,
            center: None,
            r_inner: None,
            r_outer: None,
            scale: None,
            depth_convention: DepthConvention::ZDepth,
            level: 5,
            sh_degree: 1,
            stage1: StageConfig::default(),
            stage2: StageConfig::foreground(),
            ablations: Vec::new(),
            face_res: crate::envmap::DEFAULT_FACE_RES,
            equirect_width: 2048,
            envmap_center: None,
            near_cut: None,
            port: 8080,
        }
    }

    /// Applies `key=value` lines. Relative paths resolve against `base`.
    pub fn apply_text(&mut self, text: &str, path: &Path, base: &Path) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, n + 1, "expected key=value"))?;
            self.set(k.trim(), v.trim(), base)
                .map_err(|e| Error::parse(path, n + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        self.apply_text(&text, path, &base)
    }

    /// Sets one key.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("invalid value for `{key}`: `{v}`")))
        }
        let path = |v: &str| base.join(v);
        match key {
            "colmap_dir" => self.colmap_dir = path(value),
            "images_dir" => self.images_dir = path(value),
            "depths_dir" => self.depths_dir = path(value),
            "output_dir" => self.output_dir = path(value),
            "seed" => self.seed = num(key, value)?,
            "center" => self.center = Some(parse_vec3(value)?),
            "r_inner" => self.r_inner = Some(num(key, value)?),
            "r_outer" => self.r_outer = Some(num(key, value)?),
            "scale" => self.scale = Some(num(key, value)?),
            "depth_convention" => self.depth_convention = value.parse()?,
            "level" => self.level = num(key, value)?,
            "sh_degree" => self.sh_degree = num(key, value)?,
            "iters1" => self.stage1.iterations = num(key, value)?,
            "iters2" => self.stage2.iterations = num(key, value)?,
            "lambda_shell" => self.stage1.lambda_shell = num(key, value)?,
            "lambda_planarity" => self.stage1.lambda_planarity = num(key, value)?,
            "lambda_dssim" => {
                let l = num(key, value)?;
                self.stage1.lambda_dssim = l;
                self.stage2.lambda_dssim = l;
            }
            "epsilon" => self.stage1.epsilon = num(key, value)?,
            "ablate" => {
                self.ablations = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?;
            }
            "face_res" => self.face_res = num(key, value)?,
            "equirect_width" => self.equirect_width = num(key, value)?,
            "envmap_center" => self.envmap_center = Some(parse_vec3(value)?),
            "near_cut" => self.near_cut = Some(num(key, value)?),
            "port" => self.port = num(key, value)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn has(&self, a: Ablation) -> bool {
        self.ablations.contains(&a)
    }

    /// Stage-1 settings with ablations and the seed applied.
    pub fn stage1_config(&self, shell: &SceneShell) -> StageConfig {
        let mut c = self.stage1.clone();
        if self.has(Ablation::NoShell) {
            c.lambda_shell = 0.0;
        }
        if self.has(Ablation::NoPlanarity) {
            c.lambda_planarity = 0.0;
        }
        c.spatial_scale = shell.r_outer;
        c.rng_seed = self.seed;
        c
    }

    pub fn stage2_config(&self, shell: &SceneShell) -> StageConfig {
        let mut c = self.stage2.clone();
        c.spatial_scale = shell.r_inner;
        c.rng_seed = self.seed.wrapping_add(1);
        c
    }

    pub fn placement_mode(&self) -> PlacementMode {
        if self.has(Ablation::DistanceInit) {
            PlacementMode::DistanceBased
        } else {
            PlacementMode::Random
        }
    }

    fn ablation_list(&self) -> String {
        let mut a: Vec<&str> = self.ablations.iter().map(|a| a.as_str()).collect();
        a.sort_unstable();
        a.dedup();
        if a.is_empty() { "none".into() } else { a.join(",") }
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

fn parse_vec3(v: &str) -> Result<Vector3<f64>> {
    let parts: Vec<f64> = v
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("expected x,y,z, got `{v}`")))?;
    match parts[..] {
        [x, y, z] => Ok(Vector3::new(x, y, z)),
        _ => Err(Error::Config(format!("expected x,y,z, got `{v}`"))),
    }
}

fn require(name: &'static str, path: PathBuf) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact { name, path })
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Hex SHA-256 of `key=value` lines.
pub fn config_hash(kv: &[(String, String)]) -> String {
    let mut h = Sha256::new();
    for (k, v) in kv {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(v.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Sidecar written next to a checkpoint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckpointMeta {
    pub entries: BTreeMap<String, String>,
}

impl CheckpointMeta {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, n + 1, "expected key=value"))?;
            entries.insert(k.to_string(), v.to_string());
        }
        Ok(CheckpointMeta { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

pub fn meta_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("meta")
}

/// The scene as seen by the training stages: scaled SfM model, shell and
/// views with images, depths and, once prepared, masks.
pub struct Scene {
    pub params: SceneParams,
    pub shell: SceneShell,
    pub model: ColmapModel,
    pub views: Vec<CameraView>,
}

fn load_views(config: &RunConfig, model: &ColmapModel, masks: bool) -> Result<Vec<CameraView>> {
    model
        .views
        .par_iter()
        .map(|v| {
            let image = load_image(&config.images_dir.join(&v.name))?;
            let mut view = CameraView::new(v.name.clone(), v.camera, image)?;
            let stem = view.stem();
            let depth_path = config.depths_dir.join(format!("{stem}.pfm"));
            if depth_path.exists() {
                view = view.with_depth(load_depth(&depth_path)?.map)?;
            }
            if masks {
                let p = require("background mask", config.out("masks").join(mask_file_name(&stem)))?;
                view = view.with_mask(read_mask_png(&p)?)?;
            }
            Ok(view)
        })
        .collect()
}

fn check_inputs(config: &RunConfig) -> Result<()> {
    require("COLMAP model directory", config.colmap_dir.clone())?;
    for (name, file) in [
        ("COLMAP cameras.txt", "cameras.txt"),
        ("COLMAP images.txt", "images.txt"),
        ("COLMAP points3D.txt", "points3D.txt"),
    ] {
        require(name, config.colmap_dir.join(file))?;
    }
    require("images directory", config.images_dir.clone())?;
    require("depths directory", config.depths_dir.clone())?;
    Ok(())
}

/// Loads a prepared scene from the output directory.
pub fn load_scene(config: &RunConfig, masks: bool) -> Result<Scene> {
    check_inputs(config)?;
    let params = SceneParams::load(&require("scene parameters", config.out(SCENE_PARAMS_FILE))?)?;
    let shell = params.shell()?;
    let mut model = parse_colmap(&config.colmap_dir)?;
    let mut applied = None;
    apply_scale(&mut model, &mut applied, params.scale.unwrap_or(1.0))?;
    let views = load_views(config, &model, masks)?;
    Ok(Scene {
        params,
        shell,
        model,
        views,
    })
}

/// What `prepare` produced.
#[derive(Debug, Clone)]
pub struct PrepareOutcome {
    pub params: SceneParams,
    pub split: SplitManifest,
    pub foreground_points: usize,
    pub background_pixels: usize,
}

/// Scale alignment, distance maps, threshold (given or picked in the
/// service), masks, filtered points and the train/test split.
pub fn cmd_prepare(config: &RunConfig) -> Result<PrepareOutcome> {
    check_inputs(config)?;
    create_dir(&config.output_dir)?;
    let mut model = parse_colmap(&config.colmap_dir)?;
    let views = load_views(config, &model, false)?;
    for v in &views {
        if v.depth.is_none() {
            return Err(Error::MissingArtifact {
                name: "depth map",
                path: config.depths_dir.join(format!("{}.pfm", v.stem())),
            });
        }
    }
    let scale = match config.scale {
        Some(s) => s,
        None => {
            let cams: Vec<_> = model.views.iter().map(|v| v.camera).collect();
            let depths: Vec<_> = views.iter().map(|v| v.depth.clone()).collect();
            align_scale(&model.points, &cams, &depths)?
        }
    };
    log::info!("scale {scale}");
    let mut applied = None;
    apply_scale(&mut model, &mut applied, scale)?;
    let views: Vec<CameraView> = views
        .into_iter()
        .zip(&model.views)
        .map(|(mut v, s)| {
            v.camera = s.camera;
            v
        })
        .collect();
    let cameras: Vec<_> = views.iter().map(|v| v.camera).collect();

    let center = match config.center {
        Some(c) => c,
        None => compute_origin(&cameras)?,
    };
    let diameter = navigation_diameter(&cameras)?;
    let r_outer = config.r_outer.unwrap_or(10.0 * diameter);
    let maps = views
        .par_iter()
        .enumerate()
        .map(|(k, v)| distance_map(v, k, &center, config.depth_convention))
        .collect::<Result<Vec<_>>>()?;

    let provisional = config.r_inner.unwrap_or(0.1 * r_outer);
    let mut params = SceneParams::new(SceneShell::new(center, provisional, r_outer)?, config.seed);
    params.navigation_diameter = Some(diameter);
    params.scale = Some(scale);
    if config.center.is_some() {
        params.center_source = Provenance::User;
    }
    if config.r_outer.is_some() {
        params.r_outer_source = Provenance::User;
    }
    let params_path = config.out(SCENE_PARAMS_FILE);
    let maps = if config.r_inner.is_some() {
        params.r_inner_source = Provenance::User;
        params.save(&params_path)?;
        maps
    } else {
        params.save(&params_path)?;
        let names = views.iter().map(|v| v.name.clone()).collect();
        let session = std::sync::Arc::new(SegmentationSession::new(maps, names, params.clone(), params_path.clone()));
        serve(session.clone(), config.port)?;
        params = session.params();
        match std::sync::Arc::try_unwrap(session) {
            Ok(s) => s.maps,
            Err(s) => s.maps.clone(),
        }
    };
    let shell = params.shell()?;
    let seg = segment(&maps, &model.points, &shell)?;
    let mask_dir = config.out("masks");
    create_dir(&mask_dir)?;
    for (v, m) in views.iter().zip(&seg.masks) {
        write_mask_png(m, &mask_dir.join(mask_file_name(&v.stem())))?;
    }
    write_points(&config.out(FOREGROUND_POINTS_FILE), &seg.foreground_points)?;
    let manifest = split(views.len(), config.seed)?;
    manifest.save(&config.out(SPLIT_FILE))?;
    let background_pixels = seg.masks.iter().map(|m| m.count()).sum();
    log::info!(
        "prepared: r_inner={} r_outer={} fg points={} bg pixels={background_pixels}",
        shell.r_inner,
        shell.r_outer,
        seg.foreground_points.len()
    );
    Ok(PrepareOutcome {
        params,
        split: manifest,
        foreground_points: seg.foreground_points.len(),
        background_pixels,
    })
}

/// `x y z r g b` per line.
pub fn write_points(path: &Path, points: &SparsePointCloud) -> Result<()> {
    let mut s = String::from("# x y z r g b\n");
    for (p, c) in points.points.iter().zip(&points.colors) {
        let _ = writeln!(s, "{:?} {:?} {:?} {:?} {:?} {:?}", p.x, p.y, p.z, c[0], c[1], c[2]);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_points(path: &Path) -> Result<SparsePointCloud> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = SparsePointCloud::default();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, n + 1, "expected six numbers"))?;
        if v.len() != 6 {
            return Err(Error::parse(path, n + 1, "expected six numbers"));
        }
        out.push(Vector3::new(v[0], v[1], v[2]), [v[3], v[4], v[5]], Vec::new());
    }
    Ok(out)
}

fn subset(views: &[CameraView], ids: &[usize]) -> Vec<CameraView> {
    ids.iter().map(|&i| views[i].clone()).collect()
}

fn stage_meta(
    stage: &str,
    config: &RunConfig,
    stage_cfg: &StageConfig,
    params: &SceneParams,
    outcome: &TrainOutcome,
) -> CheckpointMeta {
    let mut kv = stage_cfg.to_kv();
    kv.push(("stage".into(), stage.into()));
    kv.push(("ablate".into(), config.ablation_list()));
    kv.push(("level".into(), config.level.to_string()));
    kv.push(("sh_degree".into(), config.sh_degree.to_string()));
    kv.push(("scene_params".into(), config_hash(&[("text".into(), params.to_text())])));
    let hash = config_hash(&kv);
    let mut entries: BTreeMap<String, String> = kv.into_iter().collect();
    entries.insert("config_hash".into(), hash);
    entries.insert("seed".into(), config.seed.to_string());
    entries.insert("iteration".into(), outcome.iterations.to_string());
    entries.insert("gaussians".into(), outcome.cloud.len().to_string());
    let p = &outcome.prune;
    entries.insert("pruned_opacity".into(), p.removed_by_opacity.to_string());
    entries.insert("pruned_visibility".into(), p.removed_by_visibility.to_string());
    entries.insert("pruned_radius".into(), p.removed_by_radius.to_string());
    entries.insert("pruned_size".into(), p.removed_by_size.to_string());
    entries.insert("densify_cloned".into(), outcome.densify.cloned.to_string());
    entries.insert("densify_split".into(), outcome.densify.split.to_string());
    CheckpointMeta { entries }
}

/// Stage 1: geodesic initialization and shell-constrained training on the
/// masked training views.
pub fn cmd_train_background(config: &RunConfig) -> Result<TrainOutcome> {
    require("split manifest", config.out(SPLIT_FILE))?;
    let scene = load_scene(config, true)?;
    let manifest = SplitManifest::load(&config.out(SPLIT_FILE))?;
    let views = subset(&scene.views, &manifest.train);
    let shell = scene.shell;

    let ico = build_icosphere(config.level)?;
    let cameras: Vec<_> = views.iter().map(|v| v.camera).collect();
    let maps = views
        .par_iter()
        .enumerate()
        .filter(|(_, v)| v.depth.is_some())
        .map(|(k, v)| distance_map(v, k, &shell.center, config.depth_convention))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let placement = radial_placement(&ico.directions, &maps, &cameras, &shell, config.placement_mode(), &mut rng)?;
    log::info!(
        "initial background: {} Gaussians, {} unobserved directions",
        ico.len(),
        placement.unobserved_count()
    );
    let colors = init_colors(&placement.positions, &views);
    let cloud = init_background_cloud(&ico, &placement, &colors, &shell, config.sh_degree)?;

    let dir = config.out("background");
    create_dir(&dir)?;
    let stage_cfg = config.stage1_config(&shell);
    let t = Instant::now();
    let outcome = Trainer::background(cloud, &views, shell, stage_cfg.clone())?
        .with_loss_csv(&dir.join("loss.csv"))?
        .with_dump_dir(&dir)
        .run()?;
    log::info!("stage 1 finished in {:.1}s with {} Gaussians", t.elapsed().as_secs_f64(), outcome.cloud.len());
    let ckpt = dir.join(CHECKPOINT_FILE);
    ply::save(&outcome.cloud, &ckpt)?;
    stage_meta("background", config, &stage_cfg, &scene.params, &outcome).save(&meta_path(&ckpt))?;
    Ok(outcome)
}

/// Loads the stage-1 checkpoint, flagged frozen.
pub fn load_background(config: &RunConfig) -> Result<GaussianCloud> {
    let ckpt = require("background checkpoint", config.out("background").join(CHECKPOINT_FILE))?;
    let mut bg = ply::load(&ckpt)?;
    bg.frozen = true;
    Ok(bg)
}

/// Stage 2: foreground from the filtered points over the frozen background.
pub fn cmd_train_foreground(config: &RunConfig) -> Result<TrainOutcome> {
    let background = load_background(config)?;
    let points = read_points(&require("foreground points", config.out(FOREGROUND_POINTS_FILE))?)?;
    let manifest = SplitManifest::load(&require("split manifest", config.out(SPLIT_FILE))?)?;
    let scene = load_scene(config, false)?;
    let views = subset(&scene.views, &manifest.train);
    let shell = scene.shell;
    let cloud = init_foreground_cloud(&points, config.sh_degree);
    log::info!("initial foreground: {} Gaussians", cloud.len());

    let dir = config.out("foreground");
    create_dir(&dir)?;
    let stage_cfg = config.stage2_config(&shell);
    let t = Instant::now();
    let outcome = Trainer::foreground(&background, cloud, &views, shell, stage_cfg.clone())?
        .with_loss_csv(&dir.join("loss.csv"))?
        .with_dump_dir(&dir)
        .run()?;
    log::info!("stage 2 finished in {:.1}s with {} Gaussians", t.elapsed().as_secs_f64(), outcome.cloud.len());
    let ckpt = dir.join(CHECKPOINT_FILE);
    ply::save(&outcome.cloud, &ckpt)?;
    let mut meta = stage_meta("foreground", config, &stage_cfg, &scene.params, &outcome);
    meta.entries.insert(
        "background_sha256".into(),
        file_hash(&config.out("background").join(CHECKPOINT_FILE))?,
    );
    meta.save(&meta_path(&ckpt))?;
    Ok(outcome)
}

/// Cube map and equirect image of the background.
pub fn cmd_envmap(config: &RunConfig) -> Result<crate::envmap::CubeMap> {
    let background = load_background(config)?;
    let params = SceneParams::load(&require("scene parameters", config.out(SCENE_PARAMS_FILE))?)?;
    let shell = params.shell()?;
    let mut opts = CubemapOptions::new(
        config.envmap_center.unwrap_or(shell.center),
        config.near_cut.unwrap_or(shell.r_inner),
    );
    opts.face_res = config.face_res;
    let cube = render_cubemap(&background, &shell, &opts)?;
    let (equirect, _) = cubemap_to_equirect(&cube, config.equirect_width)?;
    save_cubemap(&cube, &config.out("envmap"), Some(&equirect))?;
    log::info!("envmap: {} hole pixels", cube.hole_count());
    Ok(cube)
}

/// Renders the held-out views with both clouds and scores them.
pub fn cmd_eval(config: &RunConfig) -> Result<EvalReport> {
    let background = load_background(config)?;
    let fg_ckpt = require("foreground checkpoint", config.out("foreground").join(CHECKPOINT_FILE))?;
    let foreground = ply::load(&fg_ckpt)?;
    if let Ok(meta) = CheckpointMeta::load(&meta_path(&fg_ckpt)) {
        let current = file_hash(&config.out("background").join(CHECKPOINT_FILE))?;
        if meta.get("background_sha256").is_some_and(|h| h != current) {
            return Err(Error::Config(
                "foreground checkpoint was trained over a different background; rerun train-foreground".into(),
            ));
        }
    }
    let manifest = SplitManifest::load(&require("split manifest", config.out(SPLIT_FILE))?)?;
    let scene = load_scene(config, false)?;
    let bg_color = config.stage2.background;
    let renders_dir = config.out("eval").join("renders");
    create_dir(&renders_dir)?;
    let pairs = manifest
        .test
        .iter()
        .map(|&i| {
            let v = &scene.views[i];
            let mut out = render(&[&background, &foreground], &v.camera, bg_color)?;
            out.release_cache();
            let mut img = out.image;
            img.data.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
            save_image(&img, &renders_dir.join(format!("{}.png", v.stem())))?;
            Ok((v.name.clone(), img, v.image.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = EvalReport::compute(&pairs)?;
    report.save_csv(&config.out("eval").join("metrics.csv"))?;
    log::info!("eval: PSNR {:.3} dB, SSIM {:.4}", report.mean_psnr(), report.mean_ssim());
    Ok(report)
}

/// Summary of a full run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub prepare: PrepareOutcome,
    pub background: TrainOutcome,
    pub foreground: TrainOutcome,
    pub report: EvalReport,
}

pub fn cmd_all(config: &RunConfig) -> Result<RunSummary> {
    let prepare = cmd_prepare(config)?;
    let background = cmd_train_background(config)?;
    let foreground = cmd_train_foreground(config)?;
    cmd_envmap(config)?;
    let report = cmd_eval(config)?;
    Ok(RunSummary {
        prepare,
        background,
        foreground,
        report,
    })
}
