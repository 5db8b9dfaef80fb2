//! Distance maps, threshold segmentation and the threshold-selection service.

mod service;
mod viridis;

use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;

pub use service::{router, serve, SegmentationSession, ThresholdConfirmed};
pub use viridis::VIRIDIS;

use crate::error::{Error, Result};
use crate::ingest::{ColmapModel, SparsePointCloud};
use crate::model::{Camera, CameraView, FloatMap, Image, Mask, SceneShell};

/// Minimum number of point/view observations for [`align_scale`].
pub const MIN_SCALE_OBSERVATIONS: usize = 20;

/// How depth-map values are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DepthConvention {
    /// Distance along the optical axis.
    #[default]
    ZDepth,
    /// Euclidean distance from the camera center along the pixel ray.
    RayDepth,
}

impl std::str::FromStr for DepthConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "z" | "z-depth" | "zdepth" => Ok(DepthConvention::ZDepth),
            "ray" | "ray-depth" | "raydepth" => Ok(DepthConvention::RayDepth),
            other => Err(Error::Config(format!("unknown depth convention `{other}`"))),
        }
    }
}

/// Per-pixel distance of the observed surface from the scene center.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    /// Index of the view this map belongs to.
    pub view: usize,
}

impl DistanceMap {
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.values[v * self.width + u]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Median of `depth / z_sfm` over all track observations that land inside a
/// view with a depth map. Depth is read at the pixel containing the
/// projected point.
pub fn align_scale(points: &SparsePointCloud, cameras: &[Camera], depths: &[Option<FloatMap>]) -> Result<f64> {
    let mut ratios = Vec::new();
    for (p, track) in points.points.iter().zip(&points.tracks) {
        for &vi in track {
            let (Some(cam), Some(Some(depth))) = (cameras.get(vi), depths.get(vi)) else {
                continue;
            };
            let Some((px, z)) = cam.project_in_bounds(p) else {
                continue;
            };
            let (u, v) = (px.x.floor() as usize, px.y.floor() as usize);
            if u >= depth.width || v >= depth.height {
                continue;
            }
            let d = depth.get(u, v) as f64;
            if d > 0.0 && d.is_finite() {
                ratios.push(d / z);
            }
        }
    }
    if ratios.len() < MIN_SCALE_OBSERVATIONS {
        return Err(Error::InsufficientObservations {
            found: ratios.len(),
            required: MIN_SCALE_OBSERVATIONS,
        });
    }
    Ok(median(&mut ratios))
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Multiplies all SfM geometry by `s`. Refuses to run twice on one model.
pub fn apply_scale(model: &mut ColmapModel, scale_applied: &mut Option<f64>, s: f64) -> Result<()> {
    if scale_applied.is_some() {
        return Err(Error::ScaleAlreadyApplied);
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Config(format!("scale must be positive, got {s}")));
    }
    for v in &mut model.views {
        v.camera.pose = v.camera.pose.scaled(s);
    }
    for p in &mut model.points.points {
        *p *= s;
    }
    *scale_applied = Some(s);
    Ok(())
}

/// Back-projects every pixel of `view`'s depth map and measures its
/// distance from `origin`.
pub fn distance_map(view: &CameraView, index: usize, origin: &Vector3<f64>, convention: DepthConvention) -> Result<DistanceMap> {
    let depth = view.depth.as_ref().ok_or_else(|| Error::MissingDepth(view.name.clone()))?;
    distance_map_from(&view.camera, depth, index, origin, convention)
}

pub fn distance_map_from(
    camera: &Camera,
    depth: &FloatMap,
    index: usize,
    origin: &Vector3<f64>,
    convention: DepthConvention,
) -> Result<DistanceMap> {
    camera.intrinsics.validate()?;
    let (w, h) = (depth.width, depth.height);
    let center = camera.center();
    let rot_inv = camera.pose.rotation.inverse();
    let mut values = vec![0.0; w * h];
    values.par_chunks_mut(w).enumerate().for_each(|(v, row)| {
        for (u, out) in row.iter_mut().enumerate() {
            let ray = camera.ray_camera(u as f64 + 0.5, v as f64 + 0.5);
            let d = depth.get(u, v) as f64;
            let d_ray = match convention {
                DepthConvention::ZDepth => d * ray.norm() / ray.z,
                DepthConvention::RayDepth => d,
            };
            let x = center + rot_inv * ray.normalize() * d_ray;
            *out = (x - origin).norm();
        }
    });
    Ok(DistanceMap {
        width: w,
        height: h,
        values,
        view: index,
    })
}

#[derive(Debug, Clone)]
pub struct SegmentationResult {
    /// Per view, `true` where the pixel is farther than `r_inner` (background).
    pub masks: Vec<Mask>,
    pub foreground_points: SparsePointCloud,
}

/// Thresholds distance maps and sparse points at `shell.r_inner`. A distance
/// equal to the threshold counts as foreground.
pub fn segment(maps: &[DistanceMap], points: &SparsePointCloud, shell: &SceneShell) -> Result<SegmentationResult> {
    shell.validate()?;
    let r = shell.r_inner;
    let masks = maps
        .iter()
        .map(|m| Mask {
            width: m.width,
            height: m.height,
            data: m.values.iter().map(|&d| d > r).collect(),
        })
        .collect();
    let foreground_points = points.filter(|i| (points.points[i] - shell.center).norm() <= r);
    Ok(SegmentationResult {
        masks,
        foreground_points,
    })
}

/// Maps distances through the viridis table after clamping to `[0, clip_max]`.
pub fn colorize_viridis(map: &DistanceMap, clip_max: f64) -> Result<Image> {
    if !(clip_max > 0.0 && clip_max.is_finite()) {
        return Err(Error::Config(format!("clip_max must be positive, got {clip_max}")));
    }
    let mut img = Image::new(map.width, map.height);
    for (k, &d) in map.values.iter().enumerate() {
        let t = (d / clip_max).clamp(0.0, 1.0);
        let c = VIRIDIS[(t * 255.0).round() as usize];
        img.data[3 * k..3 * k + 3].copy_from_slice(&c);
    }
    Ok(img)
}

/// File name of a view's background mask.
pub fn mask_file_name(stem: &str) -> String {
    format!("{stem}_bgmask.png")
}

/// Writes `mask` as a 1-bit grayscale PNG (white = background).
pub fn write_mask_png(mask: &Mask, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), mask.width as u32, mask.height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::One);
    let mut writer = enc.write_header()?;
    let stride = mask.width.div_ceil(8);
    let mut packed = vec![0u8; stride * mask.height];
    for v in 0..mask.height {
        for u in 0..mask.width {
            if mask.get(u, v) {
                packed[v * stride + u / 8] |= 0x80 >> (u % 8);
            }
        }
    }
    writer.write_image_data(&packed)?;
    writer.finish()?;
    Ok(())
}

pub fn read_mask_png(path: &Path) -> Result<Mask> {
    let img = image::open(path)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Image(other),
        })?
        .to_luma8();
    Ok(Mask {
        width: img.width() as usize,
        height: img.height() as usize,
        data: img.pixels().map(|p| p.0[0] >= 128).collect(),
    })
}
