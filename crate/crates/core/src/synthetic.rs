//! Synthetic scenes with known ground truth, used by the examples and the
//! test suite.

use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::error::Result;
use crate::ingest::{save_image, write_colmap, write_pfm, SparsePointCloud, ViewSkeleton};
use crate::model::{sh, Camera, CameraView, FloatMap, GaussianCloud, Image, Intrinsics, Mask, Pose, SceneShell};
use crate::render::render;

/// Smooth color pattern on the unit sphere.
pub fn sphere_texture(d: &Vector3<f64>) -> [f64; 3] {
    let theta = d.y.clamp(-1.0, 1.0).acos();
    let phi = d.z.atan2(d.x);
    [
        0.5 + 0.3 * (3.0 * theta).sin() * (2.0 * phi).cos(),
        0.5 + 0.3 * (2.0 * theta + 1.0).cos(),
        0.5 + 0.25 * (3.0 * phi).sin() * theta.sin(),
    ]
}

/// Cameras with centers uniformly inside a ball of radius `spread` around
/// `center`, looking in uniformly random directions.
pub fn random_cameras(n: usize, size: usize, fov_deg: f64, center: Vector3<f64>, spread: f64, seed: u64) -> Vec<Camera> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let offset: [f64; 3] = UnitSphere.sample(&mut rng);
            let eye = center + Vector3::from(offset) * (spread * rng.random::<f64>().cbrt());
            let dir: [f64; 3] = UnitSphere.sample(&mut rng);
            let up: [f64; 3] = UnitSphere.sample(&mut rng);
            Camera::new(
                Intrinsics::from_fov(size, size, fov_deg.to_radians()),
                Pose::look_at(eye, eye + Vector3::from(dir), Vector3::from(up)),
            )
        })
        .collect()
}

/// Ray-casts the textured sphere of `radius` around `center`. Returns the
/// image and its z-depth. Cameras must be inside the sphere.
pub fn render_textured_sphere(camera: &Camera, center: &Vector3<f64>, radius: f64) -> (Image, FloatMap) {
    let (w, h) = (camera.width(), camera.height());
    let mut img = Image::new(w, h);
    let mut depth = FloatMap::filled(w, h, 0.0);
    let eye = camera.center();
    let oc = eye - center;
    for v in 0..h {
        for u in 0..w {
            let ray = camera.ray_camera(u as f64 + 0.5, v as f64 + 0.5);
            let dir = camera.pose.rotation.inverse() * ray.normalize();
            // |oc + t dir| = radius, far root
            let b = oc.dot(&dir);
            let c = oc.norm_squared() - radius * radius;
            let t = -b + (b * b - c).max(0.0).sqrt();
            let hit = oc + dir * t;
            img.set_pixel(u, v, sphere_texture(&(hit / radius)));
            depth.data[v * w + u] = (t * ray.normalize().z) as f32;
        }
    }
    (img, depth)
}

/// Views of the textured sphere at `shell.r_outer`. Every pixel is
/// background, so masks are all `true`.
pub fn textured_sphere_views(shell: &SceneShell, cameras: &[Camera]) -> Vec<CameraView> {
    cameras
        .iter()
        .enumerate()
        .map(|(k, cam)| {
            let (img, depth) = render_textured_sphere(cam, &shell.center, shell.r_outer);
            let (w, h) = (img.width, img.height);
            CameraView {
                name: format!("sphere_{k:03}.png"),
                camera: *cam,
                image: img,
                depth: Some(depth),
                mask: Some(Mask::filled(w, h, true)),
            }
        })
        .collect()
}

/// A random two-shell scene.
#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub shell: SceneShell,
    pub background: GaussianCloud,
    pub foreground: GaussianCloud,
    /// Cameras stay within this distance of the center.
    pub camera_spread: f64,
}

impl SyntheticScene {
    /// `n_bg` flat, tangent-aligned background Gaussians in the shell and
    /// `n_fg` foreground Gaussians between `0.3 r_inner` and `0.85 r_inner`.
    pub fn random(shell: SceneShell, n_bg: usize, n_fg: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut background = GaussianCloud::empty(1);
        // mean angular spacing of the centers
        let spacing = (4.0 * std::f64::consts::PI / n_bg.max(1) as f64).sqrt();
        for _ in 0..n_bg {
            let d: [f64; 3] = UnitSphere.sample(&mut rng);
            let d = Vector3::from(d);
            let r = rng.random_range(shell.r_inner * 1.05..shell.r_outer * 0.95);
            let tangent = 0.6 * spacing * r * rng.random_range(0.7..1.3);
            let q = tangent_frame(&d, rng.random_range(0.0..std::f64::consts::TAU));
            let log_scales = Vector3::new(tangent.ln(), (0.6 * tangent).ln(), (0.05 * tangent).ln());
            background.push(
                shell.center + d * r,
                q,
                log_scales,
                rng.random_range(0.7..0.95),
                random_color(&mut rng),
            );
        }
        let mut foreground = GaussianCloud::empty(1);
        for _ in 0..n_fg {
            let d: [f64; 3] = UnitSphere.sample(&mut rng);
            let r = rng.random_range(0.3 * shell.r_inner..0.85 * shell.r_inner);
            let s = 0.035 * shell.r_inner;
            let log_scales = Vector3::new(
                (s * rng.random_range(0.5..1.5)).ln(),
                (s * rng.random_range(0.5..1.5)).ln(),
                (s * rng.random_range(0.5..1.5)).ln(),
            );
            let q: [f64; 4] = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            foreground.push(
                shell.center + Vector3::from(d) * r,
                q,
                log_scales,
                rng.random_range(0.6..0.95),
                random_color(&mut rng),
            );
        }
        foreground.normalize_rotations();
        SyntheticScene {
            shell,
            background,
            foreground,
            camera_spread: 0.15 * shell.r_inner,
        }
    }

    pub fn cameras(&self, n: usize, size: usize, fov_deg: f64, seed: u64) -> Vec<Camera> {
        random_cameras(n, size, fov_deg, self.shell.center, self.camera_spread, seed)
    }

    /// Ground-truth images with depth maps; masks are left empty.
    pub fn views(&self, cameras: &[Camera], background_color: [f64; 3]) -> Result<Vec<CameraView>> {
        let far = 2.0 * self.shell.r_outer;
        cameras
            .iter()
            .enumerate()
            .map(|(k, cam)| {
                let out = render(&[&self.background, &self.foreground], cam, background_color)?;
                let depth = median_depth(&[&self.background, &self.foreground], cam, far)?;
                let mut image = out.image;
                image.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
                Ok(CameraView {
                    name: format!("view_{k:03}.png"),
                    camera: *cam,
                    image,
                    depth: Some(depth),
                    mask: None,
                })
            })
            .collect()
    }

    /// Gaussian centers as sparse points. A view joins a point's track when
    /// the point projects inside it and its depth agrees with the view's
    /// depth map to within 2%, so occluded observations are left out.
    pub fn sparse_points(&self, views: &[CameraView]) -> SparsePointCloud {
        let mut pts = SparsePointCloud::default();
        for cloud in [&self.background, &self.foreground] {
            for i in 0..cloud.len() {
                let p = cloud.position(i);
                let track: Vec<usize> = (0..views.len())
                    .filter(|&k| {
                        let Some((px, z)) = views[k].camera.project_in_bounds(&p) else {
                            return false;
                        };
                        views[k].depth.as_ref().is_none_or(|d| {
                            let seen = d.get(px.x as usize, px.y as usize) as f64;
                            (seen - z).abs() <= 0.02 * z
                        })
                    })
                    .collect();
                if !track.is_empty() {
                    let rgb = [0, 1, 2].map(|ch| sh::dc_to_rgb(cloud.sh_dc(i)[ch]).clamp(0.0, 1.0));
                    pts.push(p, rgb, track);
                }
            }
        }
        pts
    }
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random_range(0.1..0.9), rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)]
}

/// Quaternion whose third local axis is `normal`, rotated by `spin` about it.
pub fn tangent_frame(normal: &Vector3<f64>, spin: f64) -> [f64; 4] {
    let n = normal.normalize();
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let a = n.cross(&helper).normalize();
    let b = n.cross(&a);
    let (s, c) = spin.sin_cos();
    let e1 = a * c + b * s;
    let e2 = n.cross(&e1);
    let m = nalgebra::Matrix3::from_columns(&[e1, e2, n]);
    crate::model::rotation::from_matrix(&m)
}

/// Median z-depth of the joint render; pixels that never become half
/// opaque read `far`.
pub fn median_depth(clouds: &[&GaussianCloud], camera: &Camera, far: f64) -> Result<FloatMap> {
    let out = render(clouds, camera, [0.0; 3])?;
    let (w, h) = (camera.width(), camera.height());
    Ok(FloatMap {
        width: w,
        height: h,
        data: out.median_depth.iter().map(|&d| d.min(far) as f32).collect(),
    })
}

/// Writes a scene directory: `colmap/` (geometry multiplied by `sfm_scale`),
/// `images/*.png` and `depths/*.pfm`.
pub fn write_dataset(dir: &Path, views: &[CameraView], points: &SparsePointCloud, sfm_scale: f64) -> Result<()> {
    let images = dir.join("images");
    let depths = dir.join("depths");
    for d in [&images, &depths] {
        std::fs::create_dir_all(d).map_err(|e| crate::Error::io(d, e))?;
    }
    let mut skeletons = Vec::with_capacity(views.len());
    for (k, v) in views.iter().enumerate() {
        save_image(&v.image, &images.join(&v.name))?;
        if let Some(d) = &v.depth {
            write_pfm(&depths.join(format!("{}.pfm", v.stem())), d)?;
        }
        skeletons.push(ViewSkeleton {
            image_id: k as u32 + 1,
            name: v.name.clone(),
            camera: Camera::new(v.camera.intrinsics, v.camera.pose.scaled(sfm_scale)),
        });
    }
    let mut scaled = points.clone();
    scaled.points.iter_mut().for_each(|p| *p *= sfm_scale);
    write_colmap(&dir.join("colmap"), &skeletons, &scaled)
}
