//! Differentiable CPU splatting of one or more Gaussian clouds.
//!
//! All Gaussians of all clouds are projected with the EWA approximation,
//! sorted together by distance from the camera and composited front to back
//! over a constant background, tile by tile. The forward pass keeps what the backward pass
//! needs; gradients are produced only for clouds that are not frozen.

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{rotation, sh, Camera, GaussianCloud, Image, Params};

pub const TILE_SIZE: usize = 16;
/// Screen-space dilation added to every projected covariance (pixels²).
pub const LOW_PASS: f64 = 0.3;
pub const ALPHA_CAP: f64 = 0.99;
/// Compositing stops once transmittance would fall below this.
pub const MIN_TRANSMITTANCE: f64 = 1e-4;
/// A Gaussian counts as rendered when `alpha * T` exceeds this at some pixel.
pub const VISIBILITY_EPS: f64 = 1e-6;
pub const NEAR_PLANE: f64 = 0.01;

/// A Gaussian addressed by cloud position and index within the cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GaussianRef {
    pub cloud: u32,
    pub index: u32,
}

/// Screen-space footprint of one Gaussian.
#[derive(Debug, Clone, Copy)]
pub struct Projected {
    pub mean2d: Vector2<f64>,
    pub cov2d: Matrix2<f64>,
    pub depth: f64,
}

/// EWA projection of a world-space Gaussian. Returns `None` when the mean
/// lies in front of the near plane (culled, not an error).
pub fn project(mean: &Vector3<f64>, cov: &Matrix3<f64>, camera: &Camera) -> Option<Projected> {
    let t = camera.pose.world_to_camera(mean);
    if t.z <= NEAR_PLANE {
        return None;
    }
    let k = &camera.intrinsics;
    let w = camera.pose.rotation_matrix();
    let j = jacobian(&t, camera).0;
    let cov2d = j * w * cov * w.transpose() * j.transpose() + Matrix2::identity() * LOW_PASS;
    Some(Projected {
        mean2d: Vector2::new(k.fx * t.x / t.z + k.cx, k.fy * t.y / t.z + k.cy),
        cov2d,
        depth: t.z,
    })
}

/// Bound on `|x/z|`, `|y/z|` used inside the Jacobian, as a multiple of the
/// half-FOV tangent.
pub const FRUSTUM_GUARD: f64 = 1.3;

/// Jacobian of the perspective map at `t`. The lateral ratios are clamped to
/// [`FRUSTUM_GUARD`] times the image half-extent; the flags tell which
/// were clamped.
fn jacobian(t: &Vector3<f64>, camera: &Camera) -> (Matrix2x3<f64>, [bool; 2]) {
    let k = &camera.intrinsics;
    let lim_x = FRUSTUM_GUARD * 0.5 * k.width as f64 / k.fx;
    let lim_y = FRUSTUM_GUARD * 0.5 * k.height as f64 / k.fy;
    let (ax, ay) = (t.x / t.z, t.y / t.z);
    let iz = 1.0 / t.z;
    let j = Matrix2x3::new(
        k.fx * iz,
        0.0,
        -k.fx * ax.clamp(-lim_x, lim_x) * iz,
        0.0,
        k.fy * iz,
        -k.fy * ay.clamp(-lim_y, lim_y) * iz,
    );
    (j, [ax.abs() > lim_x, ay.abs() > lim_y])
}

#[derive(Debug, Clone)]
struct Splat {
    id: GaussianRef,
    mean2d: [f64; 2],
    /// Inverse 2D covariance as `(a, b, c)` for `[[a, b], [b, c]]`.
    conic: [f64; 3],
    opacity: f64,
    color: [f64; 3],
    clamped: [bool; 3],
    depth: f64,
    /// Distance from the camera center; the compositing order.
    range: f64,
    t_cam: Vector3<f64>,
    tiles: (usize, usize, usize, usize),
}

#[derive(Debug, Clone)]
struct ForwardCache {
    splats: Vec<Splat>,
    tile_lists: Vec<Vec<u32>>,
    background: [f64; 3],
    camera: Camera,
}

/// Result of a forward render.
#[derive(Debug, Clone)]
pub struct RenderOutput {
    pub image: Image,
    /// Accumulated opacity per pixel (`1 - T_final`).
    pub alpha: Vec<f64>,
    /// Camera-space depth of the splat at which transmittance first drops
    /// below 1/2; infinite where it never does.
    pub median_depth: Vec<f64>,
    /// Per tile (row-major, `TILE_SIZE` pixels square), the Gaussians that
    /// actually contributed to at least one pixel of the tile.
    pub contributing_ids: Vec<Vec<GaussianRef>>,
    /// Per input cloud, whether each Gaussian contributed anywhere.
    pub visible: Vec<Vec<bool>>,
    cache: Option<ForwardCache>,
}

impl RenderOutput {
    pub fn tiles_x(&self) -> usize {
        self.image.width.div_ceil(TILE_SIZE)
    }

    /// Drops the state kept for the backward pass.
    pub fn release_cache(&mut self) {
        self.cache = None;
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }
}

/// Gradients for one trainable cloud.
#[derive(Debug, Clone)]
pub struct CloudGrads {
    pub params: Params,
    /// Norm of the gradient with respect to the projected mean, in NDC units.
    pub mean2d_ndc_norm: Vec<f64>,
}

fn tile_grid(camera: &Camera) -> (usize, usize) {
    (
        camera.width().div_ceil(TILE_SIZE),
        camera.height().div_ceil(TILE_SIZE),
    )
}

/// Renders `clouds` jointly from `camera` over a constant `background`.
pub fn render(clouds: &[&GaussianCloud], camera: &Camera, background: [f64; 3]) -> Result<RenderOutput> {
    camera.intrinsics.validate()?;
    let (width, height) = (camera.width(), camera.height());
    let (tx, ty) = tile_grid(camera);
    let center = camera.center();

    let mut splats: Vec<Splat> = Vec::new();
    for (ci, cloud) in clouds.iter().enumerate() {
        let projected: Vec<Option<Splat>> = (0..cloud.len())
            .into_par_iter()
            .map(|i| -> Result<Option<Splat>> {
                let a = cloud.activate(i)?;
                let Some(p) = project(&a.mean, &a.covariance, camera) else {
                    return Ok(None);
                };
                let det = p.cov2d.determinant();
                if !(det > 0.0) {
                    return Ok(None);
                }
                let inv = 1.0 / det;
                let conic = [p.cov2d[(1, 1)] * inv, -p.cov2d[(0, 1)] * inv, p.cov2d[(0, 0)] * inv];
                let mid = 0.5 * (p.cov2d[(0, 0)] + p.cov2d[(1, 1)]);
                let lambda = mid + (mid * mid - det).max(0.1).sqrt();
                let radius = (3.0 * lambda.sqrt()).ceil();
                let (mx, my) = (p.mean2d.x, p.mean2d.y);
                if mx + radius < 0.0
                    || my + radius < 0.0
                    || mx - radius >= width as f64
                    || my - radius >= height as f64
                {
                    return Ok(None);
                }
                let x0 = ((mx - radius).max(0.0) / TILE_SIZE as f64).floor() as usize;
                let y0 = ((my - radius).max(0.0) / TILE_SIZE as f64).floor() as usize;
                let x1 = (((mx + radius) / TILE_SIZE as f64).floor() as usize).min(tx - 1);
                let y1 = (((my + radius) / TILE_SIZE as f64).floor() as usize).min(ty - 1);
                let view = a.mean - center;
                let (color, clamped) =
                    sh::eval_color(cloud.sh_degree(), cloud.sh_dc(i), cloud.sh_rest(i), &view);
                Ok(Some(Splat {
                    id: GaussianRef {
                        cloud: ci as u32,
                        index: i as u32,
                    },
                    mean2d: [mx, my],
                    conic,
                    opacity: a.opacity,
                    color,
                    clamped,
                    depth: p.depth,
                    range: view.norm(),
                    t_cam: camera.pose.world_to_camera(&a.mean),
                    tiles: (x0, y0, x1, y1),
                }))
            })
            .collect::<Result<_>>()?;
        splats.extend(projected.into_iter().flatten());
    }
    // joint order; ties resolved by cloud then index so that concatenating
    // clouds is pure bookkeeping
    splats.sort_by(|a, b| a.range.total_cmp(&b.range).then(a.id.cmp(&b.id)));

    let mut tile_lists: Vec<Vec<u32>> = vec![Vec::new(); tx * ty];
    for (si, s) in splats.iter().enumerate() {
        let (x0, y0, x1, y1) = s.tiles;
        for yy in y0..=y1 {
            for xx in x0..=x1 {
                tile_lists[yy * tx + xx].push(si as u32);
            }
        }
    }

    let tile_results: Vec<TileForward> = (0..tx * ty)
        .into_par_iter()
        .map(|t| forward_tile(t, tx, width, height, &splats, &tile_lists[t], background))
        .collect();

    let mut image = Image::new(width, height);
    let mut alpha = vec![0.0; width * height];
    let mut median_depth = vec![f64::INFINITY; width * height];
    let mut visible: Vec<Vec<bool>> = clouds.iter().map(|c| vec![false; c.len()]).collect();
    let mut contributing_ids = Vec::with_capacity(tx * ty);
    for (t, res) in tile_results.into_iter().enumerate() {
        let (ox, oy) = ((t % tx) * TILE_SIZE, (t / tx) * TILE_SIZE);
        let tw = TILE_SIZE.min(width - ox);
        for (k, px) in res.pixels.iter().enumerate() {
            let (u, v) = (ox + k % tw, oy + k / tw);
            image.set_pixel(u, v, px.0);
            alpha[v * width + u] = px.1;
            median_depth[v * width + u] = px.2;
        }
        let mut ids = Vec::new();
        for (pos, &hit) in res.contributed.iter().enumerate() {
            if hit {
                let s = &splats[tile_lists[t][pos] as usize];
                visible[s.id.cloud as usize][s.id.index as usize] = true;
                ids.push(s.id);
            }
        }
        contributing_ids.push(ids);
    }

    Ok(RenderOutput {
        image,
        alpha,
        median_depth,
        contributing_ids,
        visible,
        cache: Some(ForwardCache {
            splats,
            tile_lists,
            background,
            camera: *camera,
        }),
    })
}

struct TileForward {
    /// (color, alpha, median depth) per pixel of the tile, row-major within the tile.
    pixels: Vec<([f64; 3], f64, f64)>,
    contributed: Vec<bool>,
}

#[inline]
fn gaussian_power(s: &Splat, px: f64, py: f64) -> (f64, f64, f64) {
    let dx = px - s.mean2d[0];
    let dy = py - s.mean2d[1];
    let [a, b, c] = s.conic;
    (-0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy), dx, dy)
}

fn forward_tile(
    t: usize,
    tx: usize,
    width: usize,
    height: usize,
    splats: &[Splat],
    list: &[u32],
    background: [f64; 3],
) -> TileForward {
    let (ox, oy) = ((t % tx) * TILE_SIZE, (t / tx) * TILE_SIZE);
    let tw = TILE_SIZE.min(width - ox);
    let th = TILE_SIZE.min(height - oy);
    let mut pixels = Vec::with_capacity(tw * th);
    let mut contributed = vec![false; list.len()];
    for v in oy..oy + th {
        for u in ox..ox + tw {
            let (px, py) = (u as f64 + 0.5, v as f64 + 0.5);
            let mut trans = 1.0;
            let mut color = [0.0; 3];
            let mut median = f64::INFINITY;
            for (pos, &si) in list.iter().enumerate() {
                let s = &splats[si as usize];
                let (power, _, _) = gaussian_power(s, px, py);
                let alpha = (s.opacity * power.exp()).min(ALPHA_CAP);
                let next = trans * (1.0 - alpha);
                if next < MIN_TRANSMITTANCE {
                    break;
                }
                let w = alpha * trans;
                for ch in 0..3 {
                    color[ch] += s.color[ch] * w;
                }
                if w > VISIBILITY_EPS {
                    contributed[pos] = true;
                }
                if trans >= 0.5 && next < 0.5 {
                    median = s.depth;
                }
                trans = next;
            }
            for ch in 0..3 {
                color[ch] += trans * background[ch];
            }
            pixels.push((color, 1.0 - trans, median));
        }
    }
    TileForward {
        pixels,
        contributed,
    }
}

/// Screen-space gradient accumulator for one splat.
#[derive(Debug, Clone, Copy, Default)]
struct Grad2d {
    mean: [f64; 2],
    conic: [f64; 3],
    opacity: f64,
    color: [f64; 3],
}

impl Grad2d {
    fn add(&mut self, o: &Grad2d) {
        for k in 0..2 {
            self.mean[k] += o.mean[k];
        }
        for k in 0..3 {
            self.conic[k] += o.conic[k];
            self.color[k] += o.color[k];
        }
        self.opacity += o.opacity;
    }
}

fn backward_tile(
    t: usize,
    tx: usize,
    width: usize,
    height: usize,
    splats: &[Splat],
    list: &[u32],
    background: [f64; 3],
    grad_image: &[f64],
) -> Vec<Grad2d> {
    let (ox, oy) = ((t % tx) * TILE_SIZE, (t / tx) * TILE_SIZE);
    let tw = TILE_SIZE.min(width - ox);
    let th = TILE_SIZE.min(height - oy);
    let mut acc = vec![Grad2d::default(); list.len()];
    // (list position, alpha, gaussian value, transmittance before, capped)
    let mut trace: Vec<(usize, f64, f64, f64, bool)> = Vec::with_capacity(list.len());
    for v in oy..oy + th {
        for u in ox..ox + tw {
            let gi = (v * width + u) * 3;
            let g = [grad_image[gi], grad_image[gi + 1], grad_image[gi + 2]];
            if g == [0.0; 3] {
                continue;
            }
            let (px, py) = (u as f64 + 0.5, v as f64 + 0.5);
            trace.clear();
            let mut trans = 1.0;
            for (pos, &si) in list.iter().enumerate() {
                let s = &splats[si as usize];
                let (power, _, _) = gaussian_power(s, px, py);
                let gval = power.exp();
                let raw = s.opacity * gval;
                let capped = raw > ALPHA_CAP;
                let alpha = raw.min(ALPHA_CAP);
                let next = trans * (1.0 - alpha);
                if next < MIN_TRANSMITTANCE {
                    break;
                }
                trace.push((pos, alpha, gval, trans, capped));
                trans = next;
            }
            // color of everything behind the current entry, weighted by its transmittance
            let mut behind = [
                trans * background[0],
                trans * background[1],
                trans * background[2],
            ];
            for &(pos, alpha, gval, t_before, capped) in trace.iter().rev() {
                let s = &splats[list[pos] as usize];
                let w = alpha * t_before;
                let a = &mut acc[pos];
                let mut d_alpha = 0.0;
                for ch in 0..3 {
                    a.color[ch] += g[ch] * w;
                    d_alpha += g[ch] * (t_before * s.color[ch] - behind[ch] / (1.0 - alpha));
                }
                for ch in 0..3 {
                    behind[ch] += s.color[ch] * w;
                }
                if capped {
                    continue;
                }
                a.opacity += d_alpha * gval;
                let d_power = d_alpha * alpha;
                let (_, dx, dy) = gaussian_power(s, px, py);
                let [ca, cb, cc] = s.conic;
                a.mean[0] += d_power * (ca * dx + cb * dy);
                a.mean[1] += d_power * (cb * dx + cc * dy);
                a.conic[0] += d_power * (-0.5 * dx * dx);
                a.conic[1] += d_power * (-0.5 * dx * dy);
                a.conic[2] += d_power * (-0.5 * dy * dy);
            }
        }
    }
    acc
}

/// Gradients of a scalar loss with respect to every trainable cloud, given
/// `dL/dimage` (interleaved RGB, same layout as the rendered image).
///
/// Returns one entry per input cloud; frozen clouds get `None`. `clouds`
/// must be the same clouds, in the same order, as in the forward call.
pub fn render_backward(
    output: &RenderOutput,
    clouds: &[&GaussianCloud],
    grad_image: &[f64],
) -> Result<Vec<Option<CloudGrads>>> {
    let cache = output.cache.as_ref().ok_or(Error::MissingForward)?;
    let camera = &cache.camera;
    let (width, height) = (camera.width(), camera.height());
    if grad_image.len() != width * height * 3 {
        return Err(Error::ShapeMismatch(format!(
            "pixel gradient has {} values, expected {}",
            grad_image.len(),
            width * height * 3
        )));
    }
    if clouds.len() != output.visible.len()
        || clouds.iter().zip(&output.visible).any(|(c, v)| c.len() != v.len())
    {
        return Err(Error::ShapeMismatch("clouds differ from the forward pass".into()));
    }
    let (tx, _) = tile_grid(camera);
    let splats = &cache.splats;

    let per_tile: Vec<Vec<Grad2d>> = cache
        .tile_lists
        .par_iter()
        .enumerate()
        .map(|(t, list)| {
            let trainable = list
                .iter()
                .any(|&si| !clouds[splats[si as usize].id.cloud as usize].frozen);
            if !trainable {
                return Vec::new();
            }
            backward_tile(t, tx, width, height, splats, list, cache.background, grad_image)
        })
        .collect();

    let mut grads2d = vec![Grad2d::default(); splats.len()];
    for (t, acc) in per_tile.iter().enumerate() {
        for (pos, g) in acc.iter().enumerate() {
            grads2d[cache.tile_lists[t][pos] as usize].add(g);
        }
    }

    let mut out: Vec<Option<CloudGrads>> = clouds
        .iter()
        .map(|c| {
            (!c.frozen).then(|| CloudGrads {
                params: Params::zeros(c.len(), c.sh_degree()),
                mean2d_ndc_norm: vec![0.0; c.len()],
            })
        })
        .collect();

    let k = &camera.intrinsics;
    let w = camera.pose.rotation_matrix();
    let center = camera.center();
    for (s, g) in splats.iter().zip(&grads2d) {
        let ci = s.id.cloud as usize;
        let Some(cg) = out[ci].as_mut() else { continue };
        let cloud = clouds[ci];
        let i = s.id.index as usize;
        let a = cloud.activate(i)?;

        cg.mean2d_ndc_norm[i] =
            (g.mean[0] * 0.5 * width as f64).hypot(g.mean[1] * 0.5 * height as f64);

        // color
        let rest_stride = cloud.params.sh_rest.len() / cloud.len().max(1);
        let d_view = sh::eval_color_backward(
            cloud.sh_degree(),
            cloud.sh_rest(i),
            &(a.mean - center),
            s.clamped,
            g.color,
            &mut cg.params.sh_dc[3 * i..3 * i + 3],
            &mut cg.params.sh_rest[rest_stride * i..rest_stride * (i + 1)],
        );

        // opacity
        cg.params.opacity_logits[i] += g.opacity * a.opacity * (1.0 - a.opacity);

        // conic -> 2D covariance: dL/dcov = -Q (dL/dQ) Q
        let q = Matrix2::new(s.conic[0], s.conic[1], s.conic[1], s.conic[2]);
        let dq = Matrix2::new(g.conic[0], g.conic[1], g.conic[1], g.conic[2]);
        let d_cov2d = -(q * dq * q);

        // cov2d = J M Jᵀ + low-pass, M = W Σ Wᵀ
        let t = s.t_cam;
        let (j, clamped_j) = jacobian(&t, camera);
        let m = w * a.covariance * w.transpose();
        let d_m = j.transpose() * d_cov2d * j;
        let d_j = 2.0 * d_cov2d * j * m;
        let d_sigma = w.transpose() * d_m * w;

        // mean2d and J -> camera-space mean
        let iz = 1.0 / t.z;
        let iz2 = iz * iz;
        let iz3 = iz2 * iz;
        let mut d_t = Vector3::new(
            g.mean[0] * k.fx * iz,
            g.mean[1] * k.fy * iz,
            -g.mean[0] * k.fx * t.x * iz2 - g.mean[1] * k.fy * t.y * iz2,
        );
        d_t.z += d_j[(0, 0)] * (-k.fx * iz2) + d_j[(1, 1)] * (-k.fy * iz2);
        // J02 = -fx x/z² unclamped, -fx c/z with c fixed when clamped
        if clamped_j[0] {
            d_t.z += d_j[(0, 2)] * (-j[(0, 2)] * iz);
        } else {
            d_t.x += d_j[(0, 2)] * (-k.fx * iz2);
            d_t.z += d_j[(0, 2)] * (2.0 * k.fx * t.x * iz3);
        }
        if clamped_j[1] {
            d_t.z += d_j[(1, 2)] * (-j[(1, 2)] * iz);
        } else {
            d_t.y += d_j[(1, 2)] * (-k.fy * iz2);
            d_t.z += d_j[(1, 2)] * (2.0 * k.fy * t.y * iz3);
        }
        let d_mean = w.transpose() * d_t + d_view;
        for ax in 0..3 {
            cg.params.positions[3 * i + ax] += d_mean[ax];
        }

        // Σ = R S² Rᵀ
        let r = a.rotation;
        let s2 = a.scales.component_mul(&a.scales);
        let d_sigma_sym = 0.5 * (d_sigma + d_sigma.transpose());
        let local = r.transpose() * d_sigma_sym * r;
        for ax in 0..3 {
            cg.params.log_scales[3 * i + ax] += 2.0 * s2[ax] * local[(ax, ax)];
        }
        let d_r = 2.0 * d_sigma_sym * r * Matrix3::from_diagonal(&s2);
        let dq = rotation::backward(cloud.quaternion(i), &d_r);
        for ax in 0..4 {
            cg.params.rotations[4 * i + ax] += dq[ax];
        }
    }
    Ok(out)
}
