//! Photometric loss and the two shell regularizers, each with its analytic
//! gradient.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::model::{rotation, GaussianCloud, Image, Mask, Params, SceneShell, StageConfig};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable Gaussian filter with zero contribution from outside the image.
fn blur(src: &[f64], width: usize, height: usize, win: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let half = SSIM_WINDOW / 2;
    let mut tmp = vec![0.0; src.len()];
    for v in 0..height {
        let row = &src[v * width..(v + 1) * width];
        for u in 0..width {
            let lo = u.saturating_sub(half);
            let hi = (u + half).min(width - 1);
            let mut acc = 0.0;
            for q in lo..=hi {
                acc += win[q + half - u] * row[q];
            }
            tmp[v * width + u] = acc;
        }
    }
    let mut out = vec![0.0; src.len()];
    for v in 0..height {
        let lo = v.saturating_sub(half);
        let hi = (v + half).min(height - 1);
        for u in 0..width {
            let mut acc = 0.0;
            for q in lo..=hi {
                acc += win[q + half - v] * tmp[q * width + u];
            }
            out[v * width + u] = acc;
        }
    }
    out
}

/// Mean SSIM over the valid pixels and its gradient with respect to `x`.
///
/// Local statistics are Gaussian-weighted averages over valid, in-bounds
/// pixels only (the window is renormalized), so restricting the mask to a
/// sub-rectangle gives the same value as evaluating the cropped images.
pub fn ssim_with_grad(x: &Image, y: &Image, valid: Option<&Mask>, want_grad: bool) -> Result<(f64, Vec<f64>)> {
    let (w, h) = (x.width, x.height);
    check_shapes(x, y, valid)?;
    let m: Vec<f64> = match valid {
        Some(mask) => mask.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        None => vec![1.0; w * h],
    };
    let n_valid = m.iter().filter(|&&v| v > 0.0).count();
    if n_valid == 0 {
        return Err(Error::ZeroPixels);
    }
    let win = gaussian_window();
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let norm = blur(&m, w, h, &win);
    let dl_ds = 1.0 / (3 * n_valid) as f64;

    let mut total = 0.0;
    let mut grad = if want_grad { vec![0.0; w * h * 3] } else { Vec::new() };
    for ch in 0..3 {
        let xs: Vec<f64> = (0..w * h).map(|i| x.data[i * 3 + ch]).collect();
        let ys: Vec<f64> = (0..w * h).map(|i| y.data[i * 3 + ch]).collect();
        let prod = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..w * h).map(|i| m[i] * f(i)).collect() };
        let mx = blur(&prod(&|i| xs[i]), w, h, &win);
        let my = blur(&prod(&|i| ys[i]), w, h, &win);
        let exx = blur(&prod(&|i| xs[i] * xs[i]), w, h, &win);
        let eyy = blur(&prod(&|i| ys[i] * ys[i]), w, h, &win);
        let exy = blur(&prod(&|i| xs[i] * ys[i]), w, h, &win);

        let mut ga = vec![0.0; w * h];
        let mut gb = vec![0.0; w * h];
        let mut gc = vec![0.0; w * h];
        for p in 0..w * h {
            if m[p] == 0.0 {
                continue;
            }
            let nrm = norm[p];
            let (ux, uy) = (mx[p] / nrm, my[p] / nrm);
            let vx = exx[p] / nrm - ux * ux;
            let vy = eyy[p] / nrm - uy * uy;
            let cxy = exy[p] / nrm - ux * uy;
            let a1 = 2.0 * ux * uy + c1;
            let a2 = 2.0 * cxy + c2;
            let b1 = ux * ux + uy * uy + c1;
            let b2 = vx + vy + c2;
            let s = a1 * a2 / (b1 * b2);
            total += s;
            if want_grad {
                let d_ux = (2.0 * uy * a2 - 2.0 * uy * a1) / (b1 * b2) - s * (2.0 * ux / b1 - 2.0 * ux / b2);
                let d_exx = -s / b2;
                let d_exy = 2.0 * a1 / (b1 * b2);
                ga[p] = dl_ds * d_ux / nrm;
                gb[p] = dl_ds * d_exx / nrm;
                gc[p] = dl_ds * d_exy / nrm;
            }
        }
        if want_grad {
            let ba = blur(&ga, w, h, &win);
            let bb = blur(&gb, w, h, &win);
            let bc = blur(&gc, w, h, &win);
            for q in 0..w * h {
                if m[q] == 0.0 {
                    continue;
                }
                grad[q * 3 + ch] = ba[q] + 2.0 * xs[q] * bb[q] + ys[q] * bc[q];
            }
        }
    }
    Ok((total * dl_ds, grad))
}

fn check_shapes(x: &Image, y: &Image, valid: Option<&Mask>) -> Result<()> {
    if x.width != y.width || x.height != y.height {
        return Err(Error::ShapeMismatch(format!(
            "images {}x{} vs {}x{}",
            x.width, x.height, y.width, y.height
        )));
    }
    if let Some(m) = valid {
        if m.width != x.width || m.height != x.height {
            return Err(Error::ShapeMismatch(format!(
                "mask {}x{} vs image {}x{}",
                m.width, m.height, x.width, x.height
            )));
        }
    }
    Ok(())
}

/// L1 and D-SSIM terms plus their gradients with respect to the rendered image.
#[derive(Debug, Clone)]
pub struct Photometric {
    pub l1: f64,
    /// `(1 - SSIM) / 2`.
    pub dssim: f64,
    pub d_l1: Vec<f64>,
    pub d_dssim: Vec<f64>,
}

impl Photometric {
    /// `(1 - λ) L1 + λ D-SSIM` and its image gradient.
    pub fn combine(&self, lambda_dssim: f64) -> (f64, Vec<f64>) {
        let value = (1.0 - lambda_dssim) * self.l1 + lambda_dssim * self.dssim;
        let grad = self
            .d_l1
            .iter()
            .zip(&self.d_dssim)
            .map(|(a, b)| (1.0 - lambda_dssim) * a + lambda_dssim * b)
            .collect();
        (value, grad)
    }
}

/// Photometric loss over the pixels flagged in `valid` (all pixels when `None`).
pub fn photometric(rendered: &Image, target: &Image, valid: Option<&Mask>) -> Result<Photometric> {
    check_shapes(rendered, target, valid)?;
    let (w, h) = (rendered.width, rendered.height);
    let n_valid = valid.map_or(w * h, |m| m.count());
    if n_valid == 0 {
        return Err(Error::ZeroPixels);
    }
    let scale = 1.0 / (3 * n_valid) as f64;
    let mut l1 = 0.0;
    let mut d_l1 = vec![0.0; w * h * 3];
    for p in 0..w * h {
        if valid.is_some_and(|m| !m.data[p]) {
            continue;
        }
        for ch in 0..3 {
            let i = p * 3 + ch;
            let diff = rendered.data[i] - target.data[i];
            l1 += diff.abs();
            d_l1[i] = if diff > 0.0 {
                scale
            } else if diff < 0.0 {
                -scale
            } else {
                0.0
            };
        }
    }
    let (ssim, d_ssim) = ssim_with_grad(rendered, target, valid, true)?;
    Ok(Photometric {
        l1: l1 * scale,
        dssim: 0.5 * (1.0 - ssim),
        d_l1,
        d_dssim: d_ssim.into_iter().map(|g| -0.5 * g).collect(),
    })
}

/// Soft barrier keeping Gaussian centers between the two shell radii:
/// mean over Gaussians of the squared radial excursion outside `[r_inner, r_outer]`.
///
/// Returns the value and the (radial) position gradient.
pub fn shell_loss(cloud: &GaussianCloud, shell: &SceneShell) -> Result<(f64, Vec<f64>)> {
    let n = cloud.len();
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    let inv_n = 1.0 / n as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; 3 * n];
    for i in 0..n {
        let d = cloud.position(i) - shell.center;
        let r = d.norm();
        let outside = (r - shell.r_outer).max(0.0);
        let inside = (shell.r_inner - r).max(0.0);
        let excess = outside + inside;
        value += excess * excess;
        let dr = if outside > 0.0 {
            1.0
        } else if inside > 0.0 {
            -1.0
        } else {
            0.0
        };
        if dr != 0.0 && r > 0.0 {
            let g = d * (2.0 * excess * dr * inv_n / r);
            grad[3 * i..3 * i + 3].copy_from_slice(g.as_slice());
        }
    }
    Ok((value * inv_n, grad))
}

/// Per-Gaussian misalignment term `(1 - |r̂ · a|) * s_max / (s_min + ε)`,
/// where `a` is the world-space shortest axis and `r̂` the radial direction.
pub fn planarity_term(cloud: &GaussianCloud, shell: &SceneShell, i: usize, epsilon: f64) -> Result<f64> {
    let d = cloud.position(i) - shell.center;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::GaussianAtCenter(i));
    }
    let axis = cloud.shortest_axis_world(i)?;
    let s = cloud.scales(i);
    let s_max = s[cloud.longest_axis_index(i)];
    let s_min = s[cloud.shortest_axis_index(i)];
    Ok((1.0 - (d / r).dot(&axis).abs()) * s_max / (s_min + epsilon))
}

/// Mean planarity term and its gradients (positions, rotations, log-scales).
/// The shortest-axis selection is held fixed while differentiating.
pub fn planarity_loss(cloud: &GaussianCloud, shell: &SceneShell, epsilon: f64) -> Result<(f64, Params)> {
    let n = cloud.len();
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    let inv_n = 1.0 / n as f64;
    let mut grads = Params::zeros(n, cloud.sh_degree());
    let mut value = 0.0;
    for i in 0..n {
        let d = cloud.position(i) - shell.center;
        let r = d.norm();
        if r == 0.0 {
            return Err(Error::GaussianAtCenter(i));
        }
        let rhat = d / r;
        let a = cloud.activate(i)?;
        let k_min = cloud.shortest_axis_index(i);
        let k_max = cloud.longest_axis_index(i);
        let axis: Vector3<f64> = a.rotation.column(k_min).into_owned();
        let dot = rhat.dot(&axis);
        let mis = 1.0 - dot.abs();
        let (s_max, s_min) = (a.scales[k_max], a.scales[k_min]);
        let ratio = s_max / (s_min + epsilon);
        value += mis * ratio;

        let sign = if dot > 0.0 {
            1.0
        } else if dot < 0.0 {
            -1.0
        } else {
            0.0
        };
        // d(mis)/d(dot) = -sign
        let d_dot = -sign * ratio * inv_n;
        if d_dot != 0.0 {
            let d_pos = (axis - rhat * dot) * (d_dot / r);
            for ax in 0..3 {
                grads.positions[3 * i + ax] += d_pos[ax];
            }
            // dot = r̂ᵀ R e_k  =>  dL/dR = d_dot * r̂ e_kᵀ
            let mut d_rot = Matrix3::zeros();
            d_rot.set_column(k_min, &(rhat * d_dot));
            let dq = rotation::backward(cloud.quaternion(i), &d_rot);
            for ax in 0..4 {
                grads.rotations[4 * i + ax] += dq[ax];
            }
        }
        let d_ratio = mis * inv_n;
        grads.log_scales[3 * i + k_max] += d_ratio * ratio;
        grads.log_scales[3 * i + k_min] -= d_ratio * s_max * s_min / ((s_min + epsilon) * (s_min + epsilon));
    }
    Ok((value * inv_n, grads))
}

/// Weighted loss terms of one iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossBreakdown {
    pub l1: f64,
    pub dssim: f64,
    pub shell: f64,
    pub planarity: f64,
    pub total: f64,
}

/// Full objective of one iteration with gradients.
#[derive(Debug, Clone)]
pub struct LossEval {
    pub breakdown: LossBreakdown,
    /// Gradient with respect to the rendered image.
    pub d_image: Vec<f64>,
    /// Gradient of the geometric terms with respect to the trainable cloud.
    pub d_geometry: Option<Params>,
}

/// `(1 - λ_dssim) L1 + λ_dssim D-SSIM + λ_shell L_shell + λ_planarity L_planarity`.
///
/// Geometric terms are evaluated on `geometry` (the trainable background
/// cloud and its shell); pass `None` for photometric-only stages.
pub fn total_loss(
    rendered: &Image,
    target: &Image,
    valid: Option<&Mask>,
    geometry: Option<(&GaussianCloud, &SceneShell)>,
    config: &StageConfig,
) -> Result<LossEval> {
    if config.lambda_shell < 0.0 {
        return Err(Error::NegativeWeight("lambda_shell"));
    }
    if config.lambda_planarity < 0.0 {
        return Err(Error::NegativeWeight("lambda_planarity"));
    }
    if !(0.0..=1.0).contains(&config.lambda_dssim) {
        return Err(Error::NegativeWeight("lambda_dssim"));
    }
    let photo = photometric(rendered, target, valid)?;
    let (photo_total, d_image) = photo.combine(config.lambda_dssim);
    let mut breakdown = LossBreakdown {
        l1: photo.l1,
        dssim: photo.dssim,
        total: photo_total,
        ..Default::default()
    };
    let mut d_geometry = None;
    if let Some((cloud, shell)) = geometry.filter(|(c, _)| !c.is_empty()) {
        let (shell_value, shell_grad) = shell_loss(cloud, shell)?;
        let (plan_value, mut grads) = planarity_loss(cloud, shell, config.epsilon)?;
        breakdown.shell = shell_value;
        breakdown.planarity = plan_value;
        breakdown.total += config.lambda_shell * shell_value + config.lambda_planarity * plan_value;
        grads.scale_all(config.lambda_planarity);
        for (g, s) in grads.positions.iter_mut().zip(&shell_grad) {
            *g += config.lambda_shell * s;
        }
        d_geometry = Some(grads);
    }
    Ok(LossEval {
        breakdown,
        d_image,
        d_geometry,
    })
}
