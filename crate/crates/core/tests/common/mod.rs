#![allow(dead_code)]

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shellsplat::model::{Camera, GaussianCloud, Group, Intrinsics, Pose, SceneShell};
use shellsplat::render::{render, render_backward};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Camera at `eye` looking at the origin.
pub fn camera_at(eye: Vector3<f64>, size: usize, fov_deg: f64) -> Camera {
    Camera::new(
        Intrinsics::from_fov(size, size, fov_deg.to_radians()),
        Pose::look_at(eye, Vector3::zeros(), Vector3::new(0.0, -1.0, 0.0)),
    )
}

pub fn random_quat(r: &mut ChaCha8Rng) -> [f64; 4] {
    let q: [f64; 4] = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.map(|v| v / n)
}

/// `n` Gaussians scattered around the origin, sized to overlap on a small image.
pub fn random_cloud(r: &mut ChaCha8Rng, n: usize, sh_degree: usize, spread: f64, scale: f64) -> GaussianCloud {
    let mut c = GaussianCloud::empty(sh_degree);
    for _ in 0..n {
        let p = Vector3::new(
            r.random_range(-spread..spread),
            r.random_range(-spread..spread),
            r.random_range(-spread..spread),
        );
        let ls = Vector3::new(
            (scale * r.random_range(0.5..1.5)).ln(),
            (scale * r.random_range(0.5..1.5)).ln(),
            (scale * r.random_range(0.5..1.5)).ln(),
        );
        let rgb = [r.random_range(0.1..0.9), r.random_range(0.1..0.9), r.random_range(0.1..0.9)];
        c.push(p, random_quat(r), ls, r.random_range(0.2..0.8), rgb);
        let i = c.len() - 1;
        let k = c.params.sh_rest.len() / c.len();
        for v in &mut c.params.sh_rest[k * i..k * (i + 1)] {
            *v = r.random_range(-0.1..0.1);
        }
    }
    c
}

/// Outcome of comparing one analytic derivative against central differences.
#[derive(Debug, Clone, Copy)]
pub struct Check {
    pub analytic: f64,
    pub numeric: f64,
    pub rel: f64,
    pub kink: bool,
}

/// Central difference of `f` with respect to parameter `k` of `group`, at
/// steps `h` and `h/2`. A large disagreement between the two marks a kink.
pub fn central_difference(
    cloud: &GaussianCloud,
    group: Group,
    k: usize,
    h: f64,
    f: &dyn Fn(&GaussianCloud) -> f64,
) -> (f64, f64) {
    let eval = |step: f64| {
        let mut plus = cloud.clone();
        plus.params.group_mut(group)[k] += step;
        let mut minus = cloud.clone();
        minus.params.group_mut(group)[k] -= step;
        (f(&plus) - f(&minus)) / (2.0 * step)
    };
    (eval(h), eval(h / 2.0))
}

/// Relative error with an absolute floor so that vanishing derivatives do
/// not amplify rounding noise.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn compare(analytic: f64, d_h: f64, d_h2: f64, floor: f64, kink_tol: f64) -> Check {
    let kink = relative_error(d_h, d_h2, floor) > kink_tol;
    Check {
        analytic,
        numeric: d_h2,
        rel: relative_error(analytic, d_h2, floor),
        kink,
    }
}

pub fn weights(seed: u64, n: usize) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

pub fn linear_loss(cloud: &GaussianCloud, cam: &Camera, w: &[f64]) -> f64 {
    let out = render(&[cloud], cam, [0.1, 0.2, 0.3]).unwrap();
    out.image.data.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// Worst relative error over all non-kink parameters, and how many were checked.
pub fn check_render(cloud: &GaussianCloud, cam: &Camera, seed: u64) -> (f64, usize) {
    let w = weights(100 + seed, cam.width() * cam.height() * 3);
    let out = render(&[cloud], cam, [0.1, 0.2, 0.3]).unwrap();
    let grads = render_backward(&out, &[cloud], &w).unwrap().remove(0).unwrap();
    let f = |c: &GaussianCloud| linear_loss(c, cam, &w);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for g in Group::ALL {
        for k in 0..cloud.params.group(g).len() {
            let (d1, d2) = central_difference(cloud, g, k, 1e-4, &f);
            let c = compare(grads.params.group(g)[k], d1, d2, 1e-6, 1e-4);
            if c.kink {
                continue;
            }
            checked += 1;
            if c.rel > 1e-3 {
                println!("seed {seed} {g:?}[{k}] analytic {} numeric {} rel {}", c.analytic, c.numeric, c.rel);
            }
            worst = worst.max(c.rel);
        }
    }
    (worst, checked)
}

pub fn shell_scene(seed: u64) -> (GaussianCloud, SceneShell) {
    let mut r = rng(seed);
    let center = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
    let shell = SceneShell::new(center, 2.0, 5.0).unwrap();
    let mut cloud = random_cloud(&mut r, 10, 1, 1.0, 0.3);
    for i in 0..cloud.len() {
        let d = cloud.position(i).normalize();
        cloud.set_position(i, center + d * r.random_range(0.5..7.0));
    }
    (cloud, shell)
}

pub fn check_geometric(
    cloud: &GaussianCloud,
    analytic: &dyn Fn(Group, usize) -> f64,
    f: &dyn Fn(&GaussianCloud) -> f64,
    groups: &[Group],
) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for &g in groups {
        for k in 0..cloud.params.group(g).len() {
            let (d1, d2) = central_difference(cloud, g, k, 1e-5, f);
            let c = compare(analytic(g, k), d1, d2, 1e-6, 1e-5);
            if c.kink {
                continue;
            }
            checked += 1;
            worst = worst.max(c.rel);
        }
    }
    (worst, checked)
}
