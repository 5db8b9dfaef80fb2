//! Real spherical harmonics up to degree 3 (3DGS sign conventions).

use nalgebra::Vector3;

/// `Y_0^0`, also used to encode a flat RGB color into the DC coefficient.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

pub const MAX_DEGREE: usize = 3;

/// Number of basis functions for `degree`.
pub const fn num_coeffs(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

pub fn rgb_to_dc(c: f64) -> f64 {
    (c - 0.5) / SH_C0
}

pub fn dc_to_rgb(dc: f64) -> f64 {
    dc * SH_C0 + 0.5
}

/// Basis values and their gradients with respect to a unit direction.
pub fn basis(degree: usize, d: [f64; 3]) -> ([f64; 16], [[f64; 3]; 16]) {
    let [x, y, z] = d;
    let mut b = [0.0; 16];
    let mut g = [[0.0; 3]; 16];
    b[0] = SH_C0;
    if degree >= 1 {
        b[1] = -SH_C1 * y;
        g[1] = [0.0, -SH_C1, 0.0];
        b[2] = SH_C1 * z;
        g[2] = [0.0, 0.0, SH_C1];
        b[3] = -SH_C1 * x;
        g[3] = [-SH_C1, 0.0, 0.0];
    }
    if degree >= 2 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        let a = SH_C2;
        b[4] = a[0] * x * y;
        g[4] = [a[0] * y, a[0] * x, 0.0];
        b[5] = a[1] * y * z;
        g[5] = [0.0, a[1] * z, a[1] * y];
        b[6] = a[2] * (2.0 * zz - xx - yy);
        g[6] = [-2.0 * a[2] * x, -2.0 * a[2] * y, 4.0 * a[2] * z];
        b[7] = a[3] * x * z;
        g[7] = [a[3] * z, 0.0, a[3] * x];
        b[8] = a[4] * (xx - yy);
        g[8] = [2.0 * a[4] * x, -2.0 * a[4] * y, 0.0];
    }
    if degree >= 3 {
        let (xx, yy, zz) = (x * x, y * y, z * z);
        let c = SH_C3;
        b[9] = c[0] * y * (3.0 * xx - yy);
        g[9] = [6.0 * c[0] * x * y, c[0] * (3.0 * xx - 3.0 * yy), 0.0];
        b[10] = c[1] * x * y * z;
        g[10] = [c[1] * y * z, c[1] * x * z, c[1] * x * y];
        b[11] = c[2] * y * (4.0 * zz - xx - yy);
        g[11] = [
            -2.0 * c[2] * x * y,
            c[2] * (4.0 * zz - xx - 3.0 * yy),
            8.0 * c[2] * y * z,
        ];
        b[12] = c[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
        g[12] = [
            -6.0 * c[3] * x * z,
            -6.0 * c[3] * y * z,
            c[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy),
        ];
        b[13] = c[4] * x * (4.0 * zz - xx - yy);
        g[13] = [
            c[4] * (4.0 * zz - 3.0 * xx - yy),
            -2.0 * c[4] * x * y,
            8.0 * c[4] * x * z,
        ];
        b[14] = c[5] * z * (xx - yy);
        g[14] = [2.0 * c[5] * x * z, -2.0 * c[5] * y * z, c[5] * (xx - yy)];
        b[15] = c[6] * x * (xx - 3.0 * yy);
        g[15] = [c[6] * (3.0 * xx - 3.0 * yy), -6.0 * c[6] * x * y, 0.0];
    }
    (b, g)
}

/// View-dependent color of one Gaussian.
///
/// `dc` holds 3 channel values, `rest` holds `(K - 1) * 3` values laid out
/// coefficient-major. `view` is the unnormalized vector from the camera
/// center to the Gaussian mean. Returns the color (clamped at zero) and the
/// per-channel flag telling whether the clamp was active.
pub fn eval_color(degree: usize, dc: &[f64], rest: &[f64], view: &Vector3<f64>) -> ([f64; 3], [bool; 3]) {
    let dir = unit(view);
    let (b, _) = basis(degree, dir);
    let k = num_coeffs(degree);
    let mut out = [0.0; 3];
    let mut clamped = [false; 3];
    for ch in 0..3 {
        let mut v = dc[ch] * b[0];
        for j in 1..k {
            v += rest[(j - 1) * 3 + ch] * b[j];
        }
        v += 0.5;
        if v < 0.0 {
            clamped[ch] = true;
            v = 0.0;
        }
        out[ch] = v;
    }
    (out, clamped)
}

/// Backward of [`eval_color`]; accumulates into the coefficient gradients
/// and returns the gradient with respect to `view`.
pub fn eval_color_backward(
    degree: usize,
    rest: &[f64],
    view: &Vector3<f64>,
    clamped: [bool; 3],
    d_color: [f64; 3],
    d_dc: &mut [f64],
    d_rest: &mut [f64],
) -> Vector3<f64> {
    let dir = unit(view);
    let (b, g) = basis(degree, dir);
    let k = num_coeffs(degree);
    let mut d_dir = [0.0; 3];
    for ch in 0..3 {
        if clamped[ch] {
            continue;
        }
        let dc_ch = d_color[ch];
        d_dc[ch] += dc_ch * b[0];
        for j in 1..k {
            let coef = rest[(j - 1) * 3 + ch];
            d_rest[(j - 1) * 3 + ch] += dc_ch * b[j];
            for a in 0..3 {
                d_dir[a] += dc_ch * coef * g[j][a];
            }
        }
    }
    let d_dir = Vector3::from(d_dir);
    let n = view.norm();
    let dv = Vector3::from(dir);
    (d_dir - dv * dv.dot(&d_dir)) / n
}

fn unit(v: &Vector3<f64>) -> [f64; 3] {
    let n = v.norm();
    [v.x / n, v.y / n, v.z / n]
}
