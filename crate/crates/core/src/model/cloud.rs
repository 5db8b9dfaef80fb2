//! Gaussian parameter storage and activations.

use nalgebra::{Matrix3, Vector3};

use super::{rotation, sh};
use crate::error::{Error, Result};

/// The optimizable parameter groups of a Gaussian cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Position,
    Rotation,
    Scale,
    Opacity,
    ShDc,
    ShRest,
}

impl Group {
    pub const ALL: [Group; 6] = [
        Group::Position,
        Group::Rotation,
        Group::Scale,
        Group::Opacity,
        Group::ShDc,
        Group::ShRest,
    ];

    /// Scalars per Gaussian for this group.
    pub fn stride(self, sh_degree: usize) -> usize {
        match self {
            Group::Position | Group::Scale | Group::ShDc => 3,
            Group::Rotation => 4,
            Group::Opacity => 1,
            Group::ShRest => 3 * (sh::num_coeffs(sh_degree) - 1),
        }
    }
}

/// Flat per-Gaussian buffers, one per [`Group`].
///
/// Used for the parameters themselves as well as for gradients and Adam
/// moments, so that index bookkeeping (densify, prune) is shared.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub sh_degree: usize,
    pub positions: Vec<f64>,
    pub rotations: Vec<f64>,
    pub log_scales: Vec<f64>,
    pub opacity_logits: Vec<f64>,
    pub sh_dc: Vec<f64>,
    pub sh_rest: Vec<f64>,
}

impl Params {
    pub fn zeros(n: usize, sh_degree: usize) -> Self {
        Params {
            sh_degree,
            positions: vec![0.0; 3 * n],
            rotations: vec![0.0; 4 * n],
            log_scales: vec![0.0; 3 * n],
            opacity_logits: vec![0.0; n],
            sh_dc: vec![0.0; 3 * n],
            sh_rest: vec![0.0; Group::ShRest.stride(sh_degree) * n],
        }
    }

    pub fn len(&self) -> usize {
        self.opacity_logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opacity_logits.is_empty()
    }

    pub fn group(&self, g: Group) -> &Vec<f64> {
        match g {
            Group::Position => &self.positions,
            Group::Rotation => &self.rotations,
            Group::Scale => &self.log_scales,
            Group::Opacity => &self.opacity_logits,
            Group::ShDc => &self.sh_dc,
            Group::ShRest => &self.sh_rest,
        }
    }

    pub fn group_mut(&mut self, g: Group) -> &mut Vec<f64> {
        match g {
            Group::Position => &mut self.positions,
            Group::Rotation => &mut self.rotations,
            Group::Scale => &mut self.log_scales,
            Group::Opacity => &mut self.opacity_logits,
            Group::ShDc => &mut self.sh_dc,
            Group::ShRest => &mut self.sh_rest,
        }
    }

    /// Keeps the Gaussians whose flag is `true`, preserving order.
    pub fn retain(&mut self, keep: &[bool]) {
        assert_eq!(keep.len(), self.len());
        let degree = self.sh_degree;
        for g in Group::ALL {
            let stride = g.stride(degree);
            let buf = self.group_mut(g);
            let mut w = 0;
            for (i, &k) in keep.iter().enumerate() {
                if k {
                    if w != i {
                        buf.copy_within(i * stride..(i + 1) * stride, w * stride);
                    }
                    w += 1;
                }
            }
            buf.truncate(w * stride);
        }
    }

    /// Appends a copy of Gaussian `i` of `src`.
    pub fn push_from(&mut self, src: &Params, i: usize) {
        let degree = self.sh_degree;
        for g in Group::ALL {
            let stride = g.stride(degree);
            let slice = &src.group(g)[i * stride..(i + 1) * stride];
            self.group_mut(g).extend_from_slice(slice);
        }
    }

    /// Appends a copy of its own Gaussian `i`.
    pub fn push_copy(&mut self, i: usize) {
        let degree = self.sh_degree;
        for g in Group::ALL {
            let stride = g.stride(degree);
            let buf = self.group_mut(g);
            buf.extend_from_within(i * stride..(i + 1) * stride);
        }
    }

    /// Appends a zero-filled Gaussian slot.
    pub fn push_zeros(&mut self) {
        let degree = self.sh_degree;
        for g in Group::ALL {
            let stride = g.stride(degree);
            let buf = self.group_mut(g);
            buf.resize(buf.len() + stride, 0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        Group::ALL
            .iter()
            .all(|&g| self.group(g).iter().all(|v| v.is_finite()))
    }

    pub fn scale_all(&mut self, factor: f64) {
        for g in Group::ALL {
            self.group_mut(g).iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &Params) {
        for g in Group::ALL {
            let src = other.group(g);
            for (a, b) in self.group_mut(g).iter_mut().zip(src) {
                *a += b;
            }
        }
    }
}

/// A set of anisotropic 3D Gaussians plus per-Gaussian visibility counters.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCloud {
    pub params: Params,
    /// Number of renders in which each Gaussian contributed since the last prune.
    pub visibility_counts: Vec<u32>,
    /// Frozen clouds take part in rendering but never receive updates.
    pub frozen: bool,
}

/// Activated quantities of one Gaussian.
#[derive(Debug, Clone, Copy)]
pub struct Activated {
    pub mean: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub scales: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    pub opacity: f64,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl GaussianCloud {
    pub fn empty(sh_degree: usize) -> Self {
        GaussianCloud {
            params: Params::zeros(0, sh_degree),
            visibility_counts: Vec::new(),
            frozen: false,
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn sh_degree(&self) -> usize {
        self.params.sh_degree
    }

    /// Appends one Gaussian. `rgb` sets the DC term; higher orders start at zero.
    pub fn push(
        &mut self,
        position: Vector3<f64>,
        rotation: [f64; 4],
        log_scales: Vector3<f64>,
        opacity: f64,
        rgb: [f64; 3],
    ) {
        let p = &mut self.params;
        p.positions.extend_from_slice(position.as_slice());
        p.rotations.extend_from_slice(&rotation);
        p.log_scales.extend_from_slice(log_scales.as_slice());
        p.opacity_logits.push(logit(opacity));
        p.sh_dc.extend(rgb.iter().map(|&c| sh::rgb_to_dc(c)));
        let rest = Group::ShRest.stride(p.sh_degree);
        p.sh_rest.resize(p.sh_rest.len() + rest, 0.0);
        self.visibility_counts.push(0);
    }

    /// Appends all Gaussians of `other` (same SH degree required).
    pub fn extend(&mut self, other: &GaussianCloud) {
        assert_eq!(self.sh_degree(), other.sh_degree());
        for i in 0..other.len() {
            self.params.push_from(&other.params, i);
        }
        self.visibility_counts
            .extend_from_slice(&other.visibility_counts);
    }

    pub fn retain(&mut self, keep: &[bool]) {
        self.params.retain(keep);
        let mut it = keep.iter();
        self.visibility_counts.retain(|_| *it.next().unwrap());
    }

    pub fn position(&self, i: usize) -> Vector3<f64> {
        Vector3::from_column_slice(&self.params.positions[3 * i..3 * i + 3])
    }

    pub fn set_position(&mut self, i: usize, p: Vector3<f64>) {
        self.params.positions[3 * i..3 * i + 3].copy_from_slice(p.as_slice());
    }

    pub fn quaternion(&self, i: usize) -> [f64; 4] {
        let r = &self.params.rotations[4 * i..4 * i + 4];
        [r[0], r[1], r[2], r[3]]
    }

    pub fn log_scales(&self, i: usize) -> Vector3<f64> {
        Vector3::from_column_slice(&self.params.log_scales[3 * i..3 * i + 3])
    }

    pub fn scales(&self, i: usize) -> Vector3<f64> {
        self.log_scales(i).map(f64::exp)
    }

    pub fn opacity(&self, i: usize) -> f64 {
        sigmoid(self.params.opacity_logits[i])
    }

    pub fn sh_dc(&self, i: usize) -> &[f64] {
        &self.params.sh_dc[3 * i..3 * i + 3]
    }

    pub fn sh_rest(&self, i: usize) -> &[f64] {
        let s = Group::ShRest.stride(self.sh_degree());
        &self.params.sh_rest[s * i..s * (i + 1)]
    }

    /// Covariance `R diag(exp(2 s)) Rᵀ`, opacity and the other activated quantities.
    pub fn activate(&self, i: usize) -> Result<Activated> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        let q = self.quaternion(i);
        let qn = rotation::norm(q);
        if !qn.is_finite() || qn == 0.0 {
            return Err(Error::InvalidParameter {
                index: i,
                what: "quaternion",
            });
        }
        let mean = self.position(i);
        if !mean.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter {
                index: i,
                what: "position",
            });
        }
        let scales = self.scales(i);
        if !scales.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidParameter {
                index: i,
                what: "scale",
            });
        }
        let logit = self.params.opacity_logits[i];
        if !logit.is_finite() {
            return Err(Error::InvalidParameter {
                index: i,
                what: "opacity",
            });
        }
        if !self.sh_dc(i).iter().chain(self.sh_rest(i)).all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter {
                index: i,
                what: "color",
            });
        }
        let rot = rotation::to_matrix(q);
        let s2 = Matrix3::from_diagonal(&scales.component_mul(&scales));
        Ok(Activated {
            mean,
            rotation: rot,
            scales,
            covariance: rot * s2 * rot.transpose(),
            opacity: sigmoid(logit),
        })
    }

    /// Color of Gaussian `i` seen along `view` (camera center to mean).
    pub fn color(&self, i: usize, view: &Vector3<f64>) -> [f64; 3] {
        sh::eval_color(self.sh_degree(), self.sh_dc(i), self.sh_rest(i), view).0
    }

    /// Index of the smallest activated scale; ties go to the lowest index.
    pub fn shortest_axis_index(&self, i: usize) -> usize {
        let s = self.log_scales(i);
        let mut best = 0;
        for k in 1..3 {
            if s[k] < s[best] {
                best = k;
            }
        }
        best
    }

    /// Index of the largest activated scale; ties go to the lowest index.
    pub fn longest_axis_index(&self, i: usize) -> usize {
        let s = self.log_scales(i);
        let mut best = 0;
        for k in 1..3 {
            if s[k] > s[best] {
                best = k;
            }
        }
        best
    }

    /// World-space direction of the Gaussian's shortest axis.
    pub fn shortest_axis_world(&self, i: usize) -> Result<Vector3<f64>> {
        let a = self.activate(i)?;
        Ok(a.rotation.column(self.shortest_axis_index(i)).into_owned())
    }

    /// Renormalizes every quaternion to unit length.
    pub fn normalize_rotations(&mut self) {
        for q in self.params.rotations.chunks_exact_mut(4) {
            let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
            if n > 0.0 && n.is_finite() {
                q.iter_mut().for_each(|v| *v /= n);
            }
        }
    }

    pub fn reset_visibility(&mut self) {
        self.visibility_counts.iter_mut().for_each(|c| *c = 0);
    }

    /// Adds one to the counter of every Gaussian flagged visible. No-op on frozen clouds.
    pub fn record_visibility(&mut self, visible: &[bool]) {
        if self.frozen {
            return;
        }
        for (c, &v) in self.visibility_counts.iter_mut().zip(visible) {
            if v {
                *c += 1;
            }
        }
    }

    /// Builds a single Gaussian whose covariance equals `cov` (symmetric positive-definite).
    pub fn push_from_covariance(&mut self, position: Vector3<f64>, cov: &Matrix3<f64>, opacity: f64, rgb: [f64; 3]) {
        let eig = nalgebra::SymmetricEigen::new(*cov);
        let mut vecs = eig.eigenvectors;
        if vecs.determinant() < 0.0 {
            let c = -vecs.column(2);
            vecs.set_column(2, &c);
        }
        let q = rotation::from_matrix(&vecs);
        let log_scales = eig.eigenvalues.map(|l| 0.5 * l.ln());
        self.push(position, q, log_scales, opacity, rgb);
    }
}

/// Two concentric spheres bounding the background shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneShell {
    pub center: Vector3<f64>,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl SceneShell {
    pub fn new(center: Vector3<f64>, r_inner: f64, r_outer: f64) -> Result<Self> {
        let shell = SceneShell {
            center,
            r_inner,
            r_outer,
        };
        shell.validate()?;
        Ok(shell)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.r_inner.is_finite()
            && self.r_outer.is_finite()
            && self.r_inner > 0.0
            && self.r_inner < self.r_outer
            && self.center.iter().all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidShell {
                r_inner: self.r_inner,
                r_outer: self.r_outer,
            })
        }
    }

    pub fn radius_of(&self, p: &Vector3<f64>) -> f64 {
        (p - self.center).norm()
    }

    /// Whether `p` lies in `[r_inner * (1 - tol), r_outer * (1 + tol)]`.
    pub fn contains(&self, p: &Vector3<f64>, tol: f64) -> bool {
        let r = self.radius_of(p);
        r >= self.r_inner * (1.0 - tol) && r <= self.r_outer * (1.0 + tol)
    }

    /// Radially projects `p` into the shell.
    pub fn clamp(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let d = p - self.center;
        let r = d.norm();
        if r == 0.0 {
            return self.center + Vector3::new(self.r_inner, 0.0, 0.0);
        }
        self.center + d * (r.clamp(self.r_inner, self.r_outer) / r)
    }
}
