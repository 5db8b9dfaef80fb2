//! Pinhole cameras, images and per-view rasters.
//!
//! Conventions follow COLMAP: camera x right, y down, z forward; the pose
//! maps world to camera (`x_cam = R x_world + t`); the top-left pixel has
//! its center at `(0.5, 0.5)`.

use nalgebra::{Matrix3, UnitQuaternion, Vector2, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    /// Square pixels, principal point at the image center.
    pub fn from_fov(width: usize, height: usize, fov_x: f64) -> Self {
        let fx = 0.5 * width as f64 / (0.5 * fov_x).tan();
        Intrinsics {
            fx,
            fy: fx,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx.is_finite()
            && self.fy.is_finite()
            && self.fx > 0.0
            && self.fy > 0.0
            && self.cx.is_finite()
            && self.cy.is_finite()
            && self.width > 0
            && self.height > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::DegenerateIntrinsics(format!("{self:?}")))
        }
    }

    /// Scales focal lengths, principal point and resolution together.
    pub fn scaled(&self, factor: f64) -> Self {
        Intrinsics {
            fx: self.fx * factor,
            fy: self.fy * factor,
            cx: self.cx * factor,
            cy: self.cy * factor,
            width: ((self.width as f64) * factor).round().max(1.0) as usize,
            height: ((self.height as f64) * factor).round().max(1.0) as usize,
        }
    }
}

/// World-to-camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Pose of a camera centered at `eye` looking toward `target`; `up` is a
    /// world vector that should appear upward in the image.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Self {
        let forward = (target - eye).normalize();
        let mut right = forward.cross(&up);
        if right.norm() < 1e-9 {
            right = forward.cross(&Vector3::new(1.0, 0.0, 0.0));
            if right.norm() < 1e-9 {
                right = forward.cross(&Vector3::new(0.0, 0.0, 1.0));
            }
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        Self::from_axes(eye, right, down, forward)
    }

    /// Pose from the camera's world-space axes (right, down, forward) and center.
    pub fn from_axes(
        center: Vector3<f64>,
        right: Vector3<f64>,
        down: Vector3<f64>,
        forward: Vector3<f64>,
    ) -> Self {
        let rot = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let rotation = UnitQuaternion::from_matrix(&rot);
        let translation = -(rotation.to_rotation_matrix().matrix() * center);
        Pose {
            rotation,
            translation,
        }
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        *self.rotation.to_rotation_matrix().matrix()
    }

    /// Camera center `C = -Rᵀ t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.inverse() * self.translation)
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn camera_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse() * (p - self.translation)
    }

    /// Same orientation, scene uniformly scaled by `s` about the origin.
    pub fn scaled(&self, s: f64) -> Self {
        Pose {
            rotation: self.rotation,
            translation: self.translation * s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub pose: Pose,
}

impl Camera {
    pub fn new(intrinsics: Intrinsics, pose: Pose) -> Self {
        Camera { intrinsics, pose }
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn center(&self) -> Vector3<f64> {
        self.pose.center()
    }

    /// Pixel coordinates and camera-frame depth of a world point, or `None`
    /// when it lies behind the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(Vector2<f64>, f64)> {
        let c = self.pose.world_to_camera(p);
        if c.z <= 0.0 {
            return None;
        }
        let k = &self.intrinsics;
        Some((
            Vector2::new(k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy),
            c.z,
        ))
    }

    /// Like [`Camera::project`] but also requires the pixel to be inside the image.
    pub fn project_in_bounds(&self, p: &Vector3<f64>) -> Option<(Vector2<f64>, f64)> {
        let (uv, z) = self.project(p)?;
        let k = &self.intrinsics;
        if uv.x >= 0.0 && uv.y >= 0.0 && uv.x < k.width as f64 && uv.y < k.height as f64 {
            Some((uv, z))
        } else {
            None
        }
    }

    /// Camera-frame ray through continuous pixel coordinates, with `z = 1`.
    pub fn ray_camera(&self, px: f64, py: f64) -> Vector3<f64> {
        let k = &self.intrinsics;
        Vector3::new((px - k.cx) / k.fx, (py - k.cy) / k.fy, 1.0)
    }

    /// World-space unit ray direction through the center of pixel `(u, v)`.
    pub fn pixel_direction(&self, u: usize, v: usize) -> Vector3<f64> {
        let r = self.ray_camera(u as f64 + 0.5, v as f64 + 0.5);
        (self.pose.rotation.inverse() * r).normalize()
    }
}

/// RGB image with interleaved `f64` channels, nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Image {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Image {
            width,
            height,
            data,
        }
    }

    pub fn pixel(&self, u: usize, v: usize) -> [f64; 3] {
        let i = (v * self.width + u) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, u: usize, v: usize, rgb: [f64; 3]) {
        let i = (v * self.width + u) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centers at +0.5),
    /// clamped to the border.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> [f64; 3] {
        let fx = (x - 0.5).clamp(0.0, (self.width - 1) as f64);
        let fy = (y - 0.5).clamp(0.0, (self.height - 1) as f64);
        let x0 = fx.floor() as usize;
        let y0 = fy.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let tx = fx - x0 as f64;
        let ty = fy - y0 as f64;
        let (a, b, c, d) = (
            self.pixel(x0, y0),
            self.pixel(x1, y0),
            self.pixel(x0, y1),
            self.pixel(x1, y1),
        );
        let mut out = [0.0; 3];
        for ch in 0..3 {
            out[ch] = (a[ch] * (1.0 - tx) + b[ch] * tx) * (1.0 - ty)
                + (c[ch] * (1.0 - tx) + d[ch] * tx) * ty;
        }
        out
    }

    pub fn to_rgb8(&self) -> image::RgbImage {
        let buf = self
            .data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer length matches dimensions")
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        Image {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.as_raw().iter().map(|&b| b as f64 / 255.0).collect(),
        }
    }
}

/// Per-pixel boolean raster; for background masks `true` marks a background pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Mask {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.data[v * self.width + u]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Single-channel `f32` raster (depth maps as stored on disk).
#[derive(Debug, Clone, PartialEq)]
pub struct FloatMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl FloatMap {
    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        FloatMap {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn get(&self, u: usize, v: usize) -> f32 {
        self.data[v * self.width + u]
    }
}

/// One training view: camera, image and optional depth/background mask.
#[derive(Debug, Clone)]
pub struct CameraView {
    pub name: String,
    pub camera: Camera,
    pub image: Image,
    pub depth: Option<FloatMap>,
    pub mask: Option<Mask>,
}

impl CameraView {
    pub fn new(name: impl Into<String>, camera: Camera, image: Image) -> Result<Self> {
        let view = CameraView {
            name: name.into(),
            camera,
            image,
            depth: None,
            mask: None,
        };
        view.validate()?;
        Ok(view)
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.intrinsics.validate()?;
        let (w, h) = (self.camera.width(), self.camera.height());
        if self.image.width != w || self.image.height != h {
            return Err(Error::ShapeMismatch(format!(
                "view `{}`: image {}x{} vs intrinsics {w}x{h}",
                self.name, self.image.width, self.image.height
            )));
        }
        if let Some(d) = &self.depth {
            if d.width != w || d.height != h {
                return Err(Error::ShapeMismatch(format!(
                    "view `{}`: depth {}x{} vs image {w}x{h}",
                    self.name, d.width, d.height
                )));
            }
        }
        if let Some(m) = &self.mask {
            if m.width != w || m.height != h {
                return Err(Error::ShapeMismatch(format!(
                    "view `{}`: mask {}x{} vs image {w}x{h}",
                    self.name, m.width, m.height
                )));
            }
        }
        Ok(())
    }

    pub fn with_depth(mut self, depth: FloatMap) -> Result<Self> {
        self.depth = Some(depth);
        self.validate()?;
        Ok(self)
    }

    pub fn with_mask(mut self, mask: Mask) -> Result<Self> {
        self.mask = Some(mask);
        self.validate()?;
        Ok(self)
    }

    /// File stem of the image name (directory and extension stripped).
    pub fn stem(&self) -> String {
        std::path::Path::new(&self.name)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.name.clone())
    }
}
