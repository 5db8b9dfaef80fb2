//! Cube and equirectangular environment maps rendered from inside the shell.

use std::path::Path;

use nalgebra::{Rotation3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::save_image;
use crate::model::{Camera, GaussianCloud, Image, Intrinsics, Mask, Pose, SceneShell};
use crate::render::render;
use crate::segmentation::write_mask_png;

/// Pixels whose accumulated opacity stays below this are holes.
pub const HOLE_ALPHA: f64 = 0.01;
pub const DEFAULT_FACE_RES: usize = 512;

/// Cube faces in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

impl Face {
    pub const ALL: [Face; 6] = [Face::PosX, Face::NegX, Face::PosY, Face::NegY, Face::PosZ, Face::NegZ];

    pub fn suffix(self) -> &'static str {
        match self {
            Face::PosX => "px",
            Face::NegX => "nx",
            Face::PosY => "py",
            Face::NegY => "ny",
            Face::PosZ => "pz",
            Face::NegZ => "nz",
        }
    }

    /// `(forward, down)` in the cube frame; right is `down × forward`.
    pub fn axes(self) -> (Vector3<f64>, Vector3<f64>) {
        let (x, y, z) = (Vector3::x(), Vector3::y(), Vector3::z());
        match self {
            Face::PosX => (x, -y),
            Face::NegX => (-x, -y),
            Face::PosY => (y, z),
            Face::NegY => (-y, -z),
            Face::PosZ => (z, -y),
            Face::NegZ => (-z, -y),
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone)]
pub struct CubemapOptions {
    pub center: Vector3<f64>,
    pub face_res: usize,
    /// Gaussians closer than this to `center` are left out.
    pub near_cut: f64,
    /// Orientation of the cube frame in the world.
    pub orientation: Rotation3<f64>,
    pub background: [f64; 3],
}

impl CubemapOptions {
    pub fn new(center: Vector3<f64>, near_cut: f64) -> Self {
        CubemapOptions {
            center,
            face_res: DEFAULT_FACE_RES,
            near_cut,
            orientation: Rotation3::identity(),
            background: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone)]
pub struct CubeMap {
    pub faces: Vec<Image>,
    /// Per face, `true` where nothing was rendered.
    pub holes: Vec<Mask>,
    pub center: Vector3<f64>,
    pub near_cut: f64,
    pub orientation: Rotation3<f64>,
}

impl CubeMap {
    pub fn face_res(&self) -> usize {
        self.faces[0].width
    }

    pub fn hole_count(&self) -> usize {
        self.holes.iter().map(|m| m.count()).sum()
    }
}

/// 90° pinhole camera for one face.
pub fn face_camera(face: Face, center: Vector3<f64>, res: usize, orientation: &Rotation3<f64>) -> Camera {
    let (f, d) = face.axes();
    let (f, d) = (orientation * f, orientation * d);
    let half = res as f64 / 2.0;
    Camera::new(
        Intrinsics {
            fx: half,
            fy: half,
            cx: half,
            cy: half,
            width: res,
            height: res,
        },
        Pose::from_axes(center, d.cross(&f), d, f),
    )
}

/// Renders the six faces of `cloud` from `options.center`.
pub fn render_cubemap(cloud: &GaussianCloud, shell: &SceneShell, options: &CubemapOptions) -> Result<CubeMap> {
    let distance = shell.radius_of(&options.center);
    if distance >= shell.r_inner {
        return Err(Error::CenterOutsideInnerSphere {
            distance,
            r_inner: shell.r_inner,
        });
    }
    if !(options.near_cut >= 0.0) {
        return Err(Error::Config("near_cut must be non-negative".into()));
    }
    if options.face_res == 0 {
        return Err(Error::Config("face resolution must be positive".into()));
    }
    let mut kept = cloud.clone();
    let keep: Vec<bool> = (0..cloud.len())
        .map(|i| (cloud.position(i) - options.center).norm() >= options.near_cut)
        .collect();
    kept.retain(&keep);

    let rendered: Vec<(Image, Mask)> = Face::ALL
        .par_iter()
        .map(|&face| -> Result<(Image, Mask)> {
            let cam = face_camera(face, options.center, options.face_res, &options.orientation);
            let mut out = render(&[&kept], &cam, options.background)?;
            out.release_cache();
            let holes = Mask {
                width: options.face_res,
                height: options.face_res,
                data: out.alpha.iter().map(|&a| a < HOLE_ALPHA).collect(),
            };
            Ok((out.image, holes))
        })
        .collect::<Result<_>>()?;
    let (faces, holes) = rendered.into_iter().unzip();
    Ok(CubeMap {
        faces,
        holes,
        center: options.center,
        near_cut: options.near_cut,
        orientation: options.orientation,
    })
}

/// Face and continuous pixel coordinates hit by cube-frame direction `d`.
pub fn direction_to_face(d: &Vector3<f64>, res: usize) -> (Face, f64, f64) {
    let a = d.abs();
    let face = if a.x >= a.y && a.x >= a.z {
        if d.x >= 0.0 { Face::PosX } else { Face::NegX }
    } else if a.y >= a.z {
        if d.y >= 0.0 { Face::PosY } else { Face::NegY }
    } else if d.z >= 0.0 {
        Face::PosZ
    } else {
        Face::NegZ
    };
    let (f, down) = face.axes();
    let right = down.cross(&f);
    let z = d.dot(&f);
    let half = res as f64 / 2.0;
    (face, half + half * d.dot(&right) / z, half + half * d.dot(&down) / z)
}

/// Unit direction of equirect pixel `(i, j)` in a `width × width/2` map:
/// longitude 0 looks along +Z, +Y is up.
pub fn equirect_direction(i: usize, j: usize, width: usize) -> Vector3<f64> {
    let height = width / 2;
    let lon = (i as f64 + 0.5) / width as f64 * std::f64::consts::TAU - std::f64::consts::PI;
    let lat = std::f64::consts::FRAC_PI_2 - (j as f64 + 0.5) / height as f64 * std::f64::consts::PI;
    Vector3::new(lat.cos() * lon.sin(), lat.sin(), lat.cos() * lon.cos())
}

/// Bilinear lookup of a cube-frame direction.
pub fn sample_cubemap(cube: &CubeMap, d: &Vector3<f64>) -> ([f64; 3], bool) {
    let res = cube.face_res();
    let (face, x, y) = direction_to_face(d, res);
    let img = &cube.faces[face.index()];
    let hu = (x.floor().max(0.0) as usize).min(res - 1);
    let hv = (y.floor().max(0.0) as usize).min(res - 1);
    (img.sample_bilinear(x, y), cube.holes[face.index()].get(hu, hv))
}

/// Resamples the cube map to a `width × width/2` lat-long image. Holes
/// follow the face pixel containing each sample.
pub fn cubemap_to_equirect(cube: &CubeMap, width: usize) -> Result<(Image, Mask)> {
    if width == 0 || width % 2 != 0 {
        return Err(Error::Config(format!("equirect width must be even and positive, got {width}")));
    }
    let height = width / 2;
    let mut img = Image::new(width, height);
    let mut holes = Mask::filled(width, height, false);
    for j in 0..height {
        for i in 0..width {
            let (c, hole) = sample_cubemap(cube, &equirect_direction(i, j, width));
            img.set_pixel(i, j, c);
            holes.data[j * width + i] = hole;
        }
    }
    Ok((img, holes))
}

/// Writes `face_{px,nx,py,ny,pz,nz}.png`, matching `*_holes.png` masks and,
/// when given, `equirect.png`.
pub fn save_cubemap(cube: &CubeMap, dir: &Path, equirect: Option<&Image>) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for face in Face::ALL {
        save_image(&cube.faces[face.index()], &dir.join(format!("face_{}.png", face.suffix())))?;
        write_mask_png(&cube.holes[face.index()], &dir.join(format!("face_{}_holes.png", face.suffix())))?;
    }
    if let Some(e) = equirect {
        save_image(e, &dir.join("equirect.png"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_axes_are_right_handed() {
        for face in Face::ALL {
            let cam = face_camera(face, Vector3::zeros(), 8, &Rotation3::identity());
            let (f, _) = face.axes();
            let (uv, z) = cam.project(&(f * 3.0)).unwrap();
            assert!((uv.x - 4.0).abs() < 1e-12 && (uv.y - 4.0).abs() < 1e-12);
            assert!((z - 3.0).abs() < 1e-12);
            assert!((cam.pose.rotation_matrix().determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn plus_z_maps_to_face_center() {
        let (face, x, y) = direction_to_face(&Vector3::z(), 16);
        assert_eq!(face, Face::PosZ);
        assert_eq!((x, y), (8.0, 8.0));
    }

    #[test]
    fn direction_lookup_agrees_with_face_projection() {
        for face in Face::ALL {
            let cam = face_camera(face, Vector3::zeros(), 32, &Rotation3::identity());
            for (u, v) in [(3usize, 5usize), (16, 16), (30, 1)] {
                let d = cam.pixel_direction(u, v);
                let (hit, x, y) = direction_to_face(&d, 32);
                assert_eq!(hit, face);
                assert!((x - (u as f64 + 0.5)).abs() < 1e-9);
                assert!((y - (v as f64 + 0.5)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn empty_cloud_is_all_holes() {
        let shell = SceneShell::new(Vector3::zeros(), 1.0, 4.0).unwrap();
        let mut opts = CubemapOptions::new(Vector3::zeros(), 1.0);
        opts.face_res = 8;
        let cube = render_cubemap(&GaussianCloud::empty(0), &shell, &opts).unwrap();
        assert_eq!(cube.hole_count(), 6 * 64);
    }

    #[test]
    fn center_outside_inner_sphere_rejected() {
        let shell = SceneShell::new(Vector3::zeros(), 1.0, 4.0).unwrap();
        let opts = CubemapOptions::new(Vector3::new(2.0, 0.0, 0.0), 0.0);
        assert!(matches!(
            render_cubemap(&GaussianCloud::empty(0), &shell, &opts),
            Err(Error::CenterOutsideInnerSphere { .. })
        ));
    }
}
