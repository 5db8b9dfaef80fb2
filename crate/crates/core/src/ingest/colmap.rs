//! COLMAP text models (`cameras.txt`, `images.txt`, `points3D.txt`).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::model::{Camera, Intrinsics, Pose};

/// A registered image without pixel data.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSkeleton {
    pub image_id: u32,
    pub name: String,
    pub camera: Camera,
}

/// Sparse SfM points with colors and tracks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparsePointCloud {
    pub points: Vec<Vector3<f64>>,
    pub colors: Vec<[f64; 3]>,
    /// Per point, indices into the view list of the images observing it.
    pub tracks: Vec<Vec<usize>>,
}

impl SparsePointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn track_length(&self, i: usize) -> usize {
        self.tracks[i].len()
    }

    pub fn push(&mut self, p: Vector3<f64>, rgb: [f64; 3], track: Vec<usize>) {
        self.points.push(p);
        self.colors.push(rgb);
        self.tracks.push(track);
    }

    /// Keeps the points whose flag is `true`.
    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> SparsePointCloud {
        let mut out = SparsePointCloud::default();
        for i in 0..self.len() {
            if keep(i) {
                out.push(self.points[i], self.colors[i], self.tracks[i].clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ColmapModel {
    pub views: Vec<ViewSkeleton>,
    pub points: SparsePointCloud,
}

/// Non-comment, non-empty lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.starts_with('#'))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, tokens: &[&str], k: usize, what: &str) -> Result<T> {
    let tok = tokens
        .get(k)
        .ok_or_else(|| Error::parse(path, line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::parse(path, line, format!("invalid {what} `{tok}`")))
}

fn parse_cameras(path: &Path) -> Result<HashMap<u32, Intrinsics>> {
    let text = read(path)?;
    let mut out = HashMap::new();
    for (ln, line) in data_lines(&text) {
        if line.is_empty() {
            continue;
        }
        let t: Vec<&str> = line.split_whitespace().collect();
        let id: u32 = field(path, ln, &t, 0, "camera id")?;
        let model = *t.get(1).ok_or_else(|| Error::parse(path, ln, "missing camera model"))?;
        let width: usize = field(path, ln, &t, 2, "width")?;
        let height: usize = field(path, ln, &t, 3, "height")?;
        let intr = match model {
            "PINHOLE" => Intrinsics {
                fx: field(path, ln, &t, 4, "fx")?,
                fy: field(path, ln, &t, 5, "fy")?,
                cx: field(path, ln, &t, 6, "cx")?,
                cy: field(path, ln, &t, 7, "cy")?,
                width,
                height,
            },
            "SIMPLE_PINHOLE" => {
                let f = field(path, ln, &t, 4, "f")?;
                Intrinsics {
                    fx: f,
                    fy: f,
                    cx: field(path, ln, &t, 5, "cx")?,
                    cy: field(path, ln, &t, 6, "cy")?,
                    width,
                    height,
                }
            }
            other => return Err(Error::UnsupportedCameraModel(other.to_string())),
        };
        out.insert(id, intr);
    }
    Ok(out)
}

fn parse_images(path: &Path, cameras: &HashMap<u32, Intrinsics>) -> Result<Vec<ViewSkeleton>> {
    let text = read(path)?;
    let mut views = Vec::new();
    // each image has a pose line followed by a (possibly empty) keypoint line
    let mut expect_points = false;
    for (ln, line) in data_lines(&text) {
        if expect_points {
            expect_points = false;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() < 10 {
            return Err(Error::parse(path, ln, format!("expected 10 fields, found {}", t.len())));
        }
        let image_id: u32 = field(path, ln, &t, 0, "image id")?;
        let mut q = [0.0; 4];
        for (k, v) in q.iter_mut().enumerate() {
            *v = field(path, ln, &t, 1 + k, "quaternion component")?;
        }
        let mut tr = [0.0; 3];
        for (k, v) in tr.iter_mut().enumerate() {
            *v = field(path, ln, &t, 5 + k, "translation component")?;
        }
        let camera_id: u32 = field(path, ln, &t, 8, "camera id")?;
        let intrinsics = *cameras
            .get(&camera_id)
            .ok_or_else(|| Error::parse(path, ln, format!("unknown camera id {camera_id}")))?;
        let quat = Quaternion::new(q[0], q[1], q[2], q[3]);
        if !(quat.norm() > 0.0) {
            return Err(Error::parse(path, ln, "zero quaternion"));
        }
        views.push(ViewSkeleton {
            image_id,
            name: t[9..].join(" "),
            camera: Camera::new(
                intrinsics,
                Pose {
                    rotation: UnitQuaternion::from_quaternion(quat),
                    translation: Vector3::from(tr),
                },
            ),
        });
        expect_points = true;
    }
    Ok(views)
}

fn parse_points(path: &Path, views: &[ViewSkeleton]) -> Result<SparsePointCloud> {
    let text = read(path)?;
    let index: HashMap<u32, usize> = views.iter().enumerate().map(|(i, v)| (v.image_id, i)).collect();
    let mut cloud = SparsePointCloud::default();
    for (ln, line) in data_lines(&text) {
        if line.is_empty() {
            continue;
        }
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() < 8 || (t.len() - 8) % 2 != 0 {
            return Err(Error::parse(path, ln, "expected ID X Y Z R G B ERROR followed by track pairs"));
        }
        let mut p = [0.0; 3];
        for (k, v) in p.iter_mut().enumerate() {
            *v = field(path, ln, &t, 1 + k, "coordinate")?;
        }
        let mut rgb = [0.0; 3];
        for (k, v) in rgb.iter_mut().enumerate() {
            let c: u8 = field(path, ln, &t, 4 + k, "color")?;
            *v = c as f64 / 255.0;
        }
        let mut track = Vec::new();
        for k in (8..t.len()).step_by(2) {
            let image_id: u32 = field(path, ln, &t, k, "track image id")?;
            if let Some(&vi) = index.get(&image_id) {
                if !track.contains(&vi) {
                    track.push(vi);
                }
            }
        }
        cloud.push(Vector3::from(p), rgb, track);
    }
    Ok(cloud)
}

/// Parses a COLMAP text model directory. Views and points keep file order.
pub fn parse_colmap(dir: &Path) -> Result<ColmapModel> {
    let cameras = parse_cameras(&dir.join("cameras.txt"))?;
    let views = parse_images(&dir.join("images.txt"), &cameras)?;
    let points = parse_points(&dir.join("points3D.txt"), &views)?;
    Ok(ColmapModel { views, points })
}

/// Writes a COLMAP text model. Every view gets its own PINHOLE camera and
/// keypoint lines are left empty.
pub fn write_colmap(dir: &Path, views: &[ViewSkeleton], points: &SparsePointCloud) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut cams = String::from("# CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n");
    let mut imgs = String::from("# IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n# POINTS2D[] as (X, Y, POINT3D_ID)\n");
    for (k, v) in views.iter().enumerate() {
        let i = &v.camera.intrinsics;
        let cam_id = k + 1;
        writeln!(cams, "{cam_id} PINHOLE {} {} {:?} {:?} {:?} {:?}", i.width, i.height, i.fx, i.fy, i.cx, i.cy).unwrap();
        let q = v.camera.pose.rotation.quaternion();
        let t = v.camera.pose.translation;
        writeln!(
            imgs,
            "{} {:?} {:?} {:?} {:?} {:?} {:?} {:?} {cam_id} {}\n",
            v.image_id, q.w, q.i, q.j, q.k, t.x, t.y, t.z, v.name
        )
        .unwrap();
    }
    let mut pts = String::from("# POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n");
    for i in 0..points.len() {
        let p = points.points[i];
        let c = points.colors[i].map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8);
        write!(pts, "{} {:?} {:?} {:?} {} {} {} 0.5", i + 1, p.x, p.y, p.z, c[0], c[1], c[2]).unwrap();
        for (k, &vi) in points.tracks[i].iter().enumerate() {
            write!(pts, " {} {k}", views[vi].image_id).unwrap();
        }
        pts.push('\n');
    }
    for (name, body) in [("cameras.txt", cams), ("images.txt", imgs), ("points3D.txt", pts)] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Mean of the camera centers.
pub fn compute_origin(cameras: &[Camera]) -> Result<Vector3<f64>> {
    if cameras.is_empty() {
        return Err(Error::EmptyCameraList);
    }
    let sum: Vector3<f64> = cameras.iter().map(|c| c.center()).sum();
    Ok(sum / cameras.len() as f64)
}

/// Largest distance between two camera centers.
pub fn navigation_diameter(cameras: &[Camera]) -> Result<f64> {
    if cameras.len() < 2 {
        return Err(Error::TooFewCameras);
    }
    let centers: Vec<_> = cameras.iter().map(|c| c.center()).collect();
    let mut d: f64 = 0.0;
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            d = d.max((centers[i] - centers[j]).norm());
        }
    }
    Ok(d)
}

/// Ten times the navigation diameter.
pub fn default_outer_radius(cameras: &[Camera]) -> Result<f64> {
    Ok(10.0 * navigation_diameter(cameras)?)
}
