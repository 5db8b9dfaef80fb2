//! Background initialization on a geodesic sphere.
//!
//! One Gaussian per icosphere vertex. Its radius comes from what the
//! distance maps see along that direction, its color from the average of
//! the pixels it projects to.

use std::collections::HashMap;

use nalgebra::Vector3;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Camera, CameraView, GaussianCloud, SceneShell};
use crate::segmentation::{median, DistanceMap};

pub const MAX_LEVEL: u32 = 8;
pub const INITIAL_OPACITY: f64 = 0.1;
/// Color given to Gaussians no camera observes.
pub const UNOBSERVED_GRAY: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct Icosphere {
    pub level: u32,
    pub directions: Vec<Vector3<f64>>,
    pub faces: Vec<[usize; 3]>,
}

impl Icosphere {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Per vertex, the mean chord length to its mesh neighbors.
    pub fn neighbor_spacing(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.len()];
        let mut count = vec![0usize; self.len()];
        // every edge is shared by two faces, so each neighbor is counted twice
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let d = (self.directions[a] - self.directions[b]).norm();
                sum[a] += d;
                sum[b] += d;
                count[a] += 1;
                count[b] += 1;
            }
        }
        sum.iter().zip(&count).map(|(s, &c)| s / c.max(1) as f64).collect()
    }
}

/// Subdivided icosahedron with vertices on the unit sphere, `10·4^level + 2` of them.
pub fn build_icosphere(level: u32) -> Result<Icosphere> {
    if level > MAX_LEVEL {
        return Err(Error::LevelTooLarge(level));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vector3::from(*v).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vector3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Ok(Icosphere {
        level,
        directions: verts,
        faces,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlacementMode {
    /// Observed directions closer than the outer radius get a uniform random
    /// radius inside the shell.
    #[default]
    Random,
    /// Observed directions take their measured distance, clamped to the shell.
    DistanceBased,
}

#[derive(Debug, Clone)]
pub struct Placement {
    pub positions: Vec<Vector3<f64>>,
    pub radii: Vec<f64>,
    /// Median observed distance per direction, `None` when no camera sees it.
    pub observed: Vec<Option<f64>>,
}

impl Placement {
    pub fn unobserved_count(&self) -> usize {
        self.observed.iter().filter(|o| o.is_none()).count()
    }
}

/// Places one point per direction between the shell radii.
///
/// `maps[k]` must belong to `cameras[maps[k].view]`.
pub fn radial_placement(
    directions: &[Vector3<f64>],
    maps: &[DistanceMap],
    cameras: &[Camera],
    shell: &SceneShell,
    mode: PlacementMode,
    rng: &mut impl Rng,
) -> Result<Placement> {
    shell.validate()?;
    let mut out = Placement {
        positions: Vec::with_capacity(directions.len()),
        radii: Vec::with_capacity(directions.len()),
        observed: Vec::with_capacity(directions.len()),
    };
    let mut samples = Vec::new();
    for d in directions {
        let probe = shell.center + d * shell.r_outer;
        samples.clear();
        for m in maps {
            let Some(cam) = cameras.get(m.view) else { continue };
            if let Some((px, _)) = cam.project_in_bounds(&probe) {
                let (u, v) = (px.x.floor() as usize, px.y.floor() as usize);
                if u < m.width && v < m.height {
                    samples.push(m.get(u, v));
                }
            }
        }
        let aggregate = (!samples.is_empty()).then(|| median(&mut samples));
        let radius = match aggregate {
            None => shell.r_outer,
            Some(a) if a > shell.r_outer => shell.r_outer,
            Some(a) => match mode {
                PlacementMode::Random => rng.random_range(shell.r_inner..=shell.r_outer),
                PlacementMode::DistanceBased => a.clamp(shell.r_inner, shell.r_outer),
            },
        };
        out.positions.push(shell.center + d * radius);
        out.radii.push(radius);
        out.observed.push(aggregate);
    }
    Ok(out)
}

/// Mean bilinear RGB over the views each position projects into;
/// [`UNOBSERVED_GRAY`] where none does.
pub fn init_colors(positions: &[Vector3<f64>], views: &[CameraView]) -> Vec<[f64; 3]> {
    positions
        .iter()
        .map(|p| {
            let mut sum = [0.0; 3];
            let mut n = 0usize;
            for v in views {
                if let Some((px, _)) = v.camera.project_in_bounds(p) {
                    let c = v.image.sample_bilinear(px.x, px.y);
                    for ch in 0..3 {
                        sum[ch] += c[ch];
                    }
                    n += 1;
                }
            }
            if n == 0 {
                [UNOBSERVED_GRAY; 3]
            } else {
                sum.map(|s| s / n as f64)
            }
        })
        .collect()
}

/// Isotropic Gaussians sized by local vertex spacing times radius.
pub fn init_background_cloud(
    ico: &Icosphere,
    placement: &Placement,
    colors: &[[f64; 3]],
    shell: &SceneShell,
    sh_degree: usize,
) -> Result<GaussianCloud> {
    if ico.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if placement.positions.len() != ico.len() || colors.len() != ico.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} directions, {} positions, {} colors",
            ico.len(),
            placement.positions.len(),
            colors.len()
        )));
    }
    let spacing = ico.neighbor_spacing();
    let mut cloud = GaussianCloud::empty(sh_degree);
    for i in 0..ico.len() {
        let p = placement.positions[i];
        let s = (spacing[i] * shell.radius_of(&p)).ln();
        cloud.push(p, [1.0, 0.0, 0.0, 0.0], Vector3::repeat(s), INITIAL_OPACITY, colors[i]);
    }
    Ok(cloud)
}
