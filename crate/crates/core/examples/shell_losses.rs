//! Evaluates the shell and planarity regularizers on hand-placed Gaussians.

use nalgebra::Vector3;
use shellsplat::loss::{planarity_term, shell_loss};
use shellsplat::model::{rotation, GaussianCloud, SceneShell};
use shellsplat::synthetic::tangent_frame;

fn main() -> shellsplat::Result<()> {
    let shell = SceneShell::new(Vector3::zeros(), 10.0, 40.0)?;
    let flat = Vector3::new(0.0, 0.0, 0.05f64.ln());

    let mut cloud = GaussianCloud::empty(0);
    for r in [5.0, 10.0, 25.0, 40.0, 42.0] {
        cloud.push(Vector3::new(r, 0.0, 0.0), [1.0, 0.0, 0.0, 0.0], flat, 0.5, [0.5; 3]);
    }
    for (i, r) in [5.0, 10.0, 25.0, 40.0, 42.0].iter().enumerate() {
        let mut single = GaussianCloud::empty(0);
        single.push(cloud.position(i), cloud.quaternion(i), flat, 0.5, [0.5; 3]);
        println!("shell loss at radius {r:>4}: {}", shell_loss(&single, &shell)?.0);
    }
    println!("mean over all five: {}", shell_loss(&cloud, &shell)?.0);

    let p = Vector3::new(0.0, 0.0, 20.0);
    let mut disc = GaussianCloud::empty(0);
    disc.push(p, tangent_frame(&p, 0.3), flat, 0.5, [0.5; 3]);
    let tilted = rotation::mul(rotation::from_axis_angle([1.0, 0.0, 0.0], std::f64::consts::FRAC_PI_2), tangent_frame(&p, 0.3));
    disc.push(p, tilted, flat, 0.5, [0.5; 3]);
    disc.push(p, [1.0, 0.0, 0.0, 0.0], Vector3::zeros(), 0.5, [0.5; 3]);
    for (i, name) in ["tangent disc", "disc rotated 90°", "isotropic"].iter().enumerate() {
        println!("planarity term, {name:<16}: {:.6}", planarity_term(&disc, &shell, i, 1e-8)?);
    }
    Ok(())
}
