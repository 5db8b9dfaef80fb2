//! Fits a background shell to views of a textured sphere and reports how
//! many Gaussians stayed inside the shell.
//!
//! ```text
//! cargo run --release --example background_shell -- [iterations] [level]
//! ```

use std::time::Instant;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shellsplat::model::{SceneShell, StageConfig};
use shellsplat::segmentation::{distance_map, DepthConvention};
use shellsplat::shell_init::{build_icosphere, init_background_cloud, init_colors, radial_placement, PlacementMode};
use shellsplat::synthetic::{random_cameras, textured_sphere_views};
use shellsplat::train::Trainer;

fn main() -> shellsplat::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().map_or(7000, |s| s.parse().expect("iterations"));
    let level: u32 = args.next().map_or(3, |s| s.parse().expect("level"));

    let shell = SceneShell::new(Vector3::zeros(), 10.0, 40.0)?;
    let cameras = random_cameras(30, 64, 70.0, shell.center, 1.0, 1);
    let views = textured_sphere_views(&shell, &cameras);

    let maps = views
        .iter()
        .enumerate()
        .map(|(k, v)| distance_map(v, k, &shell.center, DepthConvention::ZDepth))
        .collect::<Result<Vec<_>, _>>()?;
    let ico = build_icosphere(level)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let placement = radial_placement(&ico.directions, &maps, &cameras, &shell, PlacementMode::Random, &mut rng)?;
    let colors = init_colors(&placement.positions, &views);
    let cloud = init_background_cloud(&ico, &placement, &colors, &shell, 1)?;

    let config = StageConfig {
        iterations,
        spatial_scale: shell.r_outer,
        log_interval: 500,
        ..StageConfig::default()
    };
    let start = Instant::now();
    let outcome = Trainer::background(cloud, &views, shell, config)?.run()?;
    let cloud = &outcome.cloud;
    let outside = (0..cloud.len())
        .filter(|&i| !shell.contains(&cloud.position(i), 0.01))
        .count();
    let last = outcome.log.last().map(|r| r.loss.clone()).unwrap_or_default();
    println!(
        "{} gaussians, {} outside the shell ({:.2}%), final l1 {:.4}, {:.1}s",
        cloud.len(),
        outside,
        100.0 * outside as f64 / cloud.len().max(1) as f64,
        last.l1,
        start.elapsed().as_secs_f64()
    );
    println!("pruned {:?}, densified {:?}", outcome.prune, outcome.densify);
    Ok(())
}
