//! Full pipeline on a random synthetic scene: dataset on disk, prepare with a
//! fixed inner radius, both training stages, envmap and held-out metrics.
//!
//! cargo run --release --example two_stage_pipeline -- [iters1] [iters2] [level] [out_dir]

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::Vector3;
use shellsplat::model::SceneShell;
use shellsplat::pipeline::{cmd_all, RunConfig};
use shellsplat::synthetic::{write_dataset, SyntheticScene};

fn main() -> shellsplat::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().collect();
    let iters1 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let iters2 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let level = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3);
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = args.get(4).map(PathBuf::from).unwrap_or_else(|| tmp.path().to_path_buf());

    let shell = SceneShell::new(Vector3::zeros(), 2.0, 8.0)?;
    let scene = SyntheticScene::random(shell, 200, 50, 7);
    let cameras = scene.cameras(50, 128, 80.0, 11);
    let views = scene.views(&cameras, [0.0; 3])?;
    let points = scene.sparse_points(&views);
    write_dataset(&root.join("scene"), &views, &points, 1.0)?;

    let mut config = RunConfig::for_scene(&root.join("scene"), &root.join("out"));
    config.r_inner = Some(shell.r_inner);
    config.r_outer = Some(shell.r_outer);
    config.center = Some(shell.center);
    config.level = level;
    config.stage1.iterations = iters1;
    config.stage2.iterations = iters2;
    config.stage1.log_interval = 500;
    config.stage2.log_interval = 500;
    config.stage1.densify_grad_threshold = 1e-3;
    config.stage2.densify_grad_threshold = 5e-4;
    config.stage2.max_gaussians = 3000;
    config.face_res = 64;
    config.equirect_width = 256;

    let t = Instant::now();
    let summary = cmd_all(&config)?;
    println!(
        "background {} Gaussians, foreground {} Gaussians",
        summary.background.cloud.len(),
        summary.foreground.cloud.len()
    );
    print!("{}", summary.report.to_csv());
    println!(
        "held-out PSNR {:.2} dB, SSIM {:.4}, {:.1}s",
        summary.report.mean_psnr(),
        summary.report.mean_ssim(),
        t.elapsed().as_secs_f64()
    );
    Ok(())
}
