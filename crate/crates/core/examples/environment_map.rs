//! Renders a cube map and an equirectangular panorama from a random
//! background shell, with and without the foreground layer.
//!
//! cargo run --release --example environment_map -- [out_dir]

use std::path::PathBuf;

use nalgebra::Vector3;
use shellsplat::envmap::{cubemap_to_equirect, render_cubemap, save_cubemap, CubemapOptions};
use shellsplat::model::SceneShell;
use shellsplat::synthetic::SyntheticScene;

fn main() -> shellsplat::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| PathBuf::from("envmap"), PathBuf::from);
    let shell = SceneShell::new(Vector3::zeros(), 2.0, 8.0)?;
    let scene = SyntheticScene::random(shell, 400, 60, 3);

    let mut opts = CubemapOptions::new(shell.center, shell.r_inner);
    opts.face_res = 128;
    let cube = render_cubemap(&scene.background, &shell, &opts)?;
    let (pano, holes) = cubemap_to_equirect(&cube, 512)?;
    save_cubemap(&cube, &out, Some(&pano))?;
    println!(
        "background only: {} cube-map hole pixels, {} panorama hole pixels, written to {}",
        cube.hole_count(),
        holes.count(),
        out.display()
    );

    let mut both = scene.background.clone();
    both.extend(&scene.foreground);
    let cut = render_cubemap(&both, &shell, &opts)?;
    let (pano_cut, _) = cubemap_to_equirect(&cut, 512)?;
    let diff = pano.data.iter().zip(&pano_cut.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("with the foreground added and cut at r_inner: max panorama difference {diff:.2e}");
    Ok(())
}
