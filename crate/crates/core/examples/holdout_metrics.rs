//! Seeded train/test split and PSNR/SSIM scoring of noisy renders.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use shellsplat::metrics::{split, EvalReport};
use shellsplat::model::SceneShell;
use shellsplat::synthetic::{random_cameras, textured_sphere_views};

fn main() -> shellsplat::Result<()> {
    let shell = SceneShell::new(Vector3::zeros(), 10.0, 40.0)?;
    let views = textured_sphere_views(&shell, &random_cameras(25, 64, 70.0, shell.center, 1.0, 2));
    let manifest = split(views.len(), 42)?;
    print!("{}", manifest.to_text());

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pairs: Vec<_> = manifest
        .test
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let sigma = 0.01 * (k + 1) as f64;
            let noise = Normal::new(0.0, sigma).expect("sigma");
            let mut noisy = views[i].image.clone();
            for x in &mut noisy.data {
                *x = (*x + noise.sample(&mut rng)).clamp(0.0, 1.0);
            }
            (views[i].name.clone(), noisy, views[i].image.clone())
        })
        .collect();
    print!("{}", EvalReport::compute(&pairs)?.to_csv());
    Ok(())
}
