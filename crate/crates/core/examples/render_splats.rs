//! Renders a small random cloud, writes the image, and takes one gradient
//! step toward a shifted copy of it.
//!
//! cargo run --release --example render_splats -- [out.png]

use nalgebra::Vector3;
use shellsplat::ingest::save_image;
use shellsplat::loss::photometric;
use shellsplat::model::{Camera, GaussianCloud, Intrinsics, Pose};
use shellsplat::render::{render, render_backward};
use shellsplat::synthetic::tangent_frame;

fn main() -> shellsplat::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "splats.png".into());
    let camera = Camera::new(
        Intrinsics::from_fov(256, 192, 60f64.to_radians()),
        Pose::look_at(Vector3::new(0.0, 0.0, -6.0), Vector3::zeros(), Vector3::new(0.0, -1.0, 0.0)),
    );

    let mut cloud = GaussianCloud::empty(1);
    for k in 0..24 {
        let a = k as f64 * 0.7;
        let p = Vector3::new(2.0 * a.cos(), 1.2 * (1.3 * a).sin(), 0.5 * (a * 0.4).cos());
        let q = tangent_frame(&p, a);
        let s = Vector3::new(0.35f64.ln(), 0.12f64.ln(), 0.05f64.ln());
        let rgb = [0.5 + 0.4 * a.sin(), 0.5 + 0.4 * (a + 2.0).sin(), 0.5 + 0.4 * (a + 4.0).sin()];
        cloud.push(p, q, s, 0.8, rgb);
    }

    let frame = render(&[&cloud], &camera, [0.05; 3])?;
    save_image(&frame.image, std::path::Path::new(&out))?;
    let covered = frame.alpha.iter().filter(|&&a| a > 0.5).count();
    println!("wrote {out}: {covered} of {} pixels more than half covered", frame.alpha.len());

    let mut target_cloud = cloud.clone();
    for i in 0..target_cloud.len() {
        let p = target_cloud.position(i) + Vector3::new(0.05, 0.0, 0.0);
        target_cloud.set_position(i, p);
    }
    let target = render(&[&target_cloud], &camera, [0.05; 3])?.image;
    let loss = photometric(&frame.image, &target, None)?;
    let (value, d_image) = loss.combine(0.2);
    let grads = render_backward(&frame, &[&cloud], &d_image)?.remove(0).expect("trainable");
    let mean_dx: f64 = (0..cloud.len()).map(|i| grads.params.positions[3 * i]).sum::<f64>() / cloud.len() as f64;
    println!("loss {value:.5}; mean dL/dx {mean_dx:.3e} (negative: moving +x lowers the loss)");
    Ok(())
}
