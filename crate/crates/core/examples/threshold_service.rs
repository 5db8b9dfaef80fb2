//! Serves the threshold-selection API over the distance maps of a textured
//! sphere and confirms a threshold from a client thread, the way the browser
//! UI would.
//!
//! cargo run --example threshold_service -- [port]

use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::Arc;
use std::time::Duration;

use nalgebra::Vector3;
use shellsplat::ingest::SceneParams;
use shellsplat::model::SceneShell;
use shellsplat::segmentation::{serve, SegmentationSession};
use shellsplat::segmentation::{distance_map, DepthConvention};
use shellsplat::synthetic::{random_cameras, textured_sphere_views};

fn request(port: u16, method: &str, path: &str, body: &str) -> std::io::Result<String> {
    let mut s = TcpStream::connect(("127.0.0.1", port))?;
    write!(
        s,
        "{method} {path} HTTP/1.1\r\nHost: localhost\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    let mut out = String::new();
    s.read_to_string(&mut out)?;
    Ok(out.split("\r\n\r\n").nth(1).unwrap_or_default().to_string())
}

fn main() -> shellsplat::Result<()> {
    let port: u16 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8765);
    let shell = SceneShell::new(Vector3::zeros(), 3.0, 20.0)?;
    let cameras = random_cameras(6, 64, 70.0, shell.center, 1.0, 5);
    let views = textured_sphere_views(&shell, &cameras);
    let maps = views
        .iter()
        .enumerate()
        .map(|(i, v)| distance_map(v, i, &shell.center, DepthConvention::ZDepth))
        .collect::<shellsplat::Result<Vec<_>>>()?;
    let names = views.iter().map(|v| v.name.clone()).collect();

    let dir = tempfile::tempdir().expect("temp dir");
    let params_path = dir.path().join("scene_params.txt");
    let session = Arc::new(SegmentationSession::new(maps, names, SceneParams::new(shell, 0), params_path.clone()));

    let client = std::thread::spawn(move || -> std::io::Result<()> {
        std::thread::sleep(Duration::from_millis(300));
        println!("GET /views -> {}", request(port, "GET", "/views", "")?);
        println!("GET /views/0/distance?u=32&v=32 -> {}", request(port, "GET", "/views/0/distance?u=32&v=32", "")?);
        println!("POST /threshold -> {}", request(port, "POST", "/threshold", r#"{"r_inner": 12.5}"#)?);
        Ok(())
    });

    let r_inner = serve(session, port)?;
    client.join().expect("client thread").expect("client request");
    println!("confirmed r_inner = {r_inner}");
    print!("{}", std::fs::read_to_string(&params_path).expect("params file"));
    Ok(())
}
