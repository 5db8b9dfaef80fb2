use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use shellsplat::ingest::{Provenance, SceneParams};
use shellsplat::model::SceneShell;
use shellsplat::segmentation::{router, segment, DistanceMap, SegmentationSession};
use tower::ServiceExt;

fn maps(seed: u64) -> Vec<DistanceMap> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..5)
        .map(|k| DistanceMap {
            width: 40,
            height: 30,
            values: (0..1200).map(|_| r.random_range(0.5..60.0)).collect(),
            view: k,
        })
        .collect()
}

fn session(dir: &std::path::Path, seed: u64) -> Arc<SegmentationSession> {
    let shell = SceneShell::new(nalgebra::Vector3::zeros(), 4.0, 80.0).unwrap();
    let names = (0..5).map(|k| format!("img_{k}.png")).collect();
    Arc::new(SegmentationSession::new(
        maps(1),
        names,
        SceneParams::new(shell, seed),
        dir.join("scene_params.txt"),
    ))
}

async fn call(s: &Arc<SegmentationSession>, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let res = router(s.clone()).oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn json(s: &Arc<SegmentationSession>, method: &str, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
    let (status, bytes) = call(s, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

#[tokio::test]
async fn lists_three_seeded_views() {
    let dir = tempfile::tempdir().unwrap();
    let a = session(dir.path(), 17);
    let b = session(dir.path(), 17);
    let (status, body) = json(&a, "GET", "/views", None).await;
    assert_eq!(status, StatusCode::OK);
    let ids = body["view_ids"].as_array().unwrap();
    assert_eq!(ids.len(), 3);
    assert_eq!(json(&b, "GET", "/views", None).await.1, body);
}

#[tokio::test]
async fn hover_returns_exact_distances() {
    let dir = tempfile::tempdir().unwrap();
    let s = session(dir.path(), 0);
    let expected = maps(1);
    let mut r = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let (id, u, v) = (r.random_range(0..5), r.random_range(0..40), r.random_range(0..30));
        let (status, body) = json(&s, "GET", &format!("/views/{id}/distance?u={u}&v={v}"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body["distance"].as_f64().unwrap(), expected[id].values[v * 40 + u]);
    }
}

#[tokio::test]
async fn confirming_persists_the_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let s = session(dir.path(), 3);
    let rx = s.subscribe();
    let (status, _) = json(&s, "POST", "/threshold", Some(r#"{"r_inner": 10}"#)).await;
    assert_eq!(status, StatusCode::OK);
    let params = SceneParams::load(&dir.path().join("scene_params.txt")).unwrap();
    assert_eq!(params.r_inner, 10.0);
    assert_eq!(params.r_inner_source, Provenance::User);
    assert_eq!(rx.borrow().unwrap().r_inner, 10.0);
    let text = std::fs::read_to_string(dir.path().join("scene_params.txt")).unwrap();
    assert!(text.lines().any(|l| l == "r_inner=10"));

    let (status, _) = json(&s, "POST", "/threshold", Some(r#"{"r_inner": 12.5}"#)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(SceneParams::load(&dir.path().join("scene_params.txt")).unwrap().r_inner, 12.5);
}

#[tokio::test]
async fn boundary_value_is_previewed_as_foreground() {
    let dir = tempfile::tempdir().unwrap();
    let s = session(dir.path(), 0);
    let (_, body) = json(&s, "GET", "/views/2/distance?u=7&v=11", None).await;
    let d = body["distance"].as_f64().unwrap();
    let shell = SceneShell::new(nalgebra::Vector3::zeros(), d, 80.0).unwrap();
    let seg = segment(&s.maps, &Default::default(), &shell).unwrap();
    assert!(!seg.masks[2].get(7, 11));
    // the client preview uses the same strict comparison on grid values
    let (_, grid) = json(&s, "GET", "/views/2/grid?size=40", None).await;
    let values = grid["values"].as_array().unwrap();
    assert_eq!(values.len(), 40 * 30);
    assert_eq!(values[11 * 40 + 7].as_f64().unwrap(), d);
    assert!(!(values[11 * 40 + 7].as_f64().unwrap() > d));
}

#[tokio::test]
async fn colorized_view_is_png() {
    let dir = tempfile::tempdir().unwrap();
    let s = session(dir.path(), 0);
    let (status, bytes) = call(&s, "GET", "/views/1/colorized?clip_max=30", None).await;
    assert_eq!(status, StatusCode::OK);
    let img = image::load_from_memory(&bytes).unwrap();
    assert_eq!((img.width(), img.height()), (40, 30));
    let (_, info) = json(&s, "GET", "/views/1", None).await;
    assert_eq!(info["width"], 40);
    assert_eq!(info["name"], "img_1.png");
}

#[tokio::test]
async fn bad_requests_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let s = session(dir.path(), 0);
    for (method, uri, body, code) in [
        ("GET", "/views/9", None, StatusCode::NOT_FOUND),
        ("GET", "/views/9/distance?u=0&v=0", None, StatusCode::NOT_FOUND),
        ("GET", "/views/0/distance?u=40&v=0", None, StatusCode::BAD_REQUEST),
        ("GET", "/views/0/distance?u=-1&v=0", None, StatusCode::BAD_REQUEST),
        ("GET", "/views/0/distance?u=3", None, StatusCode::BAD_REQUEST),
        ("GET", "/views/0/colorized?clip_max=0", None, StatusCode::BAD_REQUEST),
        ("GET", "/views/0/grid?size=0", None, StatusCode::BAD_REQUEST),
        ("POST", "/threshold", Some(r#"{"r_inner": 80}"#), StatusCode::BAD_REQUEST),
        ("POST", "/threshold", Some(r#"{"r_inner": -1}"#), StatusCode::BAD_REQUEST),
    ] {
        let (status, bytes) = call(&s, method, uri, body).await;
        assert_eq!(status, code, "{method} {uri}");
        if code == StatusCode::BAD_REQUEST && uri.contains("distance") {
            let v: Value = serde_json::from_slice(&bytes).unwrap();
            assert!(v["error"].as_str().unwrap().len() > 5);
        }
    }
    assert!(!dir.path().join("scene_params.txt").exists());
}

#[tokio::test]
async fn preflight_allows_cross_origin_calls() {
    let dir = tempfile::tempdir().unwrap();
    let s = session(dir.path(), 0);
    let req = Request::builder().method("OPTIONS").uri("/threshold").body(Body::empty()).unwrap();
    let res = router(s).oneshot(req).await.unwrap();
    assert_eq!(res.status(), StatusCode::NO_CONTENT);
    assert_eq!(res.headers()["access-control-allow-origin"], "*");
}
