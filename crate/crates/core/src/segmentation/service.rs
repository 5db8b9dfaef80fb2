//! HTTP/JSON service behind the threshold-selection UI.
//!
//! | method | path                          | response                    |
//! |--------|-------------------------------|-----------------------------|
//! | GET    | `/views`                      | `{"view_ids": [a, b, c]}`   |
//! | GET    | `/views/{id}`                 | size, name, max distance    |
//! | GET    | `/views/{id}/colorized`       | viridis PNG (`clip_max=`)   |
//! | GET    | `/views/{id}/distance`        | `{"distance": d}` (`u=&v=`) |
//! | GET    | `/views/{id}/grid`            | coarse raw values (`size=`) |
//! | POST   | `/threshold`                  | persists `r_inner`          |

use std::io::Cursor;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;
use tokio::sync::watch;

use super::{colorize_viridis, DistanceMap};
use crate::error::{Error, Result};
use crate::ingest::{Provenance, SceneParams};

/// Number of views offered for inspection.
pub const SAMPLED_VIEWS: usize = 3;

/// Value sent once a threshold has been confirmed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfirmed {
    pub r_inner: f64,
}

pub struct SegmentationSession {
    pub maps: Vec<DistanceMap>,
    pub names: Vec<String>,
    pub sampled: Vec<usize>,
    pub params_path: PathBuf,
    params: Mutex<SceneParams>,
    confirmed: watch::Sender<Option<ThresholdConfirmed>>,
}

impl SegmentationSession {
    /// The sampled views are drawn with `params.seed`.
    pub fn new(maps: Vec<DistanceMap>, names: Vec<String>, params: SceneParams, params_path: PathBuf) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let sampled = rand::seq::index::sample(&mut rng, maps.len(), SAMPLED_VIEWS.min(maps.len())).into_vec();
        SegmentationSession {
            maps,
            names,
            sampled,
            params_path,
            params: Mutex::new(params),
            confirmed: watch::channel(None).0,
        }
    }

    pub fn subscribe(&self) -> watch::Receiver<Option<ThresholdConfirmed>> {
        self.confirmed.subscribe()
    }

    pub fn params(&self) -> SceneParams {
        self.params.lock().unwrap().clone()
    }

    fn map(&self, id: usize) -> std::result::Result<&DistanceMap, ApiError> {
        self.maps
            .get(id)
            .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no view with id {id}")))
    }

    /// Validates and persists `r_inner`. Repeated confirmations overwrite.
    pub fn confirm(&self, r_inner: f64) -> Result<()> {
        let mut params = self.params.lock().unwrap();
        if !(r_inner.is_finite() && r_inner > 0.0 && r_inner < params.r_outer) {
            return Err(Error::InvalidShell {
                r_inner,
                r_outer: params.r_outer,
            });
        }
        if self.confirmed.borrow().is_some() {
            log::info!("threshold replaced: r_inner={} -> {r_inner}", params.r_inner);
        }
        params.r_inner = r_inner;
        params.r_inner_source = Provenance::User;
        params.save(&self.params_path)?;
        self.confirmed.send_replace(Some(ThresholdConfirmed { r_inner }));
        Ok(())
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;
type Shared = Arc<SegmentationSession>;

async fn list_views(State(s): State<Shared>) -> Json<serde_json::Value> {
    Json(json!({ "view_ids": s.sampled }))
}

async fn view_info(State(s): State<Shared>, Path(id): Path<usize>) -> ApiResult<Json<serde_json::Value>> {
    let m = s.map(id)?;
    Ok(Json(json!({
        "id": id,
        "name": s.names.get(id),
        "width": m.width,
        "height": m.height,
        "max_distance": m.max(),
    })))
}

#[derive(Deserialize)]
struct ColorizeQuery {
    clip_max: Option<f64>,
}

async fn colorized(State(s): State<Shared>, Path(id): Path<usize>, Query(q): Query<ColorizeQuery>) -> ApiResult<Response> {
    let m = s.map(id)?;
    let clip = q.clip_max.unwrap_or_else(|| m.max().max(f64::MIN_POSITIVE));
    let img = colorize_viridis(m, clip).map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.to_string()))?;
    let mut png = Vec::new();
    img.to_rgb8()
        .write_to(&mut Cursor::new(&mut png), image::ImageFormat::Png)
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

#[derive(Deserialize)]
struct PixelQuery {
    u: Option<i64>,
    v: Option<i64>,
}

async fn distance(State(s): State<Shared>, Path(id): Path<usize>, Query(q): Query<PixelQuery>) -> ApiResult<Json<serde_json::Value>> {
    let m = s.map(id)?;
    let (Some(u), Some(v)) = (q.u, q.v) else {
        return Err(ApiError(StatusCode::BAD_REQUEST, "query parameters u and v are required".into()));
    };
    if u < 0 || v < 0 || u as usize >= m.width || v as usize >= m.height {
        return Err(ApiError(
            StatusCode::BAD_REQUEST,
            format!("pixel ({u}, {v}) outside {}x{} image", m.width, m.height),
        ));
    }
    Ok(Json(json!({ "u": u, "v": v, "distance": m.get(u as usize, v as usize) })))
}

#[derive(Deserialize)]
struct GridQuery {
    size: Option<usize>,
}

/// Nearest-pixel downsample so the client can preview a threshold without
/// one request per pixel.
async fn grid(State(s): State<Shared>, Path(id): Path<usize>, Query(q): Query<GridQuery>) -> ApiResult<Json<serde_json::Value>> {
    let m = s.map(id)?;
    let size = q.size.unwrap_or(64);
    if size == 0 || size > 1024 {
        return Err(ApiError(StatusCode::BAD_REQUEST, "size must lie in 1..=1024".into()));
    }
    let (gw, gh) = (size.min(m.width), size.min(m.height));
    let mut values = Vec::with_capacity(gw * gh);
    for gy in 0..gh {
        let v = ((gy as f64 + 0.5) * m.height as f64 / gh as f64) as usize;
        for gx in 0..gw {
            let u = ((gx as f64 + 0.5) * m.width as f64 / gw as f64) as usize;
            values.push(m.get(u.min(m.width - 1), v.min(m.height - 1)));
        }
    }
    Ok(Json(json!({ "width": gw, "height": gh, "values": values })))
}

#[derive(Deserialize)]
struct ThresholdBody {
    r_inner: f64,
}

async fn threshold(State(s): State<Shared>, Json(body): Json<ThresholdBody>) -> ApiResult<Json<serde_json::Value>> {
    match s.confirm(body.r_inner) {
        Ok(()) => Ok(Json(json!({
            "r_inner": body.r_inner,
            "params_path": s.params_path.display().to_string(),
        }))),
        Err(e @ Error::InvalidShell { .. }) => Err(ApiError(StatusCode::BAD_REQUEST, e.to_string())),
        Err(e) => Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
    }
}

/// Lets a UI served from another origin call the API.
async fn cors(req: Request, next: Next) -> Response {
    let mut res = if req.method() == Method::OPTIONS {
        Response::builder().status(StatusCode::NO_CONTENT).body(Body::empty()).unwrap()
    } else {
        next.run(req).await
    };
    let h = res.headers_mut();
    h.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, "*".parse().unwrap());
    h.insert(header::ACCESS_CONTROL_ALLOW_METHODS, "GET, POST, OPTIONS".parse().unwrap());
    h.insert(header::ACCESS_CONTROL_ALLOW_HEADERS, "content-type".parse().unwrap());
    res
}

pub fn router(session: Shared) -> Router {
    Router::new()
        .route("/views", get(list_views))
        .route("/views/{id}", get(view_info))
        .route("/views/{id}/colorized", get(colorized))
        .route("/views/{id}/distance", get(distance))
        .route("/views/{id}/grid", get(grid))
        .route("/threshold", post(threshold))
        .layer(middleware::from_fn(cors))
        .with_state(session)
}

/// Serves the API on `127.0.0.1:port` until a threshold is confirmed and
/// returns it. Port 0 picks a free port.
pub fn serve(session: Shared, port: u16) -> Result<f64> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Config(format!("cannot start runtime: {e}")))?;
    let result = session.subscribe();
    rt.block_on(async move {
        let addr = SocketAddr::from(([127, 0, 0, 1], port));
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::io(format!("tcp://{addr}"), e))?;
        let local = listener.local_addr().map_err(|e| Error::io(format!("tcp://{addr}"), e))?;
        log::info!("segmentation service listening on http://{local}");
        println!("segmentation service listening on http://{local}");
        let mut rx = session.subscribe();
        let app = router(session);
        axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = rx.wait_for(|v| v.is_some()).await;
            })
            .await
            .map_err(|e| Error::io(format!("tcp://{local}"), e))?;
        Ok::<(), Error>(())
    })?;
    let confirmed = *result.borrow();
    confirmed
        .map(|c| c.r_inner)
        .ok_or_else(|| Error::Config("service stopped without a confirmed threshold".into()))
}
