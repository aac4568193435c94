//! HTTP JSON API over the shared [`Engine`].

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Body as HttpBody;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use runlens_core::cpc::{BrushPredicate, DEFAULT_BINS};
use runlens_core::ensemble::Split;
use runlens_core::explain::{DEFAULT_GRID_SIZE, DEFAULT_LIME_SAMPLES};

use crate::cache::{AnalysisCache, AnalysisCacheKey, CacheStatus};
use crate::engine::{Analysis, Engine, DEFAULT_MAX_LEAF_NODES, DEFAULT_PERMUTATION_REPEATS, DEFAULT_PREVIEW_ROWS};
use crate::error::Error;
use crate::export::{export, Artifact};

/// Error body with its HTTP status. Cloneable so single-flight waiters can
/// share one failure.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl From<String> for ApiError {
    fn from(message: String) -> Self {
        ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        use runlens_core::Error as Core;
        let status = match &e {
            Error::UnknownRun(_) | Error::UnknownCandidate(_) | Error::Core(Core::NotFound { .. }) => StatusCode::NOT_FOUND,
            Error::BadRequest(_)
            | Error::Schema { .. }
            | Error::Version { .. }
            | Error::Csv { .. }
            | Error::Core(Core::Contract(_) | Core::Validation { .. }) => StatusCode::BAD_REQUEST,
            Error::Core(
                Core::UnsupportedPrimitive(_)
                | Core::InsufficientData(_)
                | Core::Degenerate(_)
                | Core::FitFailed { .. }
                | Core::MergeConflict { .. },
            ) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::Io { .. } | Error::Core(Core::Oracle(_)) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

pub struct AppState {
    pub engine: Engine,
    pub cache: AnalysisCache<ApiError>,
}

impl AppState {
    pub fn new(engine: Engine, cache_bytes: usize) -> Arc<Self> {
        Arc::new(AppState {
            engine,
            cache: AnalysisCache::new(cache_bytes),
        })
    }
}

type Shared = State<Arc<AppState>>;

fn json_response(body: &[u8], status: Option<CacheStatus>) -> Response {
    let mut r = Response::new(HttpBody::from(body.to_vec()));
    r.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    if let Some(s) = status {
        let v = match s {
            CacheStatus::Hit => "hit",
            CacheStatus::Miss => "miss",
            CacheStatus::Joined => "joined",
        };
        r.headers_mut().insert("x-cache", HeaderValue::from_static(v));
    }
    r
}

/// Runs an analysis through the cache on the blocking pool.
pub async fn run_analysis(state: Arc<AppState>, run_id: String, analysis: Analysis) -> Result<Response, ApiError> {
    state.engine.run(&run_id).map_err(ApiError::from)?;
    let key = AnalysisCacheKey::new(&run_id, analysis.candidate(), analysis.name(), &analysis);
    let (body, status) = tokio::task::spawn_blocking(move || {
        state
            .cache
            .get_or_compute(&key, || state.engine.analyze(&run_id, &analysis).map_err(ApiError::from))
    })
    .await
    .map_err(|e| ApiError::from(format!("analysis task failed: {e}")))??;
    Ok(json_response(&body, Some(status)))
}

async fn runs(State(s): Shared) -> Response {
    json_response(&s.engine.runs_listing(), None)
}

async fn simple(s: Arc<AppState>, id: String, a: Analysis) -> Result<Response, ApiError> {
    run_analysis(s, id, a).await
}

#[derive(Debug, Default, Deserialize)]
struct AtQuery {
    at: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
struct CpcQuery {
    /// JSON array of brush predicates.
    brush: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct SamplingQuery {
    bins: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
struct ImportanceQuery {
    structure: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct NodeQuery {
    node: Option<String>,
    max_leaf_nodes: Option<usize>,
    row: Option<usize>,
    n_samples: Option<usize>,
    n_repeats: Option<usize>,
    grid_size: Option<usize>,
    limit: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
struct SplitQuery {
    split: Option<Split>,
}

async fn overview(State(s): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    simple(s, id, Analysis::Overview).await
}

async fn leaderboard(State(s): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    simple(s, id, Analysis::Leaderboard).await
}

async fn structure_graph(State(s): Shared, Path(id): Path<String>, Query(q): Query<AtQuery>) -> Result<Response, ApiError> {
    simple(s, id, Analysis::StructureGraph { at: q.at }).await
}

async fn cpc(State(s): Shared, Path(id): Path<String>, Query(q): Query<CpcQuery>) -> Result<Response, ApiError> {
    let brush: Vec<BrushPredicate> = match q.brush {
        None => Vec::new(),
        Some(text) => serde_json::from_str(&text).map_err(|e| ApiError {
            status: StatusCode::BAD_REQUEST,
            message: format!("invalid brush: {e}"),
        })?,
    };
    simple(s, id, Analysis::Cpc { brush }).await
}

async fn cpc_brush(
    State(s): Shared,
    Path(id): Path<String>,
    Json(brush): Json<Vec<BrushPredicate>>,
) -> Result<Response, ApiError> {
    simple(s, id, Analysis::Cpc { brush }).await
}

async fn sampling(
    State(s): Shared,
    Path((id, hp)): Path<(String, String)>,
    Query(q): Query<SamplingQuery>,
) -> Result<Response, ApiError> {
    let analysis = Analysis::Sampling {
        hyperparameter: hp,
        bins: q.bins.unwrap_or(DEFAULT_BINS),
    };
    simple(s, id, analysis).await
}

async fn coverage(State(s): Shared, Path(id): Path<String>, Query(q): Query<AtQuery>) -> Result<Response, ApiError> {
    simple(s, id, Analysis::Coverage { at: q.at }).await
}

async fn hp_importance(
    State(s): Shared,
    Path(id): Path<String>,
    Query(q): Query<ImportanceQuery>,
) -> Result<Response, ApiError> {
    simple(s, id, Analysis::HpImportance { structure: q.structure }).await
}

async fn candidate_view(
    State(s): Shared,
    Path((id, cid, view)): Path<(String, String, String)>,
    Query(q): Query<NodeQuery>,
) -> Result<Response, ApiError> {
    let candidate = cid;
    let analysis = match view.as_str() {
        "report" => Analysis::Report { candidate },
        "config" => Analysis::Config { candidate },
        "surrogate" => Analysis::Surrogate {
            candidate,
            node: q.node,
            max_leaf_nodes: q.max_leaf_nodes.unwrap_or(DEFAULT_MAX_LEAF_NODES),
        },
        "local-surrogate" => Analysis::LocalSurrogate {
            candidate,
            node: q.node,
            row: q.row.unwrap_or(0),
            n_samples: q.n_samples.unwrap_or(DEFAULT_LIME_SAMPLES),
        },
        "effects" => Analysis::Effects {
            candidate,
            node: q.node,
            n_repeats: q.n_repeats.unwrap_or(DEFAULT_PERMUTATION_REPEATS),
            grid_size: q.grid_size.unwrap_or(DEFAULT_GRID_SIZE),
        },
        other => {
            return Err(ApiError {
                status: StatusCode::NOT_FOUND,
                message: format!("unknown candidate view `{other}`"),
            })
        }
    };
    simple(s, id, analysis).await
}

async fn intermediate(
    State(s): Shared,
    Path((id, cid, node)): Path<(String, String, String)>,
    Query(q): Query<NodeQuery>,
) -> Result<Response, ApiError> {
    let analysis = Analysis::Intermediate {
        candidate: cid,
        node,
        limit: q.limit.unwrap_or(DEFAULT_PREVIEW_ROWS),
    };
    simple(s, id, analysis).await
}

async fn ensemble_view(
    State(s): Shared,
    Path((id, view)): Path<(String, String)>,
    Query(q): Query<SplitQuery>,
) -> Result<Response, ApiError> {
    let split = q.split.unwrap_or_default();
    let analysis = match view.as_str() {
        "summary" => Analysis::Ensemble { split },
        "predictions" => Analysis::EnsemblePredictions { split },
        "surfaces" => Analysis::EnsembleSurfaces { split },
        other => {
            return Err(ApiError {
                status: StatusCode::NOT_FOUND,
                message: format!("unknown ensemble view `{other}`"),
            })
        }
    };
    simple(s, id, analysis).await
}

async fn ensemble(State(s): Shared, Path(id): Path<String>, Query(q): Query<SplitQuery>) -> Result<Response, ApiError> {
    let split = q.split.unwrap_or_default();
    simple(s, id, Analysis::Ensemble { split }).await
}

async fn export_artifact(
    State(s): Shared,
    Path(id): Path<String>,
    Json(artifact): Json<Artifact>,
) -> Result<Response, ApiError> {
    let file = tokio::task::spawn_blocking(move || export(&s.engine, &id, &artifact))
        .await
        .map_err(|e| ApiError::from(format!("export task failed: {e}")))??;
    let mut r = Response::new(HttpBody::from(file.bytes));
    let h = r.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static(file.content_type));
    let disposition = format!("attachment; filename=\"{}\"", file.file_name);
    h.insert(
        header::CONTENT_DISPOSITION,
        HeaderValue::from_str(&disposition).map_err(|e| ApiError::from(e.to_string()))?,
    );
    Ok(r)
}

async fn not_found() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        message: "no such endpoint".into(),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/runs", get(runs))
        .route("/runs/{id}/overview", get(overview))
        .route("/runs/{id}/leaderboard", get(leaderboard))
        .route("/runs/{id}/structure-graph", get(structure_graph))
        .route("/runs/{id}/cpc", get(cpc).post(cpc_brush))
        .route("/runs/{id}/sampling/{hp}", get(sampling))
        .route("/runs/{id}/coverage", get(coverage))
        .route("/runs/{id}/hp-importance", get(hp_importance))
        .route("/runs/{id}/candidates/{cid}/{view}", get(candidate_view))
        .route("/runs/{id}/candidates/{cid}/intermediate/{node}", get(intermediate))
        .route("/runs/{id}/ensemble", get(ensemble))
        .route("/runs/{id}/ensemble/{view}", get(ensemble_view))
        .route("/runs/{id}/export", axum::routing::post(export_artifact))
        .fallback(not_found)
        .with_state(state)
}

/// Binds and serves until ctrl-c.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
