//! HTTP routes over a [`SessionManager`].

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::session::{ConstraintEdit, CreateSession, SessionManager};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepRequest {
    pub k: usize,
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        use graphguide::Error as Core;
        let status = match &self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Finished(_) => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Core(Core::InvalidArgument(_) | Core::InvalidConstraints(_)) => StatusCode::BAD_REQUEST,
            ServiceError::Core(Core::InconsistentState(_)) => StatusCode::CONFLICT,
            ServiceError::Core(_) | ServiceError::Internal(_) | ServiceError::EventLog(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(ErrorBody { error: self.to_string() })).into_response()
    }
}

type Shared = Arc<SessionManager>;

pub fn router(manager: Shared) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(state))
        .route("/sessions/{id}/step", post(step))
        .route("/sessions/{id}/constraints", patch(constraints))
        .route("/sessions/{id}/trajectory", get(trajectory))
        .with_state(manager)
}

/// Runs blocking session work off the async executor.
async fn blocking<T, F>(manager: Shared, f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&SessionManager) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&manager))
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

async fn create(State(m): State<Shared>, Json(req): Json<CreateSession>) -> Result<impl IntoResponse, ServiceError> {
    let state = blocking(m, move |m| m.create(req)).await?;
    Ok((StatusCode::CREATED, Json(state)))
}

async fn state(State(m): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(blocking(m, move |m| m.state(&id)).await?))
}

async fn step(
    State(m): State<Shared>,
    Path(id): Path<String>,
    Json(req): Json<StepRequest>,
) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(blocking(m, move |m| m.step(&id, req.k)).await?))
}

async fn constraints(
    State(m): State<Shared>,
    Path(id): Path<String>,
    Json(edit): Json<ConstraintEdit>,
) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(blocking(m, move |m| m.update_constraints(&id, edit)).await?))
}

async fn trajectory(State(m): State<Shared>, Path(id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(blocking(m, move |m| m.trajectory(&id)).await?))
}

/// Serves `router` on `addr` until the process is stopped.
pub async fn serve(manager: SessionManager, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(manager))).await
}
