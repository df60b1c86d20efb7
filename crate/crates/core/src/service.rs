//! HTTP API over an immutable model snapshot.
//!
//! * `GET /api/weights`: traditional and learned weights with the referral cut
//! * `POST /api/score`: a [`ScoreRequest`] body, answered with a [`ScoreResponse`]
//! * `GET /api/graph`: the graph dump written by `dermgraph graph`

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::{json, Value};

use crate::checklist::{N_ATTRIBUTES, NODE_NAMES, TRADITIONAL_WEIGHTS};
use crate::checkpoint::Model;
use crate::scoring::{ScoreRequest, Scorer};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightsBody {
    pub attributes: Vec<&'static str>,
    pub traditional: [u32; N_ATTRIBUTES],
    pub learned: [f64; N_ATTRIBUTES],
    pub threshold: f64,
}

#[derive(Debug)]
pub struct ServiceState {
    pub scorer: Scorer,
    pub weights: WeightsBody,
    pub graph: Value,
}

impl ServiceState {
    pub fn from_model(model: &Model) -> Self {
        let scorer = Scorer::from_model(model);
        ServiceState {
            scorer,
            weights: WeightsBody {
                attributes: NODE_NAMES[..N_ATTRIBUTES].to_vec(),
                traditional: TRADITIONAL_WEIGHTS.map(|w| w as u32),
                learned: scorer.weights,
                threshold: scorer.threshold,
            },
            graph: model.graph.to_json(),
        }
    }
}

fn error_body(status: StatusCode, field: Option<&str>, message: String) -> Response {
    let mut body = json!({ "error": message });
    if let Some(f) = field {
        body["field"] = json!(f);
    }
    (status, Json(body)).into_response()
}

async fn weights(State(state): State<Arc<ServiceState>>) -> Json<WeightsBody> {
    Json(state.weights.clone())
}

async fn graph(State(state): State<Arc<ServiceState>>) -> Json<Value> {
    Json(state.graph.clone())
}

/// Parses the body by hand so every rejection carries a field-level message.
fn parse_score_body(body: &[u8]) -> std::result::Result<ScoreRequest, (Option<&'static str>, String)> {
    let value: Value = serde_json::from_slice(body).map_err(|e| (None, format!("body is not valid JSON: {e}")))?;
    let obj = value.as_object().ok_or((None, "body must be a JSON object".to_string()))?;
    let attrs = obj.get("attrs").ok_or((Some("attrs"), "attrs: missing".to_string()))?;
    let items = attrs
        .as_array()
        .ok_or((Some("attrs"), "attrs: expected an array of numbers".to_string()))?;
    let attrs = items
        .iter()
        .enumerate()
        .map(|(i, v)| v.as_f64().ok_or((Some("attrs"), format!("attrs[{i}]: expected a number"))))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(ScoreRequest { attrs })
}

async fn score(State(state): State<Arc<ServiceState>>, body: Bytes) -> Response {
    let request = match parse_score_body(&body) {
        Ok(r) => r,
        Err((field, message)) => return error_body(StatusCode::BAD_REQUEST, field, message),
    };
    match state.scorer.score(&request) {
        Ok(r) => Json(r).into_response(),
        Err(e) => {
            let message = match e {
                Error::Usage(m) => m,
                other => other.to_string(),
            };
            error_body(StatusCode::BAD_REQUEST, Some("attrs"), message)
        }
    }
}

async fn not_found() -> Response {
    error_body(StatusCode::NOT_FOUND, None, "not found".into())
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/api/weights", get(weights))
        .route("/api/score", post(score))
        .route("/api/graph", get(graph))
        .fallback(not_found)
        .with_state(state)
}

pub fn validate_port(port: u16) -> Result<u16> {
    if port < 1024 {
        return Err(Error::Usage(format!("port {port} is outside [1024, 65535]")));
    }
    Ok(port)
}

/// Serves until interrupted.
pub async fn serve(model: &Model, port: u16) -> Result<()> {
    let port = validate_port(port)?;
    let app = router(Arc::new(ServiceState::from_model(model)));
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(format!("tcp://{addr}"), e))?;
    log::info!("listening on http://{addr}");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io(format!("tcp://{addr}"), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_parsing_messages() {
        assert!(parse_score_body(b"{\"attrs\":[0,0,0,0,0,1,0]}").is_ok());
        assert_eq!(parse_score_body(b"[1]").unwrap_err().0, None);
        assert_eq!(parse_score_body(b"{}").unwrap_err().0, Some("attrs"));
        let (_, m) = parse_score_body(b"{\"attrs\":[0,\"x\"]}").unwrap_err();
        assert!(m.contains("attrs[1]"));
        assert!(parse_score_body(b"{oops").is_err());
    }

    #[test]
    fn ports() {
        assert!(validate_port(80).is_err());
        assert_eq!(validate_port(8080).unwrap(), 8080);
    }
}
