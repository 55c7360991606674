//! HTTP and WebSocket front of a [`SessionHub`].
//!
//! * `GET /ws` upgrades to a WebSocket carrying one JSON protocol message per
//!   text frame. `?session_id=` binds the socket to an existing session;
//!   otherwise the first `session.create` does.
//! * `POST /session` takes a `session.create` body, `POST /session/{id}/message`
//!   any other client message. Both answer with the JSON array of server
//!   messages.
//! * `GET /session/{id}/state` and `GET /session/{id}/events` expose the live
//!   state and the persisted log.
//!
//! Messages are handled on blocking threads so a slow remote generator holds
//! up only its own session. A WebSocket is processed strictly in order; HTTP
//! clients should keep at most one request per session in flight.

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cocreate::protocol::codes;
use cocreate::{ClientMessage, ServerBody, ServerMessage, SessionHub};

pub fn router(hub: Arc<SessionHub>) -> Router {
    Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/session", post(create))
        .route("/session/{id}/message", post(message))
        .route("/session/{id}/state", get(state))
        .route("/session/{id}/events", get(events))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(hub)
}

/// Bind `config.listen_address` and serve until Ctrl-C.
pub async fn serve(hub: Arc<SessionHub>) -> anyhow::Result<()> {
    let addr = hub.config().listen_address.clone();
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    tracing::info!(address = %listener.local_addr()?, "listening");
    axum::serve(listener, router(hub))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

async fn dispatch(hub: Arc<SessionHub>, session_id: String, msg: ClientMessage) -> Vec<ServerMessage> {
    let id = session_id.clone();
    match tokio::task::spawn_blocking(move || hub.handle(&id, msg)).await {
        Ok(out) => out,
        Err(e) => {
            tracing::error!(session_id, error = %e, "handler panicked");
            vec![ServerMessage::new(session_id, ServerBody::error(codes::STORAGE, "internal error"))]
        }
    }
}

fn bad_request(session_id: &str, message: impl Into<String>) -> Response {
    let body = vec![ServerMessage::new(session_id, ServerBody::error(codes::BAD_REQUEST, message))];
    (StatusCode::BAD_REQUEST, Json(body)).into_response()
}

async fn create(State(hub): State<Arc<SessionHub>>, body: String) -> Response {
    match serde_json::from_str::<ClientMessage>(&body) {
        Ok(msg @ ClientMessage::SessionCreate { .. }) => Json(dispatch(hub, String::new(), msg).await).into_response(),
        Ok(other) => bad_request("", format!("expected session.create, got {}", other.type_name())),
        Err(e) => bad_request("", e.to_string()),
    }
}

async fn message(State(hub): State<Arc<SessionHub>>, Path(id): Path<String>, body: String) -> Response {
    match serde_json::from_str::<ClientMessage>(&body) {
        Ok(msg) => Json(dispatch(hub, id, msg).await).into_response(),
        Err(e) => bad_request(&id, e.to_string()),
    }
}

async fn state(State(hub): State<Arc<SessionHub>>, Path(id): Path<String>) -> Response {
    match tokio::task::spawn_blocking(move || hub.state(&id)).await {
        Ok(Some(s)) => Json(s).into_response(),
        _ => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn events(State(hub): State<Arc<SessionHub>>, Path(id): Path<String>) -> Response {
    match tokio::task::spawn_blocking(move || hub.events(&id)).await {
        Ok(Ok(events)) => Json(events).into_response(),
        _ => StatusCode::NOT_FOUND.into_response(),
    }
}

#[derive(serde::Deserialize)]
struct WsQuery {
    session_id: Option<String>,
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(hub): State<Arc<SessionHub>>, Query(q): Query<WsQuery>) -> Response {
    ws.on_upgrade(move |socket| serve_socket(socket, hub, q.session_id))
}

async fn serve_socket(mut socket: WebSocket, hub: Arc<SessionHub>, mut session: Option<String>) {
    while let Some(Ok(frame)) = socket.recv().await {
        let text = match frame {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        let current = session.clone().unwrap_or_default();
        let replies = match serde_json::from_str::<ClientMessage>(text.as_str()) {
            Ok(msg) => dispatch(hub.clone(), current, msg).await,
            Err(e) => vec![ServerMessage::new(current, ServerBody::error(codes::BAD_REQUEST, e.to_string()))],
        };
        if let Some(first) = replies.first().filter(|m| m.type_name() == "session.created") {
            session = Some(first.session_id.clone());
        }
        for reply in replies {
            let json = serde_json::to_string(&reply).expect("server messages serialize");
            if socket.send(Message::Text(json.into())).await.is_err() {
                return;
            }
        }
    }
}
