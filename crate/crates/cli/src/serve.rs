//! Websocket transport for [`laps_core::Session`].
//!
//! Each connection to `/session` gets its own session. Text frames carry
//! one JSON message each; every update goes back as its own text frame.

use std::net::SocketAddr;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use laps_core::{Session, SessionConfig, SessionUpdate};
use tokio::net::TcpListener;

pub fn router(config: SessionConfig) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/session", get(upgrade))
        .with_state(config)
}

async fn upgrade(ws: WebSocketUpgrade, State(config): State<SessionConfig>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| session_loop(socket, config))
}

async fn session_loop(socket: WebSocket, config: SessionConfig) {
    let (mut tx, mut rx) = socket.split();
    let mut session = match Session::new(config) {
        Ok(s) => s,
        Err(e) => {
            let err = SessionUpdate::Error {
                message: format!("session setup failed: {e}"),
            };
            let _ = tx.send(Message::Text(err.to_json().into())).await;
            return;
        }
    };
    tracing::debug!("session opened");
    while let Some(Ok(msg)) = rx.next().await {
        let updates = match msg {
            Message::Text(text) => session.handle_text(text.as_str()),
            Message::Binary(_) => vec![SessionUpdate::Error {
                message: "binary frames are not supported".into(),
            }],
            Message::Close(_) => break,
            _ => continue,
        };
        for u in updates {
            if tx.send(Message::Text(u.to_json().into())).await.is_err() {
                return;
            }
        }
    }
    tracing::debug!("session closed");
}

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, config: SessionConfig) -> std::io::Result<()> {
    axum::serve(listener, router(config)).await
}

pub async fn bind(port: u16) -> std::io::Result<(TcpListener, SocketAddr)> {
    let listener = TcpListener::bind(("0.0.0.0", port)).await?;
    let addr = listener.local_addr()?;
    Ok((listener, addr))
}
