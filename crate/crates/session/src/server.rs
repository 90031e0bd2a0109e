//! HTTP/WebSocket front end: one session per connection, static assets at `/`.

use std::future::Future;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use ids_core::simulation::trial::TrialConfig;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, watch};
use tower_http::services::ServeDir;
use uuid::Uuid;

use crate::protocol::{ClientMessage, ServerFrame};
use crate::session::{AxisScale, Session};

#[derive(Debug, Clone)]
pub struct ServerSettings {
    pub trial: TrialConfig,
    pub scale: AxisScale,
    pub tick_hz: f64,
    pub log_dir: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
}

#[derive(Clone)]
struct AppState {
    settings: Arc<ServerSettings>,
    shutdown: watch::Receiver<bool>,
    // Each live session holds a clone; the server waits for all to drop.
    alive: mpsc::Sender<()>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("invalid session configuration: {0}")]
    Config(#[from] ids_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn router(settings: Arc<ServerSettings>, shutdown: watch::Receiver<bool>, alive: mpsc::Sender<()>) -> Router {
    let static_dir = settings.static_dir.clone();
    let state = AppState {
        settings,
        shutdown,
        alive,
    };
    let app = Router::new()
        .route("/ws", get(ws_handler))
        .route("/health", get(|| async { "ok" }))
        .with_state(state);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

/// Serves until `shutdown` resolves, then closes every session and writes its log.
pub async fn serve<F>(listener: TcpListener, settings: ServerSettings, shutdown: F) -> Result<(), ServerError>
where
    F: Future<Output = ()> + Send + 'static,
{
    settings.trial.validate()?;
    if let Some(dir) = &settings.log_dir {
        tokio::fs::create_dir_all(dir).await?;
    }
    let (stop_tx, stop_rx) = watch::channel(false);
    let (alive_tx, mut alive_rx) = mpsc::channel::<()>(1);
    let app = router(Arc::new(settings), stop_rx.clone(), alive_tx);
    let mut stop_wait = stop_rx;
    axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            tokio::select! {
                _ = shutdown => {}
                _ = stop_wait.changed() => {}
            }
        })
        .await?;
    let _ = stop_tx.send(true);
    // Resolves once every session task has dropped its sender.
    let _ = alive_rx.recv().await;
    Ok(())
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| run_session(socket, state))
}

async fn run_session(socket: WebSocket, state: AppState) {
    let AppState {
        settings,
        mut shutdown,
        alive,
    } = state;
    let id = Uuid::new_v4();
    let mut session = match Session::new(id, settings.trial.clone(), settings.scale) {
        Ok(s) => s,
        Err(e) => {
            tracing::error!(%id, "cannot start session: {e}");
            return;
        }
    };
    tracing::info!(%id, "session opened");
    let (mut tx, mut rx) = socket.split();
    if tx.send(text(&ServerFrame::hello())).await.is_err() {
        return;
    }
    let mut ticker = tokio::time::interval(Duration::from_secs_f64(1.0 / settings.tick_hz));
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            _ = ticker.tick() => {
                if let Some(frame) = session.tick() {
                    if tx.send(text(&frame)).await.is_err() {
                        break;
                    }
                }
            }
            incoming = rx.next() => match incoming {
                Some(Ok(Message::Text(body))) => match ClientMessage::parse(body.as_str()) {
                    Ok(msg) => session.enqueue(msg),
                    Err(e) => {
                        if tx.send(text(&ServerFrame::error(e.to_string()))).await.is_err() {
                            break;
                        }
                    }
                },
                Some(Ok(Message::Binary(_))) => {
                    if tx.send(text(&ServerFrame::error("binary frames are not supported"))).await.is_err() {
                        break;
                    }
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            },
            _ = shutdown.changed() => {
                let _ = tx.send(Message::Close(None)).await;
                break;
            }
        }
    }
    if let Some(dir) = &settings.log_dir {
        match write_session_log(dir, &session).await {
            Ok(path) => tracing::info!(%id, path = %path.display(), "session log written"),
            Err(e) => tracing::error!(%id, "failed to write session log: {e}"),
        }
    }
    tracing::info!(%id, "session closed");
    drop(alive);
}

fn text(frame: &ServerFrame) -> Message {
    Message::Text(frame.to_json().into())
}

/// Writes `session-<id>.csv` and `session-<id>.messages.json`; returns the CSV path.
pub async fn write_session_log(dir: &Path, session: &Session) -> std::io::Result<PathBuf> {
    let csv = dir.join(format!("session-{}.csv", session.id()));
    tokio::fs::write(&csv, session.log().to_csv()).await?;
    let transcript = serde_json::to_string_pretty(&session.transcript()).map_err(std::io::Error::other)?;
    tokio::fs::write(dir.join(format!("session-{}.messages.json", session.id())), transcript).await?;
    Ok(csv)
}
