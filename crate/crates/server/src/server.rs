//! Network front end: WebSocket and newline-delimited TCP transports feeding
//! one shared sequencer.

use std::collections::HashMap;
use std::io::Cursor;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use ascribe_core::{ClientId, MeshId};
use ascribe_session::{
    encode_event, mesh_frame, AssetSource, Outbound, Payload, SceneState, Session, SessionConfig,
};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Redirect, Response};
use axum::routing::get;
use axum::{Json, Router};
use base64::Engine;
use futures_util::{SinkExt, StreamExt};
use serde::Deserialize;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc::{unbounded_channel, UnboundedReceiver, UnboundedSender};
use tower_http::services::ServeDir;

use crate::catalog::{CatalogError, FsAssets};

const VIEWER_PLACEHOLDER: &str = include_str!("viewer.html");

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub assets_dir: PathBuf,
    pub bind: String,
    /// HTTP/WebSocket port; 0 picks a free one.
    pub port: u16,
    /// Raw TCP port. Defaults to `port + 1`, or a free port when `port` is 0.
    pub tcp_port: Option<u16>,
    pub session_token: String,
    pub recenter_imports: bool,
    /// Directory served under `/viewer`; a built-in page is used otherwise.
    pub viewer_dir: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// What a connection's writer task sends, in sequencer order.
#[derive(Debug, Clone)]
enum Frame {
    Text(Vec<u8>),
    Mesh(MeshId, Arc<Vec<u8>>),
}

struct Inner<A> {
    session: Session<A>,
    outboxes: HashMap<ClientId, UnboundedSender<Frame>>,
}

/// The sequencer plus one outbox per live connection. Outbound messages are
/// queued while the session lock is held, so every connection observes the
/// sequencer's order.
pub struct Hub<A> {
    inner: Mutex<Inner<A>>,
}

impl<A: AssetSource> Hub<A> {
    pub fn new(session: Session<A>) -> Self {
        Self {
            inner: Mutex::new(Inner {
                session,
                outboxes: HashMap::new(),
            }),
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner<A>> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn connect(&self, authorized: bool) -> (ClientId, UnboundedReceiver<Frame>) {
        let (tx, rx) = unbounded_channel();
        let mut inner = self.lock();
        let id = inner.session.connect(authorized);
        inner.outboxes.insert(id, tx);
        (id, rx)
    }

    fn submit(&self, client: ClientId, bytes: &[u8]) {
        let mut inner = self.lock();
        let out = inner.session.handle_bytes(client, bytes);
        dispatch(&mut inner, out);
    }

    fn disconnect(&self, client: ClientId) {
        let mut inner = self.lock();
        inner.outboxes.remove(&client);
        let out = inner.session.disconnect(client);
        dispatch(&mut inner, out);
    }

    /// Authoritative replicated state.
    pub fn state(&self) -> SceneState {
        self.lock().session.state()
    }

    /// Objects currently held by some client.
    pub fn held_objects(&self) -> usize {
        let inner = self.lock();
        inner
            .session
            .scene()
            .objects()
            .filter(|o| o.grab_owner.is_some())
            .count()
    }

    pub fn connected(&self) -> usize {
        self.lock().outboxes.len()
    }

    fn slice_png(&self, stack: &str, index: usize) -> Option<Vec<u8>> {
        let slice = self.lock().session.stack_slice(stack, index)?;
        let img = image::GrayImage::from_raw(
            slice.width as u32,
            slice.height as u32,
            slice.to_gray8(),
        )?;
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png).ok()?;
        Some(out.into_inner())
    }

    fn catalog(&self) -> Vec<ascribe_session::AssetEntry> {
        self.lock().session.assets().catalog()
    }
}

fn dispatch<A: AssetSource>(inner: &mut Inner<A>, out: Vec<Outbound>) {
    for o in out {
        let frame = match o.payload {
            Payload::Event(e) => Frame::Text(encode_event(&e)),
            Payload::Mesh { mesh, stl } => Frame::Mesh(mesh, stl),
        };
        for client in inner.session.recipients(o.to) {
            if let Some(tx) = inner.outboxes.get(&client) {
                let _ = tx.send(frame.clone());
            }
        }
    }
}

type SharedHub = Arc<Hub<FsAssets>>;

#[derive(Clone)]
struct AppState {
    hub: SharedHub,
    token: Arc<str>,
}

/// A bound but not yet running server.
pub struct Server {
    hub: SharedHub,
    token: Arc<str>,
    http: TcpListener,
    tcp: TcpListener,
    viewer_dir: Option<PathBuf>,
}

async fn bind(host: &str, port: u16) -> Result<TcpListener, ServeError> {
    let addr = format!("{host}:{port}");
    TcpListener::bind(&addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })
}

impl Server {
    pub async fn bind(opts: ServeOptions) -> Result<Self, ServeError> {
        let assets = FsAssets::open(&opts.assets_dir)?;
        let config = SessionConfig {
            token: Some(opts.session_token.clone()),
            recenter_imports: opts.recenter_imports,
            ..SessionConfig::default()
        };
        let hub = Arc::new(Hub::new(Session::new(assets, config)));
        let http = bind(&opts.bind, opts.port).await?;
        let tcp_port = match (opts.tcp_port, opts.port) {
            (Some(p), _) => p,
            (None, 0) => 0,
            (None, p) => p.checked_add(1).unwrap_or(0),
        };
        let tcp = bind(&opts.bind, tcp_port).await?;
        Ok(Self {
            hub,
            token: opts.session_token.into(),
            http,
            tcp,
            viewer_dir: opts.viewer_dir,
        })
    }

    pub fn http_addr(&self) -> std::io::Result<SocketAddr> {
        self.http.local_addr()
    }

    pub fn tcp_addr(&self) -> std::io::Result<SocketAddr> {
        self.tcp.local_addr()
    }

    pub fn hub(&self) -> SharedHub {
        self.hub.clone()
    }

    /// Serves until the task is dropped or a listener fails.
    pub async fn run(self) -> Result<(), ServeError> {
        let state = AppState {
            hub: self.hub.clone(),
            token: self.token,
        };
        let mut app = Router::new()
            .route("/", get(|| async { Redirect::permanent("/viewer/") }))
            .route("/ws", get(ws_upgrade))
            .route("/assets", get(list_assets))
            .route("/slice", get(slice_png));
        app = match self.viewer_dir {
            Some(dir) => app.nest_service("/viewer", ServeDir::new(dir)),
            None => app
                .route("/viewer", get(|| async { Html(VIEWER_PLACEHOLDER) }))
                .route("/viewer/", get(|| async { Html(VIEWER_PLACEHOLDER) })),
        };
        let app = app.with_state(state);

        let tcp = self.tcp;
        let hub = self.hub;
        let tcp_task = tokio::spawn(async move {
            loop {
                match tcp.accept().await {
                    Ok((stream, peer)) => {
                        log::info!("tcp client from {peer}");
                        tokio::spawn(serve_tcp(hub.clone(), stream));
                    }
                    Err(e) => log::warn!("tcp accept failed: {e}"),
                }
            }
        });
        let result = axum::serve(self.http, app).await;
        tcp_task.abort();
        result.map_err(ServeError::Io)
    }
}

/// Mesh bytes for text-only transports.
fn mesh_data_line(mesh: MeshId, stl: &[u8]) -> Vec<u8> {
    let data = base64::engine::general_purpose::STANDARD.encode(stl);
    serde_json::to_vec(&serde_json::json!({"t": "mesh_data", "mesh": mesh, "data": data}))
        .expect("json value serializes")
}

async fn serve_tcp(hub: SharedHub, stream: TcpStream) {
    let (read, mut write) = stream.into_split();
    let (id, mut rx) = hub.connect(false);
    let writer = tokio::spawn(async move {
        while let Some(frame) = rx.recv().await {
            let mut line = match frame {
                Frame::Text(t) => t,
                Frame::Mesh(mesh, stl) => mesh_data_line(mesh, &stl),
            };
            line.push(b'\n');
            if write.write_all(&line).await.is_err() {
                break;
            }
        }
    });
    let mut lines = BufReader::new(read).lines();
    loop {
        match lines.next_line().await {
            Ok(Some(line)) if line.trim().is_empty() => continue,
            Ok(Some(line)) => hub.submit(id, line.as_bytes()),
            Ok(None) => break,
            Err(e) => {
                log::debug!("{id} read error: {e}");
                break;
            }
        }
    }
    hub.disconnect(id);
    let _ = writer.await;
    log::info!("{id} (tcp) closed");
}

#[derive(Deserialize)]
struct WsQuery {
    token: Option<String>,
}

async fn ws_upgrade(
    State(state): State<AppState>,
    Query(q): Query<WsQuery>,
    ws: WebSocketUpgrade,
) -> Response {
    let authorized = match q.token {
        Some(t) if *t == *state.token => true,
        Some(_) => return (StatusCode::UNAUTHORIZED, "bad session token").into_response(),
        None => false,
    };
    ws.on_upgrade(move |socket| serve_ws(state.hub, socket, authorized))
}

async fn serve_ws(hub: SharedHub, socket: WebSocket, authorized: bool) {
    let (mut sink, mut stream) = socket.split();
    let (id, mut rx) = hub.connect(authorized);
    let writer = tokio::spawn(async move {
        while let Some(frame) = rx.recv().await {
            let msg = match frame {
                Frame::Text(t) => match String::from_utf8(t) {
                    Ok(s) => Message::Text(s.into()),
                    Err(_) => continue,
                },
                Frame::Mesh(mesh, stl) => Message::Binary(mesh_frame(mesh, &stl).into()),
            };
            if sink.send(msg).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    while let Some(msg) = stream.next().await {
        match msg {
            Ok(Message::Text(t)) => hub.submit(id, t.as_bytes()),
            Ok(Message::Binary(b)) => hub.submit(id, &b),
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => {}
        }
    }
    hub.disconnect(id);
    let _ = writer.await;
    log::info!("{id} (ws) closed");
}

async fn list_assets(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.hub.catalog())
}

#[derive(Deserialize)]
struct SliceQuery {
    stack: String,
    index: usize,
}

async fn slice_png(State(state): State<AppState>, Query(q): Query<SliceQuery>) -> Response {
    match state.hub.slice_png(&q.stack, q.index) {
        Some(png) => ([(header::CONTENT_TYPE, "image/png")], png).into_response(),
        None => (StatusCode::NOT_FOUND, "no such slice").into_response(),
    }
}
