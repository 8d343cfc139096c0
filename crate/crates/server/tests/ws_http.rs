mod common;

use std::net::SocketAddr;
use std::time::Duration;

use ascribe_server::{ServeOptions, Server};
use ascribe_session::protocol::{decode_event, encode_op};
use ascribe_session::{parse_mesh_frame, ClientOp, EventKind, OpKind, ServerEvent};
use futures_util::{SinkExt, StreamExt};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;

const TOKEN: &str = "tok";

async fn start(dir: &std::path::Path, viewer_dir: Option<std::path::PathBuf>) -> SocketAddr {
    let server = Server::bind(ServeOptions {
        assets_dir: dir.to_path_buf(),
        bind: "127.0.0.1".into(),
        port: 0,
        tcp_port: None,
        session_token: TOKEN.into(),
        recenter_imports: true,
        viewer_dir,
    })
    .await
    .unwrap();
    let addr = server.http_addr().unwrap();
    tokio::spawn(server.run());
    addr
}

/// Minimal HTTP/1.1 GET returning status code and body.
async fn http_get(addr: SocketAddr, path: &str) -> (u16, Vec<u8>) {
    let mut s = TcpStream::connect(addr).await.unwrap();
    let req = format!("GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n");
    s.write_all(req.as_bytes()).await.unwrap();
    let mut buf = Vec::new();
    s.read_to_end(&mut buf).await.unwrap();
    let split = buf.windows(4).position(|w| w == b"\r\n\r\n").unwrap();
    let head = String::from_utf8_lossy(&buf[..split]).to_string();
    let status = head.split(' ').nth(1).unwrap().parse().unwrap();
    let mut body = buf[split + 4..].to_vec();
    if head.to_ascii_lowercase().contains("transfer-encoding: chunked") {
        body = dechunk(&body);
    }
    (status, body)
}

fn dechunk(mut b: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    loop {
        let eol = b.windows(2).position(|w| w == b"\r\n").unwrap();
        let n = usize::from_str_radix(std::str::from_utf8(&b[..eol]).unwrap().trim(), 16).unwrap();
        if n == 0 {
            return out;
        }
        out.extend_from_slice(&b[eol + 2..eol + 2 + n]);
        b = &b[eol + 4 + n..];
    }
}

enum Got {
    Event(ServerEvent),
    Mesh(u64, Vec<u8>),
}

async fn next<S>(ws: &mut S) -> Got
where
    S: StreamExt<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin,
{
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("message in time")
            .expect("open")
            .unwrap();
        match msg {
            Message::Text(t) => return Got::Event(decode_event(t.as_bytes()).unwrap()),
            Message::Binary(b) => {
                let (id, stl) = parse_mesh_frame(&b).unwrap();
                return Got::Mesh(id.0, stl.to_vec());
            }
            _ => continue,
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn websocket_session_with_binary_mesh_frames() {
    let dir = tempfile::tempdir().unwrap();
    common::asset_tree(dir.path());
    let addr = start(dir.path(), None).await;

    let bad = tokio_tungstenite::connect_async(format!("ws://{addr}/ws?token=wrong")).await;
    assert!(bad.is_err());

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws?token={TOKEN}"))
        .await
        .unwrap();
    let send = |seq, kind| Message::Text(String::from_utf8(encode_op(&ClientOp::new(seq, kind))).unwrap().into());
    ws.send(send(1, OpKind::Hello { name: "web".into(), token: None })).await.unwrap();
    ws.send(send(2, OpKind::ImportAsset { name: "cube.obj".into() })).await.unwrap();
    let (object, mesh) = loop {
        if let Got::Event(ev) = next(&mut ws).await {
            if let EventKind::ObjectAdded { object, mesh } = ev.kind {
                break (object, mesh);
            }
        }
    };
    // recentered: bounding-box center 1.5 m in front of the spawn point
    let (lo, hi) = mesh.bounds.unwrap();
    let center = object.transform.apply((lo + hi) * 0.5);
    assert!((center - ascribe_core::Vec3::new(0.0, 1.6, -1.5)).norm() < 1e-9);

    ws.send(send(3, OpKind::FetchMesh { mesh: mesh.id })).await.unwrap();
    let stl = loop {
        if let Got::Mesh(id, stl) = next(&mut ws).await {
            assert_eq!(id, mesh.id.0);
            break stl;
        }
    };
    let parsed = ascribe_core::mesh_io::parse_stl(&stl).unwrap();
    assert_eq!(parsed.triangle_count(), 12);

    ws.send(send(4, OpKind::ImportStack { name: "stack".into() })).await.unwrap();
    loop {
        if let Got::Event(ev) = next(&mut ws).await {
            if matches!(ev.kind, EventKind::SliceChanged { .. }) {
                break;
            }
        }
    }
    let (status, png) = http_get(addr, "/slice?stack=stack&index=2").await;
    assert_eq!(status, 200);
    let img = image::load_from_memory(&png).unwrap().to_luma8();
    assert_eq!(img.dimensions(), (6, 5));
    for (x, y, p) in img.enumerate_pixels() {
        assert_eq!(p.0[0] as usize, x as usize * 40 + y as usize * 3 + 2);
    }
    assert_eq!(http_get(addr, "/slice?stack=stack&index=9").await.0, 404);
    ws.close(None).await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn viewer_and_catalog_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    common::asset_tree(dir.path());
    let addr = start(dir.path(), None).await;
    let (status, body) = http_get(addr, "/viewer/").await;
    assert_eq!(status, 200);
    assert!(String::from_utf8(body).unwrap().contains("/ws"));

    let (status, body) = http_get(addr, "/assets").await;
    assert_eq!(status, 200);
    let entries: Vec<ascribe_session::AssetEntry> = serde_json::from_slice(&body).unwrap();
    assert_eq!(entries, ascribe_server::scan_assets(dir.path()).unwrap());

    let viewer = tempfile::tempdir().unwrap();
    std::fs::write(viewer.path().join("index.html"), "<h1>bundle</h1>").unwrap();
    std::fs::write(viewer.path().join("app.js"), "console.log(1)").unwrap();
    let addr = start(dir.path(), Some(viewer.path().to_path_buf())).await;
    assert_eq!(http_get(addr, "/viewer/app.js").await, (200, b"console.log(1)".to_vec()));
    assert_eq!(http_get(addr, "/viewer/").await.1, b"<h1>bundle</h1>".to_vec());
}
