mod common;

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use ascribe_core::interaction::Ray;
use ascribe_core::{ClientId, MeshId, ObjectId, Transform, UnitQuat, Vec3};
use ascribe_server::{FsAssets, Hub, ServeOptions, Server};
use ascribe_session::protocol::{decode_event, encode_op};
use ascribe_session::{ClientOp, EventKind, OpKind, RejectReason, Replica, ServerEvent};
use base64::Engine;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader, Lines};
use tokio::net::tcp::{OwnedReadHalf, OwnedWriteHalf};
use tokio::net::TcpStream;

const TOKEN: &str = "s3cret";

enum Incoming {
    Event(ServerEvent),
    Mesh(u64, Vec<u8>),
}

struct Client {
    lines: Lines<BufReader<OwnedReadHalf>>,
    write: OwnedWriteHalf,
    seq: u64,
    id: Option<ClientId>,
    replica: Option<Replica>,
    state_revs: Vec<u64>,
}

impl Client {
    async fn connect(addr: SocketAddr) -> Self {
        let (read, write) = TcpStream::connect(addr).await.unwrap().into_split();
        Self {
            lines: BufReader::new(read).lines(),
            write,
            seq: 0,
            id: None,
            replica: None,
            state_revs: Vec::new(),
        }
    }

    async fn send(&mut self, kind: OpKind) -> u64 {
        self.seq += 1;
        let mut line = encode_op(&ClientOp::new(self.seq, kind));
        line.push(b'\n');
        self.write.write_all(&line).await.unwrap();
        self.seq
    }

    async fn recv(&mut self) -> Incoming {
        let line = tokio::time::timeout(Duration::from_secs(10), self.lines.next_line())
            .await
            .expect("server reply in time")
            .unwrap()
            .expect("connection open");
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        if v["t"] == "mesh_data" {
            let data = base64::engine::general_purpose::STANDARD
                .decode(v["data"].as_str().unwrap())
                .unwrap();
            return Incoming::Mesh(v["mesh"].as_u64().unwrap(), data);
        }
        let ev = decode_event(line.as_bytes()).unwrap();
        match &ev.kind {
            EventKind::Welcome { client } => self.id = Some(*client),
            EventKind::SceneSnapshot { .. } => self.replica = Some(Replica::from_snapshot_event(&ev)),
            _ => {
                if ev.kind.is_state_change() {
                    self.state_revs.push(ev.rev);
                }
                if let Some(r) = &mut self.replica {
                    r.apply(&ev).expect("no revision gap");
                }
            }
        }
        Incoming::Event(ev)
    }

    /// Reads until an event matches, returning it.
    async fn until(&mut self, pred: impl Fn(&ServerEvent) -> bool) -> ServerEvent {
        loop {
            if let Incoming::Event(ev) = self.recv().await {
                if pred(&ev) {
                    return ev;
                }
            }
        }
    }

    async fn hello(&mut self, name: &str, token: &str) {
        self.send(OpKind::Hello {
            name: name.into(),
            token: Some(token.into()),
        })
        .await;
        self.until(|e| matches!(e.kind, EventKind::AssetCatalog { .. })).await;
    }
}

async fn start(dir: &std::path::Path) -> (SocketAddr, Arc<Hub<FsAssets>>) {
    let server = Server::bind(ServeOptions {
        assets_dir: dir.to_path_buf(),
        bind: "127.0.0.1".into(),
        port: 0,
        tcp_port: None,
        session_token: TOKEN.into(),
        recenter_imports: false,
        viewer_dir: None,
    })
    .await
    .unwrap();
    let addr = server.tcp_addr().unwrap();
    let hub = server.hub();
    tokio::spawn(server.run());
    (addr, hub)
}

fn hand(x: f64) -> Transform {
    Transform::new(
        Vec3::new(x, 1.2, -0.5),
        UnitQuat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), 0.3 * x),
        1.0,
    )
}

fn first_object(ev: &ServerEvent) -> ObjectId {
    match &ev.kind {
        EventKind::ObjectAdded { object, .. } => object.id,
        other => panic!("expected ObjectAdded, got {other:?}"),
    }
}

fn added_mesh(ev: &ServerEvent) -> MeshId {
    match &ev.kind {
        EventKind::ObjectAdded { mesh, .. } => mesh.id,
        other => panic!("expected ObjectAdded, got {other:?}"),
    }
}

async fn wait_for(mut cond: impl FnMut() -> bool) {
    for _ in 0..200 {
        if cond() {
            return;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("condition not reached");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn join_import_manipulate_disconnect_leaves_clean_state() {
    let dir = tempfile::tempdir().unwrap();
    common::asset_tree(dir.path());
    let (addr, hub) = start(dir.path()).await;

    let mut a = Client::connect(addr).await;
    a.hello("alice", TOKEN).await;
    let mut b = Client::connect(addr).await;
    b.hello("bob", TOKEN).await;
    assert_ne!(a.id, b.id);

    a.send(OpKind::ImportAsset { name: "cube.stl".into() }).await;
    let added = a.until(|e| matches!(e.kind, EventKind::ObjectAdded { .. })).await;
    let obj = first_object(&added);
    let mesh = added_mesh(&added);
    let seen = b.until(|e| matches!(e.kind, EventKind::ObjectAdded { .. })).await;
    assert_eq!(mesh, added_mesh(&seen));

    a.send(OpKind::FetchMesh { mesh }).await;
    let bytes = loop {
        if let Incoming::Mesh(id, data) = a.recv().await {
            assert_eq!(id, mesh.0);
            break data;
        }
    };
    assert_eq!(bytes.len(), 84 + 50 * 12);

    a.send(OpKind::GrabAcquire { object: obj, hand: hand(0.0) }).await;
    a.until(|e| matches!(e.kind, EventKind::GrabChanged { owner: Some(_), .. })).await;
    let seq = b.send(OpKind::GrabAcquire { object: obj, hand: hand(1.0) }).await;
    let rejected = b.until(|e| matches!(e.kind, EventKind::OpRejected { .. })).await;
    assert!(matches!(
        rejected.kind,
        EventKind::OpRejected { seq: s, reason: RejectReason::AlreadyGrabbed, .. } if s == seq
    ));

    for i in 1..=5 {
        a.send(OpKind::GrabMove { object: obj, hand: hand(i as f64 * 0.1) }).await;
    }
    let ray = Ray::new(Vec3::new(0.0, 1.2, 0.0), Vec3::new(0.0, 0.0, -1.0)).unwrap();
    a.send(OpKind::PushPull { object: obj, ray, delta: 0.25 }).await;
    a.send(OpKind::Resize { object: obj, d0: 0.2, d1: 0.3 }).await;
    a.send(OpKind::SetMaterial {
        object: obj,
        preset: ascribe_core::MaterialPreset::Glass,
        opacity: Some(0.4),
    })
    .await;
    a.until(|e| matches!(e.kind, EventKind::MaterialChanged { .. })).await;

    // leave while still holding the grab
    let leaver = a.id.unwrap();
    drop(a);
    b.until(|e| matches!(e.kind, EventKind::AvatarLeft { client } if client == leaver)).await;

    assert_eq!(hub.held_objects(), 0);
    let server_state = hub.state();
    let replica = b.replica.as_ref().unwrap();
    assert_eq!(replica.state(), server_state);
    assert!(replica.objects().all(|o| o.grab_owner.is_none()));

    // every state event seen by b, snapshot onward, is contiguous
    let first = b.state_revs[0];
    let expect: Vec<u64> = (first..first + b.state_revs.len() as u64).collect();
    assert_eq!(b.state_revs, expect);
    assert_eq!(*b.state_revs.last().unwrap(), server_state.revision);

    // a late joiner sees the same scene
    let mut c = Client::connect(addr).await;
    c.hello("carol", TOKEN).await;
    assert_eq!(c.replica.as_ref().unwrap().state(), server_state);
    drop((b, c));
    wait_for(|| hub.connected() == 0).await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn parts_errors_and_tokens() {
    let dir = tempfile::tempdir().unwrap();
    common::asset_tree(dir.path());
    let (addr, hub) = start(dir.path()).await;

    let mut bad = Client::connect(addr).await;
    bad.send(OpKind::Hello { name: "eve".into(), token: Some("nope".into()) }).await;
    let ev = bad.until(|e| matches!(e.kind, EventKind::OpRejected { .. })).await;
    assert!(matches!(ev.kind, EventKind::OpRejected { reason: RejectReason::Unauthorized, .. }));
    bad.send(OpKind::ImportAsset { name: "cube.stl".into() }).await;
    let ev = bad.until(|e| matches!(e.kind, EventKind::OpRejected { .. })).await;
    assert!(matches!(ev.kind, EventKind::OpRejected { reason: RejectReason::Unauthorized, .. }));

    let mut a = Client::connect(addr).await;
    a.hello("alice", TOKEN).await;
    a.send(OpKind::ImportAsset { name: "pair.obj".into() }).await;
    let first = a.until(|e| matches!(e.kind, EventKind::ObjectAdded { .. })).await;
    let second = a.until(|e| matches!(e.kind, EventKind::ObjectAdded { .. })).await;
    assert_eq!(second.rev, first.rev + 1);
    let names: Vec<String> = [&first, &second]
        .iter()
        .map(|e| match &e.kind {
            EventKind::ObjectAdded { object, .. } => object.name.clone(),
            _ => unreachable!(),
        })
        .collect();
    assert_eq!(names, ["pair.obj/left", "pair.obj/right"]);

    a.send(OpKind::ImportAsset { name: "broken.stl".into() }).await;
    let ev = a.until(|e| matches!(e.kind, EventKind::OpRejected { .. })).await;
    match ev.kind {
        EventKind::OpRejected { reason, message, .. } => {
            assert_eq!(reason, RejectReason::BadPayload);
            assert!(message.starts_with("TruncatedFile"), "{message}");
        }
        _ => unreachable!(),
    }
    a.send(OpKind::ImportAsset { name: "../etc/passwd".into() }).await;
    let ev = a.until(|e| matches!(e.kind, EventKind::OpRejected { .. })).await;
    assert!(matches!(ev.kind, EventKind::OpRejected { reason: RejectReason::AssetNotFound, .. }));

    a.write.write_all(b"{not json\n").await.unwrap();
    let ev = a.until(|e| matches!(e.kind, EventKind::OpRejected { .. })).await;
    assert!(matches!(ev.kind, EventKind::OpRejected { reason: RejectReason::BadPayload, .. }));

    assert_eq!(hub.state().revision, 2);
    assert_eq!(hub.state(), a.replica.as_ref().unwrap().state());
}
