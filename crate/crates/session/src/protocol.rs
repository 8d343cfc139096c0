//! Wire messages. Every message is one JSON object whose `"t"` field names
//! its kind; operations carry the client's `seq`, events the scene `rev`.

use ascribe_core::interaction::Ray;
use ascribe_core::quantify::{MeshReport, VoiReport};
use ascribe_core::{
    ClientId, Material, MaterialPreset, Mesh, MeshId, MeshPart, ObjectId, Scene, SceneObject,
    Transform, Vec3,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::assets::AssetEntry;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    MalformedMessage(String),
    #[error("unknown message kind {0:?}")]
    UnknownKind(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientOp {
    pub seq: u64,
    #[serde(flatten)]
    pub kind: OpKind,
}

impl ClientOp {
    pub fn new(seq: u64, kind: OpKind) -> Self {
        Self { seq, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum OpKind {
    Hello {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        token: Option<String>,
    },
    ListAssets,
    ImportAsset {
        name: String,
    },
    ImportStack {
        name: String,
    },
    GrabAcquire {
        object: ObjectId,
        hand: Transform,
    },
    GrabMove {
        object: ObjectId,
        hand: Transform,
    },
    GrabRelease {
        object: ObjectId,
    },
    PushPull {
        object: ObjectId,
        ray: Ray,
        delta: f64,
    },
    /// Scale by `d1 / d0`, the ratio of current to previous hand separation.
    Resize {
        object: ObjectId,
        d0: f64,
        d1: f64,
    },
    SetMaterial {
        object: ObjectId,
        preset: MaterialPreset,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        opacity: Option<f64>,
    },
    SetOpacity {
        object: ObjectId,
        opacity: f64,
    },
    Teleport {
        ray: Ray,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_range: Option<f64>,
    },
    AvatarPose {
        head: Transform,
        left: Transform,
        right: Transform,
    },
    SelectSlice {
        stack: String,
        index: usize,
    },
    RequestQuantify {
        target: QuantifyTarget,
    },
    /// Asks for a MeshData frame carrying the mesh's STL bytes.
    FetchMesh {
        mesh: MeshId,
    },
}

pub const OP_KINDS: &[&str] = &[
    "hello",
    "list_assets",
    "import_asset",
    "import_stack",
    "grab_acquire",
    "grab_move",
    "grab_release",
    "push_pull",
    "resize",
    "set_material",
    "set_opacity",
    "teleport",
    "avatar_pose",
    "select_slice",
    "request_quantify",
    "fetch_mesh",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuantifyTarget {
    /// Shape metrics of one object's mesh (its part, in world scale).
    Object { object: ObjectId },
    /// Per-component reports for a thresholded, already imported stack.
    Stack { stack: String, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Avatar {
    pub client: ClientId,
    pub head: Transform,
    pub left: Transform,
    pub right: Transform,
}

/// Mesh metadata sent in place of geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshInfo {
    pub id: MeshId,
    pub name: String,
    pub vertex_count: usize,
    pub triangle_count: usize,
    pub parts: Vec<MeshPart>,
    pub bounds: Option<(Vec3, Vec3)>,
}

impl MeshInfo {
    pub fn new(id: MeshId, mesh: &Mesh) -> Self {
        Self {
            id,
            name: mesh.parts.first().map(|p| p.name.clone()).unwrap_or_default(),
            vertex_count: mesh.vertex_count(),
            triangle_count: mesh.triangle_count(),
            parts: mesh.parts.clone(),
            bounds: mesh.bounds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceInfo {
    pub stack: String,
    pub index: usize,
    pub slice_count: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerEvent {
    pub rev: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<ClientId>,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum EventKind {
    Welcome {
        client: ClientId,
    },
    SceneSnapshot {
        objects: Vec<SceneObject>,
        meshes: Vec<MeshInfo>,
        avatars: Vec<Avatar>,
        stacks: Vec<SliceInfo>,
    },
    ObjectAdded {
        object: SceneObject,
        mesh: MeshInfo,
    },
    TransformChanged {
        object: ObjectId,
        transform: Transform,
    },
    MaterialChanged {
        object: ObjectId,
        material: Material,
    },
    GrabChanged {
        object: ObjectId,
        owner: Option<ClientId>,
    },
    AvatarMoved {
        avatar: Avatar,
    },
    AvatarLeft {
        client: ClientId,
    },
    SliceChanged {
        slice: SliceInfo,
    },
    AssetCatalog {
        assets: Vec<AssetEntry>,
    },
    QuantifyResult {
        target: QuantifyTarget,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mesh: Option<MeshReport>,
        #[serde(default)]
        vois: Vec<VoiReport>,
    },
    OpRejected {
        seq: u64,
        reason: RejectReason,
        message: String,
    },
}

impl EventKind {
    /// Kinds that mutate the scene and therefore consume a revision.
    pub fn is_state_change(&self) -> bool {
        matches!(
            self,
            EventKind::ObjectAdded { .. }
                | EventKind::TransformChanged { .. }
                | EventKind::MaterialChanged { .. }
                | EventKind::GrabChanged { .. }
        )
    }
}

pub const EVENT_KINDS: &[&str] = &[
    "welcome",
    "scene_snapshot",
    "object_added",
    "transform_changed",
    "material_changed",
    "grab_changed",
    "avatar_moved",
    "avatar_left",
    "slice_changed",
    "asset_catalog",
    "quantify_result",
    "op_rejected",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    NotGrabOwner,
    AlreadyGrabbed,
    UnknownObject,
    BadPayload,
    AssetNotFound,
    Unauthorized,
}

/// The replicated part of a scene in canonical order, used to compare
/// replicas with the authority.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub revision: u64,
    pub objects: Vec<SceneObject>,
    pub meshes: Vec<MeshInfo>,
}

impl SceneState {
    pub fn of(scene: &Scene) -> Self {
        Self {
            revision: scene.revision(),
            objects: scene.objects().cloned().collect(),
            meshes: scene.meshes().map(|(id, m)| MeshInfo::new(id, m)).collect(),
        }
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("scene state serializes")
    }
}

fn kind_of<'a>(value: &'a Value, known: &[&str]) -> Result<&'a str, ProtocolError> {
    let obj = value
        .as_object()
        .ok_or_else(|| ProtocolError::MalformedMessage("expected a JSON object".into()))?;
    let t = obj
        .get("t")
        .and_then(Value::as_str)
        .ok_or_else(|| ProtocolError::MalformedMessage("missing string field \"t\"".into()))?;
    if known.contains(&t) {
        Ok(t)
    } else {
        Err(ProtocolError::UnknownKind(t.to_string()))
    }
}

fn decode<T: serde::de::DeserializeOwned>(bytes: &[u8], known: &[&str]) -> Result<T, ProtocolError> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| ProtocolError::MalformedMessage(e.to_string()))?;
    kind_of(&value, known)?;
    serde_json::from_value(value).map_err(|e| ProtocolError::MalformedMessage(e.to_string()))
}

pub fn encode_op(op: &ClientOp) -> Vec<u8> {
    serde_json::to_vec(op).expect("ops serialize")
}

pub fn decode_op(bytes: &[u8]) -> Result<ClientOp, ProtocolError> {
    decode(bytes, OP_KINDS)
}

pub fn encode_event(ev: &ServerEvent) -> Vec<u8> {
    serde_json::to_vec(ev).expect("events serialize")
}

pub fn decode_event(bytes: &[u8]) -> Result<ServerEvent, ProtocolError> {
    decode(bytes, EVENT_KINDS)
}

/// Best-effort `seq` of an undecodable op, for addressing the rejection.
pub fn salvage_seq(bytes: &[u8]) -> u64 {
    serde_json::from_slice::<Value>(bytes)
        .ok()
        .and_then(|v| v.get("seq").and_then(Value::as_u64))
        .unwrap_or(0)
}

/// Binary MeshData frame: little-endian mesh id, then binary STL.
pub fn mesh_frame(mesh: MeshId, stl: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + stl.len());
    out.extend_from_slice(&mesh.0.to_le_bytes());
    out.extend_from_slice(stl);
    out
}

pub fn parse_mesh_frame(frame: &[u8]) -> Option<(MeshId, &[u8])> {
    let id = u64::from_le_bytes(frame.get(..8)?.try_into().ok()?);
    Some((MeshId(id), &frame[8..]))
}
