use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use ascribe_core::interaction::{self, GrabState, InteractionError};
use ascribe_core::mesh_io::write_stl_binary;
use ascribe_core::quantify::{mesh_report, voi_reports};
use ascribe_core::scene::SceneError;
use ascribe_core::segmentation::{connected_components, threshold};
use ascribe_core::volume::{get_slice, Slice2D, Volume};
use ascribe_core::{ClientId, Material, MeshId, MeshPart, ObjectId, Scene, Transform, Vec3};

use crate::assets::{AssetError, AssetSource};
use crate::protocol::{
    decode_op, salvage_seq, Avatar, ClientOp, EventKind, MeshInfo, OpKind,
    QuantifyTarget, RejectReason, SceneState, ServerEvent, SliceInfo,
};

#[derive(Debug, Clone)]
pub struct SessionConfig {
    /// Shared secret expected in `Hello` from clients not authorized by the
    /// transport.
    pub token: Option<String>,
    /// Move imported meshes so their bounding-box center sits
    /// `import_distance` in front of the spawn point.
    pub recenter_imports: bool,
    pub spawn: Vec3,
    /// Unit viewing direction at spawn.
    pub forward: Vec3,
    pub import_distance: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            token: None,
            recenter_imports: false,
            spawn: Vec3::new(0.0, 1.6, 0.0),
            forward: Vec3::new(0.0, 0.0, -1.0),
            import_distance: 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipient {
    /// Every client that has completed `Hello`.
    All,
    Only(ClientId),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Event(ServerEvent),
    /// Binary STL for a mesh id.
    Mesh { mesh: MeshId, stl: Arc<Vec<u8>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub to: Recipient,
    pub payload: Payload,
}

impl Outbound {
    pub fn event(&self) -> Option<&ServerEvent> {
        match &self.payload {
            Payload::Event(e) => Some(e),
            Payload::Mesh { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Held {
    grab: GrabState,
    hand: Transform,
}

#[derive(Debug, Clone)]
struct ClientState {
    authorized: bool,
    name: Option<String>,
    last_seq: Option<u64>,
    avatar: Avatar,
    held: BTreeMap<ObjectId, Held>,
}

impl ClientState {
    fn joined(&self) -> bool {
        self.name.is_some()
    }
}

struct Stack {
    volume: Arc<Volume>,
    index: usize,
}

impl Stack {
    fn info(&self, name: &str) -> SliceInfo {
        let [w, h, d] = self.volume.dims();
        SliceInfo {
            stack: name.to_string(),
            index: self.index,
            slice_count: d,
            width: w,
            height: h,
        }
    }
}

struct Rejection(RejectReason, String);

impl From<InteractionError> for Rejection {
    fn from(e: InteractionError) -> Self {
        let reason = match &e {
            InteractionError::Scene(SceneError::UnknownObject(_)) => RejectReason::UnknownObject,
            InteractionError::AlreadyGrabbed { .. } => RejectReason::AlreadyGrabbed,
            InteractionError::NotGrabOwner { .. } => RejectReason::NotGrabOwner,
            _ => RejectReason::BadPayload,
        };
        Rejection(reason, e.to_string())
    }
}

impl From<SceneError> for Rejection {
    fn from(e: SceneError) -> Self {
        InteractionError::from(e).into()
    }
}

fn bad(msg: impl Into<String>) -> Rejection {
    Rejection(RejectReason::BadPayload, msg.into())
}

type OpResult = Result<Vec<Outbound>, Rejection>;

/// The single sequencer of a shared scene. Ops are applied one at a time in
/// call order; every scene mutation bumps the revision by one and yields
/// exactly one broadcast state event.
pub struct Session<A> {
    scene: Scene,
    assets: A,
    config: SessionConfig,
    clients: BTreeMap<ClientId, ClientState>,
    next_client: u64,
    stacks: BTreeMap<String, Stack>,
    stl: HashMap<MeshId, Arc<Vec<u8>>>,
}

impl<A: AssetSource> Session<A> {
    pub fn new(assets: A, config: SessionConfig) -> Self {
        Self {
            scene: Scene::new(),
            assets,
            config,
            clients: BTreeMap::new(),
            next_client: 0,
            stacks: BTreeMap::new(),
            stl: HashMap::new(),
        }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn state(&self) -> SceneState {
        SceneState::of(&self.scene)
    }

    pub fn assets(&self) -> &A {
        &self.assets
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    /// Registers a connection. `authorized` skips the `Hello` token check
    /// for transports that validated the token themselves.
    pub fn connect(&mut self, authorized: bool) -> ClientId {
        self.next_client += 1;
        let id = ClientId(self.next_client);
        let spawn = self.config.spawn;
        let pose = |dx: f64| Transform::from_translation(spawn + Vec3::new(dx, -0.4, -0.3));
        self.clients.insert(
            id,
            ClientState {
                authorized,
                name: None,
                last_seq: None,
                avatar: Avatar {
                    client: id,
                    head: Transform::from_translation(spawn),
                    left: pose(-0.2),
                    right: pose(0.2),
                },
                held: BTreeMap::new(),
            },
        );
        log::debug!("{id} connected");
        id
    }

    pub fn is_joined(&self, client: ClientId) -> bool {
        self.clients.get(&client).is_some_and(ClientState::joined)
    }

    /// Clients that receive [`Recipient::All`] messages.
    pub fn joined_clients(&self) -> Vec<ClientId> {
        self.clients
            .iter()
            .filter(|(_, c)| c.joined())
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn recipients(&self, to: Recipient) -> Vec<ClientId> {
        match to {
            Recipient::All => self.joined_clients(),
            Recipient::Only(c) => self.clients.contains_key(&c).then_some(c).into_iter().collect(),
        }
    }

    pub fn mesh_stl(&self, mesh: MeshId) -> Option<Arc<Vec<u8>>> {
        self.stl.get(&mesh).cloned()
    }

    pub fn stack_slice(&self, stack: &str, index: usize) -> Option<Slice2D> {
        get_slice(&self.stacks.get(stack)?.volume, index).ok()
    }

    /// Full late-join state at the current revision.
    pub fn snapshot(&self) -> ServerEvent {
        let mut mesh_ids: Vec<MeshId> = self.scene.objects().map(|o| o.mesh).collect();
        mesh_ids.sort();
        mesh_ids.dedup();
        ServerEvent {
            rev: self.scene.revision(),
            origin: None,
            kind: EventKind::SceneSnapshot {
                objects: self.scene.objects().cloned().collect(),
                meshes: mesh_ids
                    .into_iter()
                    .map(|id| MeshInfo::new(id, self.scene.mesh(id).expect("referenced mesh")))
                    .collect(),
                avatars: self
                    .clients
                    .values()
                    .filter(|c| c.joined())
                    .map(|c| c.avatar)
                    .collect(),
                stacks: self.stacks.iter().map(|(n, s)| s.info(n)).collect(),
            },
        }
    }

    /// Decodes and applies one raw message.
    pub fn handle_bytes(&mut self, client: ClientId, bytes: &[u8]) -> Vec<Outbound> {
        match decode_op(bytes) {
            Ok(op) => self.handle(client, op),
            Err(e) => vec![self.reject(client, salvage_seq(bytes), bad(e.to_string()))],
        }
    }

    pub fn handle(&mut self, client: ClientId, op: ClientOp) -> Vec<Outbound> {
        let Some(state) = self.clients.get_mut(&client) else {
            log::warn!("op from unknown {client}");
            return Vec::new();
        };
        if let Some(last) = state.last_seq {
            if op.seq <= last {
                let msg = format!("seq {} not above {last}", op.seq);
                return vec![self.reject(client, op.seq, bad(msg))];
            }
        }
        state.last_seq = Some(op.seq);
        if !state.joined() && !matches!(op.kind, OpKind::Hello { .. }) {
            return vec![self.reject(
                client,
                op.seq,
                Rejection(RejectReason::Unauthorized, "hello required".into()),
            )];
        }
        match self.apply(client, op.kind) {
            Ok(out) => out,
            Err(r) => {
                log::debug!("rejected seq {} from {client}: {}", op.seq, r.1);
                vec![self.reject(client, op.seq, r)]
            }
        }
    }

    /// Drops a connection, releasing its grabs (broadcast) and its avatar.
    pub fn disconnect(&mut self, client: ClientId) -> Vec<Outbound> {
        let Some(state) = self.clients.remove(&client) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for object in interaction::release_all(&mut self.scene, client) {
            out.push(self.broadcast(client, EventKind::GrabChanged { object, owner: None }));
        }
        if state.joined() {
            out.push(self.broadcast(client, EventKind::AvatarLeft { client }));
        }
        log::debug!("{client} disconnected");
        out
    }

    fn event(&self, origin: Option<ClientId>, kind: EventKind) -> ServerEvent {
        ServerEvent {
            rev: self.scene.revision(),
            origin,
            kind,
        }
    }

    fn broadcast(&self, origin: ClientId, kind: EventKind) -> Outbound {
        Outbound {
            to: Recipient::All,
            payload: Payload::Event(self.event(Some(origin), kind)),
        }
    }

    fn reply(&self, client: ClientId, kind: EventKind) -> Outbound {
        Outbound {
            to: Recipient::Only(client),
            payload: Payload::Event(self.event(Some(client), kind)),
        }
    }

    fn reject(&self, client: ClientId, seq: u64, r: Rejection) -> Outbound {
        self.reply(
            client,
            EventKind::OpRejected {
                seq,
                reason: r.0,
                message: r.1,
            },
        )
    }

    fn client_mut(&mut self, client: ClientId) -> &mut ClientState {
        self.clients.get_mut(&client).expect("connected client")
    }

    fn apply(&mut self, client: ClientId, kind: OpKind) -> OpResult {
        match kind {
            OpKind::Hello { name, token } => self.hello(client, name, token),
            OpKind::ListAssets => Ok(vec![self.reply(
                client,
                EventKind::AssetCatalog {
                    assets: self.assets.catalog(),
                },
            )]),
            OpKind::ImportAsset { name } => self.import_asset(client, &name),
            OpKind::ImportStack { name } => self.import_stack(client, name),
            OpKind::GrabAcquire { object, hand } => {
                let grab = interaction::grab_acquire(&mut self.scene, client, object, &hand)?;
                self.client_mut(client).held.insert(object, Held { grab, hand });
                Ok(vec![self.broadcast(
                    client,
                    EventKind::GrabChanged {
                        object,
                        owner: Some(client),
                    },
                )])
            }
            OpKind::GrabMove { object, hand } => {
                interaction::require_owner(&self.scene, client, object)?;
                let held = self.client_mut(client).held.get(&object).cloned().ok_or(
                    InteractionError::NotGrabOwner { object, client },
                )?;
                let transform = interaction::grab_move(&mut self.scene, &held.grab, &hand)?;
                self.client_mut(client).held.get_mut(&object).expect("held").hand = hand;
                Ok(vec![self.broadcast(client, EventKind::TransformChanged { object, transform })])
            }
            OpKind::GrabRelease { object } => {
                interaction::grab_release(&mut self.scene, client, object)?;
                self.client_mut(client).held.remove(&object);
                Ok(vec![self.broadcast(client, EventKind::GrabChanged { object, owner: None })])
            }
            OpKind::PushPull { object, ray, delta } => {
                interaction::require_owner(&self.scene, client, object)?;
                let current = self.scene.object(object)?.transform;
                let t = interaction::push_pull(&current, &ray, delta)?;
                self.set_held_transform(client, object, t)
            }
            OpKind::Resize { object, d0, d1 } => {
                interaction::require_owner(&self.scene, client, object)?;
                let current = self.scene.object(object)?.transform;
                let t = interaction::two_hand_resize(&current, d0, d1)?;
                self.set_held_transform(client, object, t)
            }
            OpKind::SetMaterial {
                object,
                preset,
                opacity,
            } => {
                if opacity.is_some_and(|o| !o.is_finite()) {
                    return Err(bad("opacity must be finite"));
                }
                let material = interaction::set_material(&mut self.scene, object, preset, opacity)?;
                Ok(vec![self.material_changed(client, object, material)])
            }
            OpKind::SetOpacity { object, opacity } => {
                if !opacity.is_finite() {
                    return Err(bad("opacity must be finite"));
                }
                let material = interaction::set_opacity(&mut self.scene, object, opacity)?;
                Ok(vec![self.material_changed(client, object, material)])
            }
            OpKind::Teleport { ray, max_range } => {
                let range = max_range.unwrap_or(interaction::DEFAULT_TELEPORT_RANGE);
                if !(range.is_finite() && range > 0.0) {
                    return Err(bad("max_range must be positive"));
                }
                let target = interaction::teleport_target(&ray, range)
                    .ok_or_else(|| bad("ray does not reach the floor within range"))?;
                let avatar = &mut self.client_mut(client).avatar;
                let shift = Vec3::new(target.x - avatar.head.position.x, 0.0, target.z - avatar.head.position.z);
                for pose in [&mut avatar.head, &mut avatar.left, &mut avatar.right] {
                    pose.position += shift;
                }
                let avatar = *avatar;
                Ok(vec![self.broadcast(client, EventKind::AvatarMoved { avatar })])
            }
            OpKind::AvatarPose { head, left, right } => {
                if ![head, left, right].iter().all(Transform::is_valid) {
                    return Err(bad("avatar poses must be valid transforms"));
                }
                let avatar = Avatar {
                    client,
                    head,
                    left,
                    right,
                };
                self.client_mut(client).avatar = avatar;
                Ok(vec![self.broadcast(client, EventKind::AvatarMoved { avatar })])
            }
            OpKind::SelectSlice { stack, index } => {
                let s = self
                    .stacks
                    .get_mut(&stack)
                    .ok_or_else(|| bad(format!("stack {stack:?} is not imported")))?;
                let depth = s.volume.dims()[2];
                if index >= depth {
                    return Err(bad(format!("slice {index} out of range 0..{depth}")));
                }
                s.index = index;
                let slice = s.info(&stack);
                Ok(vec![self.broadcast(client, EventKind::SliceChanged { slice })])
            }
            OpKind::RequestQuantify { target } => self.quantify(client, target),
            OpKind::FetchMesh { mesh } => {
                let stl = self
                    .stl
                    .get(&mesh)
                    .cloned()
                    .ok_or_else(|| bad(format!("unknown {mesh}")))?;
                Ok(vec![Outbound {
                    to: Recipient::Only(client),
                    payload: Payload::Mesh { mesh, stl },
                }])
            }
        }
    }

    fn hello(&mut self, client: ClientId, name: String, token: Option<String>) -> OpResult {
        let expected = self.config.token.clone();
        let state = self.client_mut(client);
        if state.joined() {
            return Err(bad("already joined"));
        }
        if !state.authorized && expected.is_some() && token != expected {
            return Err(Rejection(RejectReason::Unauthorized, "bad session token".into()));
        }
        state.authorized = true;
        state.name = Some(name);
        let avatar = state.avatar;
        Ok(vec![
            self.reply(client, EventKind::Welcome { client }),
            Outbound {
                to: Recipient::Only(client),
                payload: Payload::Event(self.snapshot()),
            },
            self.reply(
                client,
                EventKind::AssetCatalog {
                    assets: self.assets.catalog(),
                },
            ),
            self.broadcast(client, EventKind::AvatarMoved { avatar }),
        ])
    }

    fn import_asset(&mut self, client: ClientId, name: &str) -> OpResult {
        let mut mesh = self.assets.load_mesh(name).map_err(|e| match e {
            AssetError::NotFound(_) => Rejection(RejectReason::AssetNotFound, e.to_string()),
            AssetError::Invalid(msg) => bad(msg),
        })?;
        if mesh.triangles.is_empty() {
            return Err(bad(format!("{name} has no triangles")));
        }
        if mesh.parts.is_empty() {
            mesh.parts = vec![MeshPart::new(name, 0, mesh.triangles.len())];
        }
        mesh.validate().map_err(|e| bad(e.to_string()))?;

        let base = match (self.config.recenter_imports, mesh.bounds()) {
            (true, Some((lo, hi))) => {
                let target = self.config.spawn + self.config.forward * self.config.import_distance;
                Transform::from_translation(target - (lo + hi) / 2.0)
            }
            _ => Transform::IDENTITY,
        };
        let parts: Vec<String> = mesh.parts.iter().map(|p| p.name.clone()).collect();
        let stl = Arc::new(write_stl_binary(&mesh));
        let mesh_id = self.scene.insert_mesh(mesh);
        self.stl.insert(mesh_id, stl);
        let info = MeshInfo::new(mesh_id, self.scene.mesh(mesh_id)?);

        let mut out = Vec::with_capacity(parts.len());
        for (i, part) in parts.iter().enumerate() {
            let object = self
                .scene
                .add_object(format!("{name}/{part}"), mesh_id, Some(i), base, Material::default())?
                .clone();
            out.push(self.broadcast(
                client,
                EventKind::ObjectAdded {
                    object,
                    mesh: info.clone(),
                },
            ));
        }
        log::info!("{client} imported {name} as {} objects", parts.len());
        Ok(out)
    }

    fn import_stack(&mut self, client: ClientId, name: String) -> OpResult {
        let volume = self.assets.load_stack(&name).map_err(|e| match e {
            AssetError::NotFound(_) => Rejection(RejectReason::AssetNotFound, e.to_string()),
            AssetError::Invalid(msg) => bad(msg),
        })?;
        let stack = Stack {
            volume: Arc::new(volume),
            index: 0,
        };
        let slice = stack.info(&name);
        self.stacks.insert(name, stack);
        Ok(vec![self.broadcast(client, EventKind::SliceChanged { slice })])
    }

    fn set_held_transform(&mut self, client: ClientId, object: ObjectId, t: Transform) -> OpResult {
        self.scene.set_transform(object, t)?;
        // keep the hand-relative offset in step so the next grab move does
        // not snap the object back
        if let Some(held) = self.client_mut(client).held.get_mut(&object) {
            held.grab.offset = interaction::grab_offset(&held.hand, &t);
        }
        Ok(vec![self.broadcast(client, EventKind::TransformChanged { object, transform: t })])
    }

    fn material_changed(&self, client: ClientId, object: ObjectId, material: Material) -> Outbound {
        self.broadcast(client, EventKind::MaterialChanged { object, material })
    }

    fn quantify(&self, client: ClientId, target: QuantifyTarget) -> OpResult {
        let (mesh, vois) = match &target {
            QuantifyTarget::Object { object } => {
                let obj = self.scene.object(*object)?;
                let source = self.scene.mesh(obj.mesh)?;
                let local = match obj.active_part {
                    Some(p) => source.extract_part(p),
                    None => (**source).clone(),
                };
                let world = local.map_vertices(|p| obj.transform.apply(p));
                (Some(mesh_report(&world)), Vec::new())
            }
            QuantifyTarget::Stack { stack, lo, hi } => {
                let s = self
                    .stacks
                    .get(stack)
                    .ok_or_else(|| bad(format!("stack {stack:?} is not imported")))?;
                let mask = threshold(&s.volume, *lo, *hi).map_err(|e| bad(e.to_string()))?;
                let labels = connected_components(&mask);
                let vois = voi_reports(&labels, &s.volume).map_err(|e| bad(e.to_string()))?;
                (None, vois)
            }
        };
        Ok(vec![self.reply(client, EventKind::QuantifyResult { target, mesh, vois })])
    }
}
