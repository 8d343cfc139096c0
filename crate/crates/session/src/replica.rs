use std::collections::BTreeMap;

use ascribe_core::{ClientId, MeshId, ObjectId, SceneObject};

use crate::protocol::{Avatar, EventKind, MeshInfo, SceneState, ServerEvent, SliceInfo};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplicaError {
    #[error("revision gap: expected {expected}, got {got}")]
    Gap { expected: u64, got: u64 },
    #[error("event refers to unknown {0}")]
    UnknownObject(ObjectId),
}

/// Client-side copy of a session scene rebuilt from the event stream.
#[derive(Debug, Clone, Default)]
pub struct Replica {
    pub client: Option<ClientId>,
    revision: u64,
    objects: BTreeMap<ObjectId, SceneObject>,
    meshes: BTreeMap<MeshId, MeshInfo>,
    avatars: BTreeMap<ClientId, Avatar>,
    slices: BTreeMap<String, SliceInfo>,
}

impl Replica {
    /// An empty scene at revision 0, as seen by a client present from the
    /// start.
    pub fn new() -> Self {
        Self::default()
    }

    /// A replica initialized from a snapshot event; other events are
    /// applied as usual.
    pub fn from_snapshot_event(ev: &ServerEvent) -> Self {
        let mut r = Self::new();
        // cannot fail: a snapshot is not revision-checked
        let _ = r.apply(ev);
        r
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn objects(&self) -> impl Iterator<Item = &SceneObject> {
        self.objects.values()
    }

    pub fn object(&self, id: ObjectId) -> Option<&SceneObject> {
        self.objects.get(&id)
    }

    pub fn mesh(&self, id: MeshId) -> Option<&MeshInfo> {
        self.meshes.get(&id)
    }

    pub fn avatars(&self) -> impl Iterator<Item = &Avatar> {
        self.avatars.values()
    }

    pub fn slices(&self) -> impl Iterator<Item = &SliceInfo> {
        self.slices.values()
    }

    pub fn state(&self) -> SceneState {
        SceneState {
            revision: self.revision,
            objects: self.objects.values().cloned().collect(),
            meshes: self.meshes.values().cloned().collect(),
        }
    }

    /// Applies one event. State events must arrive in revision order: older
    /// ones are ignored (`Ok(false)`), a skipped revision is an error and the
    /// replica is left untouched so the missing events can be replayed.
    pub fn apply(&mut self, ev: &ServerEvent) -> Result<bool, ReplicaError> {
        if ev.kind.is_state_change() {
            if ev.rev <= self.revision {
                return Ok(false);
            }
            if ev.rev != self.revision + 1 {
                return Err(ReplicaError::Gap {
                    expected: self.revision + 1,
                    got: ev.rev,
                });
            }
        }
        match &ev.kind {
            EventKind::Welcome { client } => self.client = Some(*client),
            EventKind::SceneSnapshot {
                objects,
                meshes,
                avatars,
                stacks,
            } => {
                if ev.rev < self.revision {
                    return Ok(false);
                }
                self.revision = ev.rev;
                self.objects = objects.iter().map(|o| (o.id, o.clone())).collect();
                self.meshes = meshes.iter().map(|m| (m.id, m.clone())).collect();
                self.avatars = avatars.iter().map(|a| (a.client, *a)).collect();
                self.slices = stacks.iter().map(|s| (s.stack.clone(), s.clone())).collect();
            }
            EventKind::ObjectAdded { object, mesh } => {
                self.meshes.insert(mesh.id, mesh.clone());
                self.objects.insert(object.id, object.clone());
            }
            EventKind::TransformChanged { object, transform } => {
                self.object_mut(*object)?.transform = *transform;
            }
            EventKind::MaterialChanged { object, material } => {
                self.object_mut(*object)?.material = *material;
            }
            EventKind::GrabChanged { object, owner } => {
                self.object_mut(*object)?.grab_owner = *owner;
            }
            EventKind::AvatarMoved { avatar } => {
                self.avatars.insert(avatar.client, *avatar);
            }
            EventKind::AvatarLeft { client } => {
                self.avatars.remove(client);
            }
            EventKind::SliceChanged { slice } => {
                self.slices.insert(slice.stack.clone(), slice.clone());
            }
            EventKind::AssetCatalog { .. }
            | EventKind::QuantifyResult { .. }
            | EventKind::OpRejected { .. } => return Ok(false),
        }
        if ev.kind.is_state_change() {
            self.revision = ev.rev;
        }
        Ok(true)
    }

    fn object_mut(&mut self, id: ObjectId) -> Result<&mut SceneObject, ReplicaError> {
        self.objects.get_mut(&id).ok_or(ReplicaError::UnknownObject(id))
    }
}
