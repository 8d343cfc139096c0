//! Authoritative scene state: objects, the mesh store and the revision
//! counter.
//!
//! Every successful mutating call bumps `revision` by exactly one. Meshes are
//! immutable content addressed by [`MeshId`]; storing one is not a scene
//! mutation on its own, it only becomes visible once an object references it.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::math::Transform;
use crate::mesh::{Material, Mesh};

macro_rules! id_type {
    ($name:ident, $prefix:literal) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(ObjectId, "obj#");
id_type!(MeshId, "mesh#");
id_type!(ClientId, "client#");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: ObjectId,
    pub name: String,
    pub transform: Transform,
    pub mesh: MeshId,
    /// Index into the mesh's parts when the object shows a single part.
    pub active_part: Option<usize>,
    pub material: Material,
    pub grab_owner: Option<ClientId>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("unknown mesh {0}")]
    UnknownMesh(MeshId),
    #[error("mesh {mesh} has no part {part}")]
    UnknownPart { mesh: MeshId, part: usize },
    #[error("invalid transform")]
    InvalidTransform,
}

#[derive(Debug, Clone, Default)]
pub struct Scene {
    objects: BTreeMap<ObjectId, SceneObject>,
    meshes: BTreeMap<MeshId, Arc<Mesh>>,
    revision: u64,
    next_object: u64,
    next_mesh: u64,
}

impl Scene {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn objects(&self) -> impl Iterator<Item = &SceneObject> {
        self.objects.values()
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn object(&self, id: ObjectId) -> Result<&SceneObject, SceneError> {
        self.objects.get(&id).ok_or(SceneError::UnknownObject(id))
    }

    pub fn mesh(&self, id: MeshId) -> Result<&Arc<Mesh>, SceneError> {
        self.meshes.get(&id).ok_or(SceneError::UnknownMesh(id))
    }

    pub fn meshes(&self) -> impl Iterator<Item = (MeshId, &Arc<Mesh>)> {
        self.meshes.iter().map(|(k, v)| (*k, v))
    }

    /// Stores mesh content and returns its id. Ids are allocated
    /// monotonically starting at 1.
    pub fn insert_mesh(&mut self, mesh: Mesh) -> MeshId {
        self.next_mesh += 1;
        let id = MeshId(self.next_mesh);
        self.meshes.insert(id, Arc::new(mesh));
        id
    }

    /// Adds an object referencing an existing mesh (and optionally one of its
    /// parts). Mutating: bumps the revision.
    pub fn add_object(
        &mut self,
        name: impl Into<String>,
        mesh: MeshId,
        active_part: Option<usize>,
        transform: Transform,
        material: Material,
    ) -> Result<&SceneObject, SceneError> {
        let m = self.mesh(mesh)?;
        if let Some(part) = active_part {
            if part >= m.parts.len() {
                return Err(SceneError::UnknownPart { mesh, part });
            }
        }
        if !transform.is_valid() {
            return Err(SceneError::InvalidTransform);
        }
        self.next_object += 1;
        let id = ObjectId(self.next_object);
        self.objects.insert(
            id,
            SceneObject {
                id,
                name: name.into(),
                transform,
                mesh,
                active_part,
                material,
                grab_owner: None,
            },
        );
        self.revision += 1;
        Ok(&self.objects[&id])
    }

    pub fn set_transform(&mut self, id: ObjectId, t: Transform) -> Result<(), SceneError> {
        if !t.is_valid() {
            return Err(SceneError::InvalidTransform);
        }
        self.object_mut(id)?.transform = t;
        self.revision += 1;
        Ok(())
    }

    pub fn set_material(&mut self, id: ObjectId, m: Material) -> Result<(), SceneError> {
        self.object_mut(id)?.material = m;
        self.revision += 1;
        Ok(())
    }

    pub fn set_grab_owner(
        &mut self,
        id: ObjectId,
        owner: Option<ClientId>,
    ) -> Result<(), SceneError> {
        self.object_mut(id)?.grab_owner = owner;
        self.revision += 1;
        Ok(())
    }

    fn object_mut(&mut self, id: ObjectId) -> Result<&mut SceneObject, SceneError> {
        self.objects.get_mut(&id).ok_or(SceneError::UnknownObject(id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;

    fn tri() -> Mesh {
        Mesh::from_triangles("t", vec![Vec3::ZERO, Vec3::X, Vec3::Y], vec![[0, 1, 2]])
    }

    #[test]
    fn revision_counts_successful_mutations() {
        let mut s = Scene::new();
        let m = s.insert_mesh(tri());
        assert_eq!(s.revision(), 0);
        let id = s
            .add_object("a", m, None, Transform::IDENTITY, Material::default())
            .unwrap()
            .id;
        assert_eq!(s.revision(), 1);
        s.set_transform(id, Transform::from_scale(2.0)).unwrap();
        s.set_grab_owner(id, Some(ClientId(7))).unwrap();
        assert_eq!(s.revision(), 3);

        // failures leave the revision alone
        assert!(s.set_transform(ObjectId(99), Transform::IDENTITY).is_err());
        assert!(s.set_transform(id, Transform::from_scale(-1.0)).is_err());
        assert!(s
            .add_object("b", MeshId(42), None, Transform::IDENTITY, Material::default())
            .is_err());
        assert!(s
            .add_object("b", m, Some(3), Transform::IDENTITY, Material::default())
            .is_err());
        assert_eq!(s.revision(), 3);
    }

    #[test]
    fn ids_are_unique_and_monotonic() {
        let mut s = Scene::new();
        let m = s.insert_mesh(tri());
        let ids: Vec<_> = (0..5)
            .map(|i| {
                s.add_object(format!("o{i}"), m, None, Transform::IDENTITY, Material::default())
                    .unwrap()
                    .id
            })
            .collect();
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }
}
