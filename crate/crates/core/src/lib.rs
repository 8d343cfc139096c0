//! Core data model and numerics for a collaborative scientific-scene
//! engine: geometry and scene state, OBJ/STL mesh I/O, voxel volumes built
//! from image stacks, segmentation into volumes of interest, isosurface
//! extraction, mesh smoothing, quantification, and the object manipulation
//! mechanics used by the session server.

pub mod interaction;
pub mod math;
pub mod mesh;
pub mod mesh_io;
pub mod quantify;
pub mod scene;
pub mod segmentation;
pub mod volume;

pub use math::{Transform, UnitQuat, Vec3};
pub use mesh::{Material, MaterialPreset, Mesh, MeshPart};
pub use scene::{ClientId, MeshId, ObjectId, Scene, SceneObject};
