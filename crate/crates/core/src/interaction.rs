//! Manipulation primitives driven by tracked hand poses and pointer rays.
//!
//! Every function is a pure state update on the scene or on transforms, so the
//! same inputs replayed on any replica give bit-identical results.

use serde::{Deserialize, Serialize};

use crate::math::{Transform, Vec3};
use crate::mesh::{Material, MaterialPreset};
use crate::scene::{ClientId, ObjectId, Scene, SceneError};

/// Objects cannot be pulled closer than this to the ray origin.
pub const MIN_RAY_DISTANCE: f64 = 0.1;
pub const MIN_SCALE: f64 = 0.01;
pub const MAX_SCALE: f64 = 100.0;
/// Hands closer than this at gesture start give no usable ratio.
pub const MIN_HAND_SEPARATION: f64 = 0.01;
pub const DEFAULT_TELEPORT_RANGE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InteractionError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("{object} is held by {owner}")]
    AlreadyGrabbed { object: ObjectId, owner: ClientId },
    #[error("{client} does not hold {object}")]
    NotGrabOwner { object: ObjectId, client: ClientId },
    #[error("degenerate gesture: {0}")]
    DegenerateGesture(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, InteractionError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Normalizes `direction`; fails on zero or non-finite input.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self> {
        if !origin.is_finite() {
            return Err(InteractionError::InvalidInput("ray origin is not finite".into()));
        }
        let direction = direction
            .normalized()
            .ok_or_else(|| InteractionError::InvalidInput("ray direction is degenerate".into()))?;
        Ok(Self { origin, direction })
    }

    /// Re-validates a ray that arrived over the wire.
    pub fn normalized(self) -> Result<Self> {
        Self::new(self.origin, self.direction)
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// A held object: the object pose expressed in the grabbing hand's frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrabState {
    pub client: ClientId,
    pub object: ObjectId,
    pub offset: Transform,
}

/// Object pose relative to the hand, `invert(hand) ∘ object`.
pub fn grab_offset(hand: &Transform, object: &Transform) -> Transform {
    hand.invert().compose(object)
}

/// The object pose that keeps `offset` fixed relative to `hand`.
pub fn follow_hand(hand: &Transform, offset: &Transform) -> Transform {
    hand.compose(offset)
}

fn check_hand(hand: &Transform) -> Result<()> {
    if hand.is_valid() {
        Ok(())
    } else {
        Err(InteractionError::InvalidInput("hand pose is not a valid transform".into()))
    }
}

/// Takes ownership of `object` for `client`. Re-grabbing an object the
/// client already holds refreshes the offset.
pub fn grab_acquire(
    scene: &mut Scene,
    client: ClientId,
    object: ObjectId,
    hand: &Transform,
) -> Result<GrabState> {
    check_hand(hand)?;
    let obj = scene.object(object)?;
    if let Some(owner) = obj.grab_owner {
        if owner != client {
            return Err(InteractionError::AlreadyGrabbed { object, owner });
        }
    }
    let offset = grab_offset(hand, &obj.transform);
    scene.set_grab_owner(object, Some(client))?;
    Ok(GrabState {
        client,
        object,
        offset,
    })
}

/// Moves a held object to follow `hand`, returning its new pose.
pub fn grab_move(scene: &mut Scene, grab: &GrabState, hand: &Transform) -> Result<Transform> {
    check_hand(hand)?;
    require_owner(scene, grab.client, grab.object)?;
    let t = follow_hand(hand, &grab.offset);
    scene.set_transform(grab.object, t)?;
    Ok(t)
}

pub fn grab_release(scene: &mut Scene, client: ClientId, object: ObjectId) -> Result<()> {
    require_owner(scene, client, object)?;
    scene.set_grab_owner(object, None)?;
    Ok(())
}

/// Releases everything `client` holds, in object id order.
pub fn release_all(scene: &mut Scene, client: ClientId) -> Vec<ObjectId> {
    let held: Vec<ObjectId> = scene
        .objects()
        .filter(|o| o.grab_owner == Some(client))
        .map(|o| o.id)
        .collect();
    for &id in &held {
        scene.set_grab_owner(id, None).expect("object exists");
    }
    held
}

pub fn require_owner(scene: &Scene, client: ClientId, object: ObjectId) -> Result<()> {
    match scene.object(object)?.grab_owner {
        Some(owner) if owner == client => Ok(()),
        _ => Err(InteractionError::NotGrabOwner { object, client }),
    }
}

/// Slides `object` along the ray by `delta` (positive pushes away). The
/// result never ends up closer than [`MIN_RAY_DISTANCE`] to the ray origin
/// measured along the ray.
pub fn push_pull(object: &Transform, ray: &Ray, delta: f64) -> Result<Transform> {
    if !delta.is_finite() {
        return Err(InteractionError::InvalidInput(format!("delta {delta}")));
    }
    let ray = ray.normalized()?;
    let mut position = object.position + ray.direction * delta;
    let along = (position - ray.origin).dot(ray.direction);
    if along < MIN_RAY_DISTANCE {
        position += ray.direction * (MIN_RAY_DISTANCE - along);
    }
    Ok(Transform {
        position,
        ..*object
    })
}

/// Scales `object` by the ratio of current to initial hand separation,
/// clamped to [`MIN_SCALE`, `MAX_SCALE`]. `object` is the pose at gesture
/// start.
pub fn two_hand_resize(object: &Transform, d0: f64, d1: f64) -> Result<Transform> {
    if !(d0.is_finite() && d0 >= MIN_HAND_SEPARATION) {
        return Err(InteractionError::DegenerateGesture(format!(
            "initial hand separation {d0} below {MIN_HAND_SEPARATION}"
        )));
    }
    if !(d1.is_finite() && d1 > 0.0) {
        return Err(InteractionError::DegenerateGesture(format!(
            "hand separation {d1} must be positive"
        )));
    }
    Ok(Transform {
        scale: (object.scale * d1 / d0).clamp(MIN_SCALE, MAX_SCALE),
        ..*object
    })
}

/// Where a pointer ray meets the floor plane `y = 0`, if it points down and
/// the hit lies within `max_range` horizontally of the ray origin.
pub fn teleport_target(ray: &Ray, max_range: f64) -> Option<Vec3> {
    let ray = ray.normalized().ok()?;
    if ray.direction.y >= -1e-6 || ray.origin.y < 0.0 {
        return None;
    }
    let t = -ray.origin.y / ray.direction.y;
    let mut hit = ray.at(t);
    hit.y = 0.0;
    let dx = hit.x - ray.origin.x;
    let dz = hit.z - ray.origin.z;
    ((dx * dx + dz * dz).sqrt() <= max_range).then_some(hit)
}

/// The material after switching to `preset`. Without an explicit opacity the
/// preset's default is used (fully opaque, Glass capped).
pub fn choose_material(preset: MaterialPreset, opacity: Option<f64>) -> Material {
    Material::new(preset, opacity.unwrap_or(1.0))
}

pub fn set_material(
    scene: &mut Scene,
    object: ObjectId,
    preset: MaterialPreset,
    opacity: Option<f64>,
) -> Result<Material> {
    scene.object(object)?;
    let m = choose_material(preset, opacity);
    scene.set_material(object, m)?;
    Ok(m)
}

pub fn set_opacity(scene: &mut Scene, object: ObjectId, opacity: f64) -> Result<Material> {
    let m = scene.object(object)?.material.with_opacity(opacity);
    scene.set_material(object, m)?;
    Ok(m)
}
