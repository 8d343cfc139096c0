//! Transport-independent session state machine for shared scenes.
//!
//! Clients send [`ClientOp`]s; a single [`Session`] orders and applies them
//! and answers with [`ServerEvent`]s addressed to one or all clients. A
//! [`Replica`] rebuilds the scene on the receiving end.

pub mod assets;
pub mod protocol;
pub mod replica;
pub mod sequencer;
pub mod sim;

pub use assets::{parse_mesh_asset, AssetEntry, AssetError, AssetKind, AssetSource, MemoryAssets};
pub use protocol::{
    decode_event, decode_op, encode_event, encode_op, mesh_frame, parse_mesh_frame, Avatar,
    ClientOp, EventKind, MeshInfo, OpKind, ProtocolError, QuantifyTarget, RejectReason,
    SceneState, ServerEvent,
};
pub use replica::{Replica, ReplicaError};
pub use sequencer::{Outbound, Payload, Recipient, Session, SessionConfig};
