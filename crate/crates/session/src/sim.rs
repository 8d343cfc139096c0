//! Deterministic multi-client simulation of a session over a lossy link.
//!
//! Each simulated client issues random but well-formed ops against its view
//! of the scene. Broadcast messages are delivered in order yet may be
//! dropped; a replica that detects a revision gap catches up from the full
//! broadcast log, like a reconnecting client would.

use std::collections::{BTreeMap, VecDeque};

use ascribe_core::interaction::Ray;
use ascribe_core::mesh_io::{write_obj, write_stl_binary};
use ascribe_core::{ClientId, MaterialPreset, Mesh, MeshPart, ObjectId, Transform, UnitQuat, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assets::MemoryAssets;
use crate::protocol::{ClientOp, EventKind, OpKind, ServerEvent};
use crate::replica::{Replica, ReplicaError};
use crate::sequencer::{Payload, Session, SessionConfig};

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub clients: usize,
    pub ops: usize,
    pub seed: u64,
    /// Probability that a single message to a single client is lost.
    pub drop_rate: f64,
    /// Probability per op that the acting client disconnects and rejoins.
    pub churn: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            clients: 3,
            ops: 1000,
            seed: 0,
            drop_rate: 0.05,
            churn: 0.002,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub final_revision: u64,
    pub state_events: usize,
    pub rejected: usize,
    pub dropped: usize,
    pub replays: usize,
    pub rejoins: usize,
    /// Every replica's canonical JSON equals the authority's.
    pub converged: bool,
    /// Broadcast state-event revisions are exactly 1..=R in order.
    pub gap_free: bool,
    /// No object ever had its grab taken over by a second client.
    pub exclusive_grabs: bool,
}

impl SimReport {
    pub fn ok(&self) -> bool {
        self.converged && self.gap_free && self.exclusive_grabs
    }
}

/// A unit cube and a two-part slab pair, as mesh files.
pub fn demo_assets() -> MemoryAssets {
    let v = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
    let cube = Mesh::from_triangles(
        "cube",
        vec![
            v(0., 0., 0.),
            v(1., 0., 0.),
            v(1., 1., 0.),
            v(0., 1., 0.),
            v(0., 0., 1.),
            v(1., 0., 1.),
            v(1., 1., 1.),
            v(0., 1., 1.),
        ],
        vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ],
    );
    let mut pair = Mesh::from_triangles(
        "pair",
        vec![v(0., 0., 0.), v(1., 0., 0.), v(0., 1., 0.), v(2., 0., 1.), v(3., 0., 1.), v(2., 1., 1.)],
        vec![[0, 1, 2], [3, 4, 5]],
    );
    pair.parts = vec![MeshPart::new("left", 0, 1), MeshPart::new("right", 1, 2)];
    MemoryAssets::new()
        .with_mesh_file("cube.stl", write_stl_binary(&cube))
        .with_mesh_file("pair.obj", write_obj(&pair).into_bytes())
}

struct SimClient {
    seq: u64,
    replica: Replica,
    inbox: VecDeque<ServerEvent>,
    /// Whether the snapshot has arrived; until then events are buffered.
    joined: bool,
}

impl SimClient {
    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }
}

fn random_vec(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r))
}

fn random_pose(rng: &mut ChaCha8Rng) -> Transform {
    let q = UnitQuat::from_components(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    Transform::new(random_vec(rng, 2.0) + Vec3::new(0.0, 1.5, 0.0), q, 1.0)
}

fn random_ray(rng: &mut ChaCha8Rng) -> Ray {
    let mut d = random_vec(rng, 1.0);
    if d.norm() < 1e-3 {
        d = Vec3::new(0.0, -1.0, -1.0);
    }
    Ray::new(Vec3::new(0.0, 1.6, 0.0) + random_vec(rng, 0.5), d).expect("non-degenerate ray")
}

/// Picks an op that is valid from `client`'s point of view on the
/// authoritative scene. Contested grabs still get rejected, as in real use.
fn random_op(rng: &mut ChaCha8Rng, session: &Session<MemoryAssets>, client: ClientId) -> OpKind {
    let objects: Vec<ObjectId> = session.scene().objects().map(|o| o.id).collect();
    let held: Vec<ObjectId> = session
        .scene()
        .objects()
        .filter(|o| o.grab_owner == Some(client))
        .map(|o| o.id)
        .collect();
    let free: Vec<ObjectId> = session
        .scene()
        .objects()
        .filter(|o| o.grab_owner.is_none())
        .map(|o| o.id)
        .collect();

    let roll = rng.random_range(0..100);
    if objects.is_empty() || roll < 3 {
        let name = if rng.random_bool(0.5) { "cube.stl" } else { "pair.obj" };
        return OpKind::ImportAsset { name: name.into() };
    }
    let any = objects[rng.random_range(0..objects.len())];
    if !held.is_empty() && roll < 60 {
        let object = held[rng.random_range(0..held.len())];
        return match rng.random_range(0..10) {
            0..=4 => OpKind::GrabMove {
                object,
                hand: random_pose(rng),
            },
            5 | 6 => OpKind::PushPull {
                object,
                ray: random_ray(rng),
                delta: rng.random_range(-0.5..0.5),
            },
            7 | 8 => OpKind::Resize {
                object,
                d0: rng.random_range(0.1..0.6),
                d1: rng.random_range(0.1..0.6),
            },
            _ => OpKind::GrabRelease { object },
        };
    }
    match roll {
        3..=34 => OpKind::GrabAcquire {
            // mostly free objects, sometimes a contested one
            object: if !free.is_empty() && rng.random_bool(0.8) {
                free[rng.random_range(0..free.len())]
            } else {
                any
            },
            hand: random_pose(rng),
        },
        35..=44 => OpKind::SetMaterial {
            object: any,
            preset: [MaterialPreset::Default, MaterialPreset::Glass, MaterialPreset::Brick]
                [rng.random_range(0..3)],
            opacity: rng.random_bool(0.5).then(|| rng.random_range(0.0..1.0)),
        },
        45..=54 => OpKind::SetOpacity {
            object: any,
            opacity: rng.random_range(0.0..1.0),
        },
        55..=64 => OpKind::Teleport {
            ray: random_ray(rng),
            max_range: None,
        },
        _ => OpKind::AvatarPose {
            head: random_pose(rng),
            left: random_pose(rng),
            right: random_pose(rng),
        },
    }
}

struct Harness {
    rng: ChaCha8Rng,
    session: Session<MemoryAssets>,
    clients: BTreeMap<ClientId, SimClient>,
    /// Every broadcast state event, in sequencer order.
    log: Vec<ServerEvent>,
    drop_rate: f64,
    rejected: usize,
    dropped: usize,
    replays: usize,
}

impl Harness {
    fn join(&mut self) -> ClientId {
        let id = self.session.connect(true);
        let mut c = SimClient {
            seq: 0,
            replica: Replica::new(),
            inbox: VecDeque::new(),
            joined: false,
        };
        let seq = c.next_seq();
        self.clients.insert(id, c);
        self.send(
            id,
            ClientOp::new(
                seq,
                OpKind::Hello {
                    name: format!("sim{}", id.0),
                    token: None,
                },
            ),
        );
        id
    }

    fn send(&mut self, client: ClientId, op: ClientOp) {
        let out = self.session.handle(client, op);
        self.route(out);
    }

    fn route(&mut self, out: Vec<crate::sequencer::Outbound>) {
        for o in out {
            let Payload::Event(ev) = o.payload else { continue };
            let is_state = ev.kind.is_state_change();
            if is_state && o.to == crate::sequencer::Recipient::All {
                self.log.push(ev.clone());
            }
            if matches!(ev.kind, EventKind::OpRejected { .. }) {
                self.rejected += 1;
            }
            for id in self.session.recipients(o.to) {
                let Some(c) = self.clients.get_mut(&id) else { continue };
                // the snapshot and welcome travel on the reliable join path
                let lossy = !matches!(ev.kind, EventKind::SceneSnapshot { .. } | EventKind::Welcome { .. });
                if lossy && self.rng.random_bool(self.drop_rate) {
                    self.dropped += 1;
                    continue;
                }
                c.inbox.push_back(ev.clone());
            }
        }
    }

    /// Delivers up to `max` queued messages to one client.
    fn deliver(&mut self, id: ClientId, max: usize) {
        let log = &self.log;
        let c = self.clients.get_mut(&id).expect("sim client");
        for _ in 0..max {
            let Some(ev) = c.inbox.pop_front() else { break };
            if matches!(ev.kind, EventKind::SceneSnapshot { .. }) {
                c.joined = true;
            }
            if !c.joined {
                continue;
            }
            match c.replica.apply(&ev) {
                Ok(_) => {}
                Err(ReplicaError::Gap { .. }) => {
                    self.replays += 1;
                    catch_up(&mut c.replica, log, ev.rev);
                }
                Err(e) => panic!("replica of {id} diverged: {e}"),
            }
        }
    }

    fn flush(&mut self) {
        let ids: Vec<ClientId> = self.clients.keys().copied().collect();
        for id in ids {
            self.deliver(id, usize::MAX);
            let c = self.clients.get_mut(&id).expect("sim client");
            let last = self.log.last().map_or(0, |e| e.rev);
            if c.replica.revision() < last {
                self.replays += 1;
                catch_up(&mut c.replica, &self.log, last);
            }
        }
    }
}

/// Replays logged state events after the replica's revision up to `upto`.
fn catch_up(replica: &mut Replica, log: &[ServerEvent], upto: u64) {
    // log index i holds revision i + 1
    let from = replica.revision() as usize;
    for ev in &log[from..upto as usize] {
        replica.apply(ev).expect("log replay is gap-free");
    }
}

pub fn run(cfg: &SimConfig) -> SimReport {
    let mut h = Harness {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        session: Session::new(demo_assets(), SessionConfig::default()),
        clients: BTreeMap::new(),
        log: Vec::new(),
        drop_rate: cfg.drop_rate,
        rejected: 0,
        dropped: 0,
        replays: 0,
    };
    for _ in 0..cfg.clients.max(1) {
        h.join();
    }
    let mut rejoins = 0;

    for _ in 0..cfg.ops {
        let ids: Vec<ClientId> = h.clients.keys().copied().collect();
        let actor = ids[h.rng.random_range(0..ids.len())];
        if h.rng.random_bool(cfg.churn) {
            let out = h.session.disconnect(actor);
            h.clients.remove(&actor);
            h.route(out);
            h.join();
            rejoins += 1;
            continue;
        }
        let kind = random_op(&mut h.rng, &h.session, actor);
        let seq = h.clients.get_mut(&actor).expect("actor").next_seq();
        h.send(actor, ClientOp::new(seq, kind));

        let target = ids[h.rng.random_range(0..ids.len())];
        if h.clients.contains_key(&target) {
            let n = h.rng.random_range(0..4);
            h.deliver(target, n);
        }
    }
    h.flush();

    let authority = h.session.state().to_json();
    let converged = h
        .clients
        .values()
        .all(|c| c.joined && c.replica.state().to_json() == authority);
    let gap_free = h
        .log
        .iter()
        .enumerate()
        .all(|(i, ev)| ev.rev == i as u64 + 1)
        && h.log.last().map_or(0, |e| e.rev) == h.session.scene().revision();

    let mut owners: BTreeMap<ObjectId, ClientId> = BTreeMap::new();
    let mut exclusive_grabs = true;
    for ev in &h.log {
        if let EventKind::GrabChanged { object, owner } = &ev.kind {
            match owner {
                Some(new) => {
                    if owners.get(object).is_some_and(|cur| cur != new) {
                        exclusive_grabs = false;
                    }
                    owners.insert(*object, *new);
                }
                None => {
                    owners.remove(object);
                }
            }
        }
    }

    SimReport {
        final_revision: h.session.scene().revision(),
        state_events: h.log.len(),
        rejected: h.rejected,
        dropped: h.dropped,
        replays: h.replays,
        rejoins,
        converged,
        gap_free,
        exclusive_grabs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_converges() {
        let r = run(&SimConfig {
            clients: 3,
            ops: 500,
            seed: 1,
            ..SimConfig::default()
        });
        assert!(r.ok(), "{r:?}");
        assert!(r.final_revision > 100);
        assert!(r.dropped > 0 && r.replays > 0);
    }
}
