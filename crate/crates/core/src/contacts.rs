//! Analytic narrow phase for the supported shape pairs and the warm-start
//! cache that carries contact reactions from one step to the next.

use nalgebra::Vector3;

use crate::model::{BodyRef, MechanismModel, Shape};
use crate::se3::{orthonormal_complement, Pose};

pub const DEFAULT_MATCH_TOLERANCE: f64 = 1e-3;

/// A single contact. The normal points from `geom_b` toward `geom_a`, so a
/// positive normal impulse pushes `a` away from `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPoint {
    pub geom_a: usize,
    pub geom_b: usize,
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
    /// Penetration depth; negative values are separation gaps inside the margin.
    pub depth: f64,
    pub friction: f64,
    pub restitution: f64,
    /// Index of the box corner for box contacts, 0 otherwise.
    pub feature: u8,
}

impl ContactPoint {
    /// Tangent directions `(t1, t2)` of the contact frame `(n, t1, t2)`.
    pub fn tangents(&self) -> (Vector3<f64>, Vector3<f64>) {
        orthonormal_complement(&self.normal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CachedReaction {
    pub geom_a: usize,
    pub geom_b: usize,
    pub position: Vector3<f64>,
    /// Impulse in the contact frame (normal, t1, t2).
    pub impulse: Vector3<f64>,
    /// Converged dual variable (constraint-space velocity), same frame.
    pub dual: Vector3<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReactionCache {
    pub entries: Vec<CachedReaction>,
}

impl ReactionCache {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Combined pair friction `√(μa·μb)`.
pub fn combine_friction(a: f64, b: f64) -> f64 {
    (a * b).sqrt()
}

pub fn combine_restitution(a: f64, b: f64) -> f64 {
    a.max(b)
}

/// Generate all contacts with `depth > −margin`, ordered by collision pair and
/// then by box corner index.
pub fn collide(model: &MechanismModel, poses: &[Pose], margin: f64) -> Vec<ContactPoint> {
    let mut out = Vec::new();
    for pair in model.collision_pairs() {
        let (ga, gb) = (&model.geoms[pair.a], &model.geoms[pair.b]);
        let pa = MechanismModel::body_pose(poses, ga.body);
        let pb = MechanismModel::body_pose(poses, gb.body);
        let friction = combine_friction(ga.friction, gb.friction);
        let restitution = combine_restitution(ga.restitution, gb.restitution);
        let contact = |position, normal, depth, feature| ContactPoint {
            geom_a: pair.a,
            geom_b: pair.b,
            position,
            normal,
            depth,
            friction,
            restitution,
            feature,
        };
        match (ga.shape, gb.shape) {
            (Shape::Sphere { radius }, Shape::Plane { normal, offset }) => {
                let c = pa.position;
                let depth = radius - (normal.dot(&c) - offset);
                if depth > -margin {
                    out.push(contact(c - normal * radius, normal, depth, 0));
                }
            }
            (Shape::Sphere { radius: ra }, Shape::Sphere { radius: rb }) => {
                let d = pa.position - pb.position;
                let dist = d.norm();
                let depth = ra + rb - dist;
                if depth > -margin {
                    let n = if dist > 1e-12 { d / dist } else { Vector3::z() };
                    let on_a = pa.position - n * ra;
                    let on_b = pb.position + n * rb;
                    out.push(contact((on_a + on_b) * 0.5, n, depth, 0));
                }
            }
            (Shape::Box { half_extents }, Shape::Plane { normal, offset }) => {
                box_plane(&pa, &half_extents, &normal, offset, margin, |corner, p, depth| {
                    out.push(contact(p, normal, depth, corner));
                });
            }
            // rejected when the model was built
            _ => unreachable!("unsupported collision pair survived model validation"),
        }
    }
    out
}

fn box_plane(
    pose: &Pose,
    half: &Vector3<f64>,
    normal: &Vector3<f64>,
    offset: f64,
    margin: f64,
    mut emit: impl FnMut(u8, Vector3<f64>, f64),
) {
    let mut candidates: Vec<(u8, Vector3<f64>, f64)> = (0u8..8)
        .filter_map(|k| {
            let sign = |bit: u8| if k & bit != 0 { 1.0 } else { -1.0 };
            let local = Vector3::new(sign(1) * half.x, sign(2) * half.y, sign(4) * half.z);
            let p = pose.transform_point(&local);
            let depth = offset - normal.dot(&p);
            (depth > -margin).then_some((k, p, depth))
        })
        .collect();
    if candidates.len() > 4 {
        // keep the four deepest corners; stable sort keeps index order on ties
        candidates.sort_by(|a, b| b.2.total_cmp(&a.2));
        candidates.truncate(4);
        candidates.sort_by_key(|c| c.0);
    }
    for (k, p, depth) in candidates {
        emit(k, p, depth);
    }
}

/// For each new contact, the index of the cached reaction it inherits.
///
/// Candidates must share the geometry pair and lie within `tolerance` of the
/// cached position. Assignment is greedy over all candidate pairs in order of
/// increasing distance, so every cache entry is used at most once.
pub fn match_warmstart(cache: &ReactionCache, contacts: &[ContactPoint], tolerance: f64) -> Vec<Option<usize>> {
    let mut candidates = Vec::new();
    for (ci, c) in contacts.iter().enumerate() {
        for (ei, e) in cache.entries.iter().enumerate() {
            if e.geom_a == c.geom_a && e.geom_b == c.geom_b {
                let dist = (e.position - c.position).norm();
                if dist <= tolerance {
                    candidates.push((dist, ci, ei));
                }
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assigned = vec![None; contacts.len()];
    let mut used = vec![false; cache.entries.len()];
    for (_, ci, ei) in candidates {
        if assigned[ci].is_none() && !used[ei] {
            assigned[ci] = Some(ei);
            used[ei] = true;
        }
    }
    assigned
}

/// Initial contact-frame impulses for `contacts`; unmatched contacts start at zero.
pub fn warmstart_impulses(cache: &ReactionCache, contacts: &[ContactPoint], tolerance: f64) -> Vec<Vector3<f64>> {
    match_warmstart(cache, contacts, tolerance)
        .into_iter()
        .map(|m| m.map_or_else(Vector3::zeros, |i| cache.entries[i].impulse))
        .collect()
}

/// Bodies the two sides of a contact belong to.
pub fn contact_bodies(model: &MechanismModel, c: &ContactPoint) -> (BodyRef, BodyRef) {
    (model.geoms[c.geom_a].body, model.geoms[c.geom_b].body)
}
