//! Immutable mechanism description.
//!
//! Bodies carry independent poses; every joint, whether it belongs to a
//! spanning tree or closes a loop, is the same kind of object. Cycles in the
//! body graph are allowed and only counted for diagnostics.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::error::{KinematicsError, ModelError};
use crate::se3::{orthonormal_complement, InertiaBlock, Pose, Twist};

/// Either the fixed world frame or one of the model's bodies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BodyRef {
    World,
    Body(usize),
}

impl BodyRef {
    pub fn index(self) -> Option<usize> {
        match self {
            BodyRef::World => None,
            BodyRef::Body(i) => Some(i),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JointKind {
    Fixed,
    Revolute,
    Prismatic,
    Spherical,
}

impl JointKind {
    /// Number of kinematic (bilateral) constraint rows the joint contributes.
    pub fn bilateral_rows(self) -> usize {
        match self {
            JointKind::Fixed => 6,
            JointKind::Revolute | JointKind::Prismatic => 5,
            JointKind::Spherical => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            JointKind::Fixed => "fixed",
            JointKind::Revolute => "revolute",
            JointKind::Prismatic => "prismatic",
            JointKind::Spherical => "spherical",
        }
    }

    pub fn has_coordinate(self) -> bool {
        matches!(self, JointKind::Revolute | JointKind::Prismatic)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits {
    pub lower: f64,
    pub upper: f64,
}

/// Implicit PD drive on a joint coordinate. `target` and `target_velocity`
/// are the initial set-points; worlds may override them at runtime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Actuation {
    pub kp: f64,
    pub kd: f64,
    pub target: f64,
    pub target_velocity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub parent: BodyRef,
    pub child: usize,
    pub frame_in_parent: Pose,
    pub frame_in_child: Pose,
    /// Joint axis in the parent-side joint frame (revolute/prismatic only).
    pub axis: Vector3<f64>,
    pub limits: Option<JointLimits>,
    pub actuation: Option<Actuation>,
    pub armature: f64,
    pub damping: f64,
}

impl JointSpec {
    pub fn new(name: impl Into<String>, kind: JointKind, parent: BodyRef, child: usize) -> Self {
        Self {
            name: name.into(),
            kind,
            parent,
            child,
            frame_in_parent: Pose::identity(),
            frame_in_child: Pose::identity(),
            axis: Vector3::z(),
            limits: None,
            actuation: None,
            armature: 0.0,
            damping: 0.0,
        }
    }

    pub fn with_frames(mut self, in_parent: Pose, in_child: Pose) -> Self {
        self.frame_in_parent = in_parent;
        self.frame_in_child = in_child;
        self
    }

    pub fn with_axis(mut self, axis: Vector3<f64>) -> Self {
        self.axis = axis;
        self
    }

    pub fn with_limits(mut self, lower: f64, upper: f64) -> Self {
        self.limits = Some(JointLimits { lower, upper });
        self
    }

    pub fn with_actuation(mut self, kp: f64, kd: f64, target: f64) -> Self {
        self.actuation = Some(Actuation { kp, kd, target, target_velocity: 0.0 });
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Sphere { radius: f64 },
    /// World-fixed half-space boundary `{x : normal·x = offset}`; the free
    /// side is where `normal·x > offset`.
    Plane { normal: Vector3<f64>, offset: f64 },
    Box { half_extents: Vector3<f64> },
}

impl Shape {
    pub fn name(&self) -> &'static str {
        match self {
            Shape::Sphere { .. } => "sphere",
            Shape::Plane { .. } => "plane",
            Shape::Box { .. } => "box",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeomSpec {
    pub body: BodyRef,
    pub shape: Shape,
    pub friction: f64,
    pub restitution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodySpec {
    pub name: String,
    pub inertia: InertiaBlock,
    pub initial_pose: Pose,
    pub initial_twist: Twist,
}

/// Collision pair resolved at build time. `a` is the geom the contact normal
/// points toward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollisionPair {
    pub a: usize,
    pub b: usize,
}

/// Precomputed per-joint axis basis `(t1, t2, axis)`, right-handed, in the
/// parent-side joint frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisBasis {
    pub axis: Vector3<f64>,
    pub t1: Vector3<f64>,
    pub t2: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanismModel {
    pub name: String,
    pub bodies: Vec<BodySpec>,
    pub joints: Vec<JointSpec>,
    pub geoms: Vec<GeomSpec>,
    pub gravity: Vector3<f64>,
    joint_row_offsets: Vec<usize>,
    n_joint_rows: usize,
    n_loops: usize,
    axis_bases: Vec<AxisBasis>,
    collision_pairs: Vec<CollisionPair>,
}

/// World-frame placement of the two frames a joint connects.
#[derive(Debug, Clone, Copy)]
pub(crate) struct JointFrames {
    /// Parent-side joint frame origin and rotation.
    pub xa: Vector3<f64>,
    pub ra: Matrix3<f64>,
    pub qa: UnitQuaternion<f64>,
    /// Child-side joint frame origin and rotation.
    pub xb: Vector3<f64>,
    pub qb: UnitQuaternion<f64>,
    /// Body origins (world origin for WORLD).
    pub parent_origin: Vector3<f64>,
    pub child_origin: Vector3<f64>,
}

impl MechanismModel {
    pub fn new(
        name: impl Into<String>,
        bodies: Vec<BodySpec>,
        joints: Vec<JointSpec>,
        geoms: Vec<GeomSpec>,
        gravity: Vector3<f64>,
    ) -> Result<Self, ModelError> {
        let nb = bodies.len();
        for b in &bodies {
            check_pose(&b.name, &b.initial_pose)?;
        }
        let mut axis_bases = Vec::with_capacity(joints.len());
        for j in &joints {
            validate_joint(j, nb)?;
            let axis = if j.kind.has_coordinate() { j.axis } else { Vector3::z() };
            let (t1, t2) = orthonormal_complement(&axis);
            axis_bases.push(AxisBasis { axis, t1, t2 });
        }
        for (index, g) in geoms.iter().enumerate() {
            validate_geom(index, g, nb)?;
        }
        let collision_pairs = resolve_pairs(&geoms)?;

        let mut joint_row_offsets = Vec::with_capacity(joints.len());
        let mut n_joint_rows = 0;
        for j in &joints {
            joint_row_offsets.push(n_joint_rows);
            n_joint_rows += j.kind.bilateral_rows();
        }
        let n_loops = count_loops(nb, &joints);

        Ok(Self {
            name: name.into(),
            bodies,
            joints,
            geoms,
            gravity,
            joint_row_offsets,
            n_joint_rows,
            n_loops,
            axis_bases,
            collision_pairs,
        })
    }

    pub fn n_bodies(&self) -> usize {
        self.bodies.len()
    }

    /// Velocity degrees of freedom before constraints (6 per body).
    pub fn n_dofs(&self) -> usize {
        6 * self.bodies.len()
    }

    /// Total kinematic bilateral rows over all joints.
    pub fn n_joint_rows(&self) -> usize {
        self.n_joint_rows
    }

    pub fn joint_row_offset(&self, joint: usize) -> usize {
        self.joint_row_offsets[joint]
    }

    /// Independent cycles: joints − nodes + connected components, with the
    /// world counted as a node.
    pub fn n_loops(&self) -> usize {
        self.n_loops
    }

    pub fn axis_basis(&self, joint: usize) -> &AxisBasis {
        &self.axis_bases[joint]
    }

    pub fn collision_pairs(&self) -> &[CollisionPair] {
        &self.collision_pairs
    }

    pub fn inertias(&self) -> Vec<InertiaBlock> {
        self.bodies.iter().map(|b| b.inertia).collect()
    }

    pub fn initial_poses(&self) -> Vec<Pose> {
        self.bodies.iter().map(|b| b.initial_pose).collect()
    }

    pub fn initial_twists(&self) -> Vec<Twist> {
        self.bodies.iter().map(|b| b.initial_twist).collect()
    }

    pub fn body_index(&self, name: &str) -> Option<usize> {
        self.bodies.iter().position(|b| b.name == name)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn body_pose(poses: &[Pose], body: BodyRef) -> Pose {
        match body {
            BodyRef::World => Pose::identity(),
            BodyRef::Body(i) => poses[i],
        }
    }

    pub(crate) fn joint_frames(&self, joint: usize, poses: &[Pose]) -> JointFrames {
        let j = &self.joints[joint];
        let parent = Self::body_pose(poses, j.parent);
        let child = poses[j.child];
        let a = parent.compose(&j.frame_in_parent);
        let b = child.compose(&j.frame_in_child);
        JointFrames {
            xa: a.position,
            ra: a.rotation(),
            qa: a.orientation,
            xb: b.position,
            qb: b.orientation,
            parent_origin: parent.position,
            child_origin: child.position,
        }
    }
}

fn check_pose(owner: &str, pose: &Pose) -> Result<(), ModelError> {
    let q = pose.orientation.as_ref();
    if !pose.position.iter().all(|v| v.is_finite()) || !q.coords.iter().all(|v| v.is_finite()) {
        return Err(ModelError::InvalidPose { owner: owner.into(), reason: "non-finite component".into() });
    }
    if (q.norm() - 1.0).abs() > 1e-9 {
        return Err(ModelError::InvalidPose { owner: owner.into(), reason: "orientation is not a unit quaternion".into() });
    }
    Ok(())
}

fn validate_joint(j: &JointSpec, nb: usize) -> Result<(), ModelError> {
    if j.child >= nb {
        return Err(ModelError::InvalidBody { joint: j.name.clone(), body: format!("#{}", j.child) });
    }
    if let BodyRef::Body(p) = j.parent {
        if p >= nb {
            return Err(ModelError::InvalidBody { joint: j.name.clone(), body: format!("#{p}") });
        }
        if p == j.child {
            return Err(ModelError::SelfJoint { joint: j.name.clone() });
        }
    }
    check_pose(&j.name, &j.frame_in_parent)?;
    check_pose(&j.name, &j.frame_in_child)?;
    let unsupported = |feature| ModelError::UnsupportedJointFeature { joint: j.name.clone(), kind: j.kind.name(), feature };
    if j.kind.has_coordinate() {
        let norm = j.axis.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
            return Err(ModelError::NonUnitAxis { joint: j.name.clone(), norm });
        }
    } else {
        if j.limits.is_some() {
            return Err(unsupported("limits"));
        }
        if j.actuation.is_some() {
            return Err(unsupported("actuation"));
        }
        if j.armature != 0.0 {
            return Err(unsupported("armature"));
        }
        if j.damping != 0.0 {
            return Err(unsupported("damping"));
        }
    }
    if let Some(l) = j.limits {
        if !(l.lower < l.upper) {
            return Err(ModelError::InvalidLimits { joint: j.name.clone(), lower: l.lower, upper: l.upper });
        }
    }
    let nonneg = |what, value: f64| {
        if value >= 0.0 && value.is_finite() {
            Ok(())
        } else {
            Err(ModelError::NegativeParameter { joint: j.name.clone(), what, value })
        }
    };
    nonneg("armature", j.armature)?;
    nonneg("damping", j.damping)?;
    if let Some(a) = j.actuation {
        nonneg("kp", a.kp)?;
        nonneg("kd", a.kd)?;
    }
    Ok(())
}

fn validate_geom(index: usize, g: &GeomSpec, nb: usize) -> Result<(), ModelError> {
    let bad = |reason: &str| ModelError::InvalidGeom { index, reason: reason.into() };
    if let BodyRef::Body(b) = g.body {
        if b >= nb {
            return Err(bad("body index out of range"));
        }
    }
    if !(g.friction >= 0.0 && g.friction.is_finite()) {
        return Err(bad("friction must be non-negative"));
    }
    if !(0.0..=1.0).contains(&g.restitution) {
        return Err(bad("restitution must lie in [0, 1]"));
    }
    match g.shape {
        Shape::Sphere { radius } if !(radius > 0.0) => Err(bad("sphere radius must be positive")),
        Shape::Box { half_extents } if !half_extents.iter().all(|&h| h > 0.0) => {
            Err(bad("box half extents must be positive"))
        }
        Shape::Plane { normal, offset } => {
            if g.body != BodyRef::World {
                return Err(bad("planes must be attached to the world"));
            }
            if (normal.norm() - 1.0).abs() > 1e-9 || !offset.is_finite() {
                return Err(bad("plane normal must be a unit vector"));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn resolve_pairs(geoms: &[GeomSpec]) -> Result<Vec<CollisionPair>, ModelError> {
    let mut pairs = Vec::new();
    for i in 0..geoms.len() {
        for j in i + 1..geoms.len() {
            let (gi, gj) = (&geoms[i], &geoms[j]);
            if gi.body == gj.body {
                continue;
            }
            let pair = match (&gi.shape, &gj.shape) {
                (Shape::Sphere { .. }, Shape::Plane { .. }) | (Shape::Box { .. }, Shape::Plane { .. }) => {
                    CollisionPair { a: i, b: j }
                }
                (Shape::Plane { .. }, Shape::Sphere { .. }) | (Shape::Plane { .. }, Shape::Box { .. }) => {
                    CollisionPair { a: j, b: i }
                }
                (Shape::Sphere { .. }, Shape::Sphere { .. }) => CollisionPair { a: i, b: j },
                (sa, sb) => {
                    return Err(ModelError::UnsupportedPair { a: i, shape_a: sa.name(), b: j, shape_b: sb.name() })
                }
            };
            pairs.push(pair);
        }
    }
    Ok(pairs)
}

fn count_loops(nb: usize, joints: &[JointSpec]) -> usize {
    // node 0 is the world
    let mut parent: Vec<usize> = (0..=nb).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let node = |b: BodyRef| b.index().map_or(0, |i| i + 1);
    let mut components = nb + 1;
    for j in joints {
        let (a, b) = (find(&mut parent, node(j.parent)), find(&mut parent, j.child + 1));
        if a != b {
            parent[a] = b;
            components -= 1;
        }
    }
    joints.len() + components - (nb + 1)
}

/// Wrap an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Scalar coordinate of a revolute (signed angle about the axis) or
/// prismatic (signed displacement along the axis) joint.
pub fn joint_coordinate(model: &MechanismModel, joint: usize, poses: &[Pose]) -> Result<f64, KinematicsError> {
    let j = model.joints.get(joint).ok_or(KinematicsError::JointOutOfRange(joint))?;
    if poses.len() != model.n_bodies() {
        return Err(KinematicsError::PoseCount { got: poses.len(), expected: model.n_bodies() });
    }
    let basis = model.axis_basis(joint);
    let fr = model.joint_frames(joint, poses);
    match j.kind {
        JointKind::Revolute => {
            let u = fr.qa.inverse_transform_vector(&(fr.qb * basis.t1));
            Ok(basis.t2.dot(&u).atan2(basis.t1.dot(&u)))
        }
        JointKind::Prismatic => Ok(basis.axis.dot(&fr.qa.inverse_transform_vector(&(fr.xb - fr.xa)))),
        kind => Err(KinematicsError::NoScalarCoordinate { index: joint, kind: kind.name() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::log_quat;
    use std::f64::consts::PI;

    fn unit_body(name: &str, pose: Pose) -> BodySpec {
        BodySpec {
            name: name.into(),
            inertia: InertiaBlock::from_diagonal(1.0, Vector3::new(0.1, 0.1, 0.1)).unwrap(),
            initial_pose: pose,
            initial_twist: Twist::zero(),
        }
    }

    #[test]
    fn free_body_has_no_rows() {
        let m = MechanismModel::new("free", vec![unit_body("b", Pose::identity())], vec![], vec![], Vector3::zeros())
            .unwrap();
        assert_eq!(m.n_joint_rows(), 0);
        assert_eq!(m.n_dofs(), 6);
        assert_eq!(m.n_loops(), 0);
    }

    #[test]
    fn four_bar_counts() {
        let bodies = (0..3).map(|i| unit_body(&format!("l{i}"), Pose::identity())).collect();
        let joints = vec![
            JointSpec::new("j0", JointKind::Revolute, BodyRef::World, 0),
            JointSpec::new("j1", JointKind::Revolute, BodyRef::Body(0), 1),
            JointSpec::new("j2", JointKind::Revolute, BodyRef::Body(1), 2),
            JointSpec::new("j3", JointKind::Revolute, BodyRef::World, 2),
        ];
        let m = MechanismModel::new("fourbar", bodies, joints, vec![], Vector3::zeros()).unwrap();
        assert_eq!(m.n_joint_rows(), 20);
        assert_eq!(m.n_dofs(), 18);
        assert_eq!(m.n_loops(), 1);
        assert_eq!((0..4).map(|j| m.joint_row_offset(j)).collect::<Vec<_>>(), vec![0, 5, 10, 15]);
    }

    #[test]
    fn legged_graph_reports_six_loops() {
        // floating base plus two legs of 15 links each; three closing joints per leg
        let bodies: Vec<_> = (0..31).map(|i| unit_body(&format!("b{i}"), Pose::identity())).collect();
        let mut joints = Vec::new();
        for leg in 0..2 {
            let first = 1 + 15 * leg;
            joints.push(JointSpec::new(format!("hip{leg}"), JointKind::Revolute, BodyRef::Body(0), first));
            for k in 1..15 {
                joints.push(JointSpec::new(
                    format!("l{leg}_{k}"),
                    JointKind::Revolute,
                    BodyRef::Body(first + k - 1),
                    first + k,
                ));
            }
            for c in 0..3 {
                let a = first + 4 * c;
                joints.push(JointSpec::new(format!("close{leg}_{c}"), JointKind::Revolute, BodyRef::Body(a), a + 3));
            }
        }
        assert_eq!(joints.len(), 36);
        let m = MechanismModel::new("legs", bodies, joints, vec![], Vector3::zeros()).unwrap();
        assert_eq!(m.n_loops(), 6);
    }

    #[test]
    fn validation_errors_are_distinct() {
        let bodies = || vec![unit_body("a", Pose::identity()), unit_body("b", Pose::identity())];
        let build = |j: JointSpec| MechanismModel::new("t", bodies(), vec![j], vec![], Vector3::zeros());

        assert!(matches!(
            build(JointSpec::new("x", JointKind::Revolute, BodyRef::World, 5)),
            Err(ModelError::InvalidBody { .. })
        ));
        assert!(matches!(
            build(JointSpec::new("x", JointKind::Revolute, BodyRef::Body(1), 1)),
            Err(ModelError::SelfJoint { .. })
        ));
        assert!(matches!(
            build(JointSpec::new("x", JointKind::Revolute, BodyRef::World, 0).with_axis(Vector3::new(1.0, 1.0, 0.0))),
            Err(ModelError::NonUnitAxis { .. })
        ));
        assert!(matches!(
            build(JointSpec::new("x", JointKind::Spherical, BodyRef::World, 0).with_limits(-1.0, 1.0)),
            Err(ModelError::UnsupportedJointFeature { feature: "limits", .. })
        ));
        assert!(matches!(
            build(JointSpec::new("x", JointKind::Fixed, BodyRef::World, 0).with_actuation(1.0, 1.0, 0.0)),
            Err(ModelError::UnsupportedJointFeature { feature: "actuation", .. })
        ));
        assert!(matches!(
            build(JointSpec::new("x", JointKind::Revolute, BodyRef::World, 0).with_limits(1.0, -1.0)),
            Err(ModelError::InvalidLimits { .. })
        ));
    }

    #[test]
    fn unsupported_pair_rejected_at_build() {
        let bodies = vec![unit_body("a", Pose::identity()), unit_body("b", Pose::identity())];
        let geoms = vec![
            GeomSpec { body: BodyRef::Body(0), shape: Shape::Box { half_extents: Vector3::repeat(0.1) }, friction: 0.5, restitution: 0.0 },
            GeomSpec { body: BodyRef::Body(1), shape: Shape::Sphere { radius: 0.1 }, friction: 0.5, restitution: 0.0 },
        ];
        let err = MechanismModel::new("t", bodies, vec![], geoms, Vector3::zeros()).unwrap_err();
        assert!(matches!(err, ModelError::UnsupportedPair { a: 0, b: 1, .. }));
    }

    fn hinge_model(kind: JointKind) -> MechanismModel {
        let parent_frame = Pose::new(
            Vector3::new(0.1, 0.2, 0.3),
            UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 0.4),
        );
        let child_frame = Pose::new(Vector3::new(-0.2, 0.0, 0.1), UnitQuaternion::from_axis_angle(&Vector3::y_axis(), -0.3));
        let axis = Vector3::new(0.3, -0.5, 0.8).normalize();
        MechanismModel::new(
            "hinge",
            vec![unit_body("p", Pose::identity()), unit_body("c", Pose::identity())],
            vec![JointSpec::new("h", kind, BodyRef::Body(0), 1).with_frames(parent_frame, child_frame).with_axis(axis)],
            vec![],
            Vector3::zeros(),
        )
        .unwrap()
    }

    /// Child pose that places the child joint frame at `rel` relative to the parent joint frame.
    fn place_child(model: &MechanismModel, parent: Pose, rel: Pose) -> Pose {
        let j = &model.joints[0];
        parent.compose(&j.frame_in_parent).compose(&rel).compose(&j.frame_in_child.inverse())
    }

    #[test]
    fn coordinate_zero_and_thirty_degrees() {
        let m = hinge_model(JointKind::Revolute);
        let parent = Pose::new(Vector3::new(1.0, -2.0, 0.5), UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3));
        let axis = nalgebra::Unit::new_normalize(m.joints[0].axis);
        let aligned = [parent, place_child(&m, parent, Pose::identity())];
        assert!(joint_coordinate(&m, 0, &aligned).unwrap().abs() < 1e-12);
        let turned = [parent, place_child(&m, parent, Pose::new(Vector3::zeros(), UnitQuaternion::from_axis_angle(&axis, PI / 6.0)))];
        assert!((joint_coordinate(&m, 0, &turned).unwrap() - PI / 6.0).abs() < 1e-12);
    }

    #[test]
    fn coordinate_matches_matrix_log() {
        let m = hinge_model(JointKind::Revolute);
        let axis = nalgebra::Unit::new_normalize(m.joints[0].axis);
        let parent = Pose::new(Vector3::new(0.3, 0.1, -0.7), UnitQuaternion::from_euler_angles(-0.5, 0.9, 2.0));
        for k in 0..25 {
            let angle = -3.0 + 0.24 * k as f64;
            let rel = UnitQuaternion::from_axis_angle(&axis, angle);
            let poses = [parent, place_child(&m, parent, Pose::new(Vector3::zeros(), rel))];
            // recover the relative rotation from the frames and take its log
            let fr = m.joint_frames(0, &poses);
            let log = log_quat(&(fr.qa.inverse() * fr.qb));
            let oracle = log.dot(&axis);
            let q = joint_coordinate(&m, 0, &poses).unwrap();
            assert!((wrap_angle(q - oracle)).abs() < 1e-12, "angle {angle}: {q} vs {oracle}");
        }
    }

    #[test]
    fn prismatic_coordinate_is_axial_displacement() {
        let m = hinge_model(JointKind::Prismatic);
        let parent = Pose::new(Vector3::new(0.3, 0.1, -0.7), UnitQuaternion::from_euler_angles(-0.5, 0.9, 2.0));
        let poses = [parent, place_child(&m, parent, Pose::from_translation(m.joints[0].axis * 0.37))];
        assert!((joint_coordinate(&m, 0, &poses).unwrap() - 0.37).abs() < 1e-12);
    }

    #[test]
    fn coordinate_rejects_wrong_kind() {
        let m = hinge_model(JointKind::Spherical);
        let poses = m.initial_poses();
        assert!(matches!(joint_coordinate(&m, 0, &poses), Err(KinematicsError::NoScalarCoordinate { .. })));
        assert!(matches!(joint_coordinate(&m, 3, &poses), Err(KinematicsError::JointOutOfRange(3))));
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }
}
