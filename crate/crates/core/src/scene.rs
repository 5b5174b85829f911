//! JSON scene documents.
//!
//! Quaternions are written scalar-first, `[w, x, y, z]` (Hamilton
//! convention). Body positions are centres of mass; inertia is given about
//! the centre of mass in the body frame, either as a diagonal `[Ixx, Iyy,
//! Izz]` or a full row-major 3×3 matrix. Bodies and joints are referenced by
//! name; `"world"` names the fixed frame.
//!
//! ```json
//! {
//!   "name": "pendulum",
//!   "gravity": [0, 0, -9.81],
//!   "bodies": [{ "name": "bob", "mass": 1, "inertia": [0.004, 0.004, 0.004],
//!                "position": [0, 0, -1] }],
//!   "joints": [{ "name": "hinge", "type": "revolute", "parent": "world", "child": "bob",
//!                "frame_in_child": { "position": [0, 0, 1] }, "axis": [0, 1, 0],
//!                "limits": [-1.5, 1.5],
//!                "actuation": { "kp": 10, "kd": 1, "target": 0 } }],
//!   "geoms": [{ "body": "world", "shape": { "plane": { "normal": [0, 0, 1] } } }],
//!   "step": { "dt": 0.004, "integrator": "moreau", "backend": "dense" }
//! }
//! ```

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::delassus::BackendChoice;
use crate::error::SceneError;
use crate::model::{Actuation, BodyRef, BodySpec, GeomSpec, JointKind, JointLimits, JointSpec, MechanismModel, Shape};
use crate::se3::{InertiaBlock, Pose, Twist};
use crate::stepper::{Integrator, StepConfig};

const IDENTITY_QUAT: [f64; 4] = [1.0, 0.0, 0.0, 0.0];

fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}

fn identity_quat() -> [f64; 4] {
    IDENTITY_QUAT
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn default_friction() -> f64 {
    0.5
}

fn is_zero3(v: &[f64; 3]) -> bool {
    *v == [0.0; 3]
}

fn is_identity(q: &[f64; 4]) -> bool {
    *q == IDENTITY_QUAT
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDescription {
    pub name: String,
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    #[serde(default)]
    pub bodies: Vec<BodyDescription>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joints: Vec<JointDescription>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub geoms: Vec<GeomDescription>,
    #[serde(default, skip_serializing_if = "StepOverrides::is_empty")]
    pub step: StepOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InertiaDescription {
    Diagonal([f64; 3]),
    Full([[f64; 3]; 3]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyDescription {
    pub name: String,
    pub mass: f64,
    pub inertia: InertiaDescription,
    #[serde(default, skip_serializing_if = "is_zero3")]
    pub position: [f64; 3],
    #[serde(default = "identity_quat", skip_serializing_if = "is_identity")]
    pub orientation: [f64; 4],
    #[serde(default, skip_serializing_if = "is_zero3")]
    pub linear_velocity: [f64; 3],
    #[serde(default, skip_serializing_if = "is_zero3")]
    pub angular_velocity: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameDescription {
    #[serde(default)]
    pub position: [f64; 3],
    #[serde(default = "identity_quat")]
    pub orientation: [f64; 4],
}

impl Default for FrameDescription {
    fn default() -> Self {
        Self { position: [0.0; 3], orientation: IDENTITY_QUAT }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointType {
    Fixed,
    Revolute,
    Prismatic,
    Spherical,
}

impl From<JointType> for JointKind {
    fn from(t: JointType) -> Self {
        match t {
            JointType::Fixed => JointKind::Fixed,
            JointType::Revolute => JointKind::Revolute,
            JointType::Prismatic => JointKind::Prismatic,
            JointType::Spherical => JointKind::Spherical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuationDescription {
    pub kp: f64,
    pub kd: f64,
    #[serde(default)]
    pub target: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub target_velocity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointDescription {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: JointType,
    pub parent: String,
    pub child: String,
    #[serde(default)]
    pub frame_in_parent: FrameDescription,
    #[serde(default)]
    pub frame_in_child: FrameDescription,
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actuation: Option<ActuationDescription>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub armature: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub damping: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ShapeDescription {
    Sphere {
        radius: f64,
    },
    Plane {
        normal: [f64; 3],
        #[serde(default)]
        offset: f64,
    },
    Box {
        half_extents: [f64; 3],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeomDescription {
    pub body: String,
    pub shape: ShapeDescription,
    #[serde(default = "default_friction")]
    pub friction: f64,
    #[serde(default)]
    pub restitution: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegratorName {
    Euler,
    Moreau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendName {
    Dense,
    Sparse,
    Auto,
}

impl From<BackendName> for BackendChoice {
    fn from(b: BackendName) -> Self {
        match b {
            BackendName::Dense => BackendChoice::Dense,
            BackendName::Sparse => BackendChoice::MatrixFree,
            BackendName::Auto => BackendChoice::Auto,
        }
    }
}

impl From<IntegratorName> for Integrator {
    fn from(i: IntegratorName) -> Self {
        match i {
            IntegratorName::Euler => Integrator::SemiImplicitEuler,
            IntegratorName::Moreau => Integrator::MoreauJean,
        }
    }
}

/// Per-scene solver settings; anything left out keeps the library default.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cr_iters: Option<usize>,
    /// Run exactly this many PADMM iterations every step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impact_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<bool>,
}

impl StepOverrides {
    pub fn is_empty(&self) -> bool {
        *self == StepOverrides::default()
    }

    pub fn apply(&self, cfg: &mut StepConfig) {
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(v) = self.integrator {
            cfg.integrator = v.into();
        }
        if let Some(v) = self.backend {
            cfg.backend = v.into();
        }
        if let Some(v) = self.beta {
            cfg.constraints.baumgarte = v;
        }
        if let Some(v) = self.rho {
            cfg.solver.rho = v;
        }
        if let Some(v) = self.eta {
            cfg.solver.eta = v;
        }
        if let Some(v) = self.eps {
            cfg.solver.tolerance = v;
        }
        if let Some(v) = self.max_iters {
            cfg.solver.max_iterations = v;
        }
        if let Some(v) = self.cr_iters {
            cfg.cr_iterations = v;
        }
        if let Some(v) = self.fixed_iters {
            cfg.solver.max_iterations = v;
            cfg.solver.fixed_iterations = true;
        }
        if let Some(v) = self.margin {
            cfg.contact_margin = v;
        }
        if let Some(v) = self.impact_threshold {
            cfg.constraints.impact_threshold = v;
        }
        if let Some(v) = self.warm_start {
            cfg.warm_start = v;
        }
    }
}

impl SceneDescription {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialization cannot fail")
    }

    /// Library defaults with this scene's overrides applied.
    pub fn step_config(&self) -> StepConfig {
        let mut cfg = StepConfig::default();
        self.step.apply(&mut cfg);
        cfg
    }
}

fn quat(scene: &str, owner: &str, field: &'static str, q: [f64; 4]) -> Result<UnitQuaternion<f64>, SceneError> {
    let raw = Quaternion::new(q[0], q[1], q[2], q[3]);
    let norm = raw.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
        return Err(SceneError::BadQuaternion { scene: scene.to_string(), owner: owner.to_string(), field, norm });
    }
    Ok(UnitQuaternion::from_quaternion(raw))
}

fn frame(scene: &str, owner: &str, field: &'static str, f: &FrameDescription) -> Result<Pose, SceneError> {
    Ok(Pose::new(Vector3::from(f.position), quat(scene, owner, field, f.orientation)?))
}

/// Resolve names and validate; the result is deterministic in the input.
pub fn build_model(scene: &SceneDescription) -> Result<MechanismModel, SceneError> {
    let name = scene.name.as_str();
    let mut bodies = Vec::with_capacity(scene.bodies.len());
    for b in &scene.bodies {
        let inertia = match &b.inertia {
            InertiaDescription::Diagonal(d) => InertiaBlock::from_diagonal(b.mass, Vector3::from(*d))?,
            InertiaDescription::Full(m) => InertiaBlock::new(b.mass, Matrix3::from_fn(|r, c| m[r][c]))?,
        };
        bodies.push(BodySpec {
            name: b.name.clone(),
            inertia,
            initial_pose: Pose::new(Vector3::from(b.position), quat(name, &b.name, "orientation", b.orientation)?),
            initial_twist: Twist::new(Vector3::from(b.linear_velocity), Vector3::from(b.angular_velocity)),
        });
    }
    let lookup = |body: &str| -> Result<BodyRef, SceneError> {
        if body == "world" {
            return Ok(BodyRef::World);
        }
        scene
            .bodies
            .iter()
            .position(|b| b.name == body)
            .map(BodyRef::Body)
            .ok_or_else(|| SceneError::UnknownBody { scene: name.to_string(), name: body.to_string() })
    };

    let mut joints = Vec::with_capacity(scene.joints.len());
    for j in &scene.joints {
        let child = match lookup(&j.child)? {
            BodyRef::Body(i) => i,
            BodyRef::World => return Err(SceneError::UnknownBody { scene: name.to_string(), name: j.child.clone() }),
        };
        let mut spec = JointSpec::new(j.name.clone(), j.kind.into(), lookup(&j.parent)?, child)
            .with_frames(
                frame(name, &j.name, "frame_in_parent", &j.frame_in_parent)?,
                frame(name, &j.name, "frame_in_child", &j.frame_in_child)?,
            )
            .with_axis(Vector3::from(j.axis));
        spec.limits = j.limits.map(|[lower, upper]| JointLimits { lower, upper });
        spec.actuation =
            j.actuation.map(|a| Actuation { kp: a.kp, kd: a.kd, target: a.target, target_velocity: a.target_velocity });
        spec.armature = j.armature;
        spec.damping = j.damping;
        joints.push(spec);
    }

    let mut geoms = Vec::with_capacity(scene.geoms.len());
    for g in &scene.geoms {
        let shape = match g.shape {
            ShapeDescription::Sphere { radius } => Shape::Sphere { radius },
            ShapeDescription::Plane { normal, offset } => Shape::Plane { normal: Vector3::from(normal), offset },
            ShapeDescription::Box { half_extents } => Shape::Box { half_extents: Vector3::from(half_extents) },
        };
        geoms.push(GeomSpec { body: lookup(&g.body)?, shape, friction: g.friction, restitution: g.restitution });
    }

    Ok(MechanismModel::new(name, bodies, joints, geoms, Vector3::from(scene.gravity))?)
}

/// Scenes shipped with the library, by name.
pub const BUNDLED_SCENES: &[(&str, &str)] = &[
    ("freefall", include_str!("../scenes/freefall.json")),
    ("pendulum", include_str!("../scenes/pendulum.json")),
    ("sphere-on-plane", include_str!("../scenes/sphere-on-plane.json")),
    ("inclined-box", include_str!("../scenes/inclined-box.json")),
    ("fourbar", include_str!("../scenes/fourbar.json")),
    ("double-fourbar", include_str!("../scenes/double-fourbar.json")),
    ("serial-chain-10", include_str!("../scenes/serial-chain-10.json")),
];

pub fn bundled_scene(name: &str) -> Result<SceneDescription, SceneError> {
    let (_, text) =
        BUNDLED_SCENES.iter().find(|(n, _)| *n == name).ok_or_else(|| SceneError::UnknownBundled(name.to_string()))?;
    SceneDescription::from_json(text)
}

pub fn bundled_model(name: &str) -> Result<MechanismModel, SceneError> {
    build_model(&bundled_scene(name)?)
}
