use thiserror::Error;

/// Failures detected while turning a scene into a [`MechanismModel`](crate::model::MechanismModel).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid inertia: {0}")]
    InvalidInertia(String),
    #[error("joint `{joint}`: invalid body reference `{body}`")]
    InvalidBody { joint: String, body: String },
    #[error("joint `{joint}`: parent and child are the same body")]
    SelfJoint { joint: String },
    #[error("joint `{joint}`: axis must be a unit vector (norm {norm})")]
    NonUnitAxis { joint: String, norm: f64 },
    #[error("joint `{joint}`: {kind} joints do not support {feature}")]
    UnsupportedJointFeature { joint: String, kind: &'static str, feature: &'static str },
    #[error("joint `{joint}`: lower limit {lower} is not below upper limit {upper}")]
    InvalidLimits { joint: String, lower: f64, upper: f64 },
    #[error("joint `{joint}`: {what} must be non-negative, got {value}")]
    NegativeParameter { joint: String, what: &'static str, value: f64 },
    #[error("geom {index}: {reason}")]
    InvalidGeom { index: usize, reason: String },
    #[error("unsupported collision pair: geom {a} ({shape_a}) against geom {b} ({shape_b})")]
    UnsupportedPair { a: usize, shape_a: &'static str, b: usize, shape_b: &'static str },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("invalid pose for `{owner}`: {reason}")]
    InvalidPose { owner: String, reason: String },
}

/// Errors raised by kinematic queries.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("joint index {0} out of range")]
    JointOutOfRange(usize),
    #[error("joint {index} is {kind}; only revolute and prismatic joints have a scalar coordinate")]
    NoScalarCoordinate { index: usize, kind: &'static str },
    #[error("body pose count {got} does not match model body count {expected}")]
    PoseCount { got: usize, expected: usize },
}

/// Numerical faults in the linear-solve backends.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("Cholesky factorization failed at pivot {pivot} (value {value:e}); matrix is not positive definite")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Failures while reading a scene document.
#[derive(Debug, Error)]
pub enum SceneError {
    #[error("scene parse error: {0}")]
    Parse(serde_json::Error),
    #[error("scene `{scene}`: unknown body `{name}`")]
    UnknownBody { scene: String, name: String },
    #[error("scene `{scene}`: {field} of `{owner}` is not a unit quaternion (norm {norm})")]
    BadQuaternion { scene: String, owner: String, field: &'static str, norm: f64 },
    #[error("unknown bundled scene `{0}`")]
    UnknownBundled(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

// Not a `#[source]`: the message already carries the line and column, and
// error reporters that walk the chain would print them twice.
impl From<serde_json::Error> for SceneError {
    fn from(e: serde_json::Error) -> Self {
        SceneError::Parse(e)
    }
}
