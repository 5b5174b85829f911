//! Rigid-body primitives: poses, twists, and the per-body blocks of the
//! block-diagonal mass matrix.
//!
//! Conventions used throughout the crate:
//!
//! * Quaternions are Hamilton quaternions. Wherever they are written out as
//!   four numbers (scene files, trajectory output) the scalar comes first:
//!   `[w, x, y, z]`. The orientation maps body coordinates to world
//!   coordinates.
//! * Twists are expressed in the world frame: `linear` is the velocity of the
//!   body origin (its centre of mass), `angular` is the world-frame angular
//!   velocity.
//! * Spatial 6-vectors are ordered linear part first, angular part second.

use nalgebra::{Matrix3, Matrix6, Quaternion, UnitQuaternion, Vector3, Vector6};

use crate::error::ModelError;

/// Below this rotation angle the exponential map switches to its Taylor expansion.
const SMALL_ANGLE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self { position: Vector3::zeros(), orientation: UnitQuaternion::identity() }
    }

    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation }
    }

    pub fn from_translation(position: Vector3<f64>) -> Self {
        Self { position, orientation: UnitQuaternion::identity() }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.orientation.to_rotation_matrix().into_inner()
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation * p
    }

    /// `self ∘ other`: express a frame given relative to `self` in the outer frame.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.transform_point(&other.position),
            orientation: self.orientation * other.orientation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose { position: -(inv * self.position), orientation: inv }
    }

    /// Apply a world-frame rigid displacement `(dp, dθ)`: the position is
    /// shifted and the orientation is rotated by `exp(dθ)` on the left.
    pub fn perturbed_world(&self, dp: &Vector3<f64>, dtheta: &Vector3<f64>) -> Pose {
        Pose {
            position: self.position + dp,
            orientation: quat_integrate(&self.orientation, dtheta, 1.0),
        }
    }

    /// Apply a displacement whose rotational part is expressed in body
    /// coordinates (right multiplication by `exp(dθ)`).
    pub fn perturbed_local(&self, dp: &Vector3<f64>, dtheta_body: &Vector3<f64>) -> Pose {
        let dq = exp_quat(dtheta_body);
        Pose {
            position: self.position + dp,
            orientation: UnitQuaternion::new_normalize(self.orientation.into_inner() * dq),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

impl Twist {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(linear: Vector3<f64>, angular: Vector3<f64>) -> Self {
        Self { linear, angular }
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            linear: Vector3::new(v[0], v[1], v[2]),
            angular: Vector3::new(v[3], v[4], v[5]),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let (l, a) = (&self.linear, &self.angular);
        Vector6::new(l.x, l.y, l.z, a.x, a.y, a.z)
    }

    pub fn is_finite(&self) -> bool {
        self.linear.iter().chain(self.angular.iter()).all(|v| v.is_finite())
    }
}

/// Mass and body-frame rotational inertia of one rigid body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaBlock {
    mass: f64,
    body_inertia: Matrix3<f64>,
    inv_body_inertia: Matrix3<f64>,
}

impl InertiaBlock {
    pub fn new(mass: f64, body_inertia: Matrix3<f64>) -> Result<Self, ModelError> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(ModelError::InvalidInertia(format!("mass must be positive, got {mass}")));
        }
        let scale = body_inertia.amax().max(f64::MIN_POSITIVE);
        let asym = (body_inertia - body_inertia.transpose()).amax();
        if !body_inertia.iter().all(|v| v.is_finite()) || asym > 1e-12 * scale {
            return Err(ModelError::InvalidInertia("inertia tensor is not symmetric".into()));
        }
        let eig = body_inertia.symmetric_eigen().eigenvalues;
        if eig.iter().any(|&e| e <= 0.0) {
            return Err(ModelError::InvalidInertia(format!(
                "inertia tensor is not positive definite (eigenvalues {:?})",
                eig.as_slice()
            )));
        }
        let tol = 1e-9 * scale;
        let (a, b, c) = (eig[0], eig[1], eig[2]);
        if a > b + c + tol || b > a + c + tol || c > a + b + tol {
            return Err(ModelError::InvalidInertia(format!(
                "principal moments {a}, {b}, {c} violate the triangle inequality"
            )));
        }
        let inv_body_inertia = body_inertia
            .try_inverse()
            .ok_or_else(|| ModelError::InvalidInertia("singular inertia tensor".into()))?;
        Ok(Self { mass, body_inertia, inv_body_inertia })
    }

    pub fn from_diagonal(mass: f64, diag: Vector3<f64>) -> Result<Self, ModelError> {
        Self::new(mass, Matrix3::from_diagonal(&diag))
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn body_inertia(&self) -> &Matrix3<f64> {
        &self.body_inertia
    }

    /// World-frame rotational inertia `R Iᵇ Rᵀ`.
    pub fn world_inertia(&self, q: &UnitQuaternion<f64>) -> Matrix3<f64> {
        let r = q.to_rotation_matrix().into_inner();
        r * self.body_inertia * r.transpose()
    }

    /// `R (Iᵇ)⁻¹ Rᵀ`, from the cached 3×3 body-frame inverse.
    pub fn inv_world_inertia(&self, q: &UnitQuaternion<f64>) -> Matrix3<f64> {
        let r = q.to_rotation_matrix().into_inner();
        r * self.inv_body_inertia * r.transpose()
    }

    /// Solve `(R Iᵇ Rᵀ) x = torque` for `x`.
    pub fn apply_inv_world_inertia(&self, q: &UnitQuaternion<f64>, torque: &Vector3<f64>) -> Vector3<f64> {
        let local = q.inverse_transform_vector(torque);
        q.transform_vector(&(self.inv_body_inertia * local))
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Unit quaternion `exp(θ/2)` for the rotation vector `θ`.
pub fn exp_quat(theta: &Vector3<f64>) -> Quaternion<f64> {
    let angle = theta.norm();
    if angle < SMALL_ANGLE {
        let a2 = angle * angle;
        let w = 1.0 - a2 / 8.0;
        let v = theta * (0.5 - a2 / 48.0);
        Quaternion::new(w, v.x, v.y, v.z)
    } else {
        let half = 0.5 * angle;
        let v = theta * (half.sin() / angle);
        Quaternion::new(half.cos(), v.x, v.y, v.z)
    }
}

/// Rotation vector of a unit quaternion (inverse of [`exp_quat`]), taking the
/// short way round.
pub fn log_quat(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let mut w = q.w;
    let mut v = q.imag();
    if w < 0.0 {
        w = -w;
        v = -v;
    }
    let s = v.norm();
    if s < SMALL_ANGLE {
        v * (2.0 / w)
    } else {
        v * (2.0 * s.atan2(w) / s)
    }
}

/// Advance an orientation by a constant world-frame angular velocity over `dt`.
///
/// Returns `exp(ω·dt/2) ⊗ q`, renormalized.
pub fn quat_integrate(q: &UnitQuaternion<f64>, omega: &Vector3<f64>, dt: f64) -> UnitQuaternion<f64> {
    let dq = exp_quat(&(omega * dt));
    UnitQuaternion::new_normalize(dq * q.into_inner())
}

/// The 6×6 world-frame mass block `diag(m·I₃, R Iᵇ Rᵀ)`.
pub fn world_mass_block(inertia: &InertiaBlock, q: &UnitQuaternion<f64>) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).fill_with_identity();
    m.fixed_view_mut::<3, 3>(0, 0).scale_mut(inertia.mass());
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&inertia.world_inertia(q));
    m
}

/// `M⁻¹ · wrench` for a single body, using a 3×3 solve for the rotational part.
pub fn inv_mass_apply(inertia: &InertiaBlock, q: &UnitQuaternion<f64>, wrench: &Vector6<f64>) -> Twist {
    let force = Vector3::new(wrench[0], wrench[1], wrench[2]);
    let torque = Vector3::new(wrench[3], wrench[4], wrench[5]);
    Twist {
        linear: force / inertia.mass(),
        angular: inertia.apply_inv_world_inertia(q, &torque),
    }
}

/// Orthonormal pair `(t1, t2)` completing the unit vector `n` to a right-handed
/// basis `(t1, t2, n)`. Deterministic: `t1` is built from the coordinate axis
/// least aligned with `n`.
pub fn orthonormal_complement(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let a = n.abs();
    let e = if a.x <= a.y && a.x <= a.z {
        Vector3::x()
    } else if a.y <= a.z {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let t1 = (e - n * n.dot(&e)).normalize();
    let t2 = n.cross(&t1);
    (t1, t2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn rodrigues(theta: &Vector3<f64>) -> Matrix3<f64> {
        let angle = theta.norm();
        if angle == 0.0 {
            return Matrix3::identity();
        }
        let k = skew(&(theta / angle));
        Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos())
    }

    fn quat_strategy() -> impl Strategy<Value = UnitQuaternion<f64>> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("nonzero", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
            .prop_map(|(w, x, y, z)| UnitQuaternion::new_normalize(Quaternion::new(w, x, y, z)))
    }

    fn vec_strategy(r: f64) -> impl Strategy<Value = Vector3<f64>> {
        (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vector3::new(x, y, z))
    }

    fn inertia_strategy() -> impl Strategy<Value = InertiaBlock> {
        (0.1..10.0f64, 0.1..1.0f64, 0.1..1.0f64, 0.1..1.0f64, quat_strategy()).prop_map(|(m, a, b, c, q)| {
            // principal moments of an ellipsoid always satisfy the triangle inequality
            let d = Vector3::new(b * b + c * c, a * a + c * c, a * a + b * b) * (m / 5.0);
            let r = q.to_rotation_matrix().into_inner();
            let i = r * Matrix3::from_diagonal(&d) * r.transpose();
            InertiaBlock::new(m, (i + i.transpose()) * 0.5).unwrap()
        })
    }

    #[test]
    fn zero_rotation_is_identity() {
        let q = quat_integrate(&UnitQuaternion::identity(), &Vector3::zeros(), 0.7);
        assert_eq!(q, UnitQuaternion::identity());
    }

    #[test]
    fn half_turn_about_z() {
        let q = quat_integrate(&UnitQuaternion::identity(), &Vector3::new(0.0, 0.0, PI), 1.0);
        assert!(q.w.abs() < 1e-15);
        assert!((q.k - 1.0).abs() < 1e-15);
        assert!(q.i.abs() < 1e-15 && q.j.abs() < 1e-15);
    }

    #[test]
    fn small_angle_branch_is_continuous() {
        let w = Vector3::new(0.3, -0.2, 0.9).normalize();
        let below = exp_quat(&(w * 0.99e-8));
        let above = exp_quat(&(w * 1.01e-8));
        assert!((below.coords - above.coords).norm() < 1e-9);
    }

    #[test]
    fn mass_block_identity_orientation() {
        let inertia = InertiaBlock::from_diagonal(2.0, Vector3::new(1.0, 2.0, 3.0)).unwrap();
        let m = world_mass_block(&inertia, &UnitQuaternion::identity());
        let expected = Matrix6::from_diagonal(&Vector6::new(2.0, 2.0, 2.0, 1.0, 2.0, 3.0));
        assert_eq!(m, expected);
    }

    #[test]
    fn mass_block_quarter_turn_permutes_axes() {
        let inertia = InertiaBlock::from_diagonal(1.0, Vector3::new(1.0, 2.0, 3.0)).unwrap();
        let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), PI / 2.0);
        let m = world_mass_block(&inertia, &q);
        let rot = m.fixed_view::<3, 3>(3, 3).into_owned();
        assert!((rot - Matrix3::from_diagonal(&Vector3::new(2.0, 1.0, 3.0))).amax() < 1e-15);
    }

    #[test]
    fn newton_second_law() {
        let inertia = InertiaBlock::from_diagonal(3.0, Vector3::new(1.0, 1.0, 1.0)).unwrap();
        let g = Vector3::new(0.0, 0.0, -9.81);
        let f = g * 3.0;
        let t = inv_mass_apply(&inertia, &UnitQuaternion::identity(), &Vector6::new(f.x, f.y, f.z, 0.0, 0.0, 0.0));
        assert!((t.linear - g).norm() < 1e-15);
        assert_eq!(t.angular, Vector3::zeros());
        let z = inv_mass_apply(&inertia, &UnitQuaternion::identity(), &Vector6::zeros());
        assert_eq!(z, Twist::zero());
    }

    #[test]
    fn inertia_validation() {
        assert!(InertiaBlock::from_diagonal(0.0, Vector3::new(1.0, 1.0, 1.0)).is_err());
        assert!(InertiaBlock::from_diagonal(1.0, Vector3::new(1.0, -1.0, 1.0)).is_err());
        assert!(InertiaBlock::from_diagonal(1.0, Vector3::new(1.0, 1.0, 5.0)).is_err());
        let mut asym = Matrix3::identity();
        asym[(0, 1)] = 0.1;
        assert!(InertiaBlock::new(1.0, asym).is_err());
        assert!(InertiaBlock::from_diagonal(1.0, Vector3::new(1.0, 1.0, 2.0)).is_ok());
    }

    #[test]
    fn log_inverts_exp() {
        let theta = Vector3::new(0.4, -1.1, 2.0);
        let q = UnitQuaternion::new_normalize(exp_quat(&theta));
        assert!((log_quat(&q) - theta).norm() < 1e-12);
    }

    #[test]
    fn complement_is_right_handed() {
        for n in [Vector3::x(), Vector3::y(), Vector3::z(), Vector3::new(1.0, 2.0, -3.0).normalize()] {
            let (t1, t2) = orthonormal_complement(&n);
            assert!((t1.cross(&t2) - n).norm() < 1e-14);
            assert!(t1.dot(&n).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn integrate_matches_rodrigues(q in quat_strategy(), w in vec_strategy(5.0), dt in 0.0..1.0f64) {
            let out = quat_integrate(&q, &w, dt);
            let expected = rodrigues(&(w * dt)) * q.to_rotation_matrix().into_inner();
            prop_assert!((out.to_rotation_matrix().into_inner() - expected).amax() < 1e-12);
            prop_assert!((out.norm() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn integrate_composes(q in quat_strategy(), w in vec_strategy(5.0), dt1 in 0.0..0.5f64, dt2 in 0.0..0.5f64) {
            let two = quat_integrate(&quat_integrate(&q, &w, dt1), &w, dt2);
            let one = quat_integrate(&q, &w, dt1 + dt2);
            prop_assert!(two.angle_to(&one) < 1e-10);
        }

        #[test]
        fn rotational_block_keeps_spectrum(inertia in inertia_strategy(), q in quat_strategy()) {
            let m = world_mass_block(&inertia, &q);
            let mut a: Vec<f64> = m.fixed_view::<3, 3>(3, 3).into_owned().symmetric_eigen().eigenvalues.iter().copied().collect();
            let mut b: Vec<f64> = inertia.body_inertia().symmetric_eigen().eigenvalues.iter().copied().collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!(m.cholesky().is_some());
        }

        #[test]
        fn inverse_mass_round_trip(inertia in inertia_strategy(), q in quat_strategy(),
                                   f in vec_strategy(10.0), t in vec_strategy(10.0)) {
            let wrench = Vector6::new(f.x, f.y, f.z, t.x, t.y, t.z);
            let twist = inv_mass_apply(&inertia, &q, &wrench);
            let back = world_mass_block(&inertia, &q) * twist.to_vector();
            prop_assert!((back - wrench).amax() < 1e-10);
        }
    }
}
