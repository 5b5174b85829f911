//! Constraint residuals, Jacobians (dense and block-sparse), velocity biases
//! and regularization for one world at one configuration, plus the
//! Gauss-Newton forward-kinematics solver.
//!
//! Row layout of an assembled [`ConstraintSet`]:
//!
//! 1. kinematic joint rows, in joint declaration order;
//! 2. drive rows (implicit PD, armature, viscous damping), in joint order;
//! 3. active limit rows, in joint order, lower before upper;
//! 4. contact rows, three per contact: normal, t1, t2.
//!
//! Groups 1 and 2 are bilateral, group 3 lives in the non-negative orthant and
//! each contact is a Coulomb cone.
//!
//! Bias convention: `bias` holds the target constraint velocity `v*`, so every
//! converged bilateral row satisfies `J u⁺ + R λ = v*`.

mod fk;
mod joints;

use nalgebra::{DMatrix, Vector3, Vector6};

pub use fk::{fk_solve, FkConfig, FkProblem, FkResult};
pub use joints::{JacobianBlock, JacobianRow};

use crate::contacts::{contact_bodies, ContactPoint};
use crate::model::{JointKind, MechanismModel};
use crate::padmm::ConeProduct;
use crate::se3::{Pose, Twist};

pub(crate) use joints::{coordinate_row, joint_rows, make_row};

/// Which storage the assembled Jacobian uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JacobianStorage {
    Dense,
    #[default]
    BlockSparse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintConfig {
    /// Baumgarte factor β.
    pub baumgarte: f64,
    /// Upper bound on the magnitude of position-correction velocities (m/s or rad/s).
    pub max_correction_speed: f64,
    /// Limit rows are generated when the gap drops below these margins.
    pub limit_margin_angular: f64,
    pub limit_margin_linear: f64,
    /// Restitution applies only to approach speeds above this value.
    pub impact_threshold: f64,
    pub storage: JacobianStorage,
}

impl Default for ConstraintConfig {
    fn default() -> Self {
        Self {
            baumgarte: 0.2,
            max_correction_speed: 10.0,
            limit_margin_angular: 0.01,
            limit_margin_linear: 0.001,
            impact_threshold: 0.1,
            storage: JacobianStorage::BlockSparse,
        }
    }
}

/// Set-point for an actuated joint.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointTarget {
    pub position: f64,
    pub velocity: f64,
}

/// Initial targets taken from each joint's actuation settings.
pub fn default_targets(model: &MechanismModel) -> Vec<JointTarget> {
    model
        .joints
        .iter()
        .map(|j| j.actuation.map_or_else(JointTarget::default, |a| JointTarget { position: a.target, velocity: a.target_velocity }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DriveKind {
    Pd,
    Armature,
    Damping,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LimitSide {
    Lower,
    Upper,
}

/// Stable identity of a row, used to carry reactions across steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowKey {
    Joint { joint: usize, row: u8 },
    Drive { joint: usize, kind: DriveKind },
    Limit { joint: usize, side: LimitSide },
    Contact { contact: usize, component: u8 },
}

/// Block-sparse (BSR-like) Jacobian: at most two 6-wide blocks per row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlockSparseJacobian {
    pub n_bodies: usize,
    pub rows: Vec<JacobianRow>,
}

impl BlockSparseJacobian {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn mul(&self, u: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|b| b.coeffs.dot(&Vector6::from_column_slice(&u[6 * b.body..6 * b.body + 6]))).sum())
            .collect()
    }

    pub fn mul_transpose(&self, lambda: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; 6 * self.n_bodies];
        for (row, &l) in self.rows.iter().zip(lambda) {
            for b in row {
                for k in 0..6 {
                    out[6 * b.body + k] += b.coeffs[k] * l;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), 6 * self.n_bodies);
        for (i, row) in self.rows.iter().enumerate() {
            for b in row {
                for k in 0..6 {
                    m[(i, 6 * b.body + k)] += b.coeffs[k];
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Jacobian {
    Dense(DMatrix<f64>),
    BlockSparse(BlockSparseJacobian),
}

impl Jacobian {
    pub fn n_rows(&self) -> usize {
        match self {
            Jacobian::Dense(m) => m.nrows(),
            Jacobian::BlockSparse(s) => s.n_rows(),
        }
    }

    pub fn mul(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Jacobian::Dense(m) => (m * nalgebra::DVector::from_column_slice(u)).as_slice().to_vec(),
            Jacobian::BlockSparse(s) => s.mul(u),
        }
    }

    pub fn mul_transpose(&self, lambda: &[f64]) -> Vec<f64> {
        match self {
            Jacobian::Dense(m) => (m.transpose() * nalgebra::DVector::from_column_slice(lambda)).as_slice().to_vec(),
            Jacobian::BlockSparse(s) => s.mul_transpose(lambda),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Jacobian::Dense(m) => m.clone(),
            Jacobian::BlockSparse(s) => s.to_dense(),
        }
    }

    /// Recover the block structure; a dense row keeps every body block with a
    /// nonzero coefficient (never more than two for rows built here).
    pub fn to_block_sparse(&self) -> BlockSparseJacobian {
        match self {
            Jacobian::BlockSparse(s) => s.clone(),
            Jacobian::Dense(m) => {
                let n_bodies = m.ncols() / 6;
                let rows = (0..m.nrows())
                    .map(|i| {
                        let mut row = JacobianRow::new();
                        for b in 0..n_bodies {
                            let coeffs = Vector6::from_fn(|k, _| m[(i, 6 * b + k)]);
                            if coeffs.iter().any(|&c| c != 0.0) {
                                row.push(JacobianBlock { body: b, coeffs });
                            }
                        }
                        row
                    })
                    .collect();
                BlockSparseJacobian { n_bodies, rows }
            }
        }
    }
}

/// Assembled constraint rows for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub n_bodies: usize,
    pub keys: Vec<RowKey>,
    pub jacobian: Jacobian,
    /// Position-level residual per row: `f` for joint rows, the gap `g` for
    /// limit rows, penetration depth on contact normal rows, zero elsewhere.
    pub residual: Vec<f64>,
    /// Target constraint velocity `v*` per row.
    pub bias: Vec<f64>,
    /// Diagonal regularization `R ≥ 0` per row.
    pub regularization: Vec<f64>,
    pub cones: ConeProduct,
    pub n_joint_rows: usize,
    pub n_drive_rows: usize,
    pub n_limit_rows: usize,
    pub contacts: Vec<ContactPoint>,
}

impl ConstraintSet {
    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    /// Rows of the bilateral (free) cone: kinematic plus drive rows.
    pub fn n_bilateral_rows(&self) -> usize {
        self.n_joint_rows + self.n_drive_rows
    }

    pub fn contact_offset(&self) -> usize {
        self.n_joint_rows + self.n_drive_rows + self.n_limit_rows
    }

    pub fn bilateral_residual(&self) -> &[f64] {
        &self.residual[..self.n_joint_rows]
    }

    pub fn limit_residual(&self) -> &[f64] {
        let s = self.n_bilateral_rows();
        &self.residual[s..s + self.n_limit_rows]
    }
}

struct RowBuffer {
    keys: Vec<RowKey>,
    rows: Vec<JacobianRow>,
    residual: Vec<f64>,
    bias: Vec<f64>,
    reg: Vec<f64>,
}

impl RowBuffer {
    fn push(&mut self, key: RowKey, row: JacobianRow, residual: f64, bias: f64, reg: f64) {
        self.keys.push(key);
        self.rows.push(row);
        self.residual.push(residual);
        self.bias.push(bias);
        self.reg.push(reg);
    }
}

fn row_dot(row: &JacobianRow, twists: &[Twist]) -> f64 {
    row.iter().map(|b| b.coeffs.dot(&twists[b.body].to_vector())).sum()
}

fn clamp_correction(v: f64, limit: f64) -> f64 {
    v.clamp(-limit, limit)
}

/// Assemble every constraint row for the configuration `poses`.
///
/// `twists` are the pre-step velocities (used for restitution and armature
/// rows); `targets` holds one set-point per joint.
pub fn assemble_constraints(
    model: &MechanismModel,
    poses: &[Pose],
    twists: &[Twist],
    contacts: &[ContactPoint],
    targets: &[JointTarget],
    dt: f64,
    config: &ConstraintConfig,
) -> ConstraintSet {
    let beta_dt = config.baumgarte / dt;
    let cap = config.max_correction_speed;
    let mut buf = RowBuffer { keys: Vec::new(), rows: Vec::new(), residual: Vec::new(), bias: Vec::new(), reg: Vec::new() };
    let mut scratch = Vec::new();

    for joint in 0..model.joints.len() {
        scratch.clear();
        joint_rows(model, joint, poses, &mut scratch);
        for (k, (f, row)) in scratch.drain(..).enumerate() {
            let bias = clamp_correction(-beta_dt * f, cap);
            buf.push(RowKey::Joint { joint, row: k as u8 }, row, f, bias, 0.0);
        }
    }
    let n_joint_rows = buf.keys.len();

    for (joint, j) in model.joints.iter().enumerate() {
        if !j.kind.has_coordinate() {
            continue;
        }
        let needs_row = j.actuation.is_some_and(|a| a.kp > 0.0 || a.kd > 0.0) || j.armature > 0.0 || j.damping > 0.0;
        if !needs_row {
            continue;
        }
        let (q, row) = coordinate_row(model, joint, poses);
        if let Some(a) = j.actuation.filter(|a| a.kp > 0.0 || a.kd > 0.0) {
            let target = targets.get(joint).copied().unwrap_or_default();
            let mut err = target.position - q;
            if j.kind == JointKind::Revolute {
                err = crate::model::wrap_angle(err);
            }
            let gain = dt * a.kp + a.kd;
            let bias = (a.kp * err + a.kd * target.velocity) / gain;
            buf.push(RowKey::Drive { joint, kind: DriveKind::Pd }, row.clone(), 0.0, bias, 1.0 / (dt * gain));
        }
        if j.armature > 0.0 {
            let qd = row_dot(&row, twists);
            buf.push(RowKey::Drive { joint, kind: DriveKind::Armature }, row.clone(), 0.0, qd, 1.0 / j.armature);
        }
        if j.damping > 0.0 {
            buf.push(RowKey::Drive { joint, kind: DriveKind::Damping }, row.clone(), 0.0, 0.0, 1.0 / (dt * j.damping));
        }
    }
    let n_drive_rows = buf.keys.len() - n_joint_rows;

    for (joint, j) in model.joints.iter().enumerate() {
        let Some(limits) = j.limits else { continue };
        let margin = if j.kind == JointKind::Revolute { config.limit_margin_angular } else { config.limit_margin_linear };
        let (q, row) = coordinate_row(model, joint, poses);
        for (side, gap, sign) in [(LimitSide::Lower, q - limits.lower, 1.0), (LimitSide::Upper, limits.upper - q, -1.0)] {
            if gap >= margin {
                continue;
            }
            let mut r = row.clone();
            for b in r.iter_mut() {
                b.coeffs *= sign;
            }
            buf.push(RowKey::Limit { joint, side }, r, gap, gap_bias(gap, beta_dt, dt, cap), 0.0);
        }
    }
    let n_limit_rows = buf.keys.len() - n_joint_rows - n_drive_rows;

    for (ci, c) in contacts.iter().enumerate() {
        let (body_a, body_b) = contact_bodies(model, c);
        let pa = MechanismModel::body_pose(poses, body_a).position;
        let pb = MechanismModel::body_pose(poses, body_b).position;
        let (ra, rb) = (c.position - pa, c.position - pb);
        let (t1, t2) = c.tangents();
        let dir_row = |d: &Vector3<f64>| make_row(body_a, *d, ra.cross(d), body_b, -d, -rb.cross(d));
        let normal_row = dir_row(&c.normal);
        let vn = row_dot(&normal_row, twists);
        let mut bias = gap_bias(-c.depth, beta_dt, dt, cap);
        if vn < -config.impact_threshold {
            bias += -c.restitution * vn;
        }
        buf.push(RowKey::Contact { contact: ci, component: 0 }, normal_row, c.depth, bias, 0.0);
        buf.push(RowKey::Contact { contact: ci, component: 1 }, dir_row(&t1), 0.0, 0.0, 0.0);
        buf.push(RowKey::Contact { contact: ci, component: 2 }, dir_row(&t2), 0.0, 0.0, 0.0);
    }

    let mut cones = ConeProduct::new();
    cones.push_bilateral(n_joint_rows + n_drive_rows);
    cones.push_nonnegative(n_limit_rows);
    for c in contacts {
        cones.push_soc(c.friction);
    }

    let sparse = BlockSparseJacobian { n_bodies: model.n_bodies(), rows: buf.rows };
    let jacobian = match config.storage {
        JacobianStorage::BlockSparse => Jacobian::BlockSparse(sparse),
        JacobianStorage::Dense => Jacobian::Dense(sparse.to_dense()),
    };
    ConstraintSet {
        n_bodies: model.n_bodies(),
        keys: buf.keys,
        jacobian,
        residual: buf.residual,
        bias: buf.bias,
        regularization: buf.reg,
        cones,
        n_joint_rows,
        n_drive_rows,
        n_limit_rows,
        contacts: contacts.to_vec(),
    }
}

/// Target velocity for a unilateral gap: penetration (`gap < 0`) is pushed
/// out at Baumgarte rate, an open gap may close within one step.
fn gap_bias(gap: f64, beta_dt: f64, dt: f64, cap: f64) -> f64 {
    if gap < 0.0 {
        clamp_correction(-beta_dt * gap, cap)
    } else {
        -gap / dt
    }
}

/// Stacked kinematic joint residuals `f(q)`.
pub fn bilateral_residual(model: &MechanismModel, poses: &[Pose]) -> Vec<f64> {
    let mut scratch = Vec::with_capacity(model.n_joint_rows());
    for j in 0..model.joints.len() {
        joint_rows(model, j, poses, &mut scratch);
    }
    scratch.into_iter().map(|(f, _)| f).collect()
}

/// Kinematic joint rows of the Jacobian in block-sparse form.
pub fn bilateral_jacobian(model: &MechanismModel, poses: &[Pose]) -> BlockSparseJacobian {
    let mut scratch = Vec::with_capacity(model.n_joint_rows());
    for j in 0..model.joints.len() {
        joint_rows(model, j, poses, &mut scratch);
    }
    BlockSparseJacobian { n_bodies: model.n_bodies(), rows: scratch.into_iter().map(|(_, r)| r).collect() }
}

/// Largest absolute kinematic joint residual.
pub fn bilateral_violation(model: &MechanismModel, poses: &[Pose]) -> f64 {
    crate::linalg::norm_inf(&bilateral_residual(model, poses))
}

/// Largest absolute translational joint residual (metres).
pub fn positional_violation(model: &MechanismModel, poses: &[Pose]) -> f64 {
    let f = bilateral_residual(model, poses);
    let mut worst: f64 = 0.0;
    for (joint, j) in model.joints.iter().enumerate() {
        let n_pos = if j.kind == JointKind::Prismatic { 2 } else { 3 };
        let off = model.joint_row_offset(joint);
        for v in &f[off..off + n_pos] {
            worst = worst.max(v.abs());
        }
    }
    worst
}

/// Compare the analytic kinematic Jacobian (and the joint-coordinate rows of
/// revolute/prismatic joints) against central differences of the residuals
/// under world-frame SE(3) perturbations of every body. Returns the largest
/// absolute deviation.
pub fn constraint_jacobian_fd_check(model: &MechanismModel, poses: &[Pose], step: f64) -> f64 {
    let coord_joints: Vec<usize> = (0..model.joints.len()).filter(|&j| model.joints[j].kind.has_coordinate()).collect();
    let eval = |p: &[Pose]| {
        let mut v = bilateral_residual(model, p);
        v.extend(coord_joints.iter().map(|&j| coordinate_row(model, j, p).0));
        v
    };
    let mut analytic = bilateral_jacobian(model, poses).to_dense();
    if !coord_joints.is_empty() {
        let coord = BlockSparseJacobian {
            n_bodies: model.n_bodies(),
            rows: coord_joints.iter().map(|&j| coordinate_row(model, j, poses).1).collect(),
        }
        .to_dense();
        let (n0, n1) = (analytic.nrows(), coord.nrows());
        analytic = analytic.resize_vertically(n0 + n1, 0.0);
        analytic.rows_mut(n0, n1).copy_from(&coord);
    }
    let mut worst: f64 = 0.0;
    let mut perturbed = poses.to_vec();
    for body in 0..model.n_bodies() {
        for k in 0..6 {
            let mut delta = Vector6::zeros();
            delta[k] = step;
            let (dp, dth) = (delta.fixed_rows::<3>(0).into_owned(), delta.fixed_rows::<3>(3).into_owned());
            perturbed[body] = poses[body].perturbed_world(&dp, &dth);
            let plus = eval(&perturbed);
            perturbed[body] = poses[body].perturbed_world(&-dp, &-dth);
            let minus = eval(&perturbed);
            perturbed[body] = poses[body];
            for (i, (p, m)) in plus.iter().zip(&minus).enumerate() {
                let mut diff = p - m;
                if i >= model.n_joint_rows() {
                    diff = crate::model::wrap_angle(diff);
                }
                let fd = diff / (2.0 * step);
                worst = worst.max((fd - analytic[(i, 6 * body + k)]).abs());
            }
        }
    }
    worst
}
