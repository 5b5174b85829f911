//! Per-joint residuals and Jacobian rows.
//!
//! All Jacobians are exact time derivatives of the residuals along world-frame
//! twists, so they stay valid away from the constraint manifold (Baumgarte
//! correction and Gauss-Newton both rely on that).

use arrayvec::ArrayVec;
use nalgebra::{Vector3, Vector6};

use crate::model::{BodyRef, JointKind, MechanismModel};
use crate::se3::Pose;

/// Nonzero 6-wide block of a constraint row: `coeffs · twist(body)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianBlock {
    pub body: usize,
    pub coeffs: Vector6<f64>,
}

/// A constraint row couples at most two bodies.
pub type JacobianRow = ArrayVec<JacobianBlock, 2>;

fn spatial(lin: &Vector3<f64>, ang: &Vector3<f64>) -> Vector6<f64> {
    Vector6::new(lin.x, lin.y, lin.z, ang.x, ang.y, ang.z)
}

pub(crate) fn make_row(
    a: BodyRef,
    lin_a: Vector3<f64>,
    ang_a: Vector3<f64>,
    b: BodyRef,
    lin_b: Vector3<f64>,
    ang_b: Vector3<f64>,
) -> JacobianRow {
    let mut row = JacobianRow::new();
    if let BodyRef::Body(i) = a {
        row.push(JacobianBlock { body: i, coeffs: spatial(&lin_a, &ang_a) });
    }
    if let BodyRef::Body(i) = b {
        row.push(JacobianBlock { body: i, coeffs: spatial(&lin_b, &ang_b) });
    }
    row
}

/// Append the kinematic rows of `joint` (residual and Jacobian row each).
pub(crate) fn joint_rows(model: &MechanismModel, joint: usize, poses: &[Pose], out: &mut Vec<(f64, JacobianRow)>) {
    let j = &model.joints[joint];
    let fr = model.joint_frames(joint, poses);
    let basis = model.axis_basis(joint);
    let child = BodyRef::Body(j.child);
    let d = fr.xb - fr.xa;
    let d_local = fr.ra.transpose() * d;
    let lever_c = fr.xb - fr.child_origin;
    let lever_p = fr.xb - fr.parent_origin;

    // translational rows: s · (R_Aᵀ d) for directions s fixed in the parent joint frame
    let positional = |s: &Vector3<f64>, out: &mut Vec<(f64, JacobianRow)>| {
        let w = fr.ra * s;
        let row = make_row(child, w, lever_c.cross(&w), j.parent, -w, w.cross(&lever_p));
        out.push((s.dot(&d_local), row));
    };
    match j.kind {
        JointKind::Prismatic => {
            positional(&basis.t1, out);
            positional(&basis.t2, out);
        }
        _ => {
            for s in [Vector3::x(), Vector3::y(), Vector3::z()] {
                positional(&s, out);
            }
        }
    }

    let rel = fr.qa.inverse() * fr.qb;
    match j.kind {
        JointKind::Fixed | JointKind::Prismatic => {
            // residual 2·vec(q_rel) on the hemisphere w ≥ 0
            let (mut s, mut v) = (rel.w, rel.imag());
            if s < 0.0 {
                s = -s;
                v = -v;
            }
            for k in 0..3 {
                let e = Vector3::ith(k, 1.0);
                let ang = fr.ra * (e * s + v.cross(&e));
                out.push((2.0 * v[k], make_row(child, Vector3::zeros(), ang, j.parent, Vector3::zeros(), -ang)));
            }
        }
        JointKind::Revolute => {
            // the child's copy of the axis must stay orthogonal to t1 and t2
            let b = rel * basis.axis;
            for t in [&basis.t1, &basis.t2] {
                let ang = fr.ra * b.cross(t);
                out.push((t.dot(&b), make_row(child, Vector3::zeros(), ang, j.parent, Vector3::zeros(), -ang)));
            }
        }
        JointKind::Spherical => {}
    }
}

/// Joint coordinate and its exact velocity row (revolute/prismatic only).
pub(crate) fn coordinate_row(model: &MechanismModel, joint: usize, poses: &[Pose]) -> (f64, JacobianRow) {
    let j = &model.joints[joint];
    let fr = model.joint_frames(joint, poses);
    let basis = model.axis_basis(joint);
    let child = BodyRef::Body(j.child);
    match j.kind {
        JointKind::Revolute => {
            // t1 carried by the relative rotation, in the parent joint frame
            let u = (fr.qa.inverse() * fr.qb) * basis.t1;
            let (x, y) = (basis.t1.dot(&u), basis.t2.dot(&u));
            let r2 = x * x + y * y;
            let g = (u.cross(&basis.t2) * x - u.cross(&basis.t1) * y) / r2;
            let ang = fr.ra * g;
            (y.atan2(x), make_row(child, Vector3::zeros(), ang, j.parent, Vector3::zeros(), -ang))
        }
        JointKind::Prismatic => {
            let d = fr.xb - fr.xa;
            let w = fr.ra * basis.axis;
            let lever_c = fr.xb - fr.child_origin;
            let lever_p = fr.xb - fr.parent_origin;
            let row = make_row(child, w, lever_c.cross(&w), j.parent, -w, w.cross(&lever_p));
            (basis.axis.dot(&(fr.ra.transpose() * d)), row)
        }
        _ => panic!("joint {} has no scalar coordinate", j.name),
    }
}
