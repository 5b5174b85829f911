//! Forward kinematics for maximal coordinates: find body poses that satisfy
//! every joint constraint while a chosen set of joint coordinates sits at
//! prescribed values. Solved with Levenberg-damped Gauss-Newton.

use nalgebra::{DMatrix, DVector, Vector3};

use super::{coordinate_row, joint_rows, JacobianRow};
use crate::linalg::BlockCholesky;
use crate::model::{wrap_angle, JointKind, MechanismModel};
use crate::se3::Pose;

#[derive(Debug, Clone)]
pub struct FkProblem<'a> {
    pub model: &'a MechanismModel,
    /// `(joint index, target coordinate)` pairs; joints must be revolute or prismatic.
    pub targets: Vec<(usize, f64)>,
    pub initial: Vec<Pose>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initial_damping: f64,
    pub damping_factor: f64,
}

impl Default for FkConfig {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 100, initial_damping: 1e-6, damping_factor: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FkResult {
    pub poses: Vec<Pose>,
    /// Infinity norm of the stacked residual at `poses`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Euclidean residual norm after the initial check and every accepted step.
    pub history: Vec<f64>,
}

fn stacked(problem: &FkProblem, poses: &[Pose], with_jacobian: bool) -> (Vec<f64>, Vec<JacobianRow>) {
    let model = problem.model;
    let mut rows = Vec::with_capacity(model.n_joint_rows() + problem.targets.len());
    for j in 0..model.joints.len() {
        joint_rows(model, j, poses, &mut rows);
    }
    for &(joint, target) in &problem.targets {
        let (q, row) = coordinate_row(model, joint, poses);
        let mut err = q - target;
        if model.joints[joint].kind == JointKind::Revolute {
            err = wrap_angle(err);
        }
        rows.push((err, row));
    }
    let (r, j): (Vec<f64>, Vec<JacobianRow>) = rows.into_iter().unzip();
    (r, if with_jacobian { j } else { Vec::new() })
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve the forward-kinematics problem. Orientation updates use the body-local
/// exponential chart (right multiplication).
pub fn fk_solve(problem: &FkProblem, config: &FkConfig) -> FkResult {
    let model = problem.model;
    for &(j, _) in &problem.targets {
        assert!(model.joints[j].kind.has_coordinate(), "FK target on joint without a scalar coordinate");
    }
    let n = 6 * model.n_bodies();
    let mut poses = problem.initial.clone();
    let (mut r, _) = stacked(problem, &poses, false);
    let mut cost = norm2(&r);
    let mut history = vec![cost];
    let mut lambda = config.initial_damping;
    let mut iterations = 0;

    while crate::linalg::norm_inf(&r) >= config.tolerance && iterations < config.max_iterations {
        iterations += 1;
        let (_, rows) = stacked(problem, &poses, true);
        let mut jac = DMatrix::zeros(rows.len(), n);
        for (i, row) in rows.iter().enumerate() {
            for b in row {
                let rot = poses[b.body].rotation();
                let ang = rot.transpose() * Vector3::new(b.coeffs[3], b.coeffs[4], b.coeffs[5]);
                for k in 0..3 {
                    jac[(i, 6 * b.body + k)] = b.coeffs[k];
                    jac[(i, 6 * b.body + 3 + k)] = ang[k];
                }
            }
        }
        let jt = jac.transpose();
        let grad = &jt * DVector::from_column_slice(&r);
        let normal = &jt * &jac;

        // inner loop: raise damping until the step reduces the residual
        let mut accepted = false;
        while lambda < 1e12 {
            let mut a = normal.clone();
            for k in 0..n {
                a[(k, k)] += lambda;
            }
            let Ok(chol) = BlockCholesky::factor(&a) else {
                lambda *= config.damping_factor;
                continue;
            };
            let mut step: Vec<f64> = grad.iter().map(|g| -g).collect();
            chol.solve_in_place(&mut step);
            let trial: Vec<Pose> = poses
                .iter()
                .enumerate()
                .map(|(b, p)| {
                    let s = &step[6 * b..6 * b + 6];
                    p.perturbed_local(&Vector3::new(s[0], s[1], s[2]), &Vector3::new(s[3], s[4], s[5]))
                })
                .collect();
            let (r_trial, _) = stacked(problem, &trial, false);
            let trial_cost = norm2(&r_trial);
            if trial_cost < cost {
                poses = trial;
                r = r_trial;
                cost = trial_cost;
                history.push(cost);
                lambda = (lambda / config.damping_factor).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= config.damping_factor;
        }
        if !accepted {
            break;
        }
    }

    let residual = crate::linalg::norm_inf(&r);
    FkResult { poses, residual, iterations, converged: residual < config.tolerance, history }
}
