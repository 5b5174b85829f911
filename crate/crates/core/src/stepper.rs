//! One time step of one world: collide, assemble, precondition, build the
//! backend, solve with PADMM, integrate.

use std::collections::HashMap;

use nalgebra::{Vector3, Vector6};

use crate::contacts::{collide, match_warmstart, CachedReaction, ReactionCache, DEFAULT_MATCH_TOLERANCE};
use crate::delassus::{jacobi_preconditioner, BackendChoice, DelassusBackend, InverseMass, Preconditioner};
use crate::error::SolverError;
use crate::kinematics::{assemble_constraints, bilateral_residual, bilateral_violation, default_targets, ConstraintConfig, ConstraintSet, JointTarget, RowKey};
use crate::model::MechanismModel;
use crate::padmm::{padmm_solve, PadmmConfig, PadmmDiagnostics, WarmStart};
use crate::se3::{quat_integrate, world_mass_block, InertiaBlock, Pose, Twist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    #[default]
    SemiImplicitEuler,
    /// Constraints and mass matrix evaluated at `q ⊕ (dt/2) u⁻`.
    MoreauJean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub integrator: Integrator,
    pub constraints: ConstraintConfig,
    pub solver: PadmmConfig,
    pub backend: BackendChoice,
    /// Conjugate Residual budget per linear solve of the matrix-free backend.
    pub cr_iterations: usize,
    /// Pairs closer than this produce speculative contacts.
    pub contact_margin: f64,
    pub warm_start: bool,
    pub match_tolerance: f64,
    /// Subtract the second-order change of the joint residuals along `u⁻`
    /// from the joint-row targets, so the pose update does not accumulate
    /// curvature drift (chord error of the linear position update).
    pub curvature_compensation: bool,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 240.0,
            integrator: Integrator::SemiImplicitEuler,
            constraints: ConstraintConfig::default(),
            solver: PadmmConfig::default(),
            backend: BackendChoice::Auto,
            cr_iterations: 9,
            contact_margin: 0.005,
            warm_start: true,
            match_tolerance: DEFAULT_MATCH_TOLERANCE,
            curvature_compensation: true,
        }
    }
}

/// Reactions carried to the next step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarmCache {
    /// Joint, drive and limit rows: `(λ, dual)` by row identity.
    pub rows: HashMap<RowKey, (f64, f64)>,
    pub contacts: ReactionCache,
}

impl WarmCache {
    pub fn clear(&mut self) {
        self.rows.clear();
        self.contacts.clear();
    }
}

/// Everything about a world except its poses and twists.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldAux {
    pub targets: Vec<JointTarget>,
    /// Per-body external wrench `(force, torque)`, held constant across steps.
    pub external: Vec<Vector6<f64>>,
    pub cache: WarmCache,
    pub time: f64,
}

impl WorldAux {
    pub fn new(model: &MechanismModel) -> Self {
        Self {
            targets: default_targets(model),
            external: vec![Vector6::zeros(); model.n_bodies()],
            cache: WarmCache::default(),
            time: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub poses: Vec<Pose>,
    pub twists: Vec<Twist>,
    pub aux: WorldAux,
}

impl WorldState {
    pub fn new(model: &MechanismModel) -> Self {
        Self { poses: model.initial_poses(), twists: model.initial_twists(), aux: WorldAux::new(model) }
    }

    pub fn time(&self) -> f64 {
        self.aux.time
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepReport {
    pub diagnostics: PadmmDiagnostics,
    pub n_rows: usize,
    pub n_contacts: usize,
    pub dense_backend: bool,
    /// Constraint impulses in row order.
    pub lambda: Vec<f64>,
    /// `‖M(u⁺ − u⁻) − dt h − Jᵀλ‖∞`, evaluated with full 6×6 mass blocks.
    pub momentum_residual: f64,
    /// `max |J u⁺ + Rλ − v*|` over bilateral rows.
    pub bilateral_velocity_residual: f64,
    /// Kinematic joint residual after the pose update.
    pub constraint_violation: f64,
}

/// Stacked `h`: gravity, gyroscopic torque `−ω × (I_w ω)` and external wrenches.
pub fn free_forces(model: &MechanismModel, poses: &[Pose], twists: &[Twist], external: &[Vector6<f64>]) -> Vec<f64> {
    let mut h = vec![0.0; 6 * model.n_bodies()];
    for (b, body) in model.bodies.iter().enumerate() {
        let w = twists[b].angular;
        let iw = body.inertia.world_inertia(&poses[b].orientation) * w;
        let force = model.gravity * body.inertia.mass();
        let torque = -w.cross(&iw);
        let ext = external.get(b).copied().unwrap_or_else(Vector6::zeros);
        for k in 0..3 {
            h[6 * b + k] = force[k] + ext[k];
            h[6 * b + 3 + k] = torque[k] + ext[3 + k];
        }
    }
    h
}

fn stack(twists: &[Twist]) -> Vec<f64> {
    twists.iter().flat_map(|t| t.to_vector().iter().copied().collect::<Vec<_>>()).collect()
}

/// `u⁻ + dt M⁻¹ h`, stacked.
fn unconstrained_velocity(twists: &[Twist], inv_mass: &InverseMass, h: &[f64], dt: f64) -> Vec<f64> {
    let acc = inv_mass.apply(h);
    stack(twists).iter().zip(acc).map(|(u, a)| u + dt * a).collect()
}

/// `v_f = J (u⁻ + dt M⁻¹ h) − v*`.
pub fn free_velocity(cs: &ConstraintSet, h: &[f64], twists: &[Twist], dt: f64, inertias: &[InertiaBlock], poses: &[Pose]) -> Vec<f64> {
    free_velocity_with(cs, h, twists, dt, &InverseMass::new(inertias, poses))
}

fn free_velocity_with(cs: &ConstraintSet, h: &[f64], twists: &[Twist], dt: f64, inv_mass: &InverseMass) -> Vec<f64> {
    let u = unconstrained_velocity(twists, inv_mass, h, dt);
    cs.jacobian.mul(&u).iter().zip(&cs.bias).map(|(ju, b)| ju - b).collect()
}

fn advance(pose: &Pose, twist: &Twist, dt: f64) -> Pose {
    Pose::new(pose.position + twist.linear * dt, quat_integrate(&pose.orientation, &twist.angular, dt))
}

/// `v* -= c / τ` on joint rows, with `c = f(q ⊕ τ u⁻) − f(q) − τ J u⁻`.
fn compensate_curvature(model: &MechanismModel, poses: &[Pose], twists: &[Twist], horizon: f64, cs: &mut ConstraintSet) {
    if cs.n_joint_rows == 0 {
        return;
    }
    let ahead: Vec<Pose> = poses.iter().zip(twists).map(|(p, t)| advance(p, t, horizon)).collect();
    let f_ahead = bilateral_residual(model, &ahead);
    let ju = cs.jacobian.mul(&stack(twists));
    for i in 0..cs.n_joint_rows {
        let c = f_ahead[i] - cs.residual[i] - horizon * ju[i];
        cs.bias[i] -= c / horizon;
    }
}

fn warm_start_vectors(cs: &ConstraintSet, cache: &WarmCache, tolerance: f64) -> (Vec<f64>, Vec<f64>) {
    let n = cs.n_rows();
    let mut lambda = vec![0.0; n];
    let mut dual = vec![0.0; n];
    let off = cs.contact_offset();
    for (i, key) in cs.keys[..off].iter().enumerate() {
        if let Some(&(l, d)) = cache.rows.get(key) {
            lambda[i] = l;
            dual[i] = d;
        }
    }
    for (ci, m) in match_warmstart(&cache.contacts, &cs.contacts, tolerance).into_iter().enumerate() {
        if let Some(e) = m {
            let e = &cache.contacts.entries[e];
            for k in 0..3 {
                lambda[off + 3 * ci + k] = e.impulse[k];
                dual[off + 3 * ci + k] = e.dual[k];
            }
        }
    }
    (lambda, dual)
}

fn store_cache(cs: &ConstraintSet, lambda: &[f64], dual: &[f64], cache: &mut WarmCache) {
    cache.clear();
    let off = cs.contact_offset();
    for (i, key) in cs.keys[..off].iter().enumerate() {
        cache.rows.insert(*key, (lambda[i], dual[i]));
    }
    for (ci, c) in cs.contacts.iter().enumerate() {
        let r = off + 3 * ci;
        cache.contacts.entries.push(CachedReaction {
            geom_a: c.geom_a,
            geom_b: c.geom_b,
            position: c.position,
            impulse: Vector3::new(lambda[r], lambda[r + 1], lambda[r + 2]),
            dual: Vector3::new(dual[r], dual[r + 1], dual[r + 2]),
        });
    }
}

/// Step a world given as separate pose/twist slices (the batch stores them
/// contiguously).
pub fn step_world(
    model: &MechanismModel,
    poses: &mut [Pose],
    twists: &mut [Twist],
    aux: &mut WorldAux,
    config: &StepConfig,
) -> Result<StepReport, SolverError> {
    let dt = config.dt;
    let n_bodies = model.n_bodies();
    if poses.len() != n_bodies || twists.len() != n_bodies {
        return Err(SolverError::Dimension { expected: n_bodies, got: poses.len().min(twists.len()) });
    }
    let inertias = model.inertias();
    let h = free_forces(model, poses, twists, &aux.external);

    let eval_poses: Vec<Pose> = match config.integrator {
        Integrator::SemiImplicitEuler => poses.to_vec(),
        Integrator::MoreauJean => poses.iter().zip(twists.iter()).map(|(p, t)| advance(p, t, 0.5 * dt)).collect(),
    };
    let contacts = collide(model, &eval_poses, config.contact_margin);
    let mut cs = assemble_constraints(model, &eval_poses, twists, &contacts, &aux.targets, dt, &config.constraints);
    if config.curvature_compensation {
        let horizon = match config.integrator {
            Integrator::SemiImplicitEuler => dt,
            Integrator::MoreauJean => 0.5 * dt,
        };
        compensate_curvature(model, &eval_poses, twists, horizon, &mut cs);
    }
    let inv_mass = InverseMass::new(&inertias, &eval_poses);
    let n = cs.n_rows();

    let u_free = unconstrained_velocity(twists, &inv_mass, &h, dt);
    let (lambda, diagnostics, dense_backend) = if n == 0 {
        (Vec::new(), PadmmDiagnostics { converged: true, ..Default::default() }, false)
    } else {
        let v_f: Vec<f64> = cs.jacobian.mul(&u_free).iter().zip(&cs.bias).map(|(ju, b)| ju - b).collect();
        let precond: Preconditioner = jacobi_preconditioner(&cs, &inv_mass);
        let shift = config.solver.eta + config.solver.rho;
        let mut backend = DelassusBackend::build(&cs, &inv_mass, &precond, shift, config.backend, config.cr_iterations)?;
        let warm = config.warm_start.then(|| warm_start_vectors(&cs, &aux.cache, config.match_tolerance));
        let sol = padmm_solve(
            &mut backend,
            &v_f,
            &cs.cones,
            &precond,
            warm.as_ref().map(|(l, d)| WarmStart { lambda: l, dual: d }),
            &config.solver,
        );
        store_cache(&cs, &sol.lambda, &sol.dual, &mut aux.cache);
        (sol.lambda, sol.diagnostics, backend.is_dense())
    };

    // u⁺ = u⁻ + dt M⁻¹ h + M⁻¹ Jᵀ λ
    let impulse = if n == 0 { vec![0.0; 6 * n_bodies] } else { cs.jacobian.mul_transpose(&lambda) };
    let du = inv_mass.apply(&impulse);
    let u_minus = stack(twists);
    let u_plus: Vec<f64> = u_free.iter().zip(&du).map(|(a, b)| a + b).collect();

    let mut momentum_residual: f64 = 0.0;
    for b in 0..n_bodies {
        let m = world_mass_block(&inertias[b], &eval_poses[b].orientation);
        let du = Vector6::from_fn(|k, _| u_plus[6 * b + k] - u_minus[6 * b + k]);
        let r = m * du - Vector6::from_fn(|k, _| dt * h[6 * b + k] + impulse[6 * b + k]);
        momentum_residual = momentum_residual.max(r.amax());
    }
    let mut bilateral_velocity_residual: f64 = 0.0;
    if n > 0 {
        let ju = cs.jacobian.mul(&u_plus);
        for i in 0..cs.n_bilateral_rows() {
            let r = ju[i] + cs.regularization[i] * lambda[i] - cs.bias[i];
            bilateral_velocity_residual = bilateral_velocity_residual.max(r.abs());
        }
    }

    for b in 0..n_bodies {
        twists[b] = Twist::from_vector(&Vector6::from_column_slice(&u_plus[6 * b..6 * b + 6]));
        poses[b] = match config.integrator {
            Integrator::SemiImplicitEuler => advance(&poses[b], &twists[b], dt),
            Integrator::MoreauJean => advance(&eval_poses[b], &twists[b], 0.5 * dt),
        };
    }
    aux.time += dt;

    Ok(StepReport {
        diagnostics,
        n_rows: n,
        n_contacts: cs.contacts.len(),
        dense_backend,
        lambda,
        momentum_residual,
        bilateral_velocity_residual,
        constraint_violation: bilateral_violation(model, poses),
    })
}

/// Step a [`WorldState`] in place.
pub fn step(model: &MechanismModel, state: &mut WorldState, config: &StepConfig) -> Result<StepReport, SolverError> {
    step_world(model, &mut state.poses, &mut state.twists, &mut state.aux, config)
}

/// Kinetic plus gravitational potential energy (potential zero at the origin).
pub fn total_energy(model: &MechanismModel, poses: &[Pose], twists: &[Twist]) -> f64 {
    model
        .bodies
        .iter()
        .enumerate()
        .map(|(b, body)| {
            let m = body.inertia.mass();
            let w = twists[b].angular;
            let iw = body.inertia.world_inertia(&poses[b].orientation) * w;
            0.5 * m * twists[b].linear.norm_squared() + 0.5 * w.dot(&iw) - m * model.gravity.dot(&poses[b].position)
        })
        .sum()
}

#[cfg(test)]
mod tests;
