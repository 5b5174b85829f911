use super::*;
use crate::kinematics::{BlockSparseJacobian, Jacobian, JacobianBlock, JacobianRow};
use crate::padmm::ConeProduct;
use crate::scene::{build_model, bundled_model, bundled_scene};
use nalgebra::{DMatrix, DVector, Matrix3, UnitQuaternion};

const DT: f64 = 1.0 / 240.0;

fn no_external(model: &MechanismModel) -> Vec<Vector6<f64>> {
    vec![Vector6::zeros(); model.n_bodies()]
}

fn assemble_at_rest(model: &MechanismModel, twists: &[Twist]) -> ConstraintSet {
    let poses = model.initial_poses();
    assemble_constraints(model, &poses, twists, &[], &default_targets(model), DT, &ConstraintConfig::default())
}

/// Pendulum released from `angle` (rad) about the hinge.
fn pendulum_at(angle: f64) -> MechanismModel {
    let mut scene = bundled_scene("pendulum").unwrap();
    let q = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), -angle);
    scene.bodies[0].position = [angle.sin(), 0.0, -angle.cos()];
    scene.bodies[0].orientation = [q.w, q.i, q.j, q.k];
    build_model(&scene).unwrap()
}

#[test]
fn gravity_only_at_rest() {
    let m = bundled_model("freefall").unwrap();
    let h = free_forces(&m, &m.initial_poses(), &m.initial_twists(), &no_external(&m));
    assert_eq!(h, vec![0.0, 0.0, -9.81, 0.0, 0.0, 0.0]);
}

#[test]
fn principal_spin_has_no_gyroscopic_torque() {
    let mut m = bundled_model("freefall").unwrap();
    m.bodies[0].inertia = InertiaBlock::from_diagonal(1.0, Vector3::new(1.0, 2.0, 3.0)).unwrap();
    let twists = [Twist::new(Vector3::zeros(), Vector3::new(0.0, 4.0, 0.0))];
    let h = free_forces(&m, &m.initial_poses(), &twists, &no_external(&m));
    assert_eq!(&h[3..], &[0.0, 0.0, 0.0]);
}

#[test]
fn gyroscopic_torque_example() {
    let mut m = bundled_model("freefall").unwrap();
    m.gravity = Vector3::zeros();
    m.bodies[0].inertia = InertiaBlock::new(1.0, Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0))).unwrap();
    let poses = [Pose::identity()];
    let twists = [Twist::new(Vector3::zeros(), Vector3::new(1.0, 2.0, 3.0))];
    let h = free_forces(&m, &poses, &twists, &no_external(&m));
    assert_eq!(h, vec![0.0, 0.0, 0.0, -6.0, 6.0, -2.0]);
}

#[test]
fn external_wrench_is_added() {
    let m = bundled_model("freefall").unwrap();
    let ext = [Vector6::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0)];
    let h = free_forces(&m, &m.initial_poses(), &m.initial_twists(), &ext);
    assert_eq!(h, vec![1.0, 2.0, 3.0 - 9.81, 4.0, 5.0, 6.0]);
}

#[test]
fn free_velocity_vanishes_on_a_static_consistent_system() {
    let mut m = bundled_model("fourbar").unwrap();
    m.gravity = Vector3::zeros();
    let twists = m.initial_twists();
    let cs = assemble_at_rest(&m, &twists);
    let h = free_forces(&m, &m.initial_poses(), &twists, &no_external(&m));
    let v_f = free_velocity(&cs, &h, &twists, DT, &m.inertias(), &m.initial_poses());
    assert!(crate::linalg::norm_inf(&v_f) < 1e-6);
}

#[test]
fn free_velocity_single_row_on_vz() {
    let m = bundled_model("freefall").unwrap();
    let twists = [Twist::new(Vector3::new(0.0, 0.0, 1.5), Vector3::zeros())];
    let row: JacobianRow = [JacobianBlock { body: 0, coeffs: Vector6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0) }].into_iter().collect();
    let mut cones = ConeProduct::new();
    cones.push_bilateral(1);
    let cs = ConstraintSet {
        n_bodies: 1,
        keys: vec![RowKey::Joint { joint: 0, row: 0 }],
        jacobian: Jacobian::BlockSparse(BlockSparseJacobian { n_bodies: 1, rows: vec![row] }),
        residual: vec![0.0],
        bias: vec![0.0],
        regularization: vec![0.0],
        cones,
        n_joint_rows: 1,
        n_drive_rows: 0,
        n_limit_rows: 0,
        contacts: Vec::new(),
    };
    let h = free_forces(&m, &m.initial_poses(), &twists, &no_external(&m));
    let v_f = free_velocity(&cs, &h, &twists, DT, &m.inertias(), &m.initial_poses());
    assert!((v_f[0] - (1.5 - 9.81 * DT)).abs() < 1e-15);
}

#[test]
fn free_velocity_matches_dense_evaluation() {
    let m = bundled_model("fourbar").unwrap();
    let poses = m.initial_poses();
    let twists: Vec<Twist> = (0..3).map(|i| Twist::new(Vector3::new(0.1 * i as f64, -0.2, 0.3), Vector3::new(0.5, -0.1 * i as f64, 1.0))).collect();
    let cs = assemble_at_rest(&m, &twists);
    let h = free_forces(&m, &poses, &twists, &no_external(&m));
    let v_f = free_velocity(&cs, &h, &twists, DT, &m.inertias(), &poses);

    let n = 6 * m.n_bodies();
    let mut mass = DMatrix::zeros(n, n);
    for (b, body) in m.bodies.iter().enumerate() {
        mass.view_mut((6 * b, 6 * b), (6, 6)).copy_from(&world_mass_block(&body.inertia, &poses[b].orientation));
    }
    let u = DVector::from_iterator(n, twists.iter().flat_map(|t| t.to_vector().iter().copied().collect::<Vec<_>>()));
    let acc = mass.lu().solve(&DVector::from_column_slice(&h)).unwrap();
    let expected = cs.jacobian.to_dense() * (u + acc * DT) - DVector::from_column_slice(&cs.bias);
    let scale = expected.amax().max(1.0);
    assert!(crate::linalg::max_abs_diff(&v_f, expected.as_slice()) < 1e-12 * scale);
}

#[test]
fn semi_implicit_ballistics_is_exact() {
    let m = bundled_model("freefall").unwrap();
    let mut s = WorldState::new(&m);
    let cfg = StepConfig::default();
    let z0 = s.poses[0].position.z;
    for n in 1..=100 {
        step(&m, &mut s, &cfg).unwrap();
        let nf = n as f64;
        assert!((s.twists[0].linear.z + 9.81 * nf * DT).abs() < 1e-12);
        assert!((s.poses[0].position.z - (z0 - 9.81 * DT * DT * nf * (nf + 1.0) / 2.0)).abs() < 1e-12);
    }
    assert!((s.time() - 100.0 * DT).abs() < 1e-15);
}

#[test]
fn pendulum_holds_its_hinge_and_energy() {
    let m = bundled_model("pendulum").unwrap();
    let mut s = WorldState::new(&m);
    let cfg = StepConfig::default();
    let e0 = total_energy(&m, &s.poses, &s.twists);
    // normalise by the energy available above the lowest point
    let swing = e0 - (-9.81);
    let (mut f, mut drift) = (0.0f64, 0.0f64);
    for _ in 0..2400 {
        let r = step(&m, &mut s, &cfg).unwrap();
        f = f.max(r.constraint_violation);
        drift = drift.max((total_energy(&m, &s.poses, &s.twists) - e0).abs());
    }
    assert!(f < 1e-5, "‖f‖∞ = {f}");
    assert!(drift < 0.02 * swing, "drift {drift}");
}

#[test]
fn small_swing_period_matches_compound_pendulum() {
    let m = pendulum_at(5f64.to_radians());
    let mut s = WorldState::new(&m);
    let cfg = StepConfig::default();
    let mut crossings = Vec::new();
    let mut prev = s.poses[0].position.x;
    for _ in 0..2400 {
        step(&m, &mut s, &cfg).unwrap();
        let x = s.poses[0].position.x;
        if prev < 0.0 && x >= 0.0 {
            // interpolate the upward zero crossing inside the step
            crossings.push(s.time() - DT * x / (x - prev));
        }
        prev = x;
    }
    assert!(crossings.len() >= 3);
    let measured = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    let (mass, length, inertia) = (1.0f64, 1.0f64, 0.004f64);
    let expected = 2.0 * std::f64::consts::PI * ((mass * length * length + inertia) / (mass * 9.81 * length)).sqrt();
    assert!((measured - expected).abs() < 0.01 * expected, "{measured} vs {expected}");
}

#[test]
fn integrators_agree_for_small_steps() {
    let m = bundled_model("pendulum").unwrap();
    let dt = 1e-4;
    let run = |integrator| {
        let cfg = StepConfig { dt, integrator, ..StepConfig::default() };
        let mut s = WorldState::new(&m);
        for _ in 0..1000 {
            step(&m, &mut s, &cfg).unwrap();
        }
        (s.poses[0].position, s.twists[0].linear)
    };
    let (q_semi, u_semi) = run(Integrator::SemiImplicitEuler);
    let (q_mj, _) = run(Integrator::MoreauJean);
    // Moreau-Jean moves half a step on u⁻ and half on u⁺, so its positions
    // trail semi-implicit Euler by the telescoped sum (dt/2)(u_N − u_0)
    let offset = u_semi * (0.5 * dt);
    let d = (q_semi - offset - q_mj).amax();
    assert!(d < 1e-5, "{d}");
}

#[test]
fn stepping_is_deterministic() {
    for name in ["inclined-box", "double-fourbar"] {
        let m = bundled_model(name).unwrap();
        let cfg = StepConfig::default();
        let run = || {
            let mut s = WorldState::new(&m);
            let mut reports = Vec::new();
            for _ in 0..120 {
                reports.push(step(&m, &mut s, &cfg).unwrap());
            }
            (s, reports)
        };
        assert_eq!(run(), run());
    }
}

#[test]
fn momentum_balance_holds_every_step() {
    let m = bundled_model("inclined-box").unwrap();
    let mut s = WorldState::new(&m);
    for _ in 0..240 {
        let r = step(&m, &mut s, &StepConfig::default()).unwrap();
        assert!(r.momentum_residual < 1e-12);
    }
}

#[test]
fn bilateral_rows_meet_their_target_velocity() {
    let m = bundled_model("serial-chain-10").unwrap();
    let mut s = WorldState::new(&m);
    let cfg = StepConfig::default();
    for _ in 0..240 {
        let r = step(&m, &mut s, &cfg).unwrap();
        if r.diagnostics.converged {
            assert!(r.bilateral_velocity_residual <= 1e-5, "{}", r.bilateral_velocity_residual);
        }
    }
}

#[test]
fn pd_drive_settles_on_target() {
    let mut m = bundled_model("fourbar").unwrap();
    m.gravity = Vector3::zeros();
    let crank = m.joint_index("crank").unwrap();
    let mut s = WorldState::new(&m);
    s.aux.targets[crank] = JointTarget { position: 0.3, velocity: 0.0 };
    for _ in 0..2400 {
        step(&m, &mut s, &StepConfig::default()).unwrap();
    }
    let q = crate::model::joint_coordinate(&m, crank, &s.poses).unwrap();
    assert!((q - 0.3).abs() < 1e-3, "{q}");
    assert!(s.twists.iter().all(|t| t.angular.norm() < 1e-3));
}

#[test]
fn mismatched_state_is_rejected() {
    let m = bundled_model("fourbar").unwrap();
    let mut s = WorldState::new(&m);
    s.poses.pop();
    let err = step(&m, &mut s, &StepConfig::default()).unwrap_err();
    assert!(matches!(err, SolverError::Dimension { expected: 3, got: 2 }));
}

#[test]
fn warm_start_cache_tracks_rows_and_contacts() {
    let m = bundled_model("inclined-box").unwrap();
    let mut s = WorldState::new(&m);
    let r = step(&m, &mut s, &StepConfig::default()).unwrap();
    assert_eq!(s.aux.cache.contacts.entries.len(), r.n_contacts);
    assert!(r.n_contacts >= 4);
    let cold = StepConfig { warm_start: false, ..StepConfig::default() };
    let mut t = WorldState::new(&m);
    step(&m, &mut t, &cold).unwrap();
    let warm_iters = step(&m, &mut s, &StepConfig::default()).unwrap().diagnostics.iterations;
    let cold_iters = step(&m, &mut t, &cold).unwrap().diagnostics.iterations;
    assert!(warm_iters < cold_iters);
}
