use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::Args;
use loopdyn::{build_model, joint_coordinate, step, MechanismModel, StepReport, WorldState};
use serde::Serialize;

use crate::{load_scene, open_output, StepFlags};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scene file, or the name of a bundled scene.
    pub scene: PathBuf,
    /// Simulated time in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
    /// Where to write one JSON record per emitted step (`-` for stdout).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Emit every N-th step.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    #[command(flatten)]
    pub step: StepFlags,
}

#[derive(Serialize)]
pub struct BodyRecord<'a> {
    pub name: &'a str,
    pub position: [f64; 3],
    /// `[w, x, y, z]`.
    pub orientation: [f64; 4],
    pub linear_velocity: [f64; 3],
    pub angular_velocity: [f64; 3],
}

#[derive(Serialize)]
struct SolverRecord {
    iterations: usize,
    primal_residual: f64,
    dual_residual: f64,
    complementarity_residual: f64,
    restarts: usize,
    converged: bool,
    cr_iterations: usize,
}

#[derive(Serialize)]
struct StepRecord<'a> {
    step: usize,
    time: f64,
    bodies: Vec<BodyRecord<'a>>,
    joints: Vec<(&'a str, f64)>,
    constraint_violation: f64,
    momentum_residual: f64,
    bilateral_velocity_residual: f64,
    contacts: usize,
    solver: SolverRecord,
}

#[derive(Serialize)]
struct Summary<'a> {
    scene: &'a str,
    steps: usize,
    dt: f64,
    simulated_time: f64,
    wall_time_s: f64,
    steps_per_s: f64,
    max_constraint_violation: f64,
    max_momentum_residual: f64,
    mean_iterations: f64,
    max_iterations: usize,
    unconverged_steps: usize,
    final_bodies: Vec<BodyRecord<'a>>,
}

pub fn body_records<'a>(model: &'a MechanismModel, state: &WorldState) -> Vec<BodyRecord<'a>> {
    model
        .bodies
        .iter()
        .zip(state.poses.iter().zip(&state.twists))
        .map(|(b, (p, t))| {
            let q = p.orientation;
            BodyRecord {
                name: &b.name,
                position: p.position.into(),
                orientation: [q.w, q.i, q.j, q.k],
                linear_velocity: t.linear.into(),
                angular_velocity: t.angular.into(),
            }
        })
        .collect()
}

fn record<'a>(model: &'a MechanismModel, state: &WorldState, step: usize, report: &StepReport) -> StepRecord<'a> {
    let joints = model
        .joints
        .iter()
        .enumerate()
        .filter(|(_, j)| j.kind.has_coordinate())
        .map(|(i, j)| (j.name.as_str(), joint_coordinate(model, i, &state.poses).unwrap_or(f64::NAN)))
        .collect();
    let d = &report.diagnostics;
    StepRecord {
        step,
        time: state.time(),
        bodies: body_records(model, state),
        joints,
        constraint_violation: report.constraint_violation,
        momentum_residual: report.momentum_residual,
        bilateral_velocity_residual: report.bilateral_velocity_residual,
        contacts: report.n_contacts,
        solver: SolverRecord {
            iterations: d.iterations,
            primal_residual: d.primal_residual,
            dual_residual: d.dual_residual,
            complementarity_residual: d.complementarity_residual,
            restarts: d.restarts,
            converged: d.converged,
            cr_iterations: d.cr_iterations,
        },
    }
}

pub fn run(args: &SimulateArgs) -> Result<ExitCode> {
    if !(args.duration >= 0.0 && args.duration.is_finite()) {
        bail!("duration must be a non-negative number of seconds");
    }
    if args.stride == 0 {
        bail!("stride must be at least 1");
    }
    let scene = load_scene(&args.scene)?;
    let model = build_model(&scene)?;
    let cfg = args.step.config(&scene)?;
    let steps = (args.duration / cfg.dt).round() as usize;
    let mut out = open_output(args.output.as_ref())?;

    let mut state = WorldState::new(&model);
    let (mut max_f, mut max_kkt, mut total_iters, mut max_iters, mut unconverged) = (0.0f64, 0.0f64, 0usize, 0usize, 0usize);
    let start = Instant::now();
    for i in 0..steps {
        let report = step(&model, &mut state, &cfg)?;
        let d = &report.diagnostics;
        max_f = max_f.max(report.constraint_violation);
        max_kkt = max_kkt.max(report.momentum_residual);
        total_iters += d.iterations;
        max_iters = max_iters.max(d.iterations);
        unconverged += usize::from(!d.converged);
        if let Some(w) = out.as_mut() {
            if (i + 1) % args.stride == 0 || i + 1 == steps {
                serde_json::to_writer(&mut *w, &record(&model, &state, i + 1, &report))?;
                w.write_all(b"\n")?;
            }
        }
    }
    let wall = start.elapsed().as_secs_f64();
    if let Some(mut w) = out {
        w.flush()?;
    }

    let summary = Summary {
        scene: &scene.name,
        steps,
        dt: cfg.dt,
        simulated_time: state.time(),
        wall_time_s: wall,
        steps_per_s: if wall > 0.0 { steps as f64 / wall } else { 0.0 },
        max_constraint_violation: max_f,
        max_momentum_residual: max_kkt,
        mean_iterations: if steps > 0 { total_iters as f64 / steps as f64 } else { 0.0 },
        max_iterations: max_iters,
        unconverged_steps: unconverged,
        final_bodies: body_records(&model, &state),
    };
    let text = serde_json::to_string(&summary)?;
    // keep stdout machine-readable when it also carries the records
    if args.output.as_ref().is_some_and(|p| p.as_os_str() == "-") {
        eprintln!("{text}");
    } else {
        println!("{text}");
    }
    Ok(ExitCode::SUCCESS)
}
