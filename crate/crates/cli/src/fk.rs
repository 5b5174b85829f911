use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use loopdyn::{build_model, fk_solve, joint_coordinate, FkConfig, FkProblem};
use serde::Serialize;

use crate::load_scene;

#[derive(Args, Debug)]
pub struct FkArgs {
    /// Scene file, or the name of a bundled scene.
    pub scene: PathBuf,
    /// Joint coordinate to hold, as `NAME=VALUE`. Repeatable.
    #[arg(long = "target", short = 't', value_name = "NAME=VALUE")]
    pub targets: Vec<String>,
    /// Read angular targets in degrees instead of radians.
    #[arg(long)]
    pub degrees: bool,
    /// Stop once the residual infinity norm drops below this.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
}

#[derive(Serialize)]
struct BodyPose<'a> {
    name: &'a str,
    position: [f64; 3],
    /// `[w, x, y, z]`.
    orientation: [f64; 4],
}

#[derive(Serialize)]
struct Output<'a> {
    converged: bool,
    residual: f64,
    iterations: usize,
    bodies: Vec<BodyPose<'a>>,
    joints: Vec<(&'a str, f64)>,
}

fn parse_target(s: &str) -> Result<(&str, f64)> {
    let (name, value) = s.split_once('=').ok_or_else(|| anyhow!("target `{s}` is not of the form NAME=VALUE"))?;
    let value: f64 = value.trim().parse().with_context(|| format!("target `{s}` has a malformed value"))?;
    Ok((name.trim(), value))
}

pub fn run(args: &FkArgs) -> Result<ExitCode> {
    let scene = load_scene(&args.scene)?;
    let model = build_model(&scene)?;

    let mut targets = Vec::with_capacity(args.targets.len());
    for t in &args.targets {
        let (name, value) = parse_target(t)?;
        let j = model.joint_index(name).ok_or_else(|| anyhow!("scene has no joint named `{name}`"))?;
        let kind = model.joints[j].kind;
        if !kind.has_coordinate() {
            bail!("joint `{name}` is {} and has no scalar coordinate", kind.name());
        }
        let value = if args.degrees && kind == loopdyn::JointKind::Revolute { value.to_radians() } else { value };
        targets.push((j, value));
    }

    let problem = FkProblem { model: &model, targets, initial: model.initial_poses() };
    let config = FkConfig { tolerance: args.tolerance, max_iterations: args.max_iters, ..FkConfig::default() };
    let result = fk_solve(&problem, &config);

    let bodies = model
        .bodies
        .iter()
        .zip(&result.poses)
        .map(|(b, p)| {
            let q = p.orientation;
            BodyPose { name: &b.name, position: p.position.into(), orientation: [q.w, q.i, q.j, q.k] }
        })
        .collect();
    let joints = model
        .joints
        .iter()
        .enumerate()
        .filter(|(_, j)| j.kind.has_coordinate())
        .map(|(i, j)| (j.name.as_str(), joint_coordinate(&model, i, &result.poses).unwrap_or(f64::NAN)))
        .collect();
    let out = Output { converged: result.converged, residual: result.residual, iterations: result.iterations, bodies, joints };
    println!("{}", serde_json::to_string_pretty(&out)?);

    if result.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: no consistent configuration found (residual {:.3e})", result.residual);
        Ok(ExitCode::FAILURE)
    }
}
