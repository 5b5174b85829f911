use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::Args;
use loopdyn::se3::{Pose, Twist};
use loopdyn::{batch_step, build_model, step, MechanismModel, StepConfig, WorldBatch, WorldState};
use serde::Serialize;

use crate::{load_scene, StepFlags};

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// One or more scenes (files or bundled names); worlds cycle through them.
    #[arg(required = true)]
    pub scenes: Vec<PathBuf>,
    /// World counts to measure.
    #[arg(long, value_delimiter = ',', default_value = "1,8,64")]
    pub worlds: Vec<usize>,
    /// Steps per measurement.
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Also step every world alone and report the largest deviation.
    #[arg(long)]
    pub verify: bool,
    #[command(flatten)]
    pub step: StepFlags,
}

#[derive(Serialize)]
struct Row {
    worlds: usize,
    steps: usize,
    wall_time_s: f64,
    steps_per_s: f64,
    /// Steps per second times the number of worlds.
    throughput: f64,
    memory_per_world_bytes: usize,
    unconverged_world_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_solo_deviation: Option<f64>,
}

/// Rough per-world footprint: state plus the solver working set for the
/// largest row count seen in a probe step.
fn memory_estimate(model: &MechanismModel, cfg: &StepConfig) -> Result<usize> {
    let mut probe = WorldState::new(model);
    let rows = step(model, &mut probe, cfg)?.n_rows;
    let state = model.n_bodies() * (std::mem::size_of::<Pose>() + std::mem::size_of::<Twist>());
    let f = std::mem::size_of::<f64>();
    let solver = if cfg.backend.resolve(rows) == loopdyn::BackendChoice::MatrixFree {
        // two baked Jacobian copies with up to two 6-wide blocks per row
        rows * 2 * 2 * (6 * f + std::mem::size_of::<usize>())
    } else {
        2 * rows * rows * f
    };
    Ok(state + solver + 12 * rows * f)
}

fn max_deviation(a: &WorldState, b: &WorldState) -> f64 {
    let mut d = 0.0f64;
    for (p, q) in a.poses.iter().zip(&b.poses) {
        d = d.max((p.position - q.position).amax()).max((p.orientation.coords - q.orientation.coords).amax());
    }
    for (u, v) in a.twists.iter().zip(&b.twists) {
        d = d.max((u.to_vector() - v.to_vector()).amax());
    }
    d
}

pub fn run(args: &BenchArgs) -> Result<ExitCode> {
    if args.worlds.contains(&0) {
        bail!("world counts must be positive");
    }
    let scenes = args.scenes.iter().map(|p| load_scene(p)).collect::<Result<Vec<_>>>()?;
    let models = scenes.iter().map(|s| Ok(Arc::new(build_model(s)?))).collect::<Result<Vec<_>>>()?;
    let cfg = args.step.config(&scenes[0])?;
    if args.steps == 0 {
        return Ok(ExitCode::SUCCESS);
    }
    let mut memory = 0;
    for m in &models {
        memory = memory.max(memory_estimate(m, &cfg)?);
    }

    for &n in &args.worlds {
        let mut batch = WorldBatch::new();
        for w in 0..n {
            batch.push(models[w % models.len()].clone());
        }
        let mut unconverged = 0;
        let start = Instant::now();
        for _ in 0..args.steps {
            for result in batch_step(&mut batch, &cfg).into_iter().flatten() {
                result?;
            }
            unconverged += batch.converged.iter().filter(|c| !**c).count();
        }
        let wall = start.elapsed().as_secs_f64();

        let mut max_solo_deviation = None;
        if args.verify {
            let mut worst = 0.0f64;
            for w in 0..n {
                let model = &models[w % models.len()];
                let mut solo = WorldState::new(model);
                for _ in 0..args.steps {
                    step(model, &mut solo, &cfg)?;
                }
                worst = worst.max(max_deviation(&batch.world_state(w), &solo));
            }
            max_solo_deviation = Some(worst);
        }

        let steps_per_s = args.steps as f64 / wall;
        let row = Row {
            worlds: n,
            steps: args.steps,
            wall_time_s: wall,
            steps_per_s,
            throughput: steps_per_s * n as f64,
            memory_per_world_bytes: memory,
            unconverged_world_steps: unconverged,
            max_solo_deviation,
        };
        println!("{}", serde_json::to_string(&row)?);
    }
    Ok(ExitCode::SUCCESS)
}
