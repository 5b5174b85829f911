//! `loopdyn` command-line driver.

mod bench;
mod fk;
mod simulate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use loopdyn::scene::{BackendName, IntegratorName, StepOverrides};
use loopdyn::{bundled_scene, SceneDescription, BUNDLED_SCENES};

#[derive(Parser)]
#[command(name = "loopdyn", version, about = "Rigid-body simulation with loop closures and frictional contact")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Step one scene and write per-step records plus a summary.
    Simulate(simulate::SimulateArgs),
    /// Measure batched throughput for a list of world counts.
    Bench(bench::BenchArgs),
    /// Solve for consistent body poses given joint coordinates.
    Fk(fk::FkArgs),
    /// List the bundled scenes.
    Scenes,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum IntegratorArg {
    Euler,
    Moreau,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BackendArg {
    Dense,
    #[value(alias = "sparse")]
    MatrixFree,
    Auto,
}

/// Step and solver settings shared by `simulate` and `bench`. Anything left
/// unset keeps the scene's value.
#[derive(Args, Debug, Default, Clone)]
pub struct StepFlags {
    /// Time step in seconds.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum)]
    integrator: Option<IntegratorArg>,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Baumgarte factor.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// PADMM stopping tolerance.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Conjugate Residual budget per linear solve (matrix-free backend).
    #[arg(long)]
    cr_iters: Option<usize>,
    /// Run exactly this many PADMM iterations per step.
    #[arg(long)]
    fixed_iters: Option<usize>,
    /// Start every solve from zero instead of the previous reactions.
    #[arg(long)]
    cold: bool,
}

impl StepFlags {
    fn overrides(&self) -> StepOverrides {
        StepOverrides {
            dt: self.dt,
            integrator: self.integrator.map(|i| match i {
                IntegratorArg::Euler => IntegratorName::Euler,
                IntegratorArg::Moreau => IntegratorName::Moreau,
            }),
            backend: self.backend.map(|b| match b {
                BackendArg::Dense => BackendName::Dense,
                BackendArg::MatrixFree => BackendName::Sparse,
                BackendArg::Auto => BackendName::Auto,
            }),
            beta: self.beta,
            rho: self.rho,
            eta: self.eta,
            eps: self.eps,
            max_iters: self.max_iters,
            cr_iters: self.cr_iters,
            fixed_iters: self.fixed_iters,
            warm_start: self.cold.then_some(false),
            ..StepOverrides::default()
        }
    }

    /// Scene settings with the command-line flags applied on top.
    pub fn config(&self, scene: &SceneDescription) -> Result<loopdyn::StepConfig> {
        let mut cfg = scene.step_config();
        self.overrides().apply(&mut cfg);
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            bail!("time step must be positive, got {}", cfg.dt);
        }
        Ok(cfg)
    }
}

/// Load a scene from a file, or by name from the bundled set when no such
/// file exists.
pub fn load_scene(source: &Path) -> Result<SceneDescription> {
    if source.exists() {
        let text = std::fs::read_to_string(source).with_context(|| format!("reading {}", source.display()))?;
        return SceneDescription::from_json(&text).with_context(|| format!("parsing {}", source.display()));
    }
    let name = source.to_string_lossy();
    if BUNDLED_SCENES.iter().any(|(n, _)| *n == name) {
        return Ok(bundled_scene(&name)?);
    }
    bail!("no scene file {} and no bundled scene of that name (see `loopdyn scenes`)", source.display())
}

pub fn open_output(path: Option<&PathBuf>) -> Result<Option<Box<dyn std::io::Write>>> {
    Ok(match path {
        None => None,
        Some(p) if p.as_os_str() == "-" => Some(Box::new(std::io::BufWriter::new(std::io::stdout()))),
        Some(p) => {
            let file = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Some(Box::new(std::io::BufWriter::new(file)))
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate::run(&args),
        Command::Bench(args) => bench::run(&args),
        Command::Fk(args) => fk::run(&args),
        Command::Scenes => {
            for (name, _) in BUNDLED_SCENES {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
