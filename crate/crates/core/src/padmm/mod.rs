//! Proximal-ADMM solver for the dual contact problem
//!
//! ```text
//! find λ ∈ K,  v = D λ + v_f,  v + Γ(v) ∈ K*,  ⟨λ, v + Γ(v)⟩ = 0
//! ```
//!
//! The iteration runs in the preconditioned space `λ = P y`, where the
//! backend already holds `D̃ = P D P + (η+ρ) I`. Per iteration:
//!
//! ```text
//! s  = Γ(ẑ)
//! x  = −D̃⁻¹ (P v_f + s − η x − ρ ŷ − ẑ)
//! y  = Π_K(x − ẑ/ρ)
//! z  = ẑ − ρ (x − y)
//! ```
//!
//! followed by Nesterov extrapolation of `y` and `z` with adaptive restart.

mod cone;

pub use cone::{desaxce_shift, desaxce_shift_into, project_cone, project_cone_into, project_soc, ConeGroup, ConeProduct};

use crate::delassus::{DelassusBackend, Preconditioner};
use crate::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadmmConfig {
    /// Proximal weight η ≥ 0.
    pub eta: f64,
    /// Augmented-Lagrangian penalty ρ > 0.
    pub rho: f64,
    /// Stop once `max(r_p, r_d, r_c) < tolerance`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub acceleration: bool,
    pub restart: bool,
    /// Always run `max_iterations` iterations.
    pub fixed_iterations: bool,
}

impl Default for PadmmConfig {
    fn default() -> Self {
        Self {
            eta: 1e-6,
            rho: 1.0,
            tolerance: 1e-6,
            max_iterations: 200,
            acceleration: true,
            restart: true,
            fixed_iterations: false,
        }
    }
}

/// Summary of one solve, in the preconditioned space.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PadmmDiagnostics {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub complementarity_residual: f64,
    pub restarts: usize,
    pub converged: bool,
    /// CR iterations consumed by the matrix-free backend (zero when dense).
    pub cr_iterations: usize,
}

impl PadmmDiagnostics {
    pub fn combined_residual(&self) -> f64 {
        self.primal_residual.max(self.dual_residual).max(self.complementarity_residual)
    }
}

/// `a ↦ (1 + √(1 + 4a²)) / 2`.
pub fn nesterov_coefficient(a: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * a * a).sqrt())
}

/// Iterates of one PADMM run. `y_hat`/`z_hat` are the extrapolated points fed
/// into the next iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PadmmState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub s: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub z_hat: Vec<f64>,
    pub y_prev: Vec<f64>,
    pub z_prev: Vec<f64>,
    pub a: f64,
    pub r_p: f64,
    pub r_d: f64,
    pub r_c: f64,
    pub iteration: usize,
}

impl PadmmState {
    pub fn zeros(n: usize) -> Self {
        let v = vec![0.0; n];
        Self {
            x: v.clone(),
            y: v.clone(),
            z: v.clone(),
            s: v.clone(),
            y_hat: v.clone(),
            z_hat: v.clone(),
            y_prev: v.clone(),
            z_prev: v,
            a: 1.0,
            r_p: f64::INFINITY,
            r_d: f64::INFINITY,
            r_c: f64::INFINITY,
            iteration: 0,
        }
    }

    pub fn combined_residual(&self) -> f64 {
        self.r_p.max(self.r_d).max(self.r_c)
    }

    /// Advance the momentum coefficient and extrapolate `y` and `z` from
    /// their previous values.
    pub fn nesterov_update(&mut self) {
        let a_new = nesterov_coefficient(self.a);
        let w = (self.a - 1.0) / a_new;
        for i in 0..self.y.len() {
            self.y_hat[i] = self.y[i] + w * (self.y[i] - self.y_prev[i]);
            self.z_hat[i] = self.z[i] + w * (self.z[i] - self.z_prev[i]);
        }
        self.a = a_new;
    }

    /// Reset the momentum and drop the extrapolation.
    pub fn restart(&mut self) {
        self.a = 1.0;
        self.y_hat.copy_from_slice(&self.y);
        self.z_hat.copy_from_slice(&self.z);
    }
}

/// Groupwise complementarity between `y` and `z`: `|⟨y,z⟩| / max(‖y‖, ‖z‖)`
/// per contact, `min(|y_i|, |z_i|)` per limit row, zero for free rows.
pub fn complementarity(y: &[f64], z: &[f64], cones: &ConeProduct) -> f64 {
    let mut worst: f64 = 0.0;
    for g in cones.groups() {
        match *g {
            ConeGroup::Bilateral { .. } => {}
            ConeGroup::NonNegative { start, len } => {
                for i in start..start + len {
                    worst = worst.max(y[i].abs().min(z[i].abs()));
                }
            }
            ConeGroup::Soc { start, .. } => {
                let (yg, zg) = (&y[start..start + 3], &z[start..start + 3]);
                let scale = dot(yg, yg).sqrt().max(dot(zg, zg).sqrt());
                if scale > 0.0 {
                    worst = worst.max(dot(yg, zg).abs() / scale);
                }
            }
        }
    }
    worst
}

/// `(r_p, r_d, r_c) = (‖x − y‖∞, ρ‖y − y_prev‖∞, complementarity(y, z))`.
pub fn residuals(x: &[f64], y: &[f64], y_prev: &[f64], z: &[f64], rho: f64, cones: &ConeProduct) -> (f64, f64, f64) {
    let mut r_p: f64 = 0.0;
    let mut r_d: f64 = 0.0;
    for i in 0..x.len() {
        r_p = r_p.max((x[i] - y[i]).abs());
        r_d = r_d.max((y[i] - y_prev[i]).abs());
    }
    (r_p, rho * r_d, complementarity(y, z, cones))
}

/// Previous reactions, in physical (unscaled) units.
#[derive(Debug, Clone, Copy)]
pub struct WarmStart<'a> {
    pub lambda: &'a [f64],
    pub dual: &'a [f64],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PadmmSolution {
    /// Constraint impulses `λ*`.
    pub lambda: Vec<f64>,
    /// Dual iterate mapped back to velocity units, kept for warm starts.
    pub dual: Vec<f64>,
    pub diagnostics: PadmmDiagnostics,
}

/// Run PADMM on one world. `free_velocity` is `v_f` in physical units and
/// `precond` must be the scaling the backend was built with.
pub fn padmm_solve(
    backend: &mut DelassusBackend,
    free_velocity: &[f64],
    cones: &ConeProduct,
    precond: &Preconditioner,
    warm: Option<WarmStart>,
    config: &PadmmConfig,
) -> PadmmSolution {
    let n = free_velocity.len();
    assert_eq!(backend.dim(), n, "backend and free velocity disagree on the row count");
    let p = &precond.scale;
    let (eta, rho) = (config.eta, config.rho);
    let v_tilde: Vec<f64> = free_velocity.iter().zip(p).map(|(v, s)| v * s).collect();
    let cr_before = backend.cr_iterations();

    let mut st = PadmmState::zeros(n);
    if let Some(w) = warm {
        for i in 0..n {
            st.x[i] = w.lambda[i] / p[i];
            st.z[i] = w.dual[i] * p[i];
        }
        project_cone_into(&st.x, cones, &mut st.y);
    }
    st.y_prev.copy_from_slice(&st.y);
    st.z_prev.copy_from_slice(&st.z);
    st.y_hat.copy_from_slice(&st.y);
    st.z_hat.copy_from_slice(&st.z);

    let mut rhs = vec![0.0; n];
    let mut velocity = vec![0.0; n];
    let mut shifted = vec![0.0; n];
    let mut best = (f64::INFINITY, st.y.clone(), st.z.clone());
    let mut diag = PadmmDiagnostics::default();
    let mut last_combined = f64::INFINITY;

    while st.iteration < config.max_iterations {
        st.iteration += 1;
        desaxce_shift_into(&st.z_hat, cones, &mut st.s);
        for i in 0..n {
            rhs[i] = -(v_tilde[i] + st.s[i] - eta * st.x[i] - rho * st.y_hat[i] - st.z_hat[i]);
        }
        backend.solve(&rhs, &mut st.x);
        // velocity implied by the linear step: P D P x + ṽ + s
        for i in 0..n {
            velocity[i] = rhs[i] - (eta + rho) * st.x[i] + v_tilde[i] + st.s[i];
            shifted[i] = st.x[i] - st.z_hat[i] / rho;
        }
        std::mem::swap(&mut st.y_prev, &mut st.y);
        std::mem::swap(&mut st.z_prev, &mut st.z);
        project_cone_into(&shifted, cones, &mut st.y);
        for i in 0..n {
            st.z[i] = st.z_hat[i] - rho * (st.x[i] - st.y[i]);
        }

        let (r_p, r_d, _) = residuals(&st.x, &st.y, &st.y_hat, &st.z, rho, cones);
        st.r_p = r_p;
        st.r_d = r_d;
        st.r_c = complementarity(&st.y, &velocity, cones);
        let combined = st.combined_residual();
        if combined < best.0 {
            best.0 = combined;
            best.1.copy_from_slice(&st.y);
            best.2.copy_from_slice(&st.z);
            diag.primal_residual = st.r_p;
            diag.dual_residual = st.r_d;
            diag.complementarity_residual = st.r_c;
        }
        if combined < config.tolerance && !config.fixed_iterations {
            diag.converged = true;
            break;
        }

        if config.acceleration && config.restart && combined >= last_combined {
            st.restart();
            diag.restarts += 1;
        } else if config.acceleration {
            st.nesterov_update();
        } else {
            st.y_hat.copy_from_slice(&st.y);
            st.z_hat.copy_from_slice(&st.z);
        }
        last_combined = combined;
    }
    if config.fixed_iterations {
        diag.converged = st.combined_residual() < config.tolerance;
    }
    diag.iterations = st.iteration;
    diag.cr_iterations = backend.cr_iterations() - cr_before;
    // a run that stops early returns its best iterate instead of the last one
    let use_last = diag.converged || config.fixed_iterations || st.iteration == 0;
    let (y, z) = if use_last { (&st.y, &st.z) } else { (&best.1, &best.2) };
    if use_last && st.iteration > 0 {
        diag.primal_residual = st.r_p;
        diag.dual_residual = st.r_d;
        diag.complementarity_residual = st.r_c;
    }
    PadmmSolution {
        lambda: y.iter().zip(p).map(|(v, s)| v * s).collect(),
        dual: z.iter().zip(p).map(|(v, s)| v / s).collect(),
        diagnostics: diag,
    }
}
