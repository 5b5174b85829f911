//! Linear-solve backends for `D_{η,ρ} = P (J M⁻¹ Jᵀ + R) P + (η+ρ) I`.
//!
//! * [`DenseDelassus`] assembles the matrix explicitly (only coupled body
//!   pairs contribute) and caches a block-LLT factor for the whole step.
//! * [`MatrixFreeDelassus`] never forms the matrix. The preconditioner and
//!   `M⁻¹` are folded into two copies of the block-sparse Jacobian, so one
//!   operator application is two block-sparse passes plus a diagonal axpy.
//!   It is paired with a fixed-budget Conjugate Residual solver.

use nalgebra::{DMatrix, Matrix3, Vector6};

use crate::error::SolverError;
use crate::kinematics::{BlockSparseJacobian, ConstraintSet, Jacobian, JacobianBlock, JacobianRow};
use crate::linalg::{dot, norm_inf, BlockCholesky};
use crate::padmm::ConeGroup;
use crate::se3::{InertiaBlock, Pose};

/// Diagonals below this are floored before taking `1/√·`.
pub const DIAGONAL_FLOOR: f64 = 1e-12;

/// Systems with at most this many rows use the dense backend under `Auto`.
pub const DENSE_ROW_THRESHOLD: usize = 300;

/// Per-body inverse mass blocks `(1/m, R (Iᵇ)⁻¹ Rᵀ)` at one configuration.
#[derive(Debug, Clone)]
pub struct InverseMass {
    blocks: Vec<(f64, Matrix3<f64>)>,
}

impl InverseMass {
    pub fn new(inertias: &[InertiaBlock], poses: &[Pose]) -> Self {
        let blocks = inertias
            .iter()
            .zip(poses)
            .map(|(i, p)| (1.0 / i.mass(), i.inv_world_inertia(&p.orientation)))
            .collect();
        Self { blocks }
    }

    pub fn n_bodies(&self) -> usize {
        self.blocks.len()
    }

    pub fn apply_block(&self, body: usize, w: &Vector6<f64>) -> Vector6<f64> {
        let (inv_m, inv_i) = &self.blocks[body];
        let ang = inv_i * w.fixed_rows::<3>(3);
        Vector6::new(w[0] * inv_m, w[1] * inv_m, w[2] * inv_m, ang.x, ang.y, ang.z)
    }

    /// `M⁻¹ w` for a stacked 6·n_bodies vector.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; w.len()];
        for b in 0..self.blocks.len() {
            let r = self.apply_block(b, &Vector6::from_column_slice(&w[6 * b..6 * b + 6]));
            out[6 * b..6 * b + 6].copy_from_slice(r.as_slice());
        }
        out
    }

    fn dense(&self) -> DMatrix<f64> {
        let n = 6 * self.blocks.len();
        let mut m = DMatrix::zeros(n, n);
        for (b, (inv_m, inv_i)) in self.blocks.iter().enumerate() {
            for k in 0..3 {
                m[(6 * b + k, 6 * b + k)] = *inv_m;
            }
            m.view_mut((6 * b + 3, 6 * b + 3), (3, 3)).copy_from(inv_i);
        }
        m
    }
}

/// Diagonal Jacobi scaling `P = diag(D)^{-1/2}`, uniform within each contact.
#[derive(Debug, Clone, PartialEq)]
pub struct Preconditioner {
    pub scale: Vec<f64>,
}

impl Preconditioner {
    pub fn identity(n: usize) -> Self {
        Self { scale: vec![1.0; n] }
    }
}

fn row_diag(row: &JacobianRow, inv_mass: &InverseMass) -> f64 {
    row.iter().map(|b| b.coeffs.dot(&inv_mass.apply_block(b.body, &b.coeffs))).sum()
}

fn sparse_rows(cs: &ConstraintSet) -> std::borrow::Cow<'_, BlockSparseJacobian> {
    match &cs.jacobian {
        Jacobian::BlockSparse(s) => std::borrow::Cow::Borrowed(s),
        dense => std::borrow::Cow::Owned(dense.to_block_sparse()),
    }
}

/// Jacobi preconditioner computed from the diagonal of `J M⁻¹ Jᵀ + R`.
/// All three rows of a contact take the scale of its normal row.
pub fn jacobi_preconditioner(cs: &ConstraintSet, inv_mass: &InverseMass) -> Preconditioner {
    let jac = sparse_rows(cs);
    let mut scale: Vec<f64> = jac
        .rows
        .iter()
        .zip(&cs.regularization)
        .map(|(row, r)| 1.0 / (row_diag(row, inv_mass) + r).max(DIAGONAL_FLOOR).sqrt())
        .collect();
    for g in cs.cones.groups() {
        if let ConeGroup::Soc { start, .. } = *g {
            scale[start + 1] = scale[start];
            scale[start + 2] = scale[start];
        }
    }
    Preconditioner { scale }
}

/// Assemble `P (J M⁻¹ Jᵀ + R) P + shift·I` explicitly.
pub fn delassus_matrix(cs: &ConstraintSet, inv_mass: &InverseMass, precond: Option<&Preconditioner>, shift: f64) -> DMatrix<f64> {
    let n = cs.n_rows();
    let mut d = match &cs.jacobian {
        Jacobian::Dense(j) => {
            let jm = j * inv_mass.dense();
            &jm * j.transpose()
        }
        Jacobian::BlockSparse(s) => coupled_product(s, inv_mass),
    };
    for i in 0..n {
        d[(i, i)] += cs.regularization[i];
    }
    if let Some(p) = precond {
        for j in 0..n {
            for i in 0..n {
                d[(i, j)] *= p.scale[i] * p.scale[j];
            }
        }
    }
    for i in 0..n {
        d[(i, i)] += shift;
    }
    d
}

/// `J M⁻¹ Jᵀ` accumulated only over row pairs that share a body.
fn coupled_product(jac: &BlockSparseJacobian, inv_mass: &InverseMass) -> DMatrix<f64> {
    let n = jac.n_rows();
    let mut d = DMatrix::zeros(n, n);
    // rows touching each body, with the row's M⁻¹-weighted block
    let mut by_body: Vec<Vec<(usize, Vector6<f64>, Vector6<f64>)>> = vec![Vec::new(); jac.n_bodies];
    for (i, row) in jac.rows.iter().enumerate() {
        for b in row {
            by_body[b.body].push((i, b.coeffs, inv_mass.apply_block(b.body, &b.coeffs)));
        }
    }
    for entries in &by_body {
        for (i, ji, _) in entries {
            for (j, _, wj) in entries {
                d[(*i, *j)] += ji.dot(wj);
            }
        }
    }
    d
}

/// Explicit Delassus matrix with its cached factorization.
#[derive(Debug, Clone)]
pub struct DenseDelassus {
    matrix: DMatrix<f64>,
    factor: BlockCholesky,
}

impl DenseDelassus {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        self.factor.solve_in_place(rhs);
    }
}

/// Assemble and factorize; `shift` is `η+ρ`.
pub fn assemble_dense(
    cs: &ConstraintSet,
    inv_mass: &InverseMass,
    precond: Option<&Preconditioner>,
    shift: f64,
) -> Result<DenseDelassus, SolverError> {
    let matrix = delassus_matrix(cs, inv_mass, precond, shift);
    let factor = BlockCholesky::factor(&matrix)?;
    Ok(DenseDelassus { matrix, factor })
}

/// Solve `D_{η,ρ} x = rhs` with the cached factor.
pub fn dense_solve(dd: &DenseDelassus, rhs: &[f64]) -> Vec<f64> {
    let mut x = rhs.to_vec();
    dd.solve_in_place(&mut x);
    x
}

/// Something that applies a symmetric positive definite matrix.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&mut self, v: &[f64], out: &mut [f64]);
}

/// Matrix-free `P D P + (η+ρ) I` with pre-baked Jacobian copies.
#[derive(Debug, Clone)]
pub struct MatrixFreeDelassus {
    n_bodies: usize,
    /// Rows of `P J`.
    scaled: Vec<JacobianRow>,
    /// Rows of `P J M⁻¹`.
    folded: Vec<JacobianRow>,
    /// `p² R + (η+ρ)` per row.
    diag: Vec<f64>,
    scratch: Vec<f64>,
}

/// Fold the preconditioner and `M⁻¹` into copies of the Jacobian.
pub fn bake_jacobian(cs: &ConstraintSet, inv_mass: &InverseMass, precond: &Preconditioner, shift: f64) -> MatrixFreeDelassus {
    let jac = sparse_rows(cs);
    let mut scaled = Vec::with_capacity(jac.n_rows());
    let mut folded = Vec::with_capacity(jac.n_rows());
    for (row, &p) in jac.rows.iter().zip(&precond.scale) {
        let s: JacobianRow = row.iter().map(|b| JacobianBlock { body: b.body, coeffs: b.coeffs * p }).collect();
        let f: JacobianRow =
            s.iter().map(|b| JacobianBlock { body: b.body, coeffs: inv_mass.apply_block(b.body, &b.coeffs) }).collect();
        scaled.push(s);
        folded.push(f);
    }
    let diag = cs.regularization.iter().zip(&precond.scale).map(|(r, p)| r * p * p + shift).collect();
    MatrixFreeDelassus { n_bodies: jac.n_bodies, scaled, folded, diag, scratch: vec![0.0; 6 * jac.n_bodies] }
}

impl LinearOperator for MatrixFreeDelassus {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply(&mut self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(self.scratch.len(), 6 * self.n_bodies);
        self.scratch.iter_mut().for_each(|x| *x = 0.0);
        // pass 1: body impulses (P J)ᵀ v
        for (row, &vi) in self.scaled.iter().zip(v) {
            if vi == 0.0 {
                continue;
            }
            for b in row {
                let s = &mut self.scratch[6 * b.body..6 * b.body + 6];
                for k in 0..6 {
                    s[k] += b.coeffs[k] * vi;
                }
            }
        }
        // pass 2: (P J M⁻¹) · scratch, plus the diagonal term
        for (i, row) in self.folded.iter().enumerate() {
            let mut acc = self.diag[i] * v[i];
            for b in row {
                acc += b.coeffs.dot(&Vector6::from_column_slice(&self.scratch[6 * b.body..6 * b.body + 6]));
            }
            out[i] = acc;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrOutcome {
    pub iterations: usize,
    pub breakdown: bool,
    pub residual_norm: f64,
}

/// Conjugate Residual iterations on `A x = rhs` starting from the value in `x`.
///
/// Runs the full `max_iters` budget; stops early only when a denominator
/// vanishes. That is a breakdown unless the residual is already negligible.
pub fn cr_solve(op: &mut impl LinearOperator, rhs: &[f64], x: &mut [f64], max_iters: usize) -> CrOutcome {
    cr_iterate(op, rhs, x, max_iters, None)
}

/// As [`cr_solve`], also recording `‖r‖₂` before the first and after every iteration.
pub fn cr_solve_traced(op: &mut impl LinearOperator, rhs: &[f64], x: &mut [f64], max_iters: usize) -> (CrOutcome, Vec<f64>) {
    let mut trace = Vec::new();
    let out = cr_iterate(op, rhs, x, max_iters, Some(&mut trace));
    (out, trace)
}

fn cr_iterate(op: &mut impl LinearOperator, rhs: &[f64], x: &mut [f64], max_iters: usize, mut trace: Option<&mut Vec<f64>>) -> CrOutcome {
    let n = op.dim();
    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    for i in 0..n {
        r[i] = rhs[i] - r[i];
    }
    let mut ar = vec![0.0; n];
    op.apply(&r, &mut ar);
    let mut p = r.clone();
    let mut ap = ar.clone();
    let mut r_ar = dot(&r, &ar);
    if let Some(t) = trace.as_deref_mut() {
        t.push(dot(&r, &r).sqrt());
    }
    let negligible = |r: &[f64]| norm_inf(r) <= 1e-14 * norm_inf(rhs).max(1.0);

    let mut outcome = CrOutcome::default();
    for _ in 0..max_iters {
        let ap_ap = dot(&ap, &ap);
        if !(ap_ap > 0.0 && r_ar > 0.0) || !ap_ap.is_finite() {
            outcome.breakdown = !negligible(&r);
            break;
        }
        let alpha = r_ar / ap_ap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        op.apply(&r, &mut ar);
        let r_ar_next = dot(&r, &ar);
        let beta = r_ar_next / r_ar;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
            ap[i] = ar[i] + beta * ap[i];
        }
        r_ar = r_ar_next;
        outcome.iterations += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.push(dot(&r, &r).sqrt());
        }
    }
    outcome.residual_norm = dot(&r, &r).sqrt();
    outcome
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackendChoice {
    Dense,
    MatrixFree,
    #[default]
    Auto,
}

impl BackendChoice {
    pub fn resolve(self, n_rows: usize) -> BackendChoice {
        match self {
            BackendChoice::Auto if n_rows <= DENSE_ROW_THRESHOLD => BackendChoice::Dense,
            BackendChoice::Auto => BackendChoice::MatrixFree,
            other => other,
        }
    }
}

/// The linear-solve backend of one world for one step.
#[derive(Debug, Clone)]
pub enum DelassusBackend {
    Dense(DenseDelassus),
    MatrixFree { op: MatrixFreeDelassus, cr_iters: usize, consumed: usize, breakdowns: usize },
}

impl DelassusBackend {
    pub fn build(
        cs: &ConstraintSet,
        inv_mass: &InverseMass,
        precond: &Preconditioner,
        shift: f64,
        choice: BackendChoice,
        cr_iters: usize,
    ) -> Result<Self, SolverError> {
        Ok(match choice.resolve(cs.n_rows()) {
            BackendChoice::MatrixFree => DelassusBackend::MatrixFree {
                op: bake_jacobian(cs, inv_mass, precond, shift),
                cr_iters,
                consumed: 0,
                breakdowns: 0,
            },
            _ => DelassusBackend::Dense(assemble_dense(cs, inv_mass, Some(precond), shift)?),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            DelassusBackend::Dense(d) => d.dim(),
            DelassusBackend::MatrixFree { op, .. } => op.dim(),
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, DelassusBackend::Dense(_))
    }

    /// Solve `D_{η,ρ} x = rhs`. On entry `x` holds the warm start (used by
    /// the iterative backend only).
    pub fn solve(&mut self, rhs: &[f64], x: &mut [f64]) {
        match self {
            DelassusBackend::Dense(d) => {
                x.copy_from_slice(rhs);
                d.solve_in_place(x);
            }
            DelassusBackend::MatrixFree { op, cr_iters, consumed, breakdowns } => {
                let out = cr_solve(op, rhs, x, *cr_iters);
                *consumed += out.iterations;
                *breakdowns += usize::from(out.breakdown);
            }
        }
    }

    /// Total CR iterations spent so far (zero for the dense backend).
    pub fn cr_iterations(&self) -> usize {
        match self {
            DelassusBackend::Dense(_) => 0,
            DelassusBackend::MatrixFree { consumed, .. } => *consumed,
        }
    }
}
