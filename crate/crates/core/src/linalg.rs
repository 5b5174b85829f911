//! Small dense kernels: a blocked Cholesky (block-LLT) factorization and a
//! handful of slice helpers shared by the solvers.

use nalgebra::DMatrix;

use crate::error::SolverError;

pub const DEFAULT_BLOCK: usize = 16;

/// Lower-triangular factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct BlockCholesky {
    l: DMatrix<f64>,
}

impl BlockCholesky {
    pub fn factor(a: &DMatrix<f64>) -> Result<Self, SolverError> {
        Self::factor_blocked(a, DEFAULT_BLOCK)
    }

    /// Left-looking blocked factorization. Only the lower triangle of `a` is read.
    pub fn factor_blocked(a: &DMatrix<f64>, block: usize) -> Result<Self, SolverError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(SolverError::Dimension { expected: n, got: a.ncols() });
        }
        let block = block.max(1);
        let mut l = a.lower_triangle();
        let mut kb = 0;
        while kb < n {
            let ke = (kb + block).min(n);
            // update the whole block column with the already factored columns
            for j in kb..ke {
                for p in 0..kb {
                    let ljp = l[(j, p)];
                    if ljp == 0.0 {
                        continue;
                    }
                    for i in j..n {
                        l[(i, j)] -= l[(i, p)] * ljp;
                    }
                }
            }
            // unblocked factorization of the diagonal block, panel rows carried along
            for j in kb..ke {
                for p in kb..j {
                    let ljp = l[(j, p)];
                    if ljp == 0.0 {
                        continue;
                    }
                    for i in j..n {
                        l[(i, j)] -= l[(i, p)] * ljp;
                    }
                }
                let d = l[(j, j)];
                if !(d > 0.0) || !d.is_finite() {
                    return Err(SolverError::NotPositiveDefinite { pivot: j, value: d });
                }
                let s = d.sqrt();
                l[(j, j)] = s;
                for i in j + 1..n {
                    l[(i, j)] /= s;
                }
            }
            kb = ke;
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn factor_matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// Forward then backward substitution, overwriting `b` with `A⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        assert_eq!(b.len(), n, "rhs length");
        let l = &self.l;
        for j in 0..n {
            let xj = b[j] / l[(j, j)];
            b[j] = xj;
            let col = l.column(j);
            for i in j + 1..n {
                b[i] -= col[i] * xj;
            }
        }
        for j in (0..n).rev() {
            let col = l.column(j);
            let mut acc = b[j];
            for i in j + 1..n {
                acc -= col[i] * b[i];
            }
            b[j] = acc / l[(j, j)];
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
