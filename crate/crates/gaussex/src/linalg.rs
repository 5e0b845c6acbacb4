//! Dense symmetric matrices and Cholesky factorization with jitter escalation.
//!
//! Grids stay in the low thousands of points, so a dense lower-triangular
//! factorization is exact, simple, and fast enough. Near-degenerate kernels
//! (alpha close to 2, duplicate-like points after refinement, variance-0
//! origins) produce matrices that are PSD only up to rounding; the factorizer
//! escalates a diagonal jitter through a fixed schedule and reports the value
//! it actually applied.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::kernels::CovarianceKernel;

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    pub n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }
}

/// Builds `M[i][j] = kernel(p_i, p_j)` over the grid points.
pub fn build_covariance_matrix(kernel: &CovarianceKernel, grid: &GridSpec) -> SymMatrix {
    let n = grid.len();
    let mut m = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            m.set(i, j, kernel.eval(&grid.points[i], &grid.points[j]));
        }
    }
    m
}

/// Lower-triangular Cholesky factor together with the jitter that was added
/// to the diagonal to make the factorization succeed.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    pub n: usize,
    /// Row-major lower triangle, packed: row i occupies entries
    /// `i*(i+1)/2 ..= i*(i+1)/2 + i`.
    l: Vec<f64>,
    /// Diagonal jitter actually applied (0 when the matrix factorized as-is).
    pub jitter: f64,
}

impl CholeskyFactor {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j <= i);
        self.l[i * (i + 1) / 2 + j]
    }

    /// Computes `y = L z` in place of the output buffer.
    pub fn mul_vec(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for i in 0..self.n {
            let row = &self.l[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
            let mut acc = 0.0;
            for (lij, zj) in row.iter().zip(z.iter()) {
                acc += lij * zj;
            }
            out[i] = acc;
        }
    }
}

/// Relative jitter escalation schedule; each entry is multiplied by
/// `trace / n`.
pub const JITTER_SCHEDULE: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// Factorizes a symmetric matrix, escalating diagonal jitter through
/// [`JITTER_SCHEDULE`] until a factorization succeeds.
pub fn cholesky_factor(m: &SymMatrix) -> Result<CholeskyFactor> {
    let n = m.n;
    let scale = if n > 0 { m.trace() / n as f64 } else { 0.0 };
    // A zero-trace matrix (single point at the origin) still needs an
    // absolute fallback so the scheduled jitters are distinct.
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut last_pivot = 0;
    for &rel in JITTER_SCHEDULE.iter() {
        let jitter = rel * scale;
        match try_cholesky(m, jitter) {
            Ok(l) => {
                return Ok(CholeskyFactor { n, l, jitter });
            }
            Err(pivot) => last_pivot = pivot,
        }
    }
    Err(Error::NotPositiveDefinite {
        pivot: last_pivot,
        max_jitter: JITTER_SCHEDULE[JITTER_SCHEDULE.len() - 1] * scale,
    })
}

fn try_cholesky(m: &SymMatrix, jitter: f64) -> std::result::Result<Vec<f64>, usize> {
    let n = m.n;
    let mut l = vec![0.0; n * (n + 1) / 2];
    for i in 0..n {
        let row_i = i * (i + 1) / 2;
        for j in 0..=i {
            let row_j = j * (j + 1) / 2;
            let mut acc = m.get(i, j) + if i == j { jitter } else { 0.0 };
            for k in 0..j {
                acc -= l[row_i + k] * l[row_j + k];
            }
            if i == j {
                if acc <= 0.0 {
                    // A zero pivot is tolerable only for an exactly degenerate
                    // coordinate (such as t = 0 with zero jitter); treat
                    // nonpositive pivots as failure and let the schedule
                    // escalate.
                    return Err(i);
                }
                l[row_i + j] = acc.sqrt();
            } else {
                l[row_i + j] = acc / l[row_j + j];
            }
        }
    }
    Ok(l)
}
