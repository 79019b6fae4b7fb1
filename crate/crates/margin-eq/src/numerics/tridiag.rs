//! Thomas algorithm for tridiagonal systems.

use crate::error::{Error, Result};

/// One tridiagonal system `A x = rhs`.
///
/// `lower` and `upper` hold the sub- and super-diagonal (length `n - 1`),
/// `diag` the main diagonal (length `n`).
#[derive(Debug, Clone)]
pub struct TriDiagonalSystem {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TriDiagonalSystem {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>, rhs: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 || rhs.len() != n || lower.len() + 1 != n.max(1) || upper.len() + 1 != n.max(1) {
            return Err(Error::MalformedSparse {
                reason: format!(
                    "band lengths ({}, {}, {}) inconsistent with rhs length {}",
                    lower.len(),
                    diag.len(),
                    upper.len(),
                    rhs.len()
                ),
            });
        }
        Ok(Self {
            lower,
            diag,
            upper,
            rhs,
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `A x` for the residual check.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }
}

/// Forward-elimination/back-substitution sweep without pivoting.
///
/// Zero pivots surface as [`Error::SingularTridiagonal`]; the residual is
/// verified against `1e-10 (1 + ||rhs||_inf)` before returning.
pub fn solve_tridiagonal(sys: &TriDiagonalSystem) -> Result<Vec<f64>> {
    let n = sys.len();
    let mut c_star = vec![0.0; n];
    let mut d_star = vec![0.0; n];

    let mut pivot = sys.diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::SingularTridiagonal { row: 0 });
    }
    if n > 1 {
        c_star[0] = sys.upper[0] / pivot;
    }
    d_star[0] = sys.rhs[0] / pivot;

    for i in 1..n {
        pivot = sys.diag[i] - sys.lower[i - 1] * c_star[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::SingularTridiagonal { row: i });
        }
        if i + 1 < n {
            c_star[i] = sys.upper[i] / pivot;
        }
        d_star[i] = (sys.rhs[i] - sys.lower[i - 1] * d_star[i - 1]) / pivot;
    }

    let mut x = d_star;
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= c_star[i] * x[i + 1];
    }

    let rhs_norm = sys.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * (1.0 + rhs_norm);
    let resid = sys
        .matvec(&x)
        .iter()
        .zip(&sys.rhs)
        .fold(0.0f64, |m, (ax, b)| m.max((ax - b).abs()));
    if resid > tol || !resid.is_finite() {
        return Err(Error::LinearSolve {
            residual: resid,
            tol,
        });
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity() {
        let b = vec![3.0, -1.0, 2.5, 0.0];
        let sys = TriDiagonalSystem::new(vec![0.0; 3], vec![1.0; 4], vec![0.0; 3], b.clone())
            .unwrap();
        let x = solve_tridiagonal(&sys).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn laplacian_3x3() {
        // diag 2, off-diag -1, rhs (1, 0, 1) -> x = (1, 1, 1) by elimination.
        let sys = TriDiagonalSystem::new(
            vec![-1.0, -1.0],
            vec![2.0, 2.0, 2.0],
            vec![-1.0, -1.0],
            vec![1.0, 0.0, 1.0],
        )
        .unwrap();
        let x = solve_tridiagonal(&sys).unwrap();
        for v in x {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn scalar_system() {
        let sys = TriDiagonalSystem::new(vec![], vec![4.0], vec![], vec![-2.0]).unwrap();
        assert_eq!(solve_tridiagonal(&sys).unwrap(), vec![-0.5]);
    }

    #[test]
    fn zero_pivot_is_singular() {
        let sys = TriDiagonalSystem::new(
            vec![1.0, 1.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 1.0],
            vec![1.0, 1.0, 1.0],
        )
        .unwrap();
        assert!(matches!(
            solve_tridiagonal(&sys),
            Err(Error::SingularTridiagonal { row: 0 })
        ));
    }
}
