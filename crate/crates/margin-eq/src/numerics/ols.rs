//! Ordinary least squares for the cyclicality regressions.
//!
//! Householder QR on the (tall, thin) design matrix; standard errors from
//! the triangular factor. Columns are passed explicitly, intercept included
//! by the caller.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_obs: usize,
    pub resid_var: f64,
}

/// Fits `y ~ X` where `x_cols` are the columns of `X`.
pub fn ols(y: &[f64], x_cols: &[Vec<f64>]) -> Result<OlsFit> {
    let p = x_cols.len();
    let m = y.len();
    if p == 0 || m < p {
        return Err(Error::DegenerateSample {
            reason: format!("{m} observations for {p} regressors"),
        });
    }
    for (j, col) in x_cols.iter().enumerate() {
        if col.len() != m {
            return Err(Error::DegenerateSample {
                reason: format!("column {j} length {} != {m}", col.len()),
            });
        }
    }

    // Column-major working copy of [X | y].
    let mut a: Vec<Vec<f64>> = x_cols.to_vec();
    let mut qty = y.to_vec();

    // Householder reflectors column by column.
    let mut r = vec![vec![0.0; p]; p];
    for j in 0..p {
        let col_tail_norm: f64 = a[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let col_scale: f64 = a[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if col_tail_norm <= 1e-13 * col_scale.max(1.0) {
            return Err(Error::Collinear { col: j });
        }
        let alpha = -col_tail_norm * a[j][j].signum();
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let v_norm_sq: f64 = v.iter().map(|x| x * x).sum();
        if v_norm_sq > 0.0 {
            for target in a.iter_mut().skip(j).map(|c| &mut c[j..]).chain(
                std::iter::once(&mut qty[j..]),
            ) {
                let dot: f64 = target.iter().zip(&v).map(|(t, vv)| t * vv).sum();
                let f = 2.0 * dot / v_norm_sq;
                for (t, vv) in target.iter_mut().zip(&v) {
                    *t -= f * vv;
                }
            }
        }
        for i in 0..=j {
            r[i][j] = a[j][i];
        }
    }

    // Back substitution for the coefficients.
    let mut coef = vec![0.0; p];
    for i in (0..p).rev() {
        let mut s = qty[i];
        for c in (i + 1)..p {
            s -= r[i][c] * coef[c];
        }
        if r[i][i].abs() <= 1e-13 {
            return Err(Error::Collinear { col: i });
        }
        coef[i] = s / r[i][i];
    }

    // Residual variance from the tail of Q^T y.
    let ssr: f64 = qty[p..].iter().map(|v| v * v).sum();
    let dof = m.saturating_sub(p).max(1);
    let resid_var = ssr / dof as f64;

    // (X^T X)^{-1} = R^{-1} R^{-T}; invert R by back substitution.
    let mut rinv = vec![vec![0.0; p]; p];
    for j in 0..p {
        rinv[j][j] = 1.0 / r[j][j];
        for i in (0..j).rev() {
            let mut s = 0.0;
            for c in (i + 1)..=j {
                s += r[i][c] * rinv[c][j];
            }
            rinv[i][j] = -s / r[i][i];
        }
    }
    let stderr = (0..p)
        .map(|i| {
            let var: f64 = (i..p).map(|c| rinv[i][c] * rinv[i][c]).sum();
            (var * resid_var).sqrt()
        })
        .collect();

    Ok(OlsFit {
        coef,
        stderr,
        n_obs: m,
        resid_var,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_recovery_on_noiseless_data() {
        let n = 57;
        let x1: Vec<f64> = (0..n).map(|i| (i as f64 * 0.13).sin()).collect();
        let x2: Vec<f64> = (0..n).map(|i| (i as f64 * 0.29).cos()).collect();
        let ones = vec![1.0; n];
        let truth = [0.7, -2.3, 0.045];
        let y: Vec<f64> = (0..n)
            .map(|i| truth[0] + truth[1] * x1[i] + truth[2] * x2[i])
            .collect();
        let fit = ols(&y, &[ones, x1, x2]).unwrap();
        for (c, t) in fit.coef.iter().zip(&truth) {
            assert_abs_diff_eq!(c, t, epsilon = 1e-10);
        }
        assert!(fit.resid_var < 1e-20);
    }

    #[test]
    fn collinear_design_rejected() {
        let n = 20;
        let x1: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let x2: Vec<f64> = x1.iter().map(|v| 2.0 * v).collect();
        let y = vec![1.0; n];
        assert!(matches!(
            ols(&y, &[x1, x2]),
            Err(Error::Collinear { .. })
        ));
    }

    #[test]
    fn standard_errors_match_textbook_simple_regression() {
        // y = a + b x + e with known residuals; compare against the
        // closed-form OLS variance s^2 / sum (x - xbar)^2.
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.0 + 0.5 * v).collect();
        let mut y_noisy = y.clone();
        // Fixed residual pattern orthogonal-ish to x.
        for (i, v) in y_noisy.iter_mut().enumerate() {
            *v += if i % 2 == 0 { 0.1 } else { -0.1 };
        }
        let ones = vec![1.0; x.len()];
        let fit = ols(&y_noisy, &[ones, x.clone()]).unwrap();

        let n = x.len() as f64;
        let xbar = x.iter().sum::<f64>() / n;
        let sxx: f64 = x.iter().map(|v| (v - xbar) * (v - xbar)).sum();
        let b = x
            .iter()
            .zip(&y_noisy)
            .map(|(xv, yv)| (xv - xbar) * yv)
            .sum::<f64>()
            / sxx;
        let a = y_noisy.iter().sum::<f64>() / n - b * xbar;
        let ssr: f64 = x
            .iter()
            .zip(&y_noisy)
            .map(|(xv, yv)| {
                let e = yv - a - b * xv;
                e * e
            })
            .sum();
        let s2 = ssr / (n - 2.0);
        assert_abs_diff_eq!(fit.coef[1], b, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.stderr[1], (s2 / sxx).sqrt(), epsilon = 1e-12);
    }
}
