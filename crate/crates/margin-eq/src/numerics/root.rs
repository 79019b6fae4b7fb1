//! Root finding for small dense nonlinear systems.
//!
//! Damped Newton with a forward-difference Jacobian; when the damped step
//! stalls, a Powell dogleg step on the Gauss-Newton model takes over. Sized
//! for the `N+1`-dimensional adjustment/volatility systems (`N <= 3`), but
//! written for any small dimension.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Relative forward-difference step: `fd_step * (1 + |z_k|)`.
    pub fd_step: f64,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            fd_step: 1e-7,
        }
    }
}

/// A square residual map with an initial guess and stopping parameters.
pub struct RootProblem<F> {
    pub residual: F,
    pub guess: Vec<f64>,
    pub options: RootOptions,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn norm2_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Dense LU solve with partial pivoting; `a` is row-major `n x n`.
pub(crate) fn lu_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Result<()> {
    for col in 0..n {
        let mut p = col;
        let mut p_val = a[col * n + col].abs();
        for r in (col + 1)..n {
            let v = a[r * n + col].abs();
            if v > p_val {
                p = r;
                p_val = v;
            }
        }
        if p_val == 0.0 || !p_val.is_finite() {
            return Err(Error::SingularMatrix { col });
        }
        if p != col {
            for c in 0..n {
                a.swap(col * n + c, p * n + c);
            }
            b.swap(col, p);
        }
        let pivot = a[col * n + col];
        for r in (col + 1)..n {
            let m = a[r * n + col] / pivot;
            if m != 0.0 {
                for c in (col + 1)..n {
                    a[r * n + c] -= m * a[col * n + c];
                }
                b[r] -= m * b[col];
            }
            a[r * n + col] = 0.0;
        }
    }
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in (r + 1)..n {
            s -= a[r * n + c] * b[c];
        }
        b[r] = s / a[r * n + r];
    }
    Ok(())
}

/// Finds `z` with `||F(z)||_inf <= tol`.
///
/// Non-convergence returns the best iterate and its residual so callers can
/// report where a point solve got stuck.
pub fn find_root<F>(problem: RootProblem<F>) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let RootProblem {
        mut residual,
        guess,
        options,
    } = problem;
    let n = guess.len();
    let mut z = guess;
    let mut fz = vec![0.0; n];
    residual(&z, &mut fz);

    let mut best_z = z.clone();
    let mut best_norm = inf_norm(&fz);
    let mut radius = 1.0f64;

    let mut jac = vec![0.0; n * n];
    let mut f_pert = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut f_trial = vec![0.0; n];

    for iter in 0..options.max_iter {
        let norm = inf_norm(&fz);
        if norm <= options.tol {
            return Ok(z);
        }
        if norm < best_norm {
            best_norm = norm;
            best_z.copy_from_slice(&z);
        }

        // Forward-difference Jacobian, column by column.
        for k in 0..n {
            let h = options.fd_step * (1.0 + z[k].abs());
            let saved = z[k];
            z[k] = saved + h;
            residual(&z, &mut f_pert);
            z[k] = saved;
            let inv_h = 1.0 / h;
            for r in 0..n {
                jac[r * n + k] = (f_pert[r] - fz[r]) * inv_h;
            }
        }

        // Newton direction; Levenberg regularization if the Jacobian is singular.
        let mut step = {
            let mut a = jac.clone();
            let mut rhs: Vec<f64> = fz.iter().map(|f| -f).collect();
            match lu_solve(&mut a, &mut rhs, n) {
                Ok(()) if rhs.iter().all(|v| v.is_finite()) => Some(rhs),
                _ => None,
            }
        };
        if step.is_none() {
            let mut jtj = vec![0.0; n * n];
            let mut jtf = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for r in 0..n {
                        s += jac[r * n + i] * jac[r * n + j];
                    }
                    jtj[i * n + j] = s;
                }
                let mut s = 0.0;
                for r in 0..n {
                    s += jac[r * n + i] * fz[r];
                }
                jtf[i] = -s;
            }
            let scale = (0..n).map(|i| jtj[i * n + i]).fold(0.0f64, f64::max);
            let lambda = 1e-8 * scale.max(1e-300);
            for i in 0..n {
                jtj[i * n + i] += lambda;
            }
            let mut rhs = jtf;
            if lu_solve(&mut jtj, &mut rhs, n).is_ok() && rhs.iter().all(|v| v.is_finite()) {
                step = Some(rhs);
            }
        }
        let newton = match step {
            Some(s) => s,
            None => {
                return Err(Error::RootNonConvergence {
                    iters: iter,
                    residual: best_norm,
                    best: best_z,
                })
            }
        };

        // Damped Newton: backtrack on the residual norm.
        let mut accepted = false;
        let mut lambda = 1.0f64;
        for _ in 0..10 {
            for i in 0..n {
                trial[i] = z[i] + lambda * newton[i];
            }
            residual(&trial, &mut f_trial);
            let t_norm = inf_norm(&f_trial);
            if t_norm.is_finite() && t_norm < (1.0 - 1e-4 * lambda) * norm {
                z.copy_from_slice(&trial);
                fz.copy_from_slice(&f_trial);
                accepted = true;
                radius = (2.0 * norm2_sq(&newton).sqrt()).max(radius);
                break;
            }
            lambda *= 0.5;
        }
        if accepted {
            continue;
        }

        // Dogleg on the Gauss-Newton model within the trust radius.
        let mut grad = vec![0.0; n]; // J^T F
        for i in 0..n {
            let mut s = 0.0;
            for r in 0..n {
                s += jac[r * n + i] * fz[r];
            }
            grad[i] = s;
        }
        let jg: Vec<f64> = (0..n)
            .map(|r| (0..n).map(|c| jac[r * n + c] * grad[c]).sum())
            .collect();
        let g_sq = norm2_sq(&grad);
        let jg_sq = norm2_sq(&jg);
        if g_sq == 0.0 || jg_sq == 0.0 {
            return Err(Error::RootNonConvergence {
                iters: iter,
                residual: best_norm,
                best: best_z,
            });
        }
        let alpha = g_sq / jg_sq;
        let cauchy: Vec<f64> = grad.iter().map(|g| -alpha * g).collect();
        let newton_len = norm2_sq(&newton).sqrt();
        let cauchy_len = norm2_sq(&cauchy).sqrt();
        radius = radius.min(newton_len.max(1e-12));

        let mut improved = false;
        for _ in 0..20 {
            let p: Vec<f64> = if newton_len <= radius {
                newton.clone()
            } else if cauchy_len >= radius {
                cauchy.iter().map(|c| c * radius / cauchy_len).collect()
            } else {
                // Intersection of the segment cauchy -> newton with the radius.
                let d: Vec<f64> = newton
                    .iter()
                    .zip(&cauchy)
                    .map(|(nw, c)| nw - c)
                    .collect();
                let a = norm2_sq(&d);
                let b = 2.0 * cauchy.iter().zip(&d).map(|(c, d)| c * d).sum::<f64>();
                let c0 = norm2_sq(&cauchy) - radius * radius;
                let disc = (b * b - 4.0 * a * c0).max(0.0).sqrt();
                let t = (-b + disc) / (2.0 * a);
                cauchy.iter().zip(&d).map(|(c, d)| c + t * d).collect()
            };
            for i in 0..n {
                trial[i] = z[i] + p[i];
            }
            residual(&trial, &mut f_trial);
            let t_norm = inf_norm(&f_trial);
            if t_norm.is_finite() && t_norm < norm {
                z.copy_from_slice(&trial);
                fz.copy_from_slice(&f_trial);
                radius *= 2.0;
                improved = true;
                break;
            }
            radius *= 0.25;
            if radius < 1e-14 * (1.0 + inf_norm(&z)) {
                break;
            }
        }
        if !improved {
            return Err(Error::RootNonConvergence {
                iters: iter,
                residual: best_norm,
                best: best_z,
            });
        }
    }

    let norm = inf_norm(&fz);
    if norm <= options.tol {
        return Ok(z);
    }
    if norm < best_norm {
        best_norm = norm;
        best_z = z;
    }
    Err(Error::RootNonConvergence {
        iters: options.max_iter,
        residual: best_norm,
        best: best_z,
    })
}
