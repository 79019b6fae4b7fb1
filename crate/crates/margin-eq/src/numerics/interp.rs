//! Piecewise-linear interpolation on the triangulated simplex grid.

use crate::error::{Error, Result};
use crate::grid::SimplexGrid;

/// Locates the cell containing `point` and returns up to three grid point
/// indices with barycentric weights (the unused slots carry weight zero).
///
/// On the triangular grid each square cell splits into a lower triangle
/// `{(j,k), (j+1,k), (j,k+1)}` and an upper triangle
/// `{(j+1,k), (j,k+1), (j+1,k+1)}`; points with fractional coordinates
/// summing above one fall in the upper triangle.
pub fn locate(grid: &SimplexGrid, point: &[f64]) -> Result<([usize; 3], [f64; 3])> {
    let h = grid.spacing();
    match grid.n_agents() {
        2 => {
            let x = point[0];
            if !(-1e-12..=1.0 + 1e-12).contains(&x) {
                return Err(Error::OutOfDomain {
                    omega: point.to_vec(),
                });
            }
            let u = x.clamp(0.0, 1.0) / h;
            let j = (u.floor() as usize).min(grid.len() - 2);
            let t = u - j as f64;
            Ok(([j, j + 1, j], [1.0 - t, t, 0.0]))
        }
        3 => {
            let (x, y) = (point[0], point[1]);
            if x < -1e-12 || y < -1e-12 || x + y > 1.0 + 1e-12 {
                return Err(Error::OutOfDomain {
                    omega: point.to_vec(),
                });
            }
            let top = grid.k() - 1;
            let max_cell = (top - 1) as f64;
            let u = (x.clamp(0.0, 1.0) / h).min(max_cell + 1.0);
            let v = (y.clamp(0.0, 1.0) / h).min(max_cell + 1.0);
            let mut j = (u.floor() as usize).min(top - 1);
            let mut k = (v.floor() as usize).min(top - 1);
            // Clamp to a cell whose lower triangle lies in the simplex.
            if j + k > top - 1 {
                let over = j + k - (top - 1);
                let take_j = over.min(j);
                j -= take_j;
                k -= over - take_j;
            }
            let fu = u - j as f64;
            let fv = v - k as f64;
            let p00 = grid.index_of(j, k).expect("cell corner");
            let p10 = grid.index_of(j + 1, k).expect("cell corner");
            let p01 = grid.index_of(j, k + 1).expect("cell corner");
            if fu + fv <= 1.0 + 1e-12 {
                Ok(([p00, p10, p01], [1.0 - fu - fv, fu, fv]))
            } else {
                let p11 = grid
                    .index_of(j + 1, k + 1)
                    .ok_or_else(|| Error::OutOfDomain {
                        omega: point.to_vec(),
                    })?;
                Ok(([p10, p01, p11], [1.0 - fv, 1.0 - fu, fu + fv - 1.0]))
            }
        }
        n => Err(Error::UnsupportedAgentCount { n }),
    }
}

/// Barycentric interpolation of one nodal field. Exact on affine functions.
pub fn interp_simplex(grid: &SimplexGrid, field: &[f64], point: &[f64]) -> Result<f64> {
    let (idx, w) = locate(grid, point)?;
    Ok(w[0] * field[idx[0]] + w[1] * field[idx[1]] + w[2] * field[idx[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn field_of(grid: &SimplexGrid, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..grid.len()).map(|i| f(&grid.coords(i))).collect()
    }

    #[test]
    fn linear_reproduction() {
        let grid = SimplexGrid::build(9, 3).unwrap();
        let field = field_of(&grid, |c| 2.0 + 3.0 * c[0] - 1.5 * c[1]);
        for &(x, y) in &[(0.1, 0.2), (0.33, 0.41), (0.0, 0.0), (0.7, 0.29), (0.5, 0.5)] {
            let v = interp_simplex(&grid, &field, &[x, y]).unwrap();
            assert_abs_diff_eq!(v, 2.0 + 3.0 * x - 1.5 * y, epsilon = 1e-13);
        }
    }

    #[test]
    fn nodal_exactness() {
        let grid = SimplexGrid::build(7, 3).unwrap();
        let field = field_of(&grid, |c| (7.3 * c[0]).sin() + (3.1 * c[1]).cos());
        for idx in 0..grid.len() {
            let c = grid.coords(idx);
            let v = interp_simplex(&grid, &field, &c).unwrap();
            assert_abs_diff_eq!(v, field[idx], epsilon = 1e-12);
        }
    }

    #[test]
    fn product_at_centroid_and_h2_error() {
        // f = x*y at a lower-triangle centroid: PL interpolant gives the
        // vertex average; compare against the analytic value.
        let grid = SimplexGrid::build(11, 3).unwrap();
        let h = grid.spacing();
        let field = field_of(&grid, |c| c[0] * c[1]);
        let (j, k) = (2usize, 3usize);
        let (x0, y0) = (j as f64 * h, k as f64 * h);
        let cx = x0 + h / 3.0;
        let cy = y0 + h / 3.0;
        let avg = (x0 * y0 + (x0 + h) * y0 + x0 * (y0 + h)) / 3.0;
        let v = interp_simplex(&grid, &field, &[cx, cy]).unwrap();
        assert_abs_diff_eq!(v, avg, epsilon = 1e-13);
        assert!((v - cx * cy).abs() <= h * h);
    }

    #[test]
    fn smooth_field_converges_second_order() {
        // Max-norm error over a fixed probe cloud; pointwise errors
        // oscillate with the probe's position inside the cell, the sup does
        // not.
        let f = |c: &[f64]| (2.0 * c[0]).sin() * (1.0 + c[1]).ln();
        let probes: Vec<[f64; 2]> = (0..60)
            .map(|i| {
                let a = (i as f64 * 0.618_033_988_75).fract();
                let b = (i as f64 * 0.414_213_562_37).fract();
                [0.9 * a * (1.0 - 0.9 * b), 0.9 * b * (1.0 - 0.9 * a)]
            })
            .filter(|p| p[0] + p[1] < 0.95)
            .collect();
        let mut errs = Vec::new();
        for k in [11usize, 21, 41] {
            let grid = SimplexGrid::build(k, 3).unwrap();
            let field = field_of(&grid, f);
            let err = probes
                .iter()
                .map(|p| (interp_simplex(&grid, &field, p).unwrap() - f(p)).abs())
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 > 1.5 && order2 > 1.5, "orders {order1}, {order2}");
    }

    #[test]
    fn outside_rejected() {
        let grid = SimplexGrid::build(6, 3).unwrap();
        let field = vec![0.0; grid.len()];
        assert!(interp_simplex(&grid, &field, &[0.8, 0.4]).is_err());
        assert!(interp_simplex(&grid, &field, &[-0.1, 0.2]).is_err());
    }

    #[test]
    fn interval_interpolation() {
        let grid = SimplexGrid::build(10, 2).unwrap();
        let field = field_of(&grid, |c| 1.0 - 0.5 * c[0]);
        for &x in &[0.0, 0.05, 0.51, 1.0] {
            let v = interp_simplex(&grid, &field, &[x]).unwrap();
            assert_abs_diff_eq!(v, 1.0 - 0.5 * x, epsilon = 1e-14);
        }
    }
}
