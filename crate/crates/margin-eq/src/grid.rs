//! Discretized state space of consumption weights.
//!
//! For three agents the state is the two-dimensional unit simplex,
//! discretized with `K` points along each axis (spacing `h = 1/(K-1)`),
//! `L = K(K+1)/2` points in total. Index pair `(j, k)` sits at
//! `(j h, k h)` with `j + k <= K - 1`; the hypotenuse `j + k = K - 1` is a
//! boundary populated by a two-agent sub-economy like the other edges.
//!
//! Points one row inside the hypotenuse (`j + k = K - 2`) are classified
//! separately: their upper-right cross-partial neighbor would leave the
//! simplex, so the assembly switches to a one-sided difference there.
//!
//! For two agents the state space is the interval `[0, 1]` with `K + 1`
//! points and spacing `1/K`.

use crate::error::{Error, Result};

/// Which simplex edge a boundary point lies on (three-agent grid).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum EdgeKind {
    /// `omega_2 = 0`: two-agent economy of agents 0 and 2, state `omega_1`.
    Omega2Zero,
    /// `omega_1 = 0`: two-agent economy of agents 1 and 2, state `omega_2`.
    Omega1Zero,
    /// `omega_1 + omega_2 = 1`: economy of agents 0 and 1, state `omega_1`.
    Hypotenuse,
}

/// Mutually exclusive and exhaustive point classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum PointClass {
    /// Simplex corner; `dominant` consumes the whole endowment.
    Vertex { dominant: usize },
    Edge { kind: EdgeKind },
    /// Interior point adjacent to the hypotenuse needing the one-sided
    /// cross-partial stencil.
    DiagBoundary,
    Interior,
}

impl PointClass {
    pub fn is_solved(&self) -> bool {
        matches!(self, PointClass::Interior | PointClass::DiagBoundary)
    }

    pub fn label(&self) -> &'static str {
        match self {
            PointClass::Vertex { .. } => "vertex",
            PointClass::Edge { .. } => "edge",
            PointClass::DiagBoundary => "diag",
            PointClass::Interior => "interior",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexGrid {
    k: usize,
    n_agents: usize,
    h: f64,
    points: Vec<(usize, usize)>,
    class: Vec<PointClass>,
    /// Solved (interior + diagonal-boundary) point indices in row order.
    solved: Vec<usize>,
    /// Position of a point inside `solved`, if it is solved.
    solved_pos: Vec<Option<usize>>,
}

impl SimplexGrid {
    /// Builds the grid for `n_agents` in `{2, 3}`. Needs `k >= 4`, the
    /// smallest resolution with an interior point on the simplex.
    pub fn build(k: usize, n_agents: usize) -> Result<Self> {
        if k < 4 {
            return Err(Error::GridTooCoarse { k, min: 4 });
        }
        match n_agents {
            2 => Ok(Self::build_interval(k)),
            3 => Ok(Self::build_simplex(k)),
            n => Err(Error::UnsupportedAgentCount { n }),
        }
    }

    fn build_interval(k: usize) -> Self {
        let h = 1.0 / k as f64;
        let mut points = Vec::with_capacity(k + 1);
        let mut class = Vec::with_capacity(k + 1);
        for j in 0..=k {
            points.push((j, 0));
            class.push(if j == 0 {
                PointClass::Vertex { dominant: 1 }
            } else if j == k {
                PointClass::Vertex { dominant: 0 }
            } else {
                PointClass::Interior
            });
        }
        let mut grid = Self {
            k,
            n_agents: 2,
            h,
            points,
            class,
            solved: Vec::new(),
            solved_pos: Vec::new(),
        };
        grid.index_solved();
        grid
    }

    fn build_simplex(k: usize) -> Self {
        let top = k - 1;
        let h = 1.0 / top as f64;
        let mut points = Vec::new();
        let mut class = Vec::new();
        for j in 0..=top {
            for kk in 0..=(top - j) {
                points.push((j, kk));
                let on_hyp = j + kk == top;
                let c = if (j, kk) == (top, 0) {
                    PointClass::Vertex { dominant: 0 }
                } else if (j, kk) == (0, top) {
                    PointClass::Vertex { dominant: 1 }
                } else if (j, kk) == (0, 0) {
                    PointClass::Vertex { dominant: 2 }
                } else if kk == 0 {
                    PointClass::Edge {
                        kind: EdgeKind::Omega2Zero,
                    }
                } else if j == 0 {
                    PointClass::Edge {
                        kind: EdgeKind::Omega1Zero,
                    }
                } else if on_hyp {
                    PointClass::Edge {
                        kind: EdgeKind::Hypotenuse,
                    }
                } else if j + kk == top - 1 {
                    PointClass::DiagBoundary
                } else {
                    PointClass::Interior
                };
                class.push(c);
            }
        }
        let mut grid = Self {
            k,
            n_agents: 3,
            h,
            points,
            class,
            solved: Vec::new(),
            solved_pos: Vec::new(),
        };
        grid.index_solved();
        grid
    }

    fn index_solved(&mut self) {
        self.solved_pos = vec![None; self.points.len()];
        for (idx, c) in self.class.iter().enumerate() {
            if c.is_solved() {
                self.solved_pos[idx] = Some(self.solved.len());
                self.solved.push(idx);
            }
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Highest index along one axis.
    fn top(&self) -> usize {
        match self.n_agents {
            2 => self.k,
            _ => self.k - 1,
        }
    }

    pub fn index_pair(&self, idx: usize) -> (usize, usize) {
        self.points[idx]
    }

    /// Point index of `(j, k)` if it lies in the grid.
    pub fn index_of(&self, j: usize, k: usize) -> Option<usize> {
        let top = self.top();
        if self.n_agents == 2 {
            return (k == 0 && j <= top).then_some(j);
        }
        if j + k > top {
            return None;
        }
        // Rows 0..j have lengths (top + 1 - row).
        let base = j * (top + 1) - j * (j.saturating_sub(1)) / 2;
        Some(base + k)
    }

    /// Neighbor `(j + dj, k + dk)` as a point index, if inside the grid.
    pub fn neighbor(&self, idx: usize, dj: isize, dk: isize) -> Option<usize> {
        let (j, k) = self.points[idx];
        let nj = j as isize + dj;
        let nk = k as isize + dk;
        if nj < 0 || nk < 0 {
            return None;
        }
        self.index_of(nj as usize, nk as usize)
    }

    /// Free coordinates of the point (1 value for N=2, 2 for N=3).
    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let (j, k) = self.points[idx];
        match self.n_agents {
            2 => vec![j as f64 * self.h],
            _ => vec![j as f64 * self.h, k as f64 * self.h],
        }
    }

    /// Full weight vector at the point, last entry closing the sum to one.
    pub fn full_weights(&self, idx: usize) -> Vec<f64> {
        let mut w = self.coords(idx);
        let sum: f64 = w.iter().sum();
        w.push((1.0 - sum).max(0.0));
        w
    }

    pub fn classify(&self, idx: usize) -> PointClass {
        self.class[idx]
    }

    pub fn classes(&self) -> &[PointClass] {
        &self.class
    }

    /// Point indices of solved (interior and diagonal-boundary) points.
    pub fn solved_points(&self) -> &[usize] {
        &self.solved
    }

    /// Row position of a point inside the solved set.
    pub fn solved_position(&self, idx: usize) -> Option<usize> {
        self.solved_pos[idx]
    }

    pub fn count_class(&self, f: impl Fn(&PointClass) -> bool) -> usize {
        self.class.iter().filter(|c| f(c)).count()
    }
}
