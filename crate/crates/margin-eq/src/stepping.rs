//! Pseudo-time step control shared by the edge and simplex solvers.
//!
//! The implicit scheme is unconditionally stable for the frozen-coefficient
//! linear problem, but the Picard coupling is not: the controller halves the
//! step when the update norm diverges or stalls, and cautiously enlarges it
//! after a run of monotone decreases, which turns the late iterations into a
//! near-direct stationary solve. A failed enlargement sets a ceiling so the
//! iteration settles at the largest stable step instead of thrashing.

const DT_MIN: f64 = 1e-4;
const DT_MAX: f64 = 1e5;
const GROW_AFTER: usize = 6;
/// Sweeps between stall checks at large steps.
const STALL_WINDOW: usize = 40;

#[derive(Debug)]
pub(crate) struct PseudoTime {
    pub dt: f64,
    pub reductions: usize,
    ceiling: f64,
    streak: usize,
    prev_update: f64,
    sweeps_since_change: usize,
    grew_last: bool,
    stall_reference: f64,
}

pub(crate) enum StepVerdict {
    Continue,
    /// The sweep produced non-finite values; revert and retry smaller.
    Reject,
}

impl PseudoTime {
    pub fn new(dt_init: f64) -> Self {
        Self {
            dt: dt_init.clamp(DT_MIN, DT_MAX),
            reductions: 0,
            ceiling: DT_MAX,
            streak: 0,
            prev_update: f64::INFINITY,
            sweeps_since_change: 0,
            grew_last: false,
            stall_reference: f64::INFINITY,
        }
    }

    /// Updates the step size given the sweep's max-norm update.
    pub fn observe(&mut self, update: f64) -> StepVerdict {
        if !update.is_finite() {
            self.shrink();
            return StepVerdict::Reject;
        }
        self.sweeps_since_change += 1;

        let diverging = update > 4.0 * self.prev_update;
        let stalled = self.dt >= 4.0
            && self.sweeps_since_change >= STALL_WINDOW
            && update > 0.5 * self.stall_reference;
        if diverging || stalled {
            self.shrink();
            self.prev_update = update;
            return StepVerdict::Continue;
        }
        if self.sweeps_since_change >= STALL_WINDOW {
            self.stall_reference = update;
            self.sweeps_since_change = 0;
        }

        if update <= self.prev_update {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        // Retry past a previously failed ceiling only after a long calm run.
        let allowance = if self.dt < self.ceiling {
            GROW_AFTER
        } else {
            5 * GROW_AFTER
        };
        if self.streak >= allowance && self.dt < DT_MAX {
            self.dt = (self.dt * 2.0).min(DT_MAX);
            self.streak = 0;
            self.grew_last = true;
            self.sweeps_since_change = 0;
            self.stall_reference = update;
        }
        self.prev_update = update;
        StepVerdict::Continue
    }

    fn shrink(&mut self) {
        if self.dt > DT_MIN {
            self.dt = (self.dt * 0.5).max(DT_MIN);
            self.reductions += 1;
        }
        if self.grew_last {
            // The step we just backed out of is unstable; remember that.
            self.ceiling = self.dt;
        }
        self.grew_last = false;
        self.streak = 0;
        self.sweeps_since_change = 0;
        self.stall_reference = f64::INFINITY;
    }

    /// Converged when the sweep update is below tolerance; for large steps
    /// the update itself approximates `dt` times the stationary residual,
    /// so the bound is tightened for small `dt`.
    pub fn converged(&self, update: f64, tol_outer: f64) -> bool {
        update < tol_outer * self.dt.min(1.0)
    }
}
