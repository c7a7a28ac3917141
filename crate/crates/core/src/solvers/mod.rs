//! EM-style local search for the center and subspace objectives, and an
//! exhaustive oracle for tiny instances.

mod adam;
mod center;
mod oracle;
mod subspace;

use serde::Serialize;

pub use adam::AdamW;
pub use center::{center_update_gd, em_center};
pub use oracle::{
    erm_oracle_small, erm_oracle_weighted, one_cluster_center, OracleResult, ORACLE_MAX_POINTS,
};
pub use subspace::{basis_update_gd, em_subspace};

use crate::error::{Error, Result};

/// Relative gain that counts as progress for `gd_patience`.
pub const GD_STALL_TOL: f64 = 1e-9;

/// Tracks steps since the best cost last improved meaningfully.
#[derive(Debug)]
pub(crate) struct Stall {
    best: f64,
    idle: usize,
    patience: usize,
}

impl Stall {
    pub(crate) fn new(start: f64, patience: usize) -> Self {
        Self {
            best: start,
            idle: 0,
            patience,
        }
    }

    /// Records a cost; returns `true` once the descent should stop.
    pub(crate) fn observe(&mut self, cost: f64) -> bool {
        if cost < self.best - GD_STALL_TOL * self.best.abs() {
            self.best = cost;
            self.idle = 0;
        } else {
            self.idle += 1;
        }
        self.idle >= self.patience
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyClusterPolicy {
    /// Move the center (or subspace) onto the currently worst-served point.
    ReseedFarthest,
    /// Remove the cluster from the solution.
    Drop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub max_em_iters: usize,
    pub rel_tol: f64,
    pub gd_learning_rate: f64,
    pub gd_iters: usize,
    /// Stop a descent after this many steps without a relative improvement
    /// of at least `GD_STALL_TOL` on the best cost seen.
    pub gd_patience: usize,
    /// Decoupled weight decay of the AdamW update; `0` disables it.
    pub gd_weight_decay: f64,
    pub empty_cluster_policy: EmptyClusterPolicy,
    /// Largest input on which `z = 2` subspace EM is followed by exact
    /// single-point moves; `0` disables them.
    pub refine_max_points: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_em_iters: 100,
            rel_tol: 1e-6,
            gd_learning_rate: 0.01,
            gd_iters: 500,
            gd_patience: 50,
            gd_weight_decay: 0.0,
            empty_cluster_policy: EmptyClusterPolicy::ReseedFarthest,
            refine_max_points: 64,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_em_iters == 0 || self.gd_iters == 0 || self.gd_patience == 0 {
            return Err(Error::Config("iteration counts must be positive".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::Config(format!(
                "rel_tol={} must lie in (0, 1)",
                self.rel_tol
            )));
        }
        if !(self.gd_learning_rate > 0.0) || !(self.gd_weight_decay >= 0.0) {
            return Err(Error::Config(
                "learning rate must be positive, weight decay non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Objective value after the initial assignment and after every accepted
/// EM round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveTrace {
    pub costs: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl SolveTrace {
    pub fn final_cost(&self) -> f64 {
        *self.costs.last().expect("trace holds the initial cost")
    }
}

/// Shared EM stopping rule: returns `true` once the relative improvement
/// drops below `rel_tol` (a cost that has reached zero, up to rounding, counts as converged).
pub(crate) fn improvement_below(prev: f64, next: f64, rel_tol: f64) -> bool {
    if prev <= 0.0 || next <= prev * f64::EPSILON {
        return true;
    }
    (prev - next) / prev < rel_tol
}
