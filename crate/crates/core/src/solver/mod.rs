//! Local solvers for expanded models: a dense two-phase simplex for linear
//! programs and a log-barrier method for everything else.
//!
//! Both report through [`LocalSolveResult`], always in terms of the model's
//! own sense (a `max` model is minimized internally as `-F` but the reported
//! objective is `F`).

pub(crate) mod barrier;
mod lp;

pub use barrier::{solve_barrier, BarrierConfig};
pub use lp::{solve_lp, LpFailure};

/// How a local solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Feasible to tolerance with first-order stationarity reached.
    Converged,
    /// Ran out of iterations (or the problem is unbounded); the best iterate
    /// seen is still reported.
    IterationLimit,
    /// The solver produced a certificate or strong evidence of infeasibility.
    InfeasibleDetected,
    /// Evaluation faults (log of a negative number, division by zero, ...)
    /// blocked progress everywhere we tried.
    DomainFaultAbort,
}

impl SolveStatus {
    pub fn keyword(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::IterationLimit => "iteration-limit",
            SolveStatus::InfeasibleDetected => "infeasible",
            SolveStatus::DomainFaultAbort => "domain-fault",
        }
    }
}

/// Outcome of a local solve.
#[derive(Debug, Clone)]
pub struct LocalSolveResult {
    pub point: Vec<f64>,
    /// Objective value at `point` in the model's original sense.
    pub objective: f64,
    /// Largest constraint/bound violation at `point`.
    pub max_violation: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Deterministic work counter: one unit per full evaluation pass over
    /// the model (simplex pivots count as one unit each).
    pub evaluations: u64,
    /// Human-readable note on failures; `None` on clean convergence.
    pub diagnostic: Option<String>,
}

impl LocalSolveResult {
    pub fn feasible(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}
