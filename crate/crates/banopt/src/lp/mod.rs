//! Linear programming layer: problem container, a bounded-variable revised
//! simplex solver with warm starts, and mixed-integer rounding cuts.

mod cuts;
mod simplex;

pub use cuts::{generate_cuts, strengthen};
pub use simplex::{Basis, SimplexSolver};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// A linear constraint `terms <sense> rhs` over structural variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization LP/MIP in bounded-variable form. `integer` marks variables
/// whose integrality is exploited by cut generation and branch-and-bound; the
/// LP solver itself ignores it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
    pub rows: Vec<LpRow>,
}

impl LpProblem {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if self.lower.len() != n || self.upper.len() != n || self.integer.len() != n {
            return Err(LpError::Invalid(format!(
                "inconsistent vector lengths: objective {n}, lower {}, upper {}, integer {}",
                self.lower.len(),
                self.upper.len(),
                self.integer.len()
            )));
        }
        for j in 0..n {
            if self.objective[j].is_nan() || !self.objective[j].is_finite() {
                return Err(LpError::Invalid(format!("objective[{j}] is not finite")));
            }
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(LpError::Invalid(format!(
                    "bounds of variable {j} are invalid: [{}, {}]",
                    self.lower[j], self.upper[j]
                )));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::Invalid(format!("rhs of row {i} is not finite")));
            }
            for &(j, a) in &row.terms {
                if j >= n {
                    return Err(LpError::Invalid(format!("row {i} references variable {j} of {n}")));
                }
                if !a.is_finite() {
                    return Err(LpError::Invalid(format!("row {i} has non-finite coefficient on {j}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of an LP solve. For `Infeasible` the objective is `+inf`, for
/// `Unbounded` it is `-inf`; `values` always holds the last iterate.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    pub basis: Basis,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    Invalid(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// One-shot solve. Optimal bases are audited against the original problem data
/// (primal feasibility, reduced-cost signs, strong duality) before being
/// reported; an audit failure is a numerical error, never a silent answer.
pub fn solve_lp(problem: &LpProblem, warm: Option<&Basis>) -> Result<LpSolution, LpError> {
    let mut solver = SimplexSolver::new(problem)?;
    if let Some(basis) = warm {
        solver.install_basis(basis)?;
    }
    let status = solver.solve()?;
    if status == LpStatus::Optimal {
        solver.audit().map_err(LpError::Numerical)?;
    }
    Ok(LpSolution {
        status,
        objective: match status {
            LpStatus::Optimal => solver.objective_value(),
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
        },
        values: solver.values(),
        basis: solver.basis(),
    })
}
