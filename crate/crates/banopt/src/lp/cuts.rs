//! Gomory mixed-integer rounding cuts from simplex tableau rows.
//!
//! Cuts are derived from a fractional basic integer variable in the bound-
//! shifted nonbasic space, then unshifted and reduced to structural variables
//! by substituting slack definitions (stored rows are structural-only, so one
//! substitution pass terminates). Because the shift uses the *current* bound
//! box, a returned cut is valid for every integer point of that box — callers
//! must keep cuts paired with the problem they strengthened and never reuse
//! them after relaxing bounds.

use super::{LpError, LpProblem, LpRow, LpSolution, LpStatus, Sense, SimplexSolver};

const FRAC_TOL: f64 = 1e-6;
const MAX_DYNAMISM: f64 = 1e6;
const DROP_TOL: f64 = 1e-11;
const CUTS_PER_ROUND: usize = 20;

/// Derives up to `max_cuts` valid inequalities violated by the solver's
/// current (optimal, fractional) point. The solver must hold an optimal basis;
/// the factorization is refreshed before tableau rows are read.
pub fn generate_cuts(
    solver: &mut SimplexSolver,
    integer: &[bool],
    max_cuts: usize,
) -> Result<Vec<LpRow>, LpError> {
    let (n, m) = solver.dims();
    if integer.len() != n {
        return Err(LpError::Invalid(format!(
            "integrality mask of length {} for {n} variables",
            integer.len()
        )));
    }
    solver.ensure_fresh()?;

    // Fractional basic integer variables, most fractional first.
    let mut sources: Vec<(usize, f64)> = solver
        .basic_vars()
        .iter()
        .enumerate()
        .filter_map(|(pos, &var)| {
            let v = var as usize;
            if v >= n || !integer[v] {
                return None;
            }
            let x = solver.basic_values()[pos];
            let frac = x - x.floor();
            (frac > FRAC_TOL && frac < 1.0 - FRAC_TOL).then_some((pos, frac))
        })
        .collect();
    sources.sort_by(|a, b| {
        let da = (a.1 - 0.5).abs();
        let db = (b.1 - 0.5).abs();
        da.partial_cmp(&db).unwrap().then(a.0.cmp(&b.0))
    });

    let mut cuts = Vec::new();
    'source: for &(pos, f0) in sources.iter() {
        if cuts.len() >= max_cuts {
            break;
        }
        let bp = solver.binv_row(pos).to_vec();
        // Accumulate the cut over structural variables; slack contributions
        // are substituted away immediately.
        let mut dense = vec![0.0f64; n];
        let mut rhs = f0;
        for j in 0..n + m {
            if solver.is_basic(j) {
                continue;
            }
            let (lj, uj) = solver.bound_pair(j);
            if lj == uj {
                continue; // pinned: contributes nothing within this box
            }
            let a = solver.tableau_coef(&bp, j);
            if solver.is_nonbasic_free(j) {
                if a.abs() > 1e-12 {
                    continue 'source; // no valid shift for a free nonbasic
                }
                continue;
            }
            let at_upper = solver.is_nonbasic_at_upper(j);
            let a_shift = if at_upper { -a } else { a };
            let gamma = if j < n && integer[j] {
                let fj = a_shift - a_shift.floor();
                if fj <= f0 {
                    fj
                } else {
                    f0 * (1.0 - fj) / (1.0 - f0)
                }
            } else if a_shift >= 0.0 {
                a_shift
            } else {
                f0 * (-a_shift) / (1.0 - f0)
            };
            if gamma == 0.0 {
                continue;
            }
            // Unshift x~ back to x.
            let (coef, shift) = if at_upper { (-gamma, -gamma * uj) } else { (gamma, gamma * lj) };
            rhs += shift;
            if j < n {
                dense[j] += coef;
            } else {
                // coef * slack_i, with slack_i = rhs_i - row_i . x (scaled).
                let (terms, srhs) = solver.scaled_row(j - n);
                rhs -= coef * srhs;
                for &(k, ak) in terms {
                    dense[k as usize] -= coef * ak;
                }
            }
        }

        // Drop negligible coefficients, paying for each drop in the rhs so the
        // inequality stays valid over the box.
        let mut terms = Vec::new();
        let mut max_c = 0.0f64;
        let mut min_c = f64::INFINITY;
        let mut droppable = true;
        for (j, &c) in dense.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            if c.abs() < DROP_TOL {
                let (lj, uj) = solver.bound_pair(j);
                if lj.is_finite() && uj.is_finite() {
                    rhs -= (c * lj).max(c * uj);
                    continue;
                }
                droppable = false;
                break;
            }
            terms.push((j, c));
            max_c = max_c.max(c.abs());
            min_c = min_c.min(c.abs());
        }
        if !droppable || terms.is_empty() || max_c / min_c > MAX_DYNAMISM {
            continue;
        }
        // The point being cut off must actually violate the inequality.
        let activity: f64 = terms.iter().map(|&(j, c)| c * solver.value(j)).sum();
        if activity >= rhs - 1e-7 * rhs.abs().max(1.0) {
            continue;
        }
        cuts.push(LpRow { terms, sense: Sense::Ge, rhs });
    }
    Ok(cuts)
}

/// Iterated root strengthening: solve the relaxation, add violated rounding
/// cuts, re-solve warm, up to `max_rounds` times. Returns the problem with all
/// appended cuts and the final relaxation solution; the objective is a valid
/// lower bound on any integer-feasible point of `problem` and never decreases
/// across rounds.
pub fn strengthen(problem: &LpProblem, max_rounds: usize) -> Result<(LpProblem, LpSolution), LpError> {
    let mut p = problem.clone();
    let mut solver = SimplexSolver::new(&p)?;
    let mut status = solver.solve()?;
    for _ in 0..max_rounds {
        if status != LpStatus::Optimal {
            break;
        }
        let integral = p
            .integer
            .iter()
            .enumerate()
            .all(|(j, &is_int)| !is_int || frac_dist(solver.value(j)) <= FRAC_TOL);
        if integral {
            break;
        }
        let cuts = generate_cuts(&mut solver, &p.integer, CUTS_PER_ROUND)?;
        if cuts.is_empty() {
            break;
        }
        for cut in cuts {
            solver.add_row(&cut)?;
            p.rows.push(cut);
        }
        status = solver.solve()?;
    }
    if status == LpStatus::Optimal {
        solver.audit().map_err(LpError::Numerical)?;
    }
    Ok((
        p,
        LpSolution {
            status,
            objective: match status {
                LpStatus::Optimal => solver.objective_value(),
                LpStatus::Infeasible => f64::INFINITY,
                LpStatus::Unbounded => f64::NEG_INFINITY,
            },
            values: solver.values(),
            basis: solver.basis(),
        },
    ))
}

fn frac_dist(x: f64) -> f64 {
    (x - x.round()).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Integer knapsack-like model with a fractional relaxation:
    /// min -(2x0 + 3x1)  s.t.  4x0 + 5x1 <= 7,  x binary.
    fn fractional_problem() -> LpProblem {
        LpProblem {
            objective: vec![-2.0, -3.0],
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            integer: vec![true, true],
            rows: vec![LpRow { terms: vec![(0, 4.0), (1, 5.0)], sense: Sense::Le, rhs: 7.0 }],
        }
    }

    fn integer_points() -> Vec<Vec<f64>> {
        // All binary assignments satisfying the ORIGINAL first row.
        let mut pts = Vec::new();
        for x0 in 0..=1 {
            for x1 in 0..=1 {
                if 4.0 * x0 as f64 + 5.0 * x1 as f64 <= 7.0 {
                    pts.push(vec![x0 as f64, x1 as f64]);
                }
            }
        }
        pts
    }

    #[test]
    fn cuts_are_violated_by_the_fraction_and_valid_for_integers() {
        let p = fractional_problem();
        let mut solver = SimplexSolver::new(&p).unwrap();
        assert_eq!(solver.solve().unwrap(), LpStatus::Optimal);
        let x = solver.values();
        assert!(frac_dist(x[0]) > 1e-6 || frac_dist(x[1]) > 1e-6, "relaxation must be fractional");

        let cuts = generate_cuts(&mut solver, &p.integer, 8).unwrap();
        assert!(!cuts.is_empty());
        for cut in &cuts {
            let at = |pt: &[f64]| cut.terms.iter().map(|&(j, c)| c * pt[j]).sum::<f64>();
            assert!(at(&x) < cut.rhs - 1e-7, "cut must cut off the fractional point");
            for pt in integer_points() {
                assert!(at(&pt) >= cut.rhs - 1e-9, "cut must keep integer point {pt:?}");
            }
        }
    }

    #[test]
    fn strengthen_monotonically_tightens_the_bound() {
        let p = fractional_problem();
        let mut prev = f64::NEG_INFINITY;
        for rounds in 0..4 {
            let (_, sol) = strengthen(&p, rounds).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal);
            assert!(sol.objective >= prev - 1e-7, "bound regressed at {rounds} rounds");
            prev = prev.max(sol.objective);
        }
        // Optimal integer value is -3 (take x1); the strengthened bound may
        // reach but never exceed it.
        assert!(prev <= -3.0 + 1e-7);
    }

    #[test]
    fn strengthen_with_no_integer_vars_is_a_plain_solve() {
        let mut p = fractional_problem();
        p.integer = vec![false, false];
        let (p2, sol) = strengthen(&p, 5).unwrap();
        assert_eq!(p2.rows.len(), p.rows.len());
        assert_eq!(sol.status, LpStatus::Optimal);
    }
}
