//! Bounded-variable revised simplex with a dense explicit basis inverse.
//!
//! Design notes, in rough order of importance:
//! - Every variable (structural and slack) carries a `[lb, ub]` box; rows are
//!   stored as `terms + slack = rhs` with the slack bounds encoding the sense.
//! - Phase 1 is artificial-free: it minimizes the piecewise-linear sum of
//!   bound violations of the basic variables, pricing with the violation
//!   gradient instead of the cost vector. The phase ends at the first kink of
//!   the ratio test, so feasible basics never leave their boxes.
//! - The basis inverse is maintained explicitly (row-major, rank-1 pivot
//!   updates, O(m^2) per pivot) and periodically rebuilt by Gauss-Jordan
//!   elimination. Bound changes never touch the matrix, so fixing variables
//!   and branching keep the factorization valid — that is what makes the
//!   per-node and per-ant warm starts cheap.
//! - Rows are equilibrated by their largest coefficient at load time; the
//!   slack convention above is scale-invariant, so only `rhs` changes.

use super::{LpError, LpProblem, LpRow, LpStatus, Sense};

const FEAS_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const DEGEN_TOL: f64 = 1e-10;
const SMALL_PIVOT: f64 = 1e-7;
const BLAND_TRIGGER: usize = 1_000;
const REFRESH_EVERY: usize = 4_000;
/// Below this row count a candidate answer is re-verified on a fresh
/// factorization; above it we rely on periodic refreshes plus the caller's
/// audit, because an O(m^3) reinversion per warm solve would dwarf the solve.
const VERIFY_DIM: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
enum VState {
    Basic(u32),
    AtLower,
    AtUpper,
    Free,
}

/// Snapshot of a basis: which variables are basic (in position order) and
/// which nonbasic variables rest at their upper bound.
#[derive(Debug, Clone)]
pub struct Basis {
    n: usize,
    m: usize,
    basic: Vec<u32>,
    at_upper: Vec<bool>,
}

enum Step {
    Moved { degenerate: bool },
    Unbounded,
    NeedsRefresh,
}

#[derive(Clone)]
pub struct SimplexSolver {
    n: usize,
    m: usize,
    /// Structural columns, scaled, sorted by row.
    cols: Vec<Vec<(u32, f64)>>,
    /// Row-major copy of the scaled structural terms (no slack entries).
    rows: Vec<Vec<(u32, f64)>>,
    senses: Vec<Sense>,
    obj: Vec<f64>,
    /// Bounds for all n + m variables (slacks after structurals).
    lb: Vec<f64>,
    ub: Vec<f64>,
    /// Scaled right-hand sides.
    rhs: Vec<f64>,
    row_scale: Vec<f64>,
    state: Vec<VState>,
    basic: Vec<u32>,
    /// Row-major m x m basis inverse.
    binv: Vec<f64>,
    /// Values of basic variables by position.
    xb: Vec<f64>,
    xb_valid: bool,
    pivots_since_refresh: usize,
}

fn canonical_terms(terms: &[(usize, f64)], n: usize) -> Result<Vec<(u32, f64)>, LpError> {
    let mut out: Vec<(u32, f64)> = Vec::with_capacity(terms.len());
    for &(j, a) in terms {
        if j >= n {
            return Err(LpError::Invalid(format!("term references variable {j} of {n}")));
        }
        if !a.is_finite() {
            return Err(LpError::Invalid(format!("non-finite coefficient on variable {j}")));
        }
        out.push((j as u32, a));
    }
    out.sort_by_key(|&(j, _)| j);
    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(out.len());
    for (j, a) in out {
        match merged.last_mut() {
            Some((last, acc)) if *last == j => *acc += a,
            _ => merged.push((j, a)),
        }
    }
    merged.retain(|&(_, a)| a != 0.0);
    Ok(merged)
}

fn slack_bounds(sense: Sense) -> (f64, f64) {
    match sense {
        Sense::Le => (0.0, f64::INFINITY),
        Sense::Eq => (0.0, 0.0),
        Sense::Ge => (f64::NEG_INFINITY, 0.0),
    }
}

impl SimplexSolver {
    pub fn new(problem: &LpProblem) -> Result<Self, LpError> {
        problem.validate()?;
        let n = problem.num_vars();
        let mut solver = SimplexSolver {
            n,
            m: 0,
            cols: vec![Vec::new(); n],
            rows: Vec::new(),
            senses: Vec::new(),
            obj: problem.objective.clone(),
            lb: problem.lower.clone(),
            ub: problem.upper.clone(),
            rhs: Vec::new(),
            row_scale: Vec::new(),
            state: (0..n)
                .map(|j| initial_nonbasic_state(problem.lower[j], problem.upper[j]))
                .collect(),
            basic: Vec::new(),
            binv: Vec::new(),
            xb: Vec::new(),
            xb_valid: false,
            pivots_since_refresh: 0,
        };
        for row in &problem.rows {
            solver.add_row(row)?;
        }
        Ok(solver)
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn var_bounds(&self, j: usize) -> (f64, f64) {
        assert!(j < self.n, "structural variable index out of range");
        (self.lb[j], self.ub[j])
    }

    /// Changes the box of a structural variable. The factorization stays
    /// valid; only variable values need recomputing.
    pub fn set_var_bounds(&mut self, j: usize, lo: f64, hi: f64) -> Result<(), LpError> {
        if j >= self.n {
            return Err(LpError::Invalid(format!("variable {j} of {}", self.n)));
        }
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(LpError::Invalid(format!("invalid bounds [{lo}, {hi}] for variable {j}")));
        }
        self.lb[j] = lo;
        self.ub[j] = hi;
        if !matches!(self.state[j], VState::Basic(_)) {
            self.state[j] = match self.state[j] {
                VState::AtUpper if hi.is_finite() => VState::AtUpper,
                _ => initial_nonbasic_state(lo, hi),
            };
        }
        self.xb_valid = false;
        Ok(())
    }

    /// Appends a row. The new slack enters the basis, extending the inverse by
    /// one bordered row, so no refactorization is needed.
    pub fn add_row(&mut self, row: &LpRow) -> Result<(), LpError> {
        if !row.rhs.is_finite() {
            return Err(LpError::Invalid("row rhs is not finite".to_string()));
        }
        let terms = canonical_terms(&row.terms, self.n)?;
        let amax = terms.iter().fold(0.0f64, |acc, &(_, a)| acc.max(a.abs()));
        let scale = if amax > 0.0 { (1.0 / amax).clamp(1e-8, 1e8) } else { 1.0 };
        let scaled: Vec<(u32, f64)> = terms.iter().map(|&(j, a)| (j, a * scale)).collect();

        let m_old = self.m;
        // Bordered inverse: last row is -v^T B^{-1} | 1, where v holds the new
        // row's coefficients on the current basic variables.
        let mut last = vec![0.0; m_old + 1];
        last[m_old] = 1.0;
        if m_old > 0 {
            let mut v = vec![0.0; m_old];
            let mut any = false;
            for &(j, a) in &scaled {
                if let VState::Basic(pos) = self.state[j as usize] {
                    v[pos as usize] = a;
                    any = true;
                }
            }
            if any {
                for (pos, &vi) in v.iter().enumerate() {
                    if vi != 0.0 {
                        let src = &self.binv[pos * m_old..(pos + 1) * m_old];
                        for (dst, s) in last[..m_old].iter_mut().zip(src) {
                            *dst -= vi * s;
                        }
                    }
                }
            }
        }
        let mut binv = vec![0.0; (m_old + 1) * (m_old + 1)];
        for i in 0..m_old {
            binv[i * (m_old + 1)..i * (m_old + 1) + m_old]
                .copy_from_slice(&self.binv[i * m_old..(i + 1) * m_old]);
        }
        binv[m_old * (m_old + 1)..].copy_from_slice(&last);
        self.binv = binv;

        for &(j, a) in &scaled {
            self.cols[j as usize].push((m_old as u32, a));
        }
        self.rows.push(scaled);
        self.senses.push(row.sense);
        self.rhs.push(row.rhs * scale);
        self.row_scale.push(scale);
        let (slo, shi) = slack_bounds(row.sense);
        self.lb.insert(self.n + m_old, slo);
        self.ub.insert(self.n + m_old, shi);
        self.state.push(VState::Basic(m_old as u32));
        self.basic.push((self.n + m_old) as u32);
        self.xb.push(0.0);
        self.m += 1;
        self.xb_valid = false;
        Ok(())
    }

    pub fn basis(&self) -> Basis {
        Basis {
            n: self.n,
            m: self.m,
            basic: self.basic.clone(),
            at_upper: self.state.iter().map(|s| matches!(s, VState::AtUpper)).collect(),
        }
    }

    /// Installs a snapshot taken from a problem of identical shape. A snapshot
    /// whose basis matrix has gone singular degrades to a cold slack basis
    /// rather than failing.
    pub fn install_basis(&mut self, basis: &Basis) -> Result<(), LpError> {
        if basis.n != self.n || basis.m != self.m {
            return Err(LpError::Invalid(format!(
                "basis shape {}x{} does not match problem shape {}x{}",
                basis.n, basis.m, self.n, self.m
            )));
        }
        let total = self.n + self.m;
        let mut is_basic = vec![false; total];
        for &v in &basis.basic {
            if v as usize >= total || is_basic[v as usize] {
                return Err(LpError::Invalid("basis lists an invalid basic set".to_string()));
            }
            is_basic[v as usize] = true;
        }
        for (j, &basic) in is_basic.iter().enumerate() {
            self.state[j] = if basic {
                VState::Basic(0) // positions patched below
            } else if basis.at_upper[j] && self.ub[j].is_finite() {
                VState::AtUpper
            } else {
                initial_nonbasic_state(self.lb[j], self.ub[j])
            };
        }
        self.basic = basis.basic.clone();
        for (pos, &v) in self.basic.iter().enumerate() {
            self.state[v as usize] = VState::Basic(pos as u32);
        }
        if self.reinvert().is_err() {
            self.reset_to_slack_basis();
        }
        self.xb_valid = false;
        Ok(())
    }

    fn reset_to_slack_basis(&mut self) {
        for j in 0..self.n {
            self.state[j] = initial_nonbasic_state(self.lb[j], self.ub[j]);
        }
        for i in 0..self.m {
            self.state[self.n + i] = VState::Basic(i as u32);
            self.basic[i] = (self.n + i) as u32;
        }
        self.binv = identity(self.m);
        self.pivots_since_refresh = 0;
        self.xb_valid = false;
    }

    pub fn value(&self, j: usize) -> f64 {
        assert!(j < self.n + self.m);
        match self.state[j] {
            VState::Basic(pos) => self.xb[pos as usize],
            _ => self.nonbasic_value(j),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.value(j)).collect()
    }

    pub fn objective_value(&self) -> f64 {
        (0..self.n).map(|j| self.obj[j] * self.value(j)).sum()
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VState::AtLower => self.lb[j],
            VState::AtUpper => self.ub[j],
            VState::Free => 0.0,
            VState::Basic(_) => unreachable!("nonbasic_value on a basic variable"),
        }
    }

    // -- linear algebra ------------------------------------------------------

    fn identity_check(&self) -> bool {
        self.binv.len() == self.m * self.m
    }

    fn reinvert(&mut self) -> Result<(), LpError> {
        let m = self.m;
        if m == 0 {
            self.binv.clear();
            self.pivots_since_refresh = 0;
            return Ok(());
        }
        // aug = [B | I], reduced in place to [I | B^{-1}].
        let w = 2 * m;
        let mut aug = vec![0.0; m * w];
        for (pos, &var) in self.basic.iter().enumerate() {
            let v = var as usize;
            if v < self.n {
                for &(i, a) in &self.cols[v] {
                    aug[i as usize * w + pos] = a;
                }
            } else {
                aug[(v - self.n) * w + pos] = 1.0;
            }
        }
        for i in 0..m {
            aug[i * w + m + i] = 1.0;
        }
        for k in 0..m {
            let mut piv_row = k;
            let mut piv_val = aug[k * w + k].abs();
            for r in k + 1..m {
                let v = aug[r * w + k].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = r;
                }
            }
            if piv_val < 1e-11 {
                return Err(LpError::Numerical("singular basis".to_string()));
            }
            if piv_row != k {
                let (a, b) = if piv_row > k { (k, piv_row) } else { (piv_row, k) };
                let (head, tail) = aug.split_at_mut(b * w);
                head[a * w..a * w + w].swap_with_slice(&mut tail[..w]);
            }
            let inv = 1.0 / aug[k * w + k];
            for x in &mut aug[k * w..(k + 1) * w] {
                *x *= inv;
            }
            for r in 0..m {
                if r == k {
                    continue;
                }
                let f = aug[r * w + k];
                if f != 0.0 {
                    let (pivot_row, target_row) = unsafe {
                        // Disjoint rows of the same buffer.
                        let base = aug.as_mut_ptr();
                        (
                            std::slice::from_raw_parts(base.add(k * w), w),
                            std::slice::from_raw_parts_mut(base.add(r * w), w),
                        )
                    };
                    for (t, p) in target_row.iter_mut().zip(pivot_row) {
                        *t -= f * p;
                    }
                }
            }
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m..(i + 1) * m].copy_from_slice(&aug[i * w + m..(i + 1) * w]);
        }
        self.binv = binv;
        self.pivots_since_refresh = 0;
        Ok(())
    }

    fn compute_xb(&mut self) {
        let m = self.m;
        let mut rhs_eff = self.rhs.clone();
        for j in 0..self.n + m {
            if matches!(self.state[j], VState::Basic(_)) {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v == 0.0 {
                continue;
            }
            if j < self.n {
                for &(i, a) in &self.cols[j] {
                    rhs_eff[i as usize] -= a * v;
                }
            } else {
                rhs_eff[j - self.n] -= v;
            }
        }
        debug_assert!(self.identity_check());
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.xb[i] = row.iter().zip(&rhs_eff).map(|(b, r)| b * r).sum();
        }
        self.xb_valid = true;
    }

    /// y^T = d^T B^{-1} for a sparse d over basis positions.
    fn btran_sparse(&self, d: &[(usize, f64)]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for &(pos, dv) in d {
            let row = &self.binv[pos * m..(pos + 1) * m];
            for (yk, b) in y.iter_mut().zip(row) {
                *yk += dv * b;
            }
        }
        y
    }

    fn btran_cost(&self) -> Vec<f64> {
        let d: Vec<(usize, f64)> = self
            .basic
            .iter()
            .enumerate()
            .filter_map(|(pos, &v)| {
                let c = if (v as usize) < self.n { self.obj[v as usize] } else { 0.0 };
                (c != 0.0).then_some((pos, c))
            })
            .collect();
        self.btran_sparse(&d)
    }

    /// w = B^{-1} A_j.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        if j < self.n {
            for (r, wr) in w.iter_mut().enumerate() {
                let row = &self.binv[r * m..(r + 1) * m];
                let mut acc = 0.0;
                for &(i, a) in &self.cols[j] {
                    acc += a * row[i as usize];
                }
                *wr = acc;
            }
        } else {
            let col = j - self.n;
            for (r, wr) in w.iter_mut().enumerate() {
                *wr = self.binv[r * m + col];
            }
        }
        w
    }

    fn col_dot(&self, y: &[f64], j: usize) -> f64 {
        if j < self.n {
            self.cols[j].iter().map(|&(i, a)| y[i as usize] * a).sum()
        } else {
            y[j - self.n]
        }
    }

    // -- simplex iterations --------------------------------------------------

    fn phase1_gradient(&self) -> Vec<(usize, f64)> {
        let mut g = Vec::new();
        for (pos, &var) in self.basic.iter().enumerate() {
            let v = var as usize;
            let x = self.xb[pos];
            if x < self.lb[v] - FEAS_TOL {
                g.push((pos, -1.0));
            } else if x > self.ub[v] + FEAS_TOL {
                g.push((pos, 1.0));
            }
        }
        g
    }

    /// Chooses an entering variable, or None at (phase-wise) optimality.
    fn price(&self, y: &[f64], phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let y_norm = y.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let tol = DUAL_TOL * (1.0 + y_norm);
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n + self.m {
            let st = self.state[j];
            if matches!(st, VState::Basic(_)) || self.lb[j] == self.ub[j] {
                continue;
            }
            let c = if phase1 || j >= self.n { 0.0 } else { self.obj[j] };
            let r = c - self.col_dot(y, j);
            let dir = match st {
                VState::AtLower if r < -tol => 1.0,
                VState::AtUpper if r > tol => -1.0,
                VState::Free if r < -tol => 1.0,
                VState::Free if r > tol => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            match best {
                Some((_, _, score)) if score >= r.abs() => {}
                _ => best = Some((j, dir, r.abs())),
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn ratio_and_pivot(&mut self, enter: usize, dir: f64, phase1: bool, bland: bool) -> Result<Step, LpError> {
        let w = self.ftran(enter);
        let range = self.ub[enter] - self.lb[enter];
        let mut theta = f64::INFINITY;
        let mut leave: Option<(usize, bool)> = None; // (position, hits_upper)
        let mut leave_w = 0.0f64;
        for (i, &wi) in w.iter().enumerate() {
            if wi.abs() <= PIVOT_TOL {
                continue;
            }
            let delta = dir * wi;
            let v = self.basic[i] as usize;
            let (l, u) = (self.lb[v], self.ub[v]);
            let x = self.xb[i];
            let (t, hits_upper) = if phase1 && x < l - FEAS_TOL {
                if delta < 0.0 {
                    ((x - l) / delta, false)
                } else {
                    continue;
                }
            } else if phase1 && x > u + FEAS_TOL {
                if delta > 0.0 {
                    ((x - u) / delta, true)
                } else {
                    continue;
                }
            } else if delta > 0.0 && l.is_finite() {
                ((x - l) / delta, false)
            } else if delta < 0.0 && u.is_finite() {
                ((x - u) / delta, true)
            } else {
                continue;
            };
            let t = t.max(0.0);
            let replace = match leave {
                None => t < theta,
                Some((p, _)) => {
                    t < theta - DEGEN_TOL
                        || (t <= theta + DEGEN_TOL
                            && if bland {
                                self.basic[i] < self.basic[p]
                            } else {
                                wi.abs() > leave_w.abs()
                            })
                }
            };
            if replace {
                theta = t;
                leave = Some((i, hits_upper));
                leave_w = wi;
            }
        }

        if range <= theta {
            // The entering variable hits its own opposite bound first.
            if !range.is_finite() {
                return if phase1 {
                    Err(LpError::Numerical("unbounded infeasibility descent".to_string()))
                } else {
                    Ok(Step::Unbounded)
                };
            }
            for (i, &wi) in w.iter().enumerate() {
                if wi != 0.0 {
                    self.xb[i] -= range * dir * wi;
                }
            }
            self.state[enter] = match self.state[enter] {
                VState::AtLower => VState::AtUpper,
                VState::AtUpper => VState::AtLower,
                other => other,
            };
            return Ok(Step::Moved { degenerate: range <= DEGEN_TOL });
        }

        let (p, hits_upper) = leave.expect("finite theta implies a leaving variable");
        if leave_w.abs() < SMALL_PIVOT && self.pivots_since_refresh > 0 {
            return Ok(Step::NeedsRefresh);
        }
        let enter_value = self.value(enter) + theta * dir;
        for (i, &wi) in w.iter().enumerate() {
            if i != p && wi != 0.0 {
                self.xb[i] -= theta * dir * wi;
            }
        }
        let leaving_var = self.basic[p] as usize;
        self.state[leaving_var] = if hits_upper { VState::AtUpper } else { VState::AtLower };

        // Rank-1 update of the inverse: eliminate w against position p.
        let m = self.m;
        let inv = 1.0 / leave_w;
        {
            let row_range = p * m..(p + 1) * m;
            for x in &mut self.binv[row_range] {
                *x *= inv;
            }
        }
        for (i, &wi) in w.iter().enumerate() {
            if i == p || wi == 0.0 {
                continue;
            }
            let (pivot_row, target_row) = unsafe {
                let base = self.binv.as_mut_ptr();
                (
                    std::slice::from_raw_parts(base.add(p * m), m),
                    std::slice::from_raw_parts_mut(base.add(i * m), m),
                )
            };
            for (t, pv) in target_row.iter_mut().zip(pivot_row) {
                *t -= wi * pv;
            }
        }
        self.basic[p] = enter as u32;
        self.state[enter] = VState::Basic(p as u32);
        self.xb[p] = enter_value;
        self.pivots_since_refresh += 1;
        Ok(Step::Moved { degenerate: theta <= DEGEN_TOL })
    }

    pub fn solve(&mut self) -> Result<LpStatus, LpError> {
        if !self.xb_valid {
            self.compute_xb();
        }
        let cap = 20_000 + 40 * self.m + 2 * self.n;
        let mut iters = 0usize;
        let mut stabilizations = 0usize;
        let mut degen_streak = 0usize;
        let mut bland = false;
        // An answer is only reported from values recomputed through the
        // current factorization with no pivots in between.
        let mut fresh = false;
        loop {
            iters += 1;
            if iters > cap {
                return Err(LpError::Numerical(format!("iteration limit {cap} reached")));
            }
            let grad = self.phase1_gradient();
            let phase1 = !grad.is_empty();
            let y = if phase1 { self.btran_sparse(&grad) } else { self.btran_cost() };
            match self.price(&y, phase1, bland) {
                None => {
                    if fresh {
                        return Ok(if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal });
                    }
                    // Refactorize when cheap or stale, then recheck the answer
                    // from recomputed values.
                    if self.pivots_since_refresh > 0
                        && (self.m <= VERIFY_DIM || self.pivots_since_refresh >= REFRESH_EVERY / 4)
                    {
                        self.reinvert()?;
                    }
                    self.compute_xb();
                    fresh = true;
                    stabilizations += 1;
                    if stabilizations > 40 {
                        return Err(LpError::Numerical("failed to stabilize at an answer".to_string()));
                    }
                }
                Some((enter, dir)) => match self.ratio_and_pivot(enter, dir, phase1, bland)? {
                    Step::Unbounded => return Ok(LpStatus::Unbounded),
                    Step::NeedsRefresh => {
                        fresh = false;
                        self.reinvert()?;
                        self.compute_xb();
                        stabilizations += 1;
                        if stabilizations > 40 {
                            return Err(LpError::Numerical("repeated tiny pivots".to_string()));
                        }
                    }
                    Step::Moved { degenerate } => {
                        fresh = false;
                        if degenerate {
                            degen_streak += 1;
                            if degen_streak > BLAND_TRIGGER {
                                bland = true;
                            }
                        } else {
                            degen_streak = 0;
                            bland = false;
                        }
                        if self.pivots_since_refresh >= REFRESH_EVERY {
                            self.reinvert()?;
                            self.compute_xb();
                        }
                    }
                },
            }
        }
    }

    /// Re-verifies an optimal basis against the original-scale data: primal
    /// feasibility, reduced-cost signs, and strong duality with the basic
    /// dual solution. Residual tolerances are relative.
    pub fn audit(&mut self) -> Result<(), String> {
        self.reinvert().map_err(|e| e.to_string())?;
        self.compute_xb();
        for j in 0..self.n + self.m {
            let x = self.value(j);
            let tol = 1e-6 * self.lb[j].abs().max(self.ub[j].abs()).max(1.0);
            if x < self.lb[j] - tol || x > self.ub[j] + tol {
                return Err(format!(
                    "variable {j} = {x} violates bounds [{}, {}]",
                    self.lb[j], self.ub[j]
                ));
            }
        }
        for i in 0..self.m {
            let scale = self.row_scale[i];
            let mut act = 0.0f64;
            let mut mag = 1.0f64;
            for &(j, a) in &self.rows[i] {
                let term = (a / scale) * self.value(j as usize);
                act += term;
                mag = mag.max(term.abs());
            }
            let rhs = self.rhs[i] / scale;
            mag = mag.max(rhs.abs());
            let resid = act - rhs;
            let ok = match self.senses[i] {
                Sense::Le => resid <= 1e-7 * mag,
                Sense::Ge => resid >= -1e-7 * mag,
                Sense::Eq => resid.abs() <= 1e-7 * mag,
            };
            if !ok {
                return Err(format!("row {i} residual {resid} exceeds tolerance"));
            }
        }
        let y = self.btran_cost();
        let cscale = self.obj.iter().fold(1.0f64, |a, &c| a.max(c.abs()));
        let mut dual_gap = (0..self.n).map(|j| self.obj[j] * self.value(j)).sum::<f64>();
        dual_gap -= y.iter().zip(&self.rhs).map(|(yi, bi)| yi * bi).sum::<f64>();
        for j in 0..self.n + self.m {
            if matches!(self.state[j], VState::Basic(_)) {
                continue;
            }
            let c = if j < self.n { self.obj[j] } else { 0.0 };
            let r = c - self.col_dot(&y, j);
            let tol = 1e-6 * cscale.max(1.0 + self.col_dot(&y, j).abs());
            let ok = match self.state[j] {
                VState::AtLower => r >= -tol || self.lb[j] == self.ub[j],
                VState::AtUpper => r <= tol || self.lb[j] == self.ub[j],
                VState::Free => r.abs() <= tol,
                VState::Basic(_) => unreachable!(),
            };
            if !ok {
                return Err(format!("reduced cost {r} of nonbasic {j} has the wrong sign"));
            }
            dual_gap -= r * self.value(j);
        }
        let obj = self.objective_value();
        if dual_gap.abs() > 1e-6 * obj.abs().max(1.0) {
            return Err(format!("strong duality residual {dual_gap} at objective {obj}"));
        }
        Ok(())
    }

    // -- crate-internal accessors for cut generation -------------------------

    pub(crate) fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub(crate) fn basic_vars(&self) -> &[u32] {
        &self.basic
    }

    pub(crate) fn basic_values(&self) -> &[f64] {
        &self.xb
    }

    pub(crate) fn binv_row(&self, pos: usize) -> &[f64] {
        &self.binv[pos * self.m..(pos + 1) * self.m]
    }

    pub(crate) fn tableau_coef(&self, binv_row: &[f64], j: usize) -> f64 {
        self.col_dot(binv_row, j)
    }

    pub(crate) fn is_nonbasic_at_upper(&self, j: usize) -> bool {
        matches!(self.state[j], VState::AtUpper)
    }

    pub(crate) fn is_nonbasic_free(&self, j: usize) -> bool {
        matches!(self.state[j], VState::Free)
    }

    pub(crate) fn is_basic(&self, j: usize) -> bool {
        matches!(self.state[j], VState::Basic(_))
    }

    pub(crate) fn bound_pair(&self, j: usize) -> (f64, f64) {
        (self.lb[j], self.ub[j])
    }

    pub(crate) fn scaled_row(&self, i: usize) -> (&[(u32, f64)], f64) {
        (&self.rows[i], self.rhs[i])
    }

    pub(crate) fn ensure_fresh(&mut self) -> Result<(), LpError> {
        if self.pivots_since_refresh > 0 {
            self.reinvert()?;
        }
        self.compute_xb();
        Ok(())
    }
}

fn initial_nonbasic_state(lo: f64, hi: f64) -> VState {
    if lo.is_finite() {
        VState::AtLower
    } else if hi.is_finite() {
        VState::AtUpper
    } else {
        VState::Free
    }
}

fn identity(m: usize) -> Vec<f64> {
    let mut id = vec![0.0; m * m];
    for i in 0..m {
        id[i * m + i] = 1.0;
    }
    id
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(
        objective: Vec<f64>,
        bounds: Vec<(f64, f64)>,
        rows: Vec<LpRow>,
    ) -> LpProblem {
        let n = objective.len();
        LpProblem {
            objective,
            lower: bounds.iter().map(|b| b.0).collect(),
            upper: bounds.iter().map(|b| b.1).collect(),
            integer: vec![false; n],
            rows,
        }
    }

    #[test]
    fn bound_flip_iteration() {
        // min -x - y with x + y <= 1.5, both in [0, 1]: optimum uses a flip.
        let p = problem(
            vec![-1.0, -1.0],
            vec![(0.0, 1.0), (0.0, 1.0)],
            vec![LpRow { terms: vec![(0, 1.0), (1, 1.0)], sense: Sense::Le, rhs: 1.5 }],
        );
        let mut s = SimplexSolver::new(&p).unwrap();
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        assert!((s.objective_value() + 1.5).abs() < 1e-9);
        s.audit().unwrap();
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Several redundant rows through the same vertex.
        let p = problem(
            vec![-1.0, -1.0],
            vec![(0.0, f64::INFINITY), (0.0, f64::INFINITY)],
            vec![
                LpRow { terms: vec![(0, 1.0)], sense: Sense::Le, rhs: 1.0 },
                LpRow { terms: vec![(0, 1.0), (1, 0.0)], sense: Sense::Le, rhs: 1.0 },
                LpRow { terms: vec![(0, 2.0)], sense: Sense::Le, rhs: 2.0 },
                LpRow { terms: vec![(1, 1.0)], sense: Sense::Le, rhs: 1.0 },
                LpRow { terms: vec![(0, 1.0), (1, 1.0)], sense: Sense::Le, rhs: 2.0 },
            ],
        );
        let mut s = SimplexSolver::new(&p).unwrap();
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        assert!((s.objective_value() + 2.0).abs() < 1e-9);
        s.audit().unwrap();
    }

    #[test]
    fn warm_start_after_bound_change_is_cheap_and_exact() {
        let p = problem(
            vec![1.0, 2.0, 3.0],
            vec![(0.0, 1.0); 3],
            vec![
                LpRow { terms: vec![(0, 1.0), (1, 1.0), (2, 1.0)], sense: Sense::Ge, rhs: 1.5 },
                LpRow { terms: vec![(0, 1.0), (1, -1.0)], sense: Sense::Le, rhs: 0.5 },
            ],
        );
        let mut s = SimplexSolver::new(&p).unwrap();
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        // Fix x0 to zero and re-solve from the current basis.
        s.set_var_bounds(0, 0.0, 0.0).unwrap();
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        s.audit().unwrap();
        assert!(s.value(0).abs() < 1e-12);
        // Against a cold solve of the modified problem.
        let mut p2 = p.clone();
        p2.upper[0] = 0.0;
        let mut cold = SimplexSolver::new(&p2).unwrap();
        cold.solve().unwrap();
        assert!((s.objective_value() - cold.objective_value()).abs() < 1e-9);
    }

    #[test]
    fn add_row_extends_the_inverse() {
        let p = problem(
            vec![-1.0, -1.0],
            vec![(0.0, 10.0), (0.0, 10.0)],
            vec![LpRow { terms: vec![(0, 1.0), (1, 2.0)], sense: Sense::Le, rhs: 8.0 }],
        );
        let mut s = SimplexSolver::new(&p).unwrap();
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        let before = s.objective_value();
        s.add_row(&LpRow { terms: vec![(0, 1.0), (1, 1.0)], sense: Sense::Le, rhs: 5.0 }).unwrap();
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        assert!(s.objective_value() >= before - 1e-9, "cut can only tighten a minimum");
        s.audit().unwrap();
        let x = s.values();
        assert!(x[0] + x[1] <= 5.0 + 1e-7);
    }

    #[test]
    fn fixed_variables_never_enter() {
        let p = problem(
            vec![-5.0, -1.0],
            vec![(0.0, 0.0), (0.0, 2.0)],
            vec![LpRow { terms: vec![(0, 1.0), (1, 1.0)], sense: Sense::Le, rhs: 10.0 }],
        );
        let mut s = SimplexSolver::new(&p).unwrap();
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        assert_eq!(s.value(0), 0.0);
        assert!((s.value(1) - 2.0).abs() < 1e-9);
    }
}
