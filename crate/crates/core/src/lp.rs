//! Self-contained dense linear-programming solver.
//!
//! Two-phase primal simplex on a dense tableau with bounded variables.
//! Decision variables must carry finite bounds (every program built in this
//! crate lives over a bounded input box); slack variables are one-side
//! bounded. Phase 1 drives artificial variables to zero, phase 2 optimizes
//! the caller's objective. Dantzig pricing switches to Bland's rule once the
//! degenerate-pivot budget is spent, which guarantees termination up to the
//! pivot cap.

use crate::error::LpFailure;
use crate::interval::LinearExpression;

/// A feasibility violation below this threshold counts as satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Documented accuracy of optimal values on reference instances.
pub const OPTIMALITY_TOL: f64 = 1e-6;
/// Entries smaller than this never serve as pivots.
pub const PIVOT_TOL: f64 = 1e-9;
/// Default cap on simplex pivots before reporting a solver failure.
pub const DEFAULT_PIVOT_CAP: usize = 50_000;

const REDUCED_COST_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;

/// Constraint relation. Strict inequalities from property encodings are
/// closed before they reach the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    pub fn symbol(&self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// One constraint row. The expression's constant is folded into the
/// right-hand side during standardization.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub expr: LinearExpression,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear program over `bounds.len()` decision variables, each with finite
/// lower and upper bounds.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: LinearExpression,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn num_vars(&self) -> usize {
        self.bounds.len()
    }

    /// Minimize `objective` subject to nothing but the variable bounds.
    pub fn minimize(objective: LinearExpression, bounds: Vec<(f64, f64)>) -> Self {
        Self {
            sense: Sense::Minimize,
            objective,
            constraints: Vec::new(),
            bounds,
        }
    }

    fn validate(&self) -> Result<(), LpFailure> {
        let n = self.num_vars();
        if self.objective.dim() != n {
            return Err(LpFailure::Malformed(format!(
                "objective has {} coefficients for {} variables",
                self.objective.dim(),
                n
            )));
        }
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(LpFailure::Malformed(format!(
                    "variable {i} has non-finite bounds [{lo}, {hi}]"
                )));
            }
            if lo > hi {
                return Err(LpFailure::Malformed(format!(
                    "variable {i} has empty bounds [{lo}, {hi}]"
                )));
            }
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if c.expr.dim() != n {
                return Err(LpFailure::Malformed(format!(
                    "constraint {k} has {} coefficients for {} variables",
                    c.expr.dim(),
                    n
                )));
            }
            if !c.rhs.is_finite()
                || !c.expr.constant.is_finite()
                || c.expr.coeffs.iter().any(|v| !v.is_finite())
            {
                return Err(LpFailure::Malformed(format!("constraint {k} is non-finite")));
            }
        }
        Ok(())
    }
}

/// Result of a solve: the caller's question was answered.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { solution: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

/// Solve with the default pivot cap.
pub fn solve(lp: &LinearProgram) -> Result<LpOutcome, LpFailure> {
    solve_with_cap(lp, DEFAULT_PIVOT_CAP)
}

/// Two-phase simplex with an explicit pivot cap.
pub fn solve_with_cap(lp: &LinearProgram, cap: usize) -> Result<LpOutcome, LpFailure> {
    lp.validate()?;
    let mut tab = Tableau::build(lp, cap);
    if !tab.phase_one()? {
        return Ok(LpOutcome::Infeasible);
    }
    tab.enter_phase_two(lp);
    match tab.optimize()? {
        StopReason::Optimal => {}
        StopReason::Unbounded => return Ok(LpOutcome::Unbounded),
    }
    let solution = tab.structural_solution(lp);
    // The internal objective is negated for maximization; the reported value
    // is always recomputed from the caller's objective at the solution.
    let value = lp.objective.eval(&solution).expect("dims checked");
    Ok(LpOutcome::Optimal { solution, value })
}

/// Phase-1 feasibility only. Returns a feasible point when one exists; the
/// witness is handed to concrete counterexample validation downstream.
pub fn feasible(lp: &LinearProgram) -> Result<Option<Vec<f64>>, LpFailure> {
    feasible_with_cap(lp, DEFAULT_PIVOT_CAP)
}

pub fn feasible_with_cap(lp: &LinearProgram, cap: usize) -> Result<Option<Vec<f64>>, LpFailure> {
    lp.validate()?;
    let mut tab = Tableau::build(lp, cap);
    if !tab.phase_one()? {
        return Ok(None);
    }
    Ok(Some(tab.structural_solution(lp)))
}

/// Fixed-format text rendering for cross-checking against external tools.
pub fn dump_lp(lp: &LinearProgram) -> String {
    let mut out = String::new();
    out.push_str(match lp.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj:");
    render_expr(&mut out, &lp.objective.coeffs);
    if lp.objective.constant != 0.0 {
        out.push_str(&format!(" + {}", lp.objective.constant));
    }
    out.push_str("\nSubject To\n");
    for (i, c) in lp.constraints.iter().enumerate() {
        out.push_str(&format!(" c{}:", i + 1));
        render_expr(&mut out, &c.expr.coeffs);
        out.push_str(&format!(" {} {}\n", c.relation.symbol(), c.rhs - c.expr.constant));
    }
    out.push_str("Bounds\n");
    for (i, &(lo, hi)) in lp.bounds.iter().enumerate() {
        out.push_str(&format!(" {} <= x{} <= {}\n", lo, i + 1, hi));
    }
    out.push_str("End\n");
    out
}

fn render_expr(out: &mut String, coeffs: &[f64]) {
    let mut any = false;
    for (i, &c) in coeffs.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        if any {
            out.push_str(if c < 0.0 { " -" } else { " +" });
            out.push_str(&format!(" {} x{}", c.abs(), i + 1));
        } else {
            out.push_str(&format!(" {} x{}", c, i + 1));
        }
        any = true;
    }
    if !any {
        out.push_str(" 0");
    }
}

enum StopReason {
    Optimal,
    Unbounded,
}

struct Tableau {
    /// Current `B^-1 A`, rows x cols.
    mat: Vec<Vec<f64>>,
    /// Current `B^-1 b`.
    rhs: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    /// Basic column per row.
    basis: Vec<usize>,
    /// Row index if basic.
    basic_row: Vec<Option<usize>>,
    /// Nonbasic position: true if parked at the upper bound.
    at_upper: Vec<bool>,
    n_structural: usize,
    first_artificial: usize,
    pivots: usize,
    degenerate: usize,
    bland: bool,
    cap: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram, cap: usize) -> Tableau {
        let n = lp.num_vars();
        let m = lp.constraints.len();

        let mut lo: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();
        let mut hi: Vec<f64> = lp.bounds.iter().map(|b| b.1).collect();
        let mut at_upper = vec![false; n];

        // Slack column per inequality row.
        let mut slack_col = vec![None; m];
        for (i, c) in lp.constraints.iter().enumerate() {
            match c.relation {
                Relation::Le => {
                    slack_col[i] = Some(lo.len());
                    lo.push(0.0);
                    hi.push(f64::INFINITY);
                    at_upper.push(false);
                }
                Relation::Ge => {
                    slack_col[i] = Some(lo.len());
                    lo.push(f64::NEG_INFINITY);
                    hi.push(0.0);
                    at_upper.push(true);
                }
                Relation::Eq => {}
            }
        }
        let first_artificial = lo.len();

        // Residual of each row at the initial nonbasic point (all structural
        // variables at their lower bound, slacks at zero).
        let nb_value = |col: usize, at_upper: &Vec<bool>, lo: &Vec<f64>, hi: &Vec<f64>| {
            if at_upper[col] {
                hi[col]
            } else {
                lo[col]
            }
        };

        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut need_artificial: Vec<Option<f64>> = Vec::with_capacity(m);

        for (i, c) in lp.constraints.iter().enumerate() {
            let b = c.rhs - c.expr.constant;
            let mut residual = b;
            for (j, &a) in c.expr.coeffs.iter().enumerate() {
                residual -= a * nb_value(j, &at_upper, &lo, &hi);
            }
            let mut row = vec![0.0; first_artificial];
            row[..n].copy_from_slice(&c.expr.coeffs);
            if let Some(s) = slack_col[i] {
                row[s] = 1.0;
            }
            // The slack can serve as the initial basic variable when the
            // residual already sits inside its bounds.
            let slack_ok = match c.relation {
                Relation::Le => residual >= 0.0,
                Relation::Ge => residual <= 0.0,
                Relation::Eq => false,
            };
            if slack_ok {
                basis.push(slack_col[i].unwrap());
                need_artificial.push(None);
            } else {
                basis.push(usize::MAX); // patched below
                need_artificial.push(Some(residual));
            }
            rows.push(row);
            rhs.push(b);
        }

        // Append artificial columns, sign-adjusted so each enters its row
        // with coefficient +1 and a non-negative basic value.
        let mut n_artificial = 0;
        for (i, res) in need_artificial.iter().enumerate() {
            if res.is_some() {
                n_artificial += 1;
                let _ = i;
            }
        }
        let total_cols = first_artificial + n_artificial;
        for row in rows.iter_mut() {
            row.resize(total_cols, 0.0);
        }
        let mut next = first_artificial;
        for (i, res) in need_artificial.iter().enumerate() {
            if let Some(r) = res {
                let sigma = if *r >= 0.0 { 1.0 } else { -1.0 };
                if sigma < 0.0 {
                    for v in rows[i].iter_mut() {
                        *v = -*v;
                    }
                    rhs[i] = -rhs[i];
                }
                rows[i][next] = 1.0;
                lo.push(0.0);
                hi.push(f64::INFINITY);
                at_upper.push(false);
                basis[i] = next;
                next += 1;
            }
        }

        let mut basic_row = vec![None; total_cols];
        for (r, &col) in basis.iter().enumerate() {
            basic_row[col] = Some(r);
        }

        // Phase-1 cost: sum of artificials.
        let mut cost = vec![0.0; total_cols];
        for c in cost.iter_mut().skip(first_artificial) {
            *c = 1.0;
        }

        Tableau {
            mat: rows,
            rhs,
            lo,
            hi,
            cost,
            basis,
            basic_row,
            at_upper,
            n_structural: n,
            first_artificial,
            pivots: 0,
            degenerate: 0,
            bland: false,
            cap,
        }
    }

    fn ncols(&self) -> usize {
        self.lo.len()
    }

    fn nrows(&self) -> usize {
        self.basis.len()
    }

    fn nonbasic_value(&self, col: usize) -> f64 {
        if self.at_upper[col] {
            self.hi[col]
        } else {
            self.lo[col]
        }
    }

    fn basic_values(&self) -> Vec<f64> {
        let mut vals = self.rhs.clone();
        for col in 0..self.ncols() {
            if self.basic_row[col].is_some() {
                continue;
            }
            let x = self.nonbasic_value(col);
            if x == 0.0 {
                continue;
            }
            for r in 0..self.nrows() {
                let a = self.mat[r][col];
                if a != 0.0 {
                    vals[r] -= a * x;
                }
            }
        }
        vals
    }

    fn reduced_costs(&self) -> Vec<f64> {
        let mut d = self.cost.clone();
        for r in 0..self.nrows() {
            let cb = self.cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            for (dj, a) in d.iter_mut().zip(self.mat[r].iter()) {
                *dj -= cb * a;
            }
        }
        d
    }

    /// Returns true when feasible within `FEASIBILITY_TOL`.
    fn phase_one(&mut self) -> Result<bool, LpFailure> {
        if self.first_artificial == self.ncols() {
            // No artificials were needed; the initial basis is feasible.
        } else {
            match self.optimize()? {
                StopReason::Optimal => {}
                StopReason::Unbounded => {
                    // Minimizing a sum of non-negative variables is bounded.
                    return Err(LpFailure::Malformed(
                        "phase-1 objective reported unbounded".to_string(),
                    ));
                }
            }
            let vals = self.basic_values();
            let mut infeasibility = 0.0;
            for col in self.first_artificial..self.ncols() {
                let v = match self.basic_row[col] {
                    Some(r) => vals[r],
                    None => self.nonbasic_value(col),
                };
                infeasibility += v.max(0.0);
            }
            if infeasibility > FEASIBILITY_TOL {
                return Ok(false);
            }
        }
        // Pin artificials at zero so they never re-enter.
        for col in self.first_artificial..self.ncols() {
            self.hi[col] = 0.0;
            if self.basic_row[col].is_none() {
                self.at_upper[col] = false;
            }
        }
        Ok(true)
    }

    fn enter_phase_two(&mut self, lp: &LinearProgram) {
        let flip = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
        for c in self.cost.iter_mut() {
            *c = 0.0;
        }
        for j in 0..self.n_structural {
            self.cost[j] = flip * lp.objective.coeffs[j];
        }
        self.degenerate = 0;
        self.bland = false;
    }

    fn optimize(&mut self) -> Result<StopReason, LpFailure> {
        let bland_threshold = 2 * (self.ncols() + self.nrows());
        loop {
            if self.pivots > self.cap {
                return Err(LpFailure::IterationCap { cap: self.cap });
            }
            let vals = self.basic_values();
            let d = self.reduced_costs();

            // Entering variable.
            let mut entering: Option<usize> = None;
            let mut best = REDUCED_COST_TOL;
            for j in 0..self.ncols() {
                if self.basic_row[j].is_some() || self.lo[j] == self.hi[j] {
                    continue;
                }
                let improving = if self.at_upper[j] { d[j] } else { -d[j] };
                if improving > REDUCED_COST_TOL {
                    if self.bland {
                        entering = Some(j);
                        break;
                    }
                    if improving > best {
                        best = improving;
                        entering = Some(j);
                    }
                }
            }
            let Some(j) = entering else {
                return Ok(StopReason::Optimal);
            };

            // Direction: entering moves off its bound by t >= 0.
            let sigma = if self.at_upper[j] { -1.0 } else { 1.0 };

            // Ratio test over basic rows plus the entering bound flip.
            let mut t_best = self.hi[j] - self.lo[j]; // may be +inf
            let mut leave: Option<usize> = None; // row index
            let mut leave_to_upper = false;
            for r in 0..self.nrows() {
                let rho = sigma * self.mat[r][j];
                if rho.abs() <= PIVOT_TOL {
                    continue;
                }
                let bv = self.basis[r];
                let limit = if rho > 0.0 {
                    if self.lo[bv] == f64::NEG_INFINITY {
                        continue;
                    }
                    ((vals[r] - self.lo[bv]) / rho).max(0.0)
                } else {
                    if self.hi[bv] == f64::INFINITY {
                        continue;
                    }
                    ((self.hi[bv] - vals[r]) / -rho).max(0.0)
                };
                let replace = match leave {
                    None => limit < t_best,
                    Some(cur) => {
                        limit < t_best - DEGENERATE_STEP
                            || (limit <= t_best + DEGENERATE_STEP && self.basis[r] < self.basis[cur])
                    }
                };
                if replace {
                    t_best = limit.min(t_best);
                    leave = Some(r);
                    leave_to_upper = rho < 0.0;
                }
            }

            if t_best == f64::INFINITY {
                return Ok(StopReason::Unbounded);
            }
            if t_best < DEGENERATE_STEP {
                self.degenerate += 1;
                if self.degenerate > bland_threshold {
                    self.bland = true;
                }
            }
            self.pivots += 1;

            match leave {
                None => {
                    // Bound flip: the entering variable runs to its other bound.
                    self.at_upper[j] = !self.at_upper[j];
                }
                Some(r) => {
                    let leaving = self.basis[r];
                    self.at_upper[leaving] = leave_to_upper;
                    self.basic_row[leaving] = None;
                    self.basis[r] = j;
                    self.basic_row[j] = Some(r);
                    self.pivot(r, j);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.mat[r][j];
        debug_assert!(piv.abs() > PIVOT_TOL);
        let inv = 1.0 / piv;
        for v in self.mat[r].iter_mut() {
            *v *= inv;
        }
        self.rhs[r] *= inv;
        // Snap the pivot column to exact unit form.
        self.mat[r][j] = 1.0;
        for i in 0..self.nrows() {
            if i == r {
                continue;
            }
            let f = self.mat[i][j];
            if f == 0.0 {
                continue;
            }
            let (pr, rest) = split_rows(&mut self.mat, r, i);
            for (v, p) in rest.iter_mut().zip(pr.iter()) {
                *v -= f * p;
            }
            rest[j] = 0.0;
            self.rhs[i] -= f * self.rhs[r];
        }
    }

    fn structural_solution(&self, lp: &LinearProgram) -> Vec<f64> {
        let vals = self.basic_values();
        (0..self.n_structural)
            .map(|j| {
                let raw = match self.basic_row[j] {
                    Some(r) => vals[r],
                    None => self.nonbasic_value(j),
                };
                raw.clamp(lp.bounds[j].0, lp.bounds[j].1)
            })
            .collect()
    }
}

/// Borrow row `r` immutably and row `i` mutably at once.
fn split_rows(mat: &mut [Vec<f64>], r: usize, i: usize) -> (&[f64], &mut [f64]) {
    debug_assert_ne!(r, i);
    if r < i {
        let (a, b) = mat.split_at_mut(i);
        (a[r].as_slice(), b[0].as_mut_slice())
    } else {
        let (a, b) = mat.split_at_mut(r);
        (b[0].as_slice(), a[i].as_mut_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expr(coeffs: &[f64], c: f64) -> LinearExpression {
        LinearExpression::new(coeffs.to_vec(), c).unwrap()
    }

    fn le(coeffs: &[f64], rhs: f64) -> Constraint {
        Constraint {
            expr: expr(coeffs, 0.0),
            relation: Relation::Le,
            rhs,
        }
    }

    fn ge(coeffs: &[f64], rhs: f64) -> Constraint {
        Constraint {
            expr: expr(coeffs, 0.0),
            relation: Relation::Ge,
            rhs,
        }
    }

    fn eq(coeffs: &[f64], rhs: f64) -> Constraint {
        Constraint {
            expr: expr(coeffs, 0.0),
            relation: Relation::Eq,
            rhs,
        }
    }

    #[test]
    fn maximize_over_box_without_constraints() {
        let lp = LinearProgram {
            sense: Sense::Maximize,
            objective: expr(&[1.0], 0.0),
            constraints: vec![],
            bounds: vec![(0.0, 1.0)],
        };
        match solve(&lp).unwrap() {
            LpOutcome::Optimal { solution, value } => {
                assert!((value - 1.0).abs() < 1e-9);
                assert!((solution[0] - 1.0).abs() < 1e-9);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let lp = LinearProgram {
            sense: Sense::Minimize,
            objective: expr(&[0.0], 0.0),
            constraints: vec![ge(&[1.0], 1.0), le(&[1.0], 0.0)],
            bounds: vec![(-10.0, 10.0)],
        };
        assert_eq!(solve(&lp).unwrap(), LpOutcome::Infeasible);

        let lp2 = LinearProgram {
            sense: Sense::Minimize,
            objective: expr(&[0.0], 0.0),
            constraints: vec![eq(&[1.0], 0.0), eq(&[1.0], 1.0)],
            bounds: vec![(-10.0, 10.0)],
        };
        assert!(feasible(&lp2).unwrap().is_none());
    }

    #[test]
    fn feasible_returns_a_replayable_witness() {
        let lp = LinearProgram {
            sense: Sense::Minimize,
            objective: expr(&[0.0, 0.0], 0.0),
            constraints: vec![le(&[1.0, 1.0], 1.2), ge(&[1.0, -1.0], -0.5)],
            bounds: vec![(0.0, 1.0), (0.0, 1.0)],
        };
        let w = feasible(&lp).unwrap().expect("feasible");
        assert!(w[0] + w[1] <= 1.2 + FEASIBILITY_TOL);
        assert!(w[0] - w[1] >= -0.5 - FEASIBILITY_TOL);
        assert!((0.0..=1.0).contains(&w[0]) && (0.0..=1.0).contains(&w[1]));
    }

    #[test]
    fn empty_constraint_set_is_feasible() {
        let lp = LinearProgram {
            sense: Sense::Minimize,
            objective: expr(&[0.0, 0.0], 0.0),
            constraints: vec![],
            bounds: vec![(-1.0, 2.0), (0.5, 0.5)],
        };
        let w = feasible(&lp).unwrap().expect("box point");
        assert!(w[0] >= -1.0 && w[0] <= 2.0);
        assert_eq!(w[1], 0.5);
    }

    #[test]
    fn textbook_optimum() {
        // max 3x + 2y s.t. x + y <= 4, x + 3y <= 6, x,y in [0, 10] -> (4, 0), 12
        let lp = LinearProgram {
            sense: Sense::Maximize,
            objective: expr(&[3.0, 2.0], 0.0),
            constraints: vec![le(&[1.0, 1.0], 4.0), le(&[1.0, 3.0], 6.0)],
            bounds: vec![(0.0, 10.0), (0.0, 10.0)],
        };
        match solve(&lp).unwrap() {
            LpOutcome::Optimal { value, .. } => assert!((value - 12.0).abs() < 1e-8),
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn equality_rows_hold_at_optimum() {
        let lp = LinearProgram {
            sense: Sense::Minimize,
            objective: expr(&[1.0, 1.0], 0.0),
            constraints: vec![eq(&[1.0, -1.0], 0.25)],
            bounds: vec![(0.0, 1.0), (0.0, 1.0)],
        };
        match solve(&lp).unwrap() {
            LpOutcome::Optimal { solution, value } => {
                assert!((solution[0] - solution[1] - 0.25).abs() < 1e-7);
                assert!((value - 0.25).abs() < 1e-7);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn constant_in_expression_folds_into_rhs() {
        // x + 1 <= 1.5  =>  x <= 0.5
        let lp = LinearProgram {
            sense: Sense::Maximize,
            objective: expr(&[1.0], 0.0),
            constraints: vec![Constraint {
                expr: expr(&[1.0], 1.0),
                relation: Relation::Le,
                rhs: 1.5,
            }],
            bounds: vec![(0.0, 2.0)],
        };
        match solve(&lp).unwrap() {
            LpOutcome::Optimal { value, .. } => assert!((value - 0.5).abs() < 1e-8),
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let lp = LinearProgram {
            sense: Sense::Minimize,
            objective: expr(&[1.0, -2.0, 0.5], 0.0),
            constraints: vec![
                le(&[1.0, 1.0, 1.0], 2.0),
                ge(&[1.0, -1.0, 0.0], -1.0),
                le(&[0.0, 1.0, -1.0], 0.75),
            ],
            bounds: vec![(-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
        };
        let a = solve(&lp).unwrap();
        let b = solve(&lp).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iteration_cap_is_a_distinct_failure() {
        let lp = LinearProgram {
            sense: Sense::Maximize,
            objective: expr(&[1.0, 1.0], 0.0),
            constraints: vec![le(&[1.0, 2.0], 3.0), le(&[2.0, 1.0], 3.0)],
            bounds: vec![(0.0, 5.0), (0.0, 5.0)],
        };
        match solve_with_cap(&lp, 0) {
            Err(LpFailure::IterationCap { cap: 0 }) => {}
            other => panic!("expected iteration cap, got {other:?}"),
        }
    }

    #[test]
    fn dump_renders_fixed_format() {
        let lp = LinearProgram {
            sense: Sense::Minimize,
            objective: expr(&[2.0, -1.0], 0.0),
            constraints: vec![le(&[1.0, 1.0], 4.0)],
            bounds: vec![(0.0, 1.0), (0.0, 2.0)],
        };
        let text = dump_lp(&lp);
        assert!(text.starts_with("Minimize\n"));
        assert!(text.contains("Subject To"));
        assert!(text.contains("c1: 1 x1 + 1 x2 <= 4"));
        assert!(text.contains("0 <= x2 <= 2"));
        assert!(text.ends_with("End\n"));
    }
}
