//! Dense two-phase simplex over an expanded linear model.
//!
//! Small and deliberately boring: Bland's rule everywhere, so no cycling,
//! at the cost of some extra pivots.  Problem sizes coming out of the
//! decomposition are tiny (a handful of variables and rows), which makes a
//! dense tableau the right trade.

use crate::expr::{Expr, FamilyLayout};
use crate::model::{ModelIR, Rel};
use crate::solver::{LocalSolveResult, SolveStatus};

/// Why a model could not be handed to the simplex at all.
#[derive(Debug, Clone)]
pub struct LpFailure(pub String);

impl std::fmt::Display for LpFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "not solvable as a linear program: {}", self.0)
    }
}

impl std::error::Error for LpFailure {}

/// Affine view of an expression: `coeffs . x + constant`.
fn affine_view(
    e: &Expr,
    n: usize,
    layout: &FamilyLayout,
) -> Result<(Vec<f64>, f64), LpFailure> {
    let over = vec![true; n];
    if !e.is_linear(&over) {
        return Err(LpFailure("nonlinear expression".into()));
    }
    let zero = vec![0.0; n];
    let constant = e
        .eval_flat(&zero)
        .map_err(|err| LpFailure(format!("evaluation failed at the origin: {err}")))?;
    let coeffs = e
        .gradient(&zero, layout)
        .map_err(|err| LpFailure(format!("gradient failed at the origin: {err}")))?;
    Ok((coeffs, constant))
}

/// How each model variable maps into the nonnegative simplex space.
enum Col {
    /// `x = lb + u`
    Shift { u: usize, lb: f64 },
    /// `x = ub - u` (no finite lower bound)
    Flip { u: usize, ub: f64 },
    /// `x = u_plus - u_minus` (free)
    Split { plus: usize, minus: usize },
}

struct Tableau {
    /// `rows x cols`, RHS in the last column.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

const EPS: f64 = 1e-9;

impl Tableau {
    /// One simplex phase under Bland's rule.  `costs` has one entry per
    /// column (RHS excluded).  Returns the pivot count, or `None` when the
    /// chosen column is unbounded below.
    fn run_phase(
        &mut self,
        costs: &[f64],
        allow: &[bool],
        max_pivots: usize,
    ) -> (usize, Option<usize>) {
        let m = self.a.len();
        let mut pivots = 0usize;
        loop {
            if pivots >= max_pivots {
                return (pivots, None);
            }
            // Reduced costs: c_j - c_B . B^-1 A_j, computed directly from the
            // maintained tableau (a is already B^-1 A).
            let mut entering = None;
            for j in 0..self.cols {
                if !allow[j] || self.basis.contains(&j) {
                    continue;
                }
                let mut red = costs[j];
                for (i, &bi) in self.basis.iter().enumerate() {
                    red -= costs[bi] * self.a[i][j];
                }
                if red < -EPS {
                    entering = Some(j);
                    break; // Bland: first improving index.
                }
            }
            let Some(j) = entering else {
                return (pivots, Some(0));
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                if self.a[i][j] > EPS {
                    let ratio = self.a[i][self.cols] / self.a[i][j];
                    let better = match leave {
                        None => true,
                        // Bland tie-break: smallest basis index.
                        Some((li, lr)) => {
                            ratio < lr - EPS
                                || (ratio < lr + EPS && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return (pivots, None); // unbounded direction
            };
            self.pivot(r, j);
            pivots += 1;
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let piv = self.a[r][j];
        for v in self.a[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..self.a.len() {
            if i == r {
                continue;
            }
            let f = self.a[i][j];
            if f != 0.0 {
                for k in 0..=self.cols {
                    self.a[i][k] -= f * self.a[r][k];
                }
            }
        }
        self.basis[r] = j;
    }
}

/// Solve an expanded, fully linear model with the two-phase simplex.
///
/// Returns `Err` only when the model is not actually linear (or evaluation
/// fails during coefficient extraction); infeasibility and unboundedness are
/// reported through the result status.
pub fn solve_lp(model: &ModelIR) -> Result<LocalSolveResult, LpFailure> {
    if !model.is_expanded() {
        return Err(LpFailure("model still contains family constructs".into()));
    }
    let n = model.n_vars();
    let layout = model.layout();
    let to_min = model.sense.factor();

    let (obj_coeffs, _) = affine_view(&model.objective, n, &layout)
        .map_err(|e| LpFailure(format!("objective: {}", e.0)))?;
    let mut rows: Vec<(Vec<f64>, f64, Rel)> = Vec::new();
    for (k, c) in model.constraints.iter().enumerate() {
        let (coeffs, constant) = affine_view(&c.body, n, &layout)
            .map_err(|e| LpFailure(format!("constraint {}: {}", k + 1, e.0)))?;
        rows.push((coeffs, constant, c.rel));
    }

    // Map variables onto nonnegative columns.
    let mut cols: Vec<Col> = Vec::with_capacity(n);
    let mut nu = 0usize;
    for v in &model.variables {
        if v.lb.is_finite() {
            cols.push(Col::Shift { u: nu, lb: v.lb });
            nu += 1;
        } else if v.ub.is_finite() {
            cols.push(Col::Flip { u: nu, ub: v.ub });
            nu += 1;
        } else {
            cols.push(Col::Split { plus: nu, minus: nu + 1 });
            nu += 2;
        }
    }

    // Rows in u-space: structural constraints first, then the box residuals
    // `u <= ub - lb` for doubly bounded variables.
    struct URow {
        coeffs: Vec<f64>,
        rhs: f64,
        rel: Rel,
    }
    let mut urows: Vec<URow> = Vec::new();
    let mut push_row = |coeffs: &[f64], constant: f64, rel: Rel| {
        let mut uc = vec![0.0; nu];
        let mut rhs = -constant;
        for (j, &a) in coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match cols[j] {
                Col::Shift { u, lb } => {
                    uc[u] += a;
                    rhs -= a * lb;
                }
                Col::Flip { u, ub } => {
                    uc[u] -= a;
                    rhs -= a * ub;
                }
                Col::Split { plus, minus } => {
                    uc[plus] += a;
                    uc[minus] -= a;
                }
            }
        }
        urows.push(URow { coeffs: uc, rhs, rel });
    };
    for (coeffs, constant, rel) in &rows {
        push_row(coeffs, *constant, *rel);
    }
    for (j, v) in model.variables.iter().enumerate() {
        if v.lb.is_finite() && v.ub.is_finite() {
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            push_row(&coeffs, -v.ub, Rel::Le);
        }
    }

    // Objective in u-space (constant part is irrelevant to the pivoting).
    let mut cu = vec![0.0; nu];
    for (j, &a) in obj_coeffs.iter().enumerate() {
        let a = to_min * a;
        match cols[j] {
            Col::Shift { u, .. } => cu[u] += a,
            Col::Flip { u, .. } => cu[u] -= a,
            Col::Split { plus, minus } => {
                cu[plus] += a;
                cu[minus] -= a;
            }
        }
    }

    // Assemble the tableau: structural columns, then one slack/surplus per
    // inequality, then artificials.
    let m = urows.len();
    let n_slack = urows.iter().filter(|r| r.rel == Rel::Le).count();
    let mut total = nu + n_slack;
    let mut slack_of = vec![None; m];
    {
        let mut next = nu;
        for (i, r) in urows.iter().enumerate() {
            if r.rel == Rel::Le {
                slack_of[i] = Some(next);
                next += 1;
            }
        }
    }
    // Normalize RHS signs (a <= row with negative rhs becomes >= after the
    // flip, which simply means it has no usable slack start).
    let mut need_artificial = vec![false; m];
    let mut a = vec![vec![0.0; total + m + 1]; m];
    for (i, r) in urows.iter().enumerate() {
        let flip = r.rhs < 0.0;
        let s = if flip { -1.0 } else { 1.0 };
        for (k, &v) in r.coeffs.iter().enumerate() {
            a[i][k] = s * v;
        }
        if let Some(sl) = slack_of[i] {
            a[i][sl] = s;
        }
        a[i][total + m] = s * r.rhs;
        need_artificial[i] = !(r.rel == Rel::Le && !flip);
    }
    // Artificial columns where slack starts are unavailable.
    let mut basis = vec![0usize; m];
    let mut n_art = 0usize;
    for i in 0..m {
        if need_artificial[i] {
            let col = total + n_art;
            a[i][col] = 1.0;
            basis[i] = col;
            n_art += 1;
        } else {
            basis[i] = slack_of[i].unwrap();
        }
    }
    // Compact away unused artificial columns.
    let art_start = total;
    total += n_art;
    for row in a.iter_mut() {
        let rhs = row[art_start + m];
        row.truncate(total);
        row.push(rhs);
    }

    let mut t = Tableau { a, basis, cols: total };
    let max_pivots = 2000 + 200 * (m + total);
    let mut pivots = 0usize;

    let finish = |point: Vec<f64>, status: SolveStatus, pivots: usize, diag: Option<String>| {
        let objective = model.objective_or_inf(&point);
        let max_violation = model.violation_or_inf(&point);
        LocalSolveResult {
            point,
            objective,
            max_violation,
            status,
            iterations: pivots,
            evaluations: pivots as u64 + 1,
            diagnostic: diag,
        }
    };
    let recover = |t: &Tableau| -> Vec<f64> {
        let mut u = vec![0.0; total];
        for (i, &b) in t.basis.iter().enumerate() {
            u[b] = t.a[i][total];
        }
        cols.iter()
            .map(|c| match *c {
                Col::Shift { u: k, lb } => lb + u[k],
                Col::Flip { u: k, ub } => ub - u[k],
                Col::Split { plus, minus } => u[plus] - u[minus],
            })
            .collect()
    };

    // Phase 1: drive the artificials to zero.
    if n_art > 0 {
        let mut costs = vec![0.0; total];
        for j in art_start..total {
            costs[j] = 1.0;
        }
        let allow = vec![true; total];
        let (p, ok) = t.run_phase(&costs, &allow, max_pivots);
        pivots += p;
        if ok.is_none() {
            return Ok(finish(
                recover(&t),
                SolveStatus::IterationLimit,
                pivots,
                Some("phase 1 did not terminate".into()),
            ));
        }
        let art_sum: f64 = t
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= art_start)
            .map(|(i, _)| t.a[i][total])
            .sum();
        if art_sum > 1e-7 {
            return Ok(finish(
                recover(&t),
                SolveStatus::InfeasibleDetected,
                pivots,
                Some(format!("phase 1 optimum {art_sum:.3e} above zero")),
            ));
        }
        // Pivot lingering zero-level artificials out of the basis.
        for i in 0..m {
            if t.basis[i] >= art_start {
                if let Some(j) = (0..art_start).find(|&j| t.a[i][j].abs() > EPS) {
                    t.pivot(i, j);
                    pivots += 1;
                }
            }
        }
    }

    // Phase 2: real costs, artificials frozen.
    let mut costs = vec![0.0; total];
    costs[..nu].copy_from_slice(&cu);
    let mut allow = vec![true; total];
    for flag in allow.iter_mut().take(total).skip(art_start) {
        *flag = false;
    }
    // A basis stuck on a zero-level artificial row stays allowed so ratio
    // tests still see it; it just can't re-enter.
    let (p, ok) = t.run_phase(&costs, &allow, max_pivots.saturating_sub(pivots));
    pivots += p;
    let point = recover(&t);
    match ok {
        Some(_) => Ok(finish(point, SolveStatus::Converged, pivots, None)),
        None => Ok(finish(
            point,
            SolveStatus::IterationLimit,
            pivots,
            Some("objective unbounded below or pivot budget exhausted".into()),
        )),
    }
}
