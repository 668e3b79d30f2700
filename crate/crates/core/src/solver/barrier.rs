//! Log-barrier method with structured quasi-Newton inner iterations.
//!
//! Inequalities enter through a barrier term that switches to a quadratic
//! extension once a constraint is closer than `eps` to its boundary (or
//! violated), so the merit function stays finite and twice differentiable
//! everywhere.  Equalities are handled with an augmented Lagrangian whose
//! multipliers are refreshed between barrier reductions.
//!
//! The inner solver is Newton-like: the stiff part of the merit Hessian
//! (barrier and penalty curvature, a sum of rank-one terms with analytic
//! weights) is assembled exactly at every iterate, while the curvature of
//! the objective itself is picked up by a BFGS estimate.  For linear
//! programs the assembled matrix is the exact Hessian, which is what lets
//! the method reach simplex-level accuracy.  Trial points are clipped to
//! the variable box, and evaluation faults (logs of negative numbers and
//! friends) are treated as failed line-search trials rather than hard
//! errors: the search simply backs off.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::expr::{Expr, FamilyLayout};
use crate::model::{ModelIR, Rel};
use crate::solver::{LocalSolveResult, SolveStatus};

#[derive(Debug, Clone)]
pub struct BarrierConfig {
    /// Feasibility tolerance used for the convergence label.
    pub tol: f64,
    pub mu_init: f64,
    pub mu_min: f64,
    pub mu_shrink: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Relative stationarity target for the convergence label,
    /// `|grad| <= kkt_rel * (1 + |grad at start|)`.
    pub kkt_rel: f64,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        BarrierConfig {
            tol: 1e-4,
            mu_init: 1.0,
            mu_min: 1e-8,
            mu_shrink: 0.2,
            max_outer: 40,
            max_inner: 200,
            kkt_rel: 1e-4,
        }
    }
}

/// Barrier value, first and second derivative for a single `g <= 0` term.
fn phi(g: f64, mu: f64, eps: f64) -> (f64, f64, f64) {
    if g <= -eps {
        (-mu * (-g).ln(), -mu / g, mu / (g * g))
    } else {
        let t = g + eps;
        (
            -mu * eps.ln() + (mu / eps) * t + (mu / (2.0 * eps * eps)) * t * t,
            mu / eps + (mu / (eps * eps)) * t,
            mu / (eps * eps),
        )
    }
}

/// Merit function data at one point.
struct MeritEval {
    val: f64,
    grad: Vec<f64>,
    /// Gradient of the bare (sign-adjusted) objective, tracked separately so
    /// BFGS can model the objective curvature alone.
    fgrad: Vec<f64>,
    /// Rank-one curvature terms `w * grad gradᵀ` from constraints.
    curv: Vec<(f64, Vec<f64>)>,
    /// Diagonal curvature from the bound barriers.
    diag: Vec<f64>,
}

struct Problem<'a> {
    model: &'a ModelIR,
    layout: FamilyLayout,
    to_min: f64,
    ineq: Vec<&'a Expr>,
    eq: Vec<&'a Expr>,
    lb: Vec<f64>,
    ub: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(model: &'a ModelIR) -> Self {
        let (mut ineq, mut eq) = (Vec::new(), Vec::new());
        for c in &model.constraints {
            match c.rel {
                Rel::Le => ineq.push(&c.body),
                Rel::Eq => eq.push(&c.body),
            }
        }
        Problem {
            layout: model.layout(),
            to_min: model.sense.factor(),
            ineq,
            eq,
            lb: model.variables.iter().map(|v| v.lb).collect(),
            ub: model.variables.iter().map(|v| v.ub).collect(),
            model,
        }
    }

    /// Merit value, gradient and curvature data; `None` when any
    /// evaluation faults.
    fn merit(
        &self,
        x: &[f64],
        mu: f64,
        lambda: &[f64],
        rho: f64,
        evals: &mut u64,
    ) -> Option<MeritEval> {
        *evals += 1;
        let n = x.len();
        let eps = mu.max(1e-10);
        let mut val = self.to_min * self.model.eval_objective(x).ok()?;
        let fgrad: Vec<f64> = self
            .model
            .objective_gradient(x)
            .ok()?
            .iter()
            .map(|g| self.to_min * g)
            .collect();
        let mut grad = fgrad.clone();
        let mut curv = Vec::with_capacity(self.ineq.len() + self.eq.len());
        for body in &self.ineq {
            let g = body.eval(x, &self.layout, None).ok()?;
            let (v, dv, ddv) = phi(g, mu, eps);
            val += v;
            let bg = body.gradient(x, &self.layout).ok()?;
            for (gj, bgj) in grad.iter_mut().zip(&bg) {
                *gj += dv * bgj;
            }
            curv.push((ddv, bg));
        }
        for (j, body) in self.eq.iter().enumerate() {
            let h = body.eval(x, &self.layout, None).ok()?;
            val += lambda[j] * h + 0.5 * rho * h * h;
            let w = lambda[j] + rho * h;
            let bg = body.gradient(x, &self.layout).ok()?;
            for (gj, bgj) in grad.iter_mut().zip(&bg) {
                *gj += w * bgj;
            }
            curv.push((rho, bg));
        }
        let mut diag = vec![0.0; n];
        for j in 0..n {
            if self.lb[j].is_finite() {
                let (v, dv, ddv) = phi(self.lb[j] - x[j], mu, eps);
                val += v;
                grad[j] -= dv;
                diag[j] += ddv;
            }
            if self.ub[j].is_finite() {
                let (v, dv, ddv) = phi(x[j] - self.ub[j], mu, eps);
                val += v;
                grad[j] += dv;
                diag[j] += ddv;
            }
        }
        if val.is_finite() {
            Some(MeritEval { val, grad, fgrad, curv, diag })
        } else {
            None
        }
    }

    /// Equality residuals, infeasible treated as +inf entries.
    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        self.eq
            .iter()
            .map(|b| b.eval(x, &self.layout, None).unwrap_or(f64::INFINITY))
            .collect()
    }
}

fn clip(x: f64, lb: f64, ub: f64) -> f64 {
    x.max(lb).min(ub)
}

/// Clip a trial coordinate to the box but stop a hair short of the walls.
/// Several benchmark objectives (x^0.6-style terms) have finite value but
/// an infinite derivative exactly on a bound, so a trial that lands there
/// faults and the line search starves.  A floor of ~1e-10 keeps every
/// evaluation differentiable while staying far below the solver tolerances
/// (a bound coordinate is still *satisfied*, and the objective error of
/// x^0.6 at 1e-10 is ~1e-6 of one unit at worst).
fn clip_interior(x: f64, lb: f64, ub: f64) -> f64 {
    let mut margin = 0.0;
    if lb.is_finite() && ub.is_finite() {
        margin = (0.25 * (ub - lb)).min(1e-10 * (1.0 + lb.abs().max(ub.abs())));
    } else if lb.is_finite() {
        margin = 1e-10 * (1.0 + lb.abs());
    } else if ub.is_finite() {
        margin = 1e-10 * (1.0 + ub.abs());
    }
    x.max(lb + margin).min(ub - margin)
}

/// Infinity norm of the projected gradient step `x - clip(x - g)`;
/// coincides with `|g|` away from the bounds and vanishes at a
/// constrained stationary point.
fn projected_grad_norm(x: &[f64], g: &[f64], lb: &[f64], ub: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for j in 0..x.len() {
        m = m.max((x[j] - clip(x[j] - g[j], lb[j], ub[j])).abs());
    }
    m
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Newton-like step `(bfgs + stiff(me) + sigma I) d = -grad` with two-metric
/// projection: coordinates pressed against a bound the gradient wants to
/// keep them on take a diagonally scaled gradient step, and the Newton
/// system is solved on the remaining block.  Solving in the full space and
/// clipping afterwards can turn the step into an ascent direction once the
/// clipped coordinates stop contributing, which stalls the line search.
fn newton_direction(
    me: &MeritEval,
    bfgs: &DMatrix<f64>,
    x: &[f64],
    lb: &[f64],
    ub: &[f64],
) -> Vec<f64> {
    let n = x.len();
    let mut a = bfgs.clone();
    for j in 0..n {
        a[(j, j)] += me.diag[j];
    }
    for (w, bg) in &me.curv {
        if *w == 0.0 {
            continue;
        }
        let v = DVector::from_column_slice(bg);
        a.syger(*w, &v, &v, 1.0); // a += w * v vᵀ (lower triangle)
    }
    a.fill_upper_triangle_with_lower_triangle();

    let mut d = vec![0.0; n];
    let mut free = Vec::with_capacity(n);
    for j in 0..n {
        let atol = 1e-9 * (1.0 + x[j].abs());
        let pinned = (lb[j].is_finite() && x[j] - lb[j] <= atol && me.grad[j] > 0.0)
            || (ub[j].is_finite() && ub[j] - x[j] <= atol && me.grad[j] < 0.0);
        if pinned {
            d[j] = -me.grad[j] / (a[(j, j)].abs() + 1e-12);
        } else {
            free.push(j);
        }
    }
    if free.is_empty() {
        return d;
    }
    let af = DMatrix::from_fn(free.len(), free.len(), |r, c| a[(free[r], free[c])]);
    let rhs = DVector::from_fn(free.len(), |r, _| -me.grad[free[r]]);
    let scale = (0..free.len()).fold(1e-12, |m: f64, j| m.max(af[(j, j)].abs()));
    let mut sigma = scale * 1e-12;
    for _ in 0..8 {
        let mut shifted = af.clone();
        for j in 0..free.len() {
            shifted[(j, j)] += sigma;
        }
        if let Some(ch) = Cholesky::new(shifted) {
            let df = ch.solve(&rhs);
            if df.iter().all(|v| v.is_finite()) {
                for (k, &j) in free.iter().enumerate() {
                    d[j] = df[k];
                }
                return d;
            }
        }
        sigma = (sigma * 100.0).max(1e-8);
    }
    for &j in &free {
        d[j] = -me.grad[j] / (a[(j, j)].abs() + 1e-12); // scaled steepest descent
    }
    d
}

/// Feasibility-first ordering: is `(viol_a, obj_a)` better than `(viol_b, obj_b)`?
fn better(tol: f64, a: (f64, f64), b: (f64, f64)) -> bool {
    let (va, fa) = a;
    let (vb, fb) = b;
    match (va <= tol, vb <= tol) {
        (true, true) => fa < fb,
        (true, false) => true,
        (false, true) => false,
        (false, false) => va < vb,
    }
}

/// Minimize an expanded model from `x0` with the log-barrier method.
pub fn solve_barrier(model: &ModelIR, x0: &[f64], cfg: &BarrierConfig) -> LocalSolveResult {
    assert!(model.is_expanded(), "barrier solver needs an expanded model");
    let n = model.n_vars();
    assert_eq!(x0.len(), n, "starting point has the wrong dimension");
    let prob = Problem::new(model);
    let mut evals: u64 = 0;

    // Pull the start inside the box, slightly off the faces.
    let mut x: Vec<f64> = (0..n)
        .map(|j| {
            let (lb, ub) = (prob.lb[j], prob.ub[j]);
            let margin = if lb.is_finite() && ub.is_finite() {
                ((ub - lb) * 1e-4).min(1e-4)
            } else {
                1e-4
            };
            if lb.is_finite() && ub.is_finite() && lb + margin > ub - margin {
                return 0.5 * (lb + ub); // degenerate or fixed interval
            }
            let mut v = x0[j];
            if lb.is_finite() {
                v = v.max(lb + margin);
            }
            if ub.is_finite() {
                v = v.min(ub - margin);
            }
            v
        })
        .collect();

    let mut mu = cfg.mu_init;
    let mut lambda = vec![0.0; prob.eq.len()];
    let mut rho = 10.0f64;
    let mut iterations = 0usize;

    let score = |x: &[f64]| -> (f64, f64) {
        (
            model.violation_or_inf(x),
            prob.to_min * model.objective_or_inf(x),
        )
    };
    let mut best_x = x.clone();
    let mut best_score = score(&x);
    evals += 1;

    // Initial merit; if the clamped start faults, fall back to the box
    // midpoint before giving up.
    let mut cur = prob.merit(&x, mu, &lambda, rho, &mut evals);
    if cur.is_none() {
        let mid = box_midpoint(model);
        cur = prob.merit(&mid, mu, &lambda, rho, &mut evals);
        if cur.is_some() {
            x = mid;
        }
    }
    let Some(mut me) = cur else {
        return LocalSolveResult {
            objective: model.objective_or_inf(&x),
            max_violation: model.violation_or_inf(&x),
            point: x,
            status: SolveStatus::DomainFaultAbort,
            iterations: 0,
            evaluations: evals,
            diagnostic: Some("could not evaluate the model anywhere near the start".into()),
        };
    };
    let g0norm = inf_norm(&me.grad);
    let kkt_target = cfg.kkt_rel * (1.0 + g0norm);
    let mut last_grad_norm = g0norm;
    let mut prev_eq_norm = f64::INFINITY;
    let mut converged = false;
    let mut fault_blocked = false;
    // BFGS estimate of the objective curvature; survives barrier updates
    // because the objective does not depend on mu.
    let mut bfgs = DMatrix::<f64>::identity(n, n) * 1e-6;

    let trace = std::env::var_os("AUTOOPT_BARRIER_TRACE").is_some();
    'outer: for outer in 0..cfg.max_outer {
        let inner_tol = (mu * 0.1).max(1e-9 * (1.0 + g0norm));
        let mut inner_steps = 0usize;
        for _inner in 0..cfg.max_inner {
            inner_steps += 1;
            last_grad_norm = projected_grad_norm(&x, &me.grad, &prob.lb, &prob.ub);
            if last_grad_norm <= inner_tol {
                break;
            }
            let d = newton_direction(&me, &bfgs, &x, &prob.lb, &prob.ub);
            // Backtracking search over box-projected trial points.
            let mut alpha = 1.0f64;
            let mut accepted = None;
            let mut saw_fault = false;
            for _ in 0..45 {
                let trial: Vec<f64> = (0..n)
                    .map(|j| clip_interior(x[j] + alpha * d[j], prob.lb[j], prob.ub[j]))
                    .collect();
                // Armijo condition on the realised (projected) move.
                let pred: f64 = (0..n).map(|j| me.grad[j] * (trial[j] - x[j])).sum();
                if pred < 0.0 {
                    match prob.merit(&trial, mu, &lambda, rho, &mut evals) {
                        Some(mt) if mt.val <= me.val + 1e-4 * pred => {
                            accepted = Some((trial, mt));
                            break;
                        }
                        Some(_) => {}
                        None => saw_fault = true,
                    }
                }
                alpha *= 0.5;
            }
            let Some((xn, men)) = accepted else {
                fault_blocked = fault_blocked || saw_fault;
                if trace {
                    eprintln!(
                        "[barrier] outer {outer} mu {mu:.3e} inner {inner_steps}: line search failed, |pg| {:.3e}, fault {saw_fault}, |d| {:.3e}",
                        last_grad_norm,
                        inf_norm(&d)
                    );
                    let mut alpha = 1.0f64;
                    for k in 0..6 {
                        let trial: Vec<f64> = (0..n)
                            .map(|j| clip_interior(x[j] + alpha * d[j], prob.lb[j], prob.ub[j]))
                            .collect();
                        let pred: f64 = (0..n).map(|j| me.grad[j] * (trial[j] - x[j])).sum();
                        let ft = prob
                            .merit(&trial, mu, &lambda, rho, &mut evals)
                            .map(|m| m.val - me.val);
                        eprintln!("    alpha 2^-{k}: pred {pred:.6e} delta {ft:?}");
                        alpha *= 0.5;
                    }
                }
                break;
            };
            iterations += 1;
            // BFGS update on the objective part only.
            let s = DVector::from_fn(n, |j, _| xn[j] - x[j]);
            let y = DVector::from_fn(n, |j, _| men.fgrad[j] - me.fgrad[j]);
            let sy = s.dot(&y);
            if sy > 1e-10 * s.norm() * y.norm() {
                let bs = &bfgs * &s;
                let sbs = s.dot(&bs);
                if sbs > 0.0 {
                    bfgs.syger(-1.0 / sbs, &bs, &bs, 1.0);
                    bfgs.syger(1.0 / sy, &y, &y, 1.0);
                    bfgs.fill_upper_triangle_with_lower_triangle();
                }
            }
            x = xn;
            me = men;
            let sc = score(&x);
            evals += 1;
            if better(cfg.tol, sc, best_score) {
                best_score = sc;
                best_x = x.clone();
            }
        }

        // Multiplier / penalty update on the equalities.
        if !prob.eq.is_empty() {
            let h = prob.residuals(&x);
            evals += 1;
            let hn = inf_norm(&h);
            if hn.is_finite() {
                if hn > 0.25 * prev_eq_norm && rho < 1e8 {
                    rho = (rho * 10.0).min(1e8);
                } else {
                    for (l, hj) in lambda.iter_mut().zip(&h) {
                        *l += rho * hj;
                    }
                }
                prev_eq_norm = hn;
            }
        }

        let viol = model.violation_or_inf(&x);
        evals += 1;
        if trace {
            eprintln!(
                "[barrier] outer {outer} mu {mu:.3e}: {inner_steps} inner steps, |pg| {:.3e}, viol {viol:.3e}, f {:.6}",
                last_grad_norm,
                model.objective_or_inf(&x)
            );
        }
        if mu <= cfg.mu_min * (1.0 + 1e-12) {
            if viol <= cfg.tol && last_grad_norm <= kkt_target {
                converged = true;
                break 'outer;
            }
            if prob.eq.is_empty() {
                break 'outer; // no multipliers left to refine
            }
        } else {
            mu = (mu * cfg.mu_shrink).max(cfg.mu_min);
        }
        // Refresh the merit at the new (mu, lambda, rho).
        match prob.merit(&x, mu, &lambda, rho, &mut evals) {
            Some(m2) => me = m2,
            None => {
                fault_blocked = true;
                break 'outer;
            }
        }
    }

    // The final iterate is the barrier answer; snapshots along the path are
    // only a fallback for runs that never settled inside the tolerance.
    let final_score = score(&x);
    evals += 1;
    if final_score.0 <= cfg.tol || !better(cfg.tol, best_score, final_score) {
        best_score = final_score;
        best_x = x;
    }
    let status = if converged {
        SolveStatus::Converged
    } else if fault_blocked && best_score.0.is_infinite() {
        SolveStatus::DomainFaultAbort
    } else {
        SolveStatus::IterationLimit
    };
    let diagnostic = match status {
        SolveStatus::Converged => None,
        SolveStatus::DomainFaultAbort => {
            Some("evaluation faults blocked every trial step".into())
        }
        _ => Some(format!(
            "stopped with violation {:.3e}, merit gradient {:.3e}",
            best_score.0, last_grad_norm
        )),
    };
    LocalSolveResult {
        objective: model.objective_or_inf(&best_x),
        max_violation: best_score.0,
        point: best_x,
        status,
        iterations,
        evaluations: evals,
        diagnostic,
    }
}

/// Midpoint of the variable box, the conventional cold start.
pub(crate) fn box_midpoint(model: &ModelIR) -> Vec<f64> {
    model
        .variables
        .iter()
        .map(|v| match (v.lb.is_finite(), v.ub.is_finite()) {
            (true, true) => 0.5 * (v.lb + v.ub),
            (true, false) => v.lb + 1.0,
            (false, true) => v.ub - 1.0,
            (false, false) => 0.0,
        })
        .collect()
}
