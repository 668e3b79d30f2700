//! Variable classification by logistic regression.
//!
//! The decomposition engine needs to decide, per decision variable, whether
//! it should live in the upper (metaheuristic) or lower (local-solver)
//! level.  The classification model works from experiments: random
//! upper/lower splits are tried on population members, each trial records
//! whether handing the lower-tagged variables to a local solve paid off,
//! and a ridge-regularized logistic regression of the outcomes against the
//! tag vectors decides which variables carry a statistically significant
//! benefit.  Those go to the lower level, the rest stay upper.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::SingularFit;
use crate::model::ModelIR;
use crate::solver::{solve_barrier, solve_lp, BarrierConfig, LocalSolveResult, SolveStatus};

/// Upper/lower split of the decision variables: `tags[i]` is 1 when
/// variable `i` is handled by the lower-level solver, 0 when it stays with
/// the upper-level search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelConfiguration {
    pub tags: Vec<u8>,
}

impl LevelConfiguration {
    pub fn new(tags: Vec<u8>) -> Self {
        debug_assert!(tags.iter().all(|&t| t <= 1), "tags are binary");
        LevelConfiguration { tags }
    }

    pub fn n_vars(&self) -> usize {
        self.tags.len()
    }

    pub fn lower_indices(&self) -> Vec<usize> {
        (0..self.tags.len()).filter(|&i| self.tags[i] == 1).collect()
    }

    pub fn upper_indices(&self) -> Vec<usize> {
        (0..self.tags.len()).filter(|&i| self.tags[i] == 0).collect()
    }

    /// All-upper or all-lower (useless for decomposition).
    pub fn is_degenerate(&self) -> bool {
        self.tags.iter().all(|&t| t == 0) || self.tags.iter().all(|&t| t == 1)
    }
}

/// One classification experiment: the split that was tried and whether it
/// produced a notable improvement (1) or not (0).
#[derive(Debug, Clone)]
pub struct LcSample {
    pub tags: Vec<u8>,
    pub label: u8,
}

/// Fitted regression: one coefficient per variable plus an intercept,
/// with Wald-test machinery attached.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub std_errors: Vec<f64>,
    pub intercept_se: f64,
    /// Two-sided Wald p-value per variable.
    pub p_values: Vec<f64>,
    pub converged: bool,
    pub ridge: f64,
}

impl LogisticFit {
    /// Coefficients with the intercept appended, in design-matrix order.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = self.coefficients.clone();
        w.push(self.intercept);
        w
    }
}

/// Draw `count` random level configurations over `n_vars` variables with
/// fair-coin tags, re-sampling any all-upper / all-lower draw.
pub fn sample_configurations(
    n_vars: usize,
    count: usize,
    rng: &mut impl Rng,
) -> Vec<LevelConfiguration> {
    assert!(n_vars >= 2, "need at least two variables to split levels");
    assert!(count >= 1);
    (0..count)
        .map(|_| {
            for _ in 0..200 {
                let tags: Vec<u8> = (0..n_vars).map(|_| rng.gen_range(0..=1u8)).collect();
                let lc = LevelConfiguration::new(tags);
                if !lc.is_degenerate() {
                    return lc;
                }
            }
            // Statistically unreachable; keep the procedure total anyway.
            let mut tags = vec![0u8; n_vars];
            tags[0] = 1;
            LevelConfiguration::new(tags)
        })
        .collect()
}

/// How [`solve_lower`] attacks the subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerSolver {
    /// Simplex when everything in the subproblem is linear, barrier
    /// otherwise.
    Auto,
    Simplex,
    Barrier,
}

/// Fix the upper-tagged variables at `point`, solve the lower-tagged block,
/// and lift the solution back to full length.  The returned result is
/// re-expressed against the *full* model (objective, violation).
pub fn solve_lower(
    model: &ModelIR,
    point: &[f64],
    lc: &LevelConfiguration,
    solver: LowerSolver,
) -> (Vec<f64>, LocalSolveResult) {
    let fixed: Vec<(usize, f64)> = lc
        .upper_indices()
        .into_iter()
        .map(|i| (i, point[i]))
        .collect();
    if fixed.len() == point.len() {
        // Nothing to solve; evaluate in place.
        let res = LocalSolveResult {
            point: point.to_vec(),
            objective: model.objective_or_inf(point),
            max_violation: model.violation_or_inf(point),
            status: SolveStatus::Converged,
            iterations: 0,
            evaluations: 1,
            diagnostic: Some("all variables fixed; nothing to optimize".into()),
        };
        return (point.to_vec(), res);
    }
    let red = model.substitute_fixed(&fixed);
    let k = red.model.n_vars();
    let all = vec![true; k];
    let linear = red.model.objective.is_linear(&all)
        && red
            .model
            .constraints
            .iter()
            .all(|c| c.body.is_linear(&all));
    let use_simplex = match solver {
        LowerSolver::Simplex => true,
        LowerSolver::Barrier => false,
        LowerSolver::Auto => linear,
    };
    let x0: Vec<f64> = red.keep.iter().map(|&i| point[i]).collect();
    let sub = if use_simplex {
        match solve_lp(&red.model) {
            Ok(r) => r,
            // Simplex only handles pure LPs; anything else goes interior.
            Err(_) => solve_barrier(&red.model, &x0, &BarrierConfig::default()),
        }
    } else {
        solve_barrier(&red.model, &x0, &BarrierConfig::default())
    };
    let full = red.lift(&sub.point);
    let res = LocalSolveResult {
        objective: model.objective_or_inf(&full),
        max_violation: model.violation_or_inf(&full),
        point: full.clone(),
        status: sub.status,
        iterations: sub.iterations,
        evaluations: sub.evaluations + 1,
        diagnostic: sub.diagnostic,
    };
    (full, res)
}

/// Outcome of one improvement experiment.
#[derive(Debug, Clone)]
pub struct Improvement {
    /// Objective gain in minimization terms (before − after); +inf when the
    /// solve repaired infeasibility, 0 when the solve did not converge.
    pub delta: f64,
    pub after: Vec<f64>,
    pub result: LocalSolveResult,
}

/// Try one level configuration on one individual: solve the lower-tagged
/// block from the individual's point and measure the objective improvement.
pub fn label_improvement(
    model: &ModelIR,
    point: &[f64],
    lc: &LevelConfiguration,
    solver: LowerSolver,
    tol: f64,
) -> Improvement {
    let to_min = model.sense.factor();
    let before_viol = model.violation_or_inf(point);
    let before = to_min * model.objective_or_inf(point);
    let (after, result) = solve_lower(model, point, lc, solver);
    let after_viol = result.max_violation;
    let delta = if result.status != SolveStatus::Converged {
        0.0
    } else if before_viol > tol && after_viol <= tol {
        f64::INFINITY // repaired feasibility: as notable as it gets
    } else if before_viol <= tol && after_viol > tol {
        0.0 // should not happen; a regression is never an improvement
    } else {
        before - to_min * result.objective
    };
    Improvement { delta, after, result }
}

/// Convert a batch of improvement values into binary labels: 1 for deltas
/// strictly above the batch median.  When the upper half of the batch is
/// flat the strict rule would label everything 0, so it falls back to
/// marking the maximal deltas — both classes stay represented whenever at
/// least two distinct values exist.
pub fn median_labels(deltas: &[f64]) -> Vec<u8> {
    assert!(!deltas.is_empty());
    let mut sorted = deltas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let median = if m % 2 == 1 {
        sorted[m / 2]
    } else {
        let (a, b) = (sorted[m / 2 - 1], sorted[m / 2]);
        if a.is_infinite() || b.is_infinite() {
            // Avoid inf + finite artifacts; either endpoint works as a cut.
            a.max(b)
        } else {
            0.5 * (a + b)
        }
    };
    let mut labels: Vec<u8> = deltas.iter().map(|&d| u8::from(d > median)).collect();
    let distinct = sorted.windows(2).any(|w| w[0] < w[1]);
    if distinct && labels.iter().all(|&l| l == 0) {
        let top = sorted[m - 1];
        for (l, &d) in labels.iter_mut().zip(deltas) {
            *l = u8::from(d >= top);
        }
    }
    labels
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Ridge-penalized log-likelihood (intercept unpenalized); the quantity
/// IRLS maximizes.
fn penalized_ll(samples: &[LcSample], coef: &[f64], intercept: f64, ridge: f64) -> f64 {
    let mut ll = 0.0;
    for s in samples {
        let eta = intercept
            + s.tags
                .iter()
                .zip(coef)
                .map(|(&t, &w)| f64::from(t) * w)
                .sum::<f64>();
        ll += f64::from(s.label) * eta - softplus(eta);
    }
    ll - 0.5 * ridge * coef.iter().map(|w| w * w).sum::<f64>()
}

/// Fit the regression by iteratively reweighted least squares.
///
/// The model has one coefficient per variable plus an unpenalized
/// intercept; `ridge` is the l2 strength on the coefficients.  Standard
/// errors come from the diagonal of the inverse observed information
/// (Hessian of the penalized likelihood), p-values from a two-sided Wald
/// test.
pub fn fit_logistic(samples: &[LcSample], ridge: f64) -> Result<LogisticFit, SingularFit> {
    assert!(samples.len() >= 2, "need at least two samples");
    let n = samples[0].tags.len();
    assert!(n >= 1, "need at least one variable");
    assert!(samples.iter().all(|s| s.tags.len() == n));
    assert!(
        samples.iter().any(|s| s.label == 0) && samples.iter().any(|s| s.label == 1),
        "both label classes must be present"
    );
    assert!(ridge > 0.0);

    let d = n + 1; // coefficients + intercept, intercept last
    let row = |s: &LcSample, j: usize| -> f64 {
        if j < n {
            f64::from(s.tags[j])
        } else {
            1.0
        }
    };
    let mut w = vec![0.0f64; d];
    let mut grad = vec![0.0f64; d];
    let mut converged = false;
    let mut info = nalgebra::DMatrix::<f64>::zeros(d, d);
    for _iter in 0..100 {
        // Gradient and observed information of the penalized likelihood.
        for g in grad.iter_mut() {
            *g = 0.0;
        }
        info.fill(0.0);
        for s in samples {
            let eta: f64 = (0..d).map(|j| row(s, j) * w[j]).sum();
            let p = sigmoid(eta);
            let r = f64::from(s.label) - p;
            let wt = (p * (1.0 - p)).max(1e-12);
            for j in 0..d {
                grad[j] += r * row(s, j);
                for k in 0..=j {
                    info[(j, k)] += wt * row(s, j) * row(s, k);
                }
            }
        }
        for j in 0..n {
            grad[j] -= ridge * w[j];
            info[(j, j)] += ridge;
        }
        info.fill_upper_triangle_with_lower_triangle();
        let gnorm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gnorm <= 1e-9 {
            converged = true;
            break;
        }
        // Newton step with a jitter ladder in case the information matrix
        // degenerates despite the ridge.
        let rhs = nalgebra::DVector::from_column_slice(&grad);
        let mut step = None;
        let mut jitter = 0.0f64;
        for _ in 0..7 {
            let mut shifted = info.clone();
            for j in 0..d {
                shifted[(j, j)] += jitter;
            }
            if let Some(ch) = nalgebra::Cholesky::new(shifted) {
                let s = ch.solve(&rhs);
                if s.iter().all(|v| v.is_finite()) {
                    step = Some(s);
                    break;
                }
            }
            jitter = (jitter * 10.0).max(ridge.max(1e-12));
        }
        let Some(step) = step else {
            return Err(SingularFit { ridge });
        };
        // Halve the step until the penalized likelihood stops getting worse.
        let ll0 = penalized_ll(samples, &w[..n], w[n], ridge);
        let mut scale = 1.0f64;
        let mut moved = false;
        for _ in 0..40 {
            let cand: Vec<f64> = (0..d).map(|j| w[j] + scale * step[j]).collect();
            let ll = penalized_ll(samples, &cand[..n], cand[n], ridge);
            if ll.is_finite() && ll >= ll0 - 1e-14 * (1.0 + ll0.abs()) {
                w = cand;
                moved = true;
                break;
            }
            scale *= 0.5;
        }
        if !moved {
            break; // numerically stuck; report what we have
        }
    }
    if !converged {
        // The loop may have hit the iteration cap with the invariant still
        // satisfied; re-check the final gradient.
        let gnorm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        converged = gnorm <= 1e-6;
    }

    // Wald machinery from the observed information at the solution.
    let cov = nalgebra::Cholesky::new(info.clone())
        .map(|ch| ch.inverse())
        .ok_or(SingularFit { ridge })?;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut std_errors = Vec::with_capacity(n);
    let mut p_values = Vec::with_capacity(n);
    for j in 0..n {
        let se = cov[(j, j)].max(0.0).sqrt();
        let p = if se > 0.0 {
            (2.0 * (1.0 - normal.cdf((w[j] / se).abs()))).clamp(0.0, 1.0)
        } else {
            1.0
        };
        std_errors.push(se);
        p_values.push(p);
    }
    Ok(LogisticFit {
        coefficients: w[..n].to_vec(),
        intercept: w[n],
        std_errors,
        intercept_se: cov[(n, n)].max(0.0).sqrt(),
        p_values,
        converged,
        ridge,
    })
}

/// Classification rule switch; see the module notes on the sign rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassifyMode {
    /// Significant *and* positive coefficient goes lower (default: a
    /// significantly harmful variable should not be handed to the lower
    /// solver just because its p-value is small).
    #[default]
    SignAware,
    /// Any significant coefficient goes lower, sign ignored.
    SignificanceOnly,
}

/// Turn a fit into a level configuration: significant variables go to the
/// lower level, the rest stay upper.  A degenerate outcome is repaired by
/// flipping the variable with the most (resp. least) favorable fallback
/// score, so both levels are always populated.
pub fn classify(fit: &LogisticFit, alpha: f64, fallback_scores: &[f64]) -> LevelConfiguration {
    classify_with_mode(fit, alpha, fallback_scores, ClassifyMode::SignAware)
}

pub fn classify_with_mode(
    fit: &LogisticFit,
    alpha: f64,
    fallback_scores: &[f64],
    mode: ClassifyMode,
) -> LevelConfiguration {
    let n = fit.coefficients.len();
    assert!(n >= 2, "classification needs at least two variables");
    assert_eq!(fallback_scores.len(), n);
    let mut tags: Vec<u8> = (0..n)
        .map(|i| {
            let significant = fit.p_values[i] < alpha;
            let eligible = match mode {
                ClassifyMode::SignAware => significant && fit.coefficients[i] > 0.0,
                ClassifyMode::SignificanceOnly => significant,
            };
            u8::from(eligible)
        })
        .collect();
    let argbest = |want_max: bool| -> usize {
        let mut best = 0usize;
        for i in 1..n {
            let better = if want_max {
                fallback_scores[i] > fallback_scores[best]
            } else {
                fallback_scores[i] < fallback_scores[best]
            };
            if better {
                best = i;
            }
        }
        best
    };
    if tags.iter().all(|&t| t == 0) {
        tags[argbest(true)] = 1;
    } else if tags.iter().all(|&t| t == 1) {
        tags[argbest(false)] = 0;
    }
    LevelConfiguration::new(tags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{add, add_chain, con, pow, sub, var};
    use crate::model::{ConstraintDef, ModelIR, Sense, VariableDef};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn mk(tags: &[&[u8]], labels: &[u8]) -> Vec<LcSample> {
        tags.iter()
            .zip(labels)
            .map(|(t, &l)| LcSample { tags: t.to_vec(), label: l })
            .collect()
    }

    /// Grid-refinement maximizer of the penalized likelihood — same
    /// objective, entirely different optimizer, usable as an oracle.
    fn grid_oracle(samples: &[LcSample], ridge: f64) -> Vec<f64> {
        let n = samples[0].tags.len();
        let d = n + 1;
        let mut center = vec![0.0f64; d];
        let mut span = 64.0f64;
        for _ in 0..28 {
            let mut best = center.clone();
            let mut best_ll = f64::NEG_INFINITY;
            let points = 9usize;
            let mut idx = vec![0usize; d];
            loop {
                let cand: Vec<f64> = (0..d)
                    .map(|j| center[j] - span + 2.0 * span * idx[j] as f64 / (points - 1) as f64)
                    .collect();
                let ll = penalized_ll(samples, &cand[..n], cand[n], ridge);
                if ll > best_ll {
                    best_ll = ll;
                    best = cand;
                }
                // odometer over the d-dimensional grid
                let mut j = 0;
                loop {
                    idx[j] += 1;
                    if idx[j] < points {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                    if j == d {
                        break;
                    }
                }
                if j == d {
                    break;
                }
            }
            center = best;
            span *= 0.45;
        }
        center
    }

    #[test]
    fn sampling_avoids_degenerate_draws() {
        let mut rng = StdRng::seed_from_u64(7);
        let lcs = sample_configurations(2, 4, &mut rng);
        assert_eq!(lcs.len(), 4);
        assert!(lcs.iter().all(|lc| !lc.is_degenerate()));
        let one = sample_configurations(2, 1, &mut rng);
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn sampling_tags_look_like_fair_coins() {
        let mut rng = StdRng::seed_from_u64(20240);
        let lcs = sample_configurations(6, 30, &mut rng);
        assert_eq!(lcs.len(), 30);
        for v in 0..6 {
            let mean =
                lcs.iter().map(|lc| f64::from(lc.tags[v])).sum::<f64>() / lcs.len() as f64;
            assert!((0.3..=0.7).contains(&mean), "variable {v} mean {mean}");
        }
    }

    #[test]
    fn symmetric_dataset_fits_to_zero() {
        // Tag carries no information about the label: the penalized
        // likelihood is symmetric under w -> -w, so the coefficient must
        // vanish and the Wald test must see nothing.
        let samples = mk(&[&[0], &[1], &[0], &[1]], &[1, 1, 0, 0]);
        let fit = fit_logistic(&samples, 1e-2).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[0].abs() <= 1e-8, "{}", fit.coefficients[0]);
        assert!(fit.p_values[0] > 0.99, "p = {}", fit.p_values[0]);
    }

    #[test]
    fn separable_dataset_matches_grid_oracle() {
        let samples = mk(&[&[0], &[1], &[0], &[1]], &[0, 1, 0, 1]);
        let fit = fit_logistic(&samples, 1e-2).unwrap();
        let oracle = grid_oracle(&samples, 1e-2);
        assert!(
            (fit.coefficients[0] - oracle[0]).abs() <= 1e-4,
            "irls {} vs grid {}",
            fit.coefficients[0],
            oracle[0]
        );
        assert!((fit.intercept - oracle[1]).abs() <= 1e-4);
        assert!(fit.coefficients[0] > 1.0);
        // Cross-check the Wald p-value against a hand-assembled observed
        // information at the oracle optimum.  Four data points cannot make
        // a Wald test significant at 0.05 even under perfect separation
        // (z ≈ 1.39 here); what the test does pin down is that the p-value
        // follows from w and H exactly.
        let (w, b) = (oracle[0], oracle[1]);
        let wt = |eta: f64| sigmoid(eta) * (1.0 - sigmoid(eta));
        let h_ww = 2.0 * wt(w + b) + 1e-2;
        let h_wb = 2.0 * wt(w + b);
        let h_bb = 2.0 * wt(w + b) + 2.0 * wt(b);
        let det = h_ww * h_bb - h_wb * h_wb;
        let se = (h_bb / det).sqrt();
        let normal = Normal::new(0.0, 1.0).unwrap();
        let p = 2.0 * (1.0 - normal.cdf((w / se).abs()));
        assert!(
            (fit.p_values[0] - p).abs() <= 1e-3,
            "fit p {} vs oracle p {}",
            fit.p_values[0],
            p
        );
        assert!(fit.p_values[0] > 0.1 && fit.p_values[0] < 0.2);
    }

    #[test]
    fn random_datasets_match_grid_oracle() {
        let mut rng = StdRng::seed_from_u64(3311);
        for case in 0..6 {
            let n = 1 + case % 3;
            let m = 12 + case;
            let samples: Vec<LcSample> = loop {
                let cand: Vec<LcSample> = (0..m)
                    .map(|_| {
                        let tags: Vec<u8> = (0..n).map(|_| rng.gen_range(0..=1)).collect();
                        let noise = rng.gen_range(0.0..1.0);
                        let label = u8::from(
                            f64::from(tags[0]) * 0.8 + noise > 0.9,
                        );
                        LcSample { tags, label }
                    })
                    .collect();
                if cand.iter().any(|s| s.label == 0) && cand.iter().any(|s| s.label == 1) {
                    break cand;
                }
            };
            let ridge = 0.1;
            let fit = fit_logistic(&samples, ridge).unwrap();
            let oracle = grid_oracle(&samples, ridge);
            for j in 0..n {
                assert!(
                    (fit.coefficients[j] - oracle[j]).abs() <= 1e-4,
                    "case {case} coef {j}: irls {} vs grid {}",
                    fit.coefficients[j],
                    oracle[j]
                );
            }
            assert!((fit.intercept - oracle[n]).abs() <= 1e-4, "case {case}");
        }
    }

    #[test]
    fn gradient_vanishes_at_the_fit() {
        let mut rng = StdRng::seed_from_u64(515);
        for _ in 0..20 {
            let n = rng.gen_range(1..=4);
            let m = rng.gen_range(6..=20);
            let samples: Vec<LcSample> = loop {
                let cand: Vec<LcSample> = (0..m)
                    .map(|_| LcSample {
                        tags: (0..n).map(|_| rng.gen_range(0..=1)).collect(),
                        label: rng.gen_range(0..=1),
                    })
                    .collect();
                if cand.iter().any(|s| s.label == 0) && cand.iter().any(|s| s.label == 1) {
                    break cand;
                }
            };
            let ridge = 1e-6 * n as f64;
            let fit = fit_logistic(&samples, ridge).unwrap();
            assert!(fit.converged);
            // Recompute the penalized gradient at the reported weights.
            let mut grad = vec![0.0f64; n + 1];
            for s in &samples {
                let eta = fit.intercept
                    + s.tags
                        .iter()
                        .zip(&fit.coefficients)
                        .map(|(&t, &w)| f64::from(t) * w)
                        .sum::<f64>();
                let r = f64::from(s.label) - sigmoid(eta);
                for j in 0..n {
                    grad[j] += r * f64::from(s.tags[j]);
                }
                grad[n] += r;
            }
            for j in 0..n {
                grad[j] -= ridge * fit.coefficients[j];
            }
            let gnorm = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
            assert!(gnorm <= 1e-6, "gradient {gnorm}");
        }
    }

    #[test]
    fn fit_rejects_single_class_batches() {
        let samples = mk(&[&[0], &[1]], &[1, 1]);
        let r = std::panic::catch_unwind(|| fit_logistic(&samples, 1e-2));
        assert!(r.is_err());
    }

    #[test]
    fn classify_significant_positive_goes_lower() {
        // Build a six-variable batch where variable 0 alone drives the
        // label; the oracle-checked fit should tag exactly that one lower.
        let mut rng = StdRng::seed_from_u64(99);
        let samples: Vec<LcSample> = (0..60)
            .map(|_| {
                let tags: Vec<u8> = (0..6).map(|_| rng.gen_range(0..=1)).collect();
                LcSample { label: tags[0], tags }
            })
            .collect();
        let fit = fit_logistic(&samples, 0.06).unwrap();
        let lc = classify(&fit, 0.05, &fit.coefficients);
        assert_eq!(lc.tags[0], 1, "p-values {:?}", fit.p_values);
        assert_eq!(lc.tags[1..], [0, 0, 0, 0, 0], "p-values {:?}", fit.p_values);
    }

    #[test]
    fn classify_falls_back_on_degenerate_outcomes() {
        let fit = LogisticFit {
            coefficients: vec![0.4, -0.2, 0.9],
            intercept: 0.0,
            std_errors: vec![1.0, 1.0, 1.0],
            intercept_se: 1.0,
            p_values: vec![0.9, 0.8, 0.7],
            converged: true,
            ridge: 1e-2,
        };
        // Nothing significant: all-upper, repaired by sending the best
        // coefficient down.
        let lc = classify(&fit, 0.05, &fit.coefficients);
        assert_eq!(lc.tags, vec![0, 0, 1]);
        // alpha = 1 with the sign rule dropped: all three would go lower,
        // repaired by pulling the worst coefficient back up.
        let lc =
            classify_with_mode(&fit, 1.0, &fit.coefficients, ClassifyMode::SignificanceOnly);
        assert_eq!(lc.tags, vec![1, 0, 1]);
    }

    #[test]
    fn classify_never_degenerates() {
        let mut rng = StdRng::seed_from_u64(8181);
        for round in 0..1000 {
            let n = rng.gen_range(2..=8);
            let m = rng.gen_range(8..=40);
            let samples: Vec<LcSample> = loop {
                let cand: Vec<LcSample> = (0..m)
                    .map(|_| LcSample {
                        tags: (0..n).map(|_| rng.gen_range(0..=1)).collect(),
                        label: rng.gen_range(0..=1),
                    })
                    .collect();
                if cand.iter().any(|s| s.label == 0) && cand.iter().any(|s| s.label == 1) {
                    break cand;
                }
            };
            let fit = fit_logistic(&samples, 1e-6 * n as f64).unwrap();
            let lc = classify(&fit, 0.05, &fit.coefficients);
            assert!(!lc.is_degenerate(), "round {round}");
            assert_eq!(lc.n_vars(), n);
        }
    }

    #[test]
    fn median_labels_split_batches() {
        assert_eq!(median_labels(&[0.0, 1.0, 2.0, 3.0]), vec![0, 0, 1, 1]);
        assert_eq!(median_labels(&[0.0, 1.0, 2.0]), vec![0, 0, 1]);
        // Flat upper half: the strict rule alone would go all-zero.
        assert_eq!(median_labels(&[0.0, 5.0, 5.0, 5.0]), vec![0, 1, 1, 1]);
        // Feasibility repairs surface as +inf and must label 1.
        let l = median_labels(&[0.0, f64::INFINITY, 1.0, f64::INFINITY]);
        assert_eq!(l, vec![0, 1, 0, 1]);
        // All-identical batches cannot produce two classes.
        assert_eq!(median_labels(&[2.0, 2.0]), vec![0, 0]);
    }

    #[test]
    fn median_labels_keep_both_classes_with_two_distinct_values() {
        let mut rng = StdRng::seed_from_u64(4242);
        for _ in 0..500 {
            let m = rng.gen_range(2..=15);
            let deltas: Vec<f64> = (0..m)
                .map(|_| [0.0, 0.25, 3.0][rng.gen_range(0..3)])
                .collect();
            let distinct = deltas.iter().any(|&d| d != deltas[0]);
            let labels = median_labels(&deltas);
            if distinct {
                assert!(labels.contains(&0) && labels.contains(&1), "{deltas:?}");
            }
        }
    }

    fn convex_model() -> ModelIR {
        // min sum (x_i - i)^2 st sum x_i <= 100, x in [-10, 10]^4
        let vars: Vec<VariableDef> = (0..4)
            .map(|j| VariableDef::continuous(&format!("x{}", j + 1), -10.0, 10.0))
            .collect();
        let obj = add_chain(
            (0..4).map(|j| pow(sub(var(j), con(j as f64)), con(2.0))),
        );
        let cons = vec![ConstraintDef::le(sub(
            add_chain((0..4).map(var)),
            con(100.0),
        ))];
        ModelIR {
            name: "convex".into(),
            sense: Sense::Min,
            p: 0,
            q: 0,
            source_hash: None,
            variables: vars,
            objective: obj,
            constraints: cons,
        }
    }

    #[test]
    fn improvement_is_nonnegative_on_a_convex_model() {
        let model = convex_model();
        let mut rng = StdRng::seed_from_u64(914);
        for _ in 0..10 {
            let point: Vec<f64> = (0..4).map(|_| rng.gen_range(-9.0..9.0)).collect();
            let lcs = sample_configurations(4, 3, &mut rng);
            for lc in &lcs {
                let imp =
                    label_improvement(&model, &point, lc, LowerSolver::Auto, 1e-4);
                assert!(
                    imp.delta >= -1e-7,
                    "descent made things worse: {} (lc {:?})",
                    imp.delta,
                    lc.tags
                );
            }
        }
    }

    #[test]
    fn improvement_vanishes_at_the_optimum() {
        let model = convex_model();
        // Unconstrained minimizer (0,1,2,3) satisfies the constraint.
        let point = vec![0.0, 1.0, 2.0, 3.0];
        let lc = LevelConfiguration::new(vec![1, 1, 0, 0]);
        let imp = label_improvement(&model, &point, &lc, LowerSolver::Auto, 1e-4);
        assert!(imp.delta.abs() <= 1e-6, "delta {}", imp.delta);
    }

    #[test]
    fn infeasible_start_repaired_counts_as_notable() {
        // x must sit at 5 exactly; start violates it, the lower solve on
        // the only variable repairs it.
        let model = ModelIR {
            name: "eq".into(),
            sense: Sense::Min,
            p: 0,
            q: 0,
            source_hash: None,
            variables: vec![
                VariableDef::continuous("x1", 0.0, 10.0),
                VariableDef::continuous("x2", 0.0, 10.0),
            ],
            objective: add(var(0), var(1)),
            constraints: vec![ConstraintDef::eq(sub(var(0), con(5.0)))],
        };
        let lc = LevelConfiguration::new(vec![1, 0]);
        let imp = label_improvement(&model, &[0.0, 1.0], &lc, LowerSolver::Auto, 1e-4);
        assert!(
            imp.delta.is_infinite() && imp.delta > 0.0,
            "delta {} result {:?}",
            imp.delta,
            imp.result.status
        );
        assert!((imp.after[0] - 5.0).abs() <= 1e-4);
    }

    #[test]
    fn lower_solve_fixes_upper_variables_exactly() {
        let model = convex_model();
        let point = vec![5.0, -3.0, 7.0, 0.5];
        let lc = LevelConfiguration::new(vec![0, 1, 1, 0]);
        let (full, res) = solve_lower(&model, &point, &lc, LowerSolver::Auto);
        assert_eq!(full[0], 5.0);
        assert_eq!(full[3], 0.5);
        // Lower block heads for its conditional optimum (1, 2).
        assert!((full[1] - 1.0).abs() < 1e-3, "{full:?}");
        assert!((full[2] - 2.0).abs() < 1e-3, "{full:?}");
        assert!(res.max_violation <= 1e-6);
    }

    #[test]
    fn pipeline_is_deterministic_under_a_seed() {
        let model = convex_model();
        let run = || {
            let mut rng = StdRng::seed_from_u64(606);
            let point: Vec<f64> = (0..4).map(|_| rng.gen_range(-9.0..9.0)).collect();
            let lcs = sample_configurations(4, 8, &mut rng);
            let deltas: Vec<f64> = lcs
                .iter()
                .map(|lc| {
                    label_improvement(&model, &point, lc, LowerSolver::Auto, 1e-4).delta
                })
                .collect();
            let labels = median_labels(&deltas);
            let samples: Vec<LcSample> = lcs
                .iter()
                .zip(&labels)
                .map(|(lc, &l)| LcSample { tags: lc.tags.clone(), label: l })
                .collect();
            if samples.iter().any(|s| s.label == 0) && samples.iter().any(|s| s.label == 1)
            {
                let fit = fit_logistic(&samples, 1e-6 * 4.0).unwrap();
                let lc = classify(&fit, 0.05, &fit.coefficients);
                (deltas, labels, lc.tags)
            } else {
                (deltas, labels, vec![])
            }
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }
}
