//! Solve drivers: the BOBD algorithm and its two baselines.
//!
//! Three entry points share the [`SolveReport`] shape:
//!
//! * [`bobd_solve`] — bilevel optimization based decomposition.  A steady
//!   state GA explores the upper-level variables while every candidate's
//!   lower-level block is completed by a classical solver (simplex when the
//!   reduced subproblem is linear, log-barrier otherwise).  Which variables
//!   belong to which level is decided by the logistic-regression classifier
//!   in [`crate::lrvcm`] and revisited every `reclassification_period`
//!   generations.
//! * [`ga_solve`] — the same steady-state GA over *all* variables with
//!   direct evaluation and no decomposition, the metaheuristic baseline.
//! * [`ip_solve`] — one barrier solve from the bound-box midpoint, the
//!   classical baseline.
//!
//! Determinism: all randomness comes from a counter-based generator seeded
//! with `GaConfig::seed`, so identical seed + config reproduces the full
//! report except wall time.  Lower-level completions consume no randomness
//! at all — every draw happens before the completion starts — which is what
//! makes it safe to run the per-generation completions concurrently (enable
//! the `parallel` feature) without any RNG splitting scheme: the sequential
//! and parallel drivers produce bit-identical reports.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::ConfigError;
use crate::ga::{
    feasibility_first, polynomial_mutation, sbx_crossover, tournament_select,
    worst_index, GaConfig, Individual,
};
use crate::lrvcm::{
    classify, fit_logistic, label_improvement, sample_configurations,
    LcSample, LevelConfiguration, LowerSolver,
};
use crate::model::{Domain, ModelIR};
use crate::solver::{solve_barrier, BarrierConfig, SolveStatus};

/// Stopping rule for the plain-GA baseline.
///
/// `Seconds` is the faithful protocol (the baseline runs for a wall-clock
/// allowance); `WorkUnits` caps the function-evaluation counter instead and
/// exists so benchmark comparisons can be replayed deterministically — a
/// wall clock never reproduces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Seconds(f64),
    WorkUnits(u64),
}

impl Budget {
    fn validate(self) -> Result<(), ConfigError> {
        match self {
            Budget::Seconds(s) if !(s > 0.0) || !s.is_finite() => Err(
                ConfigError(format!("time budget must be positive, got {s}")),
            ),
            Budget::WorkUnits(0) => {
                Err(ConfigError("work-unit budget must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Outcome of one solve, common to all three drivers.
///
/// `best_objective` is reported in the model's own sense (a maximization
/// model reports the maximum found); `history` stays minimization-oriented
/// so "non-increasing" means improving for every model.  Entries of
/// `history` are the best *feasible* objective known at the end of each
/// generation, `+inf` until the first feasible point appears; index 0 is the
/// state right after initialization.
///
/// `termination` is never silent about infeasibility: `Converged` is only
/// reported when the best point satisfies the constraint tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub best_point: Vec<f64>,
    pub best_objective: f64,
    pub max_violation: f64,
    pub feasible: bool,
    pub termination: SolveStatus,
    pub generations: usize,
    pub lower_solve_count: u64,
    pub function_evaluations: u64,
    pub wall_time_seconds: f64,
    /// Best feasible objective after each generation, minimization-oriented.
    pub history: Vec<f64>,
    /// Every level configuration adopted over the run, in adoption order
    /// (initial classification plus one entry per re-classification).  Empty
    /// for the baselines.
    pub level_configurations_used: Vec<Vec<u8>>,
}

impl SolveReport {
    /// Field-wise equality ignoring the wall clock — the reproducibility
    /// contract for identical seed + config.
    pub fn matches_excluding_time(&self, other: &SolveReport) -> bool {
        self.best_point == other.best_point
            && self.best_objective == other.best_objective
            && self.max_violation == other.max_violation
            && self.feasible == other.feasible
            && self.termination == other.termination
            && self.generations == other.generations
            && self.lower_solve_count == other.lower_solve_count
            && self.function_evaluations == other.function_evaluations
            && self.history == other.history
            && self.level_configurations_used == other.level_configurations_used
    }
}

/// Fill in the lower-level block of a candidate.
///
/// `upper_values` covers exactly the tag-0 variables of `lc`, in ascending
/// variable order; the tag-1 coordinates of `start_point` warm-start the
/// lower solve.  Solver trouble is encoded in `lower_solve_status` — the
/// individual is returned regardless, with objective and violation taken
/// from the full assembled point.
pub fn complete_individual(
    model: &ModelIR,
    lc: &LevelConfiguration,
    upper_values: &[f64],
    start_point: &[f64],
    solver: LowerSolver,
) -> Individual {
    complete_with_work(model, lc, upper_values, start_point, solver).0
}

/// As [`complete_individual`], also reporting the work done (function
/// evaluations charged by the lower solver).
fn complete_with_work(
    model: &ModelIR,
    lc: &LevelConfiguration,
    upper_values: &[f64],
    start_point: &[f64],
    solver: LowerSolver,
) -> (Individual, u64) {
    let upper = lc.upper_indices();
    assert_eq!(
        upper.len(),
        upper_values.len(),
        "upperValues must cover exactly the tag-0 variables"
    );
    let mut point = start_point.to_vec();
    for (slot, &i) in upper.iter().enumerate() {
        point[i] = upper_values[slot];
    }
    let to_min = model.sense.factor();
    let (after, result) = crate::lrvcm::solve_lower(model, &point, lc, solver);
    let ind = Individual {
        full_point: after,
        objective: to_min * result.objective,
        violation: result.max_violation,
        lower_solve_status: Some(result.status),
    };
    (ind, result.evaluations as u64)
}

/// Per-variable sampling intervals: the bound box where it is finite, a
/// width-20 window against a one-sided bound, and [-10, 10] for free
/// variables.
fn sampling_box(model: &ModelIR) -> Vec<(f64, f64)> {
    model
        .variables
        .iter()
        .map(|v| match (v.lb.is_finite(), v.ub.is_finite()) {
            (true, true) => (v.lb, v.ub),
            (true, false) => (v.lb, v.lb + 20.0),
            (false, true) => (v.ub - 20.0, v.ub),
            (false, false) => (-10.0, 10.0),
        })
        .collect()
}

fn random_point(boxes: &[(f64, f64)], rng: &mut impl Rng) -> Vec<f64> {
    boxes
        .iter()
        .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..hi) } else { lo })
        .collect()
}

fn direct_individual(model: &ModelIR, to_min: f64, point: Vec<f64>) -> Individual {
    let objective = to_min * model.objective_or_inf(&point);
    let violation = model.violation_or_inf(&point);
    Individual { full_point: point, objective, violation, lower_solve_status: None }
}

/// Round integer/binary coordinates to the nearest grid point.  The
/// benchmark suite is purely continuous, but the operators should not
/// silently hand fractional values to an integer variable.
fn snap_domains(model: &ModelIR, indices: &[usize], values: &mut [f64]) {
    for (slot, &i) in indices.iter().enumerate() {
        if model.variables[i].domain != Domain::Continuous {
            values[slot] = values[slot].round();
        }
    }
}

struct Counters {
    evaluations: u64,
    lower_solves: u64,
}

/// Best feasible objective in the population (minimization-oriented), or
/// `+inf` when nothing is feasible yet.
fn best_feasible(pop: &[Individual], tol: f64) -> f64 {
    pop.iter()
        .filter(|m| m.feasible(tol))
        .map(|m| m.objective)
        .fold(f64::INFINITY, f64::min)
}

fn best_member(pop: &[Individual], tol: f64) -> usize {
    let mut best = 0;
    for i in 1..pop.len() {
        if feasibility_first(&pop[i], &pop[best], tol) == std::cmp::Ordering::Less {
            best = i;
        }
    }
    best
}

/// One full classification pass: try a fresh random level configuration on
/// every population member, label the improvements against the batch
/// median, fold the samples into the training window, and fit + classify.
///
/// The lower solves double as local improvement steps — a member is replaced
/// in place whenever its completed point beats it — so the pass is also the
/// "completion pass" that makes a zero-generation run meaningful.
///
/// Falls back to a random non-degenerate configuration when the window
/// cannot support a fit (single-class labels or a singular system).
fn classification_pass(
    model: &ModelIR,
    tol: f64,
    pop: &mut [Individual],
    window: &mut Vec<LcSample>,
    window_cap: usize,
    rng: &mut ChaCha8Rng,
    counters: &mut Counters,
) -> LevelConfiguration {
    let n = model.n_vars();
    let to_min = model.sense.factor();
    let mut batch: Vec<(LevelConfiguration, f64)> = Vec::with_capacity(pop.len());
    for member in pop.iter_mut() {
        let lc = sample_configurations(n, 1, rng).pop().unwrap();
        let imp =
            label_improvement(model, &member.full_point, &lc, LowerSolver::Auto, tol);
        counters.lower_solves += 1;
        counters.evaluations += 1 + imp.result.evaluations as u64;
        let candidate = Individual {
            full_point: imp.after.clone(),
            objective: to_min * imp.result.objective,
            violation: imp.result.max_violation,
            lower_solve_status: Some(imp.result.status),
        };
        if feasibility_first(&candidate, member, tol) == std::cmp::Ordering::Less {
            *member = candidate;
        }
        batch.push((lc, imp.delta));
    }
    let labels =
        crate::lrvcm::median_labels(&batch.iter().map(|(_, d)| *d).collect::<Vec<_>>());
    for ((lc, _), &label) in batch.into_iter().zip(labels.iter()) {
        window.push(LcSample { tags: lc.tags, label });
    }
    if window.len() > window_cap {
        let excess = window.len() - window_cap;
        window.drain(..excess);
    }

    let has_both = window.iter().any(|s| s.label == 0)
        && window.iter().any(|s| s.label == 1);
    if has_both {
        let ridge = 1e-6 * n as f64;
        if let Ok(fit) = fit_logistic(window, ridge) {
            return classify(&fit, 0.05, &fit.coefficients);
        }
    }
    sample_configurations(n, 1, rng).pop().unwrap()
}

/// Relative-improvement stall rule over the best-feasible history.
fn stalled(history: &[f64], window: usize, rel_tol: f64) -> bool {
    if window == 0 || history.len() <= window {
        return false;
    }
    let cur = history[history.len() - 1];
    let prev = history[history.len() - 1 - window];
    if !cur.is_finite() || !prev.is_finite() {
        // Nothing feasible yet (or just became feasible): keep searching.
        return false;
    }
    prev - cur <= rel_tol * (1.0 + cur.abs())
}

/// Bilevel optimization based decomposition, start to finish.
///
/// The ten steps: random initial population; initial classification from one
/// random level configuration per member; then a steady-state generation
/// loop — every `reclassification_period` generations the classification is
/// rebuilt from the freshly probed population (the training window keeps the
/// last two passes), each generation tournament-selects two parents, crosses
/// and mutates their *upper* coordinates, completes each offspring's lower
/// block with a classical solve warm-started from the better parent, and an
/// offspring replaces the worst member only when it beats it under the
/// feasibility-first order.  Terminates on `max_generations` or on the stall
/// rule, whichever bites first.
///
/// All randomness derives from `cfg.seed`.
pub fn bobd_solve(model: &ModelIR, cfg: &GaConfig) -> Result<SolveReport, ConfigError> {
    cfg.validate()?;
    let expanded;
    let m = if model.is_expanded() {
        model
    } else {
        expanded = model.expand_families();
        &expanded
    };
    let n = m.n_vars();
    if n < 2 {
        return Err(ConfigError(format!(
            "bilevel decomposition needs at least two variables, model has {n}"
        )));
    }
    let to_min = m.sense.factor();
    let tol = cfg.constraint_tolerance;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let started = Instant::now();
    let mut counters = Counters { evaluations: 0, lower_solves: 0 };

    // Step 1: random initial population, evaluated directly.
    let boxes = sampling_box(m);
    let mut pop: Vec<Individual> = (0..cfg.population_size)
        .map(|_| direct_individual(m, to_min, random_point(&boxes, &mut rng)))
        .collect();
    counters.evaluations += cfg.population_size as u64;

    // Steps 2-3: initial classification (doubles as the completion pass).
    let window_cap = 2 * cfg.population_size;
    let mut window: Vec<LcSample> = Vec::with_capacity(window_cap);
    let mut lc = classification_pass(
        m, tol, &mut pop, &mut window, window_cap, &mut rng, &mut counters,
    );
    let mut levels_used = vec![lc.tags.clone()];

    let mut history = vec![best_feasible(&pop, tol)];
    let mut generations = 0usize;

    // Steps 4-10.
    for g in 1..=cfg.max_generations {
        if g % cfg.reclassification_period == 0 {
            lc = classification_pass(
                m, tol, &mut pop, &mut window, window_cap, &mut rng, &mut counters,
            );
            levels_used.push(lc.tags.clone());
        }

        let upper_idx = lc.upper_indices();
        let lb_u: Vec<f64> = upper_idx.iter().map(|&i| m.variables[i].lb).collect();
        let ub_u: Vec<f64> = upper_idx.iter().map(|&i| m.variables[i].ub).collect();

        let mut produced = 0usize;
        while produced < cfg.offspring_per_generation {
            let i1 = tournament_select(&pop, cfg.tournament_size, tol, &mut rng);
            let i2 = tournament_select(&pop, cfg.tournament_size, tol, &mut rng);
            let take =
                |ind: &Individual| -> Vec<f64> {
                    upper_idx.iter().map(|&i| ind.full_point[i]).collect()
                };
            let u1 = take(&pop[i1]);
            let u2 = take(&pop[i2]);
            let gate: f64 = rng.gen();
            let (mut c1, mut c2) = if gate <= cfg.crossover_probability {
                sbx_crossover(
                    &u1, &u2, &lb_u, &ub_u, cfg.sbx_distribution_index, &mut rng,
                )
            } else {
                (u1, u2)
            };
            c1 = polynomial_mutation(
                &c1, &lb_u, &ub_u,
                cfg.mutation_probability, cfg.mutation_distribution_index, &mut rng,
            );
            c2 = polynomial_mutation(
                &c2, &lb_u, &ub_u,
                cfg.mutation_probability, cfg.mutation_distribution_index, &mut rng,
            );
            snap_domains(m, &upper_idx, &mut c1);
            snap_domains(m, &upper_idx, &mut c2);

            // The better parent donates the lower-coordinate warm start.
            let donor = if feasibility_first(&pop[i1], &pop[i2], tol)
                == std::cmp::Ordering::Greater
            {
                pop[i2].full_point.clone()
            } else {
                pop[i1].full_point.clone()
            };

            // Both completions are RNG-free and independent; run them
            // side by side when the `parallel` feature is on.
            let complete =
                |u: &[f64]| complete_with_work(m, &lc, u, &donor, LowerSolver::Auto);
            #[cfg(feature = "parallel")]
            let (r1, r2) = rayon::join(|| complete(&c1), || complete(&c2));
            #[cfg(not(feature = "parallel"))]
            let (r1, r2) = (complete(&c1), complete(&c2));

            for (offspring, work) in [r1, r2] {
                counters.lower_solves += 1;
                counters.evaluations += work;
                if produced >= cfg.offspring_per_generation {
                    break;
                }
                produced += 1;
                let w = worst_index(&pop, tol);
                if feasibility_first(&offspring, &pop[w], tol)
                    == std::cmp::Ordering::Less
                {
                    pop[w] = offspring;
                }
            }
        }

        generations = g;
        let incumbent = *history.last().unwrap();
        history.push(best_feasible(&pop, tol).min(incumbent));
        if stalled(&history, cfg.stall_window, cfg.stall_rel_tol) {
            break;
        }
    }

    Ok(finish_report(
        m, &pop, tol, generations, history, levels_used, counters, started,
    ))
}

/// Plain steady-state GA over all variables: the metaheuristic baseline.
///
/// No decomposition, no lower solves — every candidate is evaluated
/// directly.  Runs until the budget is exhausted (checked once per
/// generation, so the overshoot is at most one generation's work).
/// `cfg.max_generations` and the stall rule do not apply; the budget is the
/// termination criterion, matching the benchmark protocol where the
/// baseline is *given* a time allowance.
pub fn ga_solve(
    model: &ModelIR,
    cfg: &GaConfig,
    budget: Budget,
) -> Result<SolveReport, ConfigError> {
    cfg.validate()?;
    budget.validate()?;
    let expanded;
    let m = if model.is_expanded() {
        model
    } else {
        expanded = model.expand_families();
        &expanded
    };
    let n = m.n_vars();
    let to_min = m.sense.factor();
    let tol = cfg.constraint_tolerance;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let started = Instant::now();
    let mut counters = Counters { evaluations: 0, lower_solves: 0 };

    let boxes = sampling_box(m);
    let mut pop: Vec<Individual> = (0..cfg.population_size)
        .map(|_| direct_individual(m, to_min, random_point(&boxes, &mut rng)))
        .collect();
    counters.evaluations += cfg.population_size as u64;

    let lb: Vec<f64> = m.variables.iter().map(|v| v.lb).collect();
    let ub: Vec<f64> = m.variables.iter().map(|v| v.ub).collect();
    let all_idx: Vec<usize> = (0..n).collect();

    let mut history = vec![best_feasible(&pop, tol)];
    let mut generations = 0usize;
    loop {
        let exhausted = match budget {
            Budget::Seconds(s) => started.elapsed().as_secs_f64() >= s,
            Budget::WorkUnits(u) => counters.evaluations >= u,
        };
        if exhausted {
            break;
        }
        let mut produced = 0usize;
        while produced < cfg.offspring_per_generation {
            let i1 = tournament_select(&pop, cfg.tournament_size, tol, &mut rng);
            let i2 = tournament_select(&pop, cfg.tournament_size, tol, &mut rng);
            let gate: f64 = rng.gen();
            let (mut c1, mut c2) = if gate <= cfg.crossover_probability {
                sbx_crossover(
                    &pop[i1].full_point, &pop[i2].full_point,
                    &lb, &ub, cfg.sbx_distribution_index, &mut rng,
                )
            } else {
                (pop[i1].full_point.clone(), pop[i2].full_point.clone())
            };
            c1 = polynomial_mutation(
                &c1, &lb, &ub,
                cfg.mutation_probability, cfg.mutation_distribution_index, &mut rng,
            );
            c2 = polynomial_mutation(
                &c2, &lb, &ub,
                cfg.mutation_probability, cfg.mutation_distribution_index, &mut rng,
            );
            snap_domains(m, &all_idx, &mut c1);
            snap_domains(m, &all_idx, &mut c2);
            for child in [c1, c2] {
                if produced >= cfg.offspring_per_generation {
                    break;
                }
                produced += 1;
                let offspring = direct_individual(m, to_min, child);
                counters.evaluations += 1;
                let w = worst_index(&pop, tol);
                if feasibility_first(&offspring, &pop[w], tol)
                    == std::cmp::Ordering::Less
                {
                    pop[w] = offspring;
                }
            }
        }
        generations += 1;
        let incumbent = *history.last().unwrap();
        history.push(best_feasible(&pop, tol).min(incumbent));
    }

    Ok(finish_report(
        m, &pop, tol, generations, history, Vec::new(), counters, started,
    ))
}

/// Classical baseline: one barrier solve from the midpoint of the bound box,
/// wrapped as a [`SolveReport`].  A run that ends above the feasibility
/// tolerance is reported as `InfeasibleDetected` rather than passed off as a
/// solution.
pub fn ip_solve(model: &ModelIR) -> SolveReport {
    let expanded;
    let m = if model.is_expanded() {
        model
    } else {
        expanded = model.expand_families();
        &expanded
    };
    let tol = GaConfig::default().constraint_tolerance;
    let to_min = m.sense.factor();
    let started = Instant::now();
    let x0 = crate::solver::barrier::box_midpoint(m);
    let r = solve_barrier(m, &x0, &BarrierConfig::default());
    let wall = started.elapsed().as_secs_f64();
    let feasible = r.max_violation <= tol;
    let termination = if !feasible {
        match r.status {
            SolveStatus::DomainFaultAbort => SolveStatus::DomainFaultAbort,
            _ => SolveStatus::InfeasibleDetected,
        }
    } else {
        r.status
    };
    let history = vec![if feasible { to_min * r.objective } else { f64::INFINITY }];
    SolveReport {
        best_point: r.point,
        best_objective: r.objective,
        max_violation: r.max_violation,
        feasible,
        termination,
        generations: 0,
        lower_solve_count: 0,
        function_evaluations: r.evaluations as u64,
        wall_time_seconds: wall,
        history,
        level_configurations_used: Vec::new(),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish_report(
    m: &ModelIR,
    pop: &[Individual],
    tol: f64,
    generations: usize,
    history: Vec<f64>,
    levels_used: Vec<Vec<u8>>,
    counters: Counters,
    started: Instant,
) -> SolveReport {
    let to_min = m.sense.factor();
    let best = &pop[best_member(pop, tol)];
    let feasible = best.feasible(tol);
    SolveReport {
        best_point: best.full_point.clone(),
        best_objective: to_min * best.objective,
        max_violation: best.violation,
        feasible,
        termination: if feasible {
            SolveStatus::Converged
        } else {
            SolveStatus::IterationLimit
        },
        generations,
        lower_solve_count: counters.lower_solves,
        function_evaluations: counters.evaluations,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        history,
        level_configurations_used: levels_used,
    }
}
