//! `autoopt`: the command-line front end.
//!
//! Subcommands mirror the pipeline: `parse` turns a LaTeX math program into
//! a model file, `emit` renders the modeling script, `solve` runs one of the
//! three solvers, `bench` executes the full comparison protocol, `fixtures
//! verify` cross-checks the bundled fixtures, and `campaign` regenerates the
//! best-known reference table.
//!
//! Exit codes: 0 success, 1 operational failure, 2 parse failure (the
//! distinction scripts care about).  `AUTOOPT_THREADS` caps how many runs
//! may be in flight at once; the default of 1 keeps everything serial and
//! bit-reproducible.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use autoopt_core::bench::{run_experiment_threaded, write_reports, ExperimentSpec, ResultRow};
use autoopt_core::engine::{bobd_solve, ga_solve, ip_solve, Budget, SolveReport};
use autoopt_core::fixtures::{sample_label, sample_latex, SAMPLE_COUNT};
use autoopt_core::ga::GaConfig;
use autoopt_core::latex::parse_model;
use autoopt_core::model::{parse_model_file, serialize_model, ModelIR};
use autoopt_core::problems::{self, SUITE_SIZE};
use autoopt_core::registry::{campaign_entry, render_toml, CampaignBudget, Registry};
use autoopt_core::script::{emit_script, normalize_script};
use autoopt_core::solver::SolveStatus;

#[derive(Parser)]
#[command(name = "autoopt", version, about = "Constrained-optimization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a LaTeX math program into a model file.
    Parse {
        /// LaTeX source file.
        input: PathBuf,
        /// Size of the y family when the model uses symbolic subscripts.
        #[arg(short = 'P', default_value_t = 0)]
        p: usize,
        /// Size of the z family when the model uses symbolic subscripts.
        #[arg(short = 'Q', default_value_t = 0)]
        q: usize,
        /// Output model file.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Render the modeling script for a model file.
    Emit {
        /// Input model file.
        model: PathBuf,
        /// Output script path.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Solve a model file with one of the three methods.
    Solve {
        /// Input model file.
        model: PathBuf,
        /// bobd, ga, or ip.
        #[arg(long)]
        method: String,
        /// RNG seed (bobd and ga).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Feasibility tolerance.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Generation cap for bobd.
        #[arg(long = "max-gen", default_value_t = 200)]
        max_gen: usize,
        /// Wall-clock budget in seconds for ga (default 10).
        #[arg(long = "time-budget")]
        time_budget: Option<f64>,
        /// Print the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run the comparison protocol and write CSV reports.
    Bench {
        /// Test problems: a comma list like "1,3,6" or "all".
        #[arg(long)]
        tp: String,
        /// Added family variables: 0, 20, or 50.
        #[arg(long, default_value_t = 0)]
        scale: usize,
        /// Repetitions per method.
        #[arg(long, default_value_t = 11)]
        runs: usize,
        /// Base seed; run r uses seed base + r.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for results.csv, summary.csv, boxplot.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fixture maintenance.
    Fixtures {
        #[command(subcommand)]
        action: FixturesAction,
    },
    /// Regenerate the best-known reference table.
    Campaign {
        /// Where to write the TOML table.
        #[arg(long)]
        out: PathBuf,
        /// Seed sweep size: seeds 1..=n per instance.
        #[arg(long, default_value_t = 21)]
        seeds: u64,
        /// Restrict to "tp:scale" pairs, e.g. "1:0,4:20"; default all.
        #[arg(long)]
        pairs: Option<String>,
        /// Shrink budgets for a fast smoke pass.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Subcommand)]
enum FixturesAction {
    /// Parse every bundled fixture and compare against the hand-built
    /// models and reference labels.
    Verify,
}

fn thread_cap() -> usize {
    std::env::var("AUTOOPT_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Parse { input, p, q, output } => cmd_parse(&input, p, q, &output),
        Command::Emit { model, output } => cmd_emit(&model, &output),
        Command::Solve { model, method, seed, tol, max_gen, time_budget, json } => {
            cmd_solve(&model, &method, seed, tol, max_gen, time_budget, json)
        }
        Command::Bench { tp, scale, runs, seed, out } => cmd_bench(&tp, scale, runs, seed, &out),
        Command::Fixtures { action: FixturesAction::Verify } => cmd_fixtures_verify(),
        Command::Campaign { out, seeds, pairs, quick } => cmd_campaign(&out, seeds, pairs, quick),
    }
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn read_to_string(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_model(path: &Path) -> Result<ModelIR, String> {
    let text = read_to_string(path)?;
    parse_model_file(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_parse(input: &Path, p: usize, q: usize, output: &Path) -> ExitCode {
    let src = match read_to_string(input) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let name = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    match parse_model(&src, &name, p, q) {
        Ok((model, diagnostics)) => {
            for w in &diagnostics.warnings {
                eprintln!(
                    "warning: {} (bytes {}..{})",
                    w.message, w.span.0, w.span.1
                );
            }
            if let Err(e) = std::fs::write(output, serialize_model(&model)) {
                return fail(format!("{}: {e}", output.display()));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("parse error: {e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_emit(model_path: &Path, output: &Path) -> ExitCode {
    let model = match load_model(model_path) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    match emit_script(&model) {
        Ok(script) => match std::fs::write(output, script) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(format!("{}: {e}", output.display())),
        },
        Err(e) => fail(e),
    }
}

fn status_str(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::IterationLimit => "iteration-limit",
        SolveStatus::InfeasibleDetected => "infeasible-detected",
        SolveStatus::DomainFaultAbort => "domain-fault-abort",
    }
}

/// Write to stdout, ignoring a closed pipe (e.g. `autoopt ... | head`).
fn emit_stdout(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn print_report(model: &ModelIR, report: &SolveReport, json: bool) {
    use std::fmt::Write;
    if json {
        let names = model.var_names();
        let point: serde_json::Map<String, serde_json::Value> = names
            .iter()
            .zip(&report.best_point)
            .map(|(n, v)| (n.clone(), serde_json::json!(v)))
            .collect();
        let doc = serde_json::json!({
            "status": status_str(report.termination),
            "objective": report.best_objective,
            "max_violation": report.max_violation,
            "feasible": report.feasible,
            "generations": report.generations,
            "lower_solves": report.lower_solve_count,
            "function_evaluations": report.function_evaluations,
            "wall_time_seconds": report.wall_time_seconds,
            "point": point,
        });
        emit_stdout(&format!("{}\n", serde_json::to_string_pretty(&doc).unwrap()));
        return;
    }
    let mut out = String::new();
    let _ = writeln!(out, "status:          {}", status_str(report.termination));
    let _ = writeln!(out, "objective:       {}", report.best_objective);
    let _ = writeln!(out, "max violation:   {:.3e}", report.max_violation);
    let _ = writeln!(out, "feasible:        {}", report.feasible);
    let _ = writeln!(out, "generations:     {}", report.generations);
    let _ = writeln!(out, "lower solves:    {}", report.lower_solve_count);
    let _ = writeln!(out, "evaluations:     {}", report.function_evaluations);
    let _ = writeln!(out, "wall time:       {:.3} s", report.wall_time_seconds);
    let _ = writeln!(out, "point:");
    for (name, value) in model.var_names().iter().zip(&report.best_point) {
        let _ = writeln!(out, "  {name} = {value}");
    }
    emit_stdout(&out);
}

fn cmd_solve(
    model_path: &Path,
    method: &str,
    seed: u64,
    tol: f64,
    max_gen: usize,
    time_budget: Option<f64>,
    json: bool,
) -> ExitCode {
    let model = match load_model(model_path) {
        Ok(m) => m.expand_families(),
        Err(e) => return fail(e),
    };
    let mut cfg = GaConfig::default();
    cfg.seed = seed;
    cfg.constraint_tolerance = tol;
    cfg.max_generations = max_gen;
    let report = match method {
        "bobd" => {
            if time_budget.is_some() {
                eprintln!("note: --time-budget applies to the ga method; bobd is generation-bounded");
            }
            match bobd_solve(&model, &cfg) {
                Ok(r) => r,
                Err(e) => return fail(e),
            }
        }
        "ga" => {
            let budget = Budget::Seconds(time_budget.unwrap_or(10.0));
            match ga_solve(&model, &cfg, budget) {
                Ok(r) => r,
                Err(e) => return fail(e),
            }
        }
        "ip" => {
            if time_budget.is_some() {
                eprintln!("note: --time-budget applies to the ga method; ip is deterministic");
            }
            ip_solve(&model)
        }
        other => return fail(format!("unknown method '{other}' (expected bobd, ga, or ip)")),
    };
    print_report(&model, &report, json);
    ExitCode::SUCCESS
}

fn parse_tp_list(spec: &str) -> Result<Vec<u8>, String> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok((1..=SUITE_SIZE).collect());
    }
    let mut tps = Vec::new();
    for part in spec.split(',') {
        let tp: u8 = part
            .trim()
            .parse()
            .map_err(|_| format!("bad test-problem id '{part}'"))?;
        if !(1..=SUITE_SIZE).contains(&tp) {
            return Err(format!("test-problem id {tp} out of range 1..={SUITE_SIZE}"));
        }
        if !tps.contains(&tp) {
            tps.push(tp);
        }
    }
    if tps.is_empty() {
        return Err("empty test-problem list".into());
    }
    Ok(tps)
}

fn cmd_bench(tp_spec: &str, scale: usize, runs: usize, seed: u64, out: &Path) -> ExitCode {
    let tps = match parse_tp_list(tp_spec) {
        Ok(t) => t,
        Err(e) => return fail(e),
    };
    let registry = match Registry::embedded() {
        Ok(r) => r,
        Err(e) => return fail(format!("reference table: {e}")),
    };
    let references = registry.objective_map();
    let threads = thread_cap();
    let mut rows: Vec<ResultRow> = Vec::new();
    for tp in tps {
        let mut spec = ExperimentSpec::new(tp, scale);
        spec.runs = runs;
        spec.base_seed = seed;
        if registry.reference_value(tp, scale).is_err() {
            eprintln!(
                "warning: no reference value for TP{tp} at scale {scale}; \
                 deviation column will be blank"
            );
        }
        eprintln!("TP{tp} scale {scale}: {runs} runs x 3 methods ...");
        match run_experiment_threaded(&spec, &references, threads) {
            Ok(mut r) => rows.append(&mut r),
            Err(e) => return fail(e),
        }
    }
    if let Err(e) = write_reports(&rows, out) {
        return fail(format!("{}: {e}", out.display()));
    }
    println!(
        "wrote {} rows to {}",
        rows.len(),
        out.join("results.csv").display()
    );
    ExitCode::SUCCESS
}

fn cmd_fixtures_verify() -> ExitCode {
    let mut failures = 0usize;
    for tp in 1..=SUITE_SIZE {
        let (p, q) = match problems::family_sizes(tp, 0) {
            Ok(pq) => pq,
            Err(e) => return fail(e),
        };
        let src = match problems::fixture_latex(tp) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        match parse_model(src, &format!("tp{tp}"), p, q) {
            Ok((parsed, _)) => match problems::build(tp, p, q) {
                Ok(built) if parsed.same_structure(&built) => {
                    println!("TP{tp}: ok");
                }
                Ok(_) => {
                    println!("TP{tp}: STRUCTURAL MISMATCH");
                    failures += 1;
                }
                Err(e) => return fail(e),
            },
            Err(e) => {
                println!("TP{tp}: PARSE FAILURE ({e})");
                failures += 1;
            }
        }
    }
    for i in 1..=SAMPLE_COUNT {
        let tex = sample_latex(i).unwrap();
        let label = sample_label(i).unwrap();
        let verdict = verify_sample(i, tex, label);
        match verdict {
            Ok(()) => println!("sample{i}: ok"),
            Err(e) => {
                println!("sample{i}: MISMATCH ({e})");
                failures += 1;
            }
        }
    }
    if failures == 0 {
        println!("all fixtures verified");
        ExitCode::SUCCESS
    } else {
        eprintln!("{failures} fixture(s) failed");
        ExitCode::from(1)
    }
}

fn verify_sample(i: usize, tex: &str, label: &str) -> Result<(), String> {
    let (mut model, _) =
        parse_model(tex, &format!("sample{i}"), 0, 0).map_err(|e| e.to_string())?;
    if i == 3 {
        // The label declares positive domains that the math block leaves
        // implicit; apply them before comparing.
        for v in &mut model.variables {
            v.lb = 0.0;
        }
    }
    let script = emit_script(&model).map_err(|e| e.to_string())?;
    let ours = normalize_script(&script).map_err(|e| e.to_string())?;
    let reference = normalize_script(label).map_err(|e| e.to_string())?;
    if ours == reference {
        Ok(())
    } else {
        Err("script drifts from label after normalization".into())
    }
}

fn all_campaign_pairs() -> Vec<(u8, usize)> {
    let mut pairs: Vec<(u8, usize)> = (1..=3).map(|tp| (tp, 0)).collect();
    for tp in 4..=SUITE_SIZE {
        for scale in [0usize, 20, 50] {
            pairs.push((tp, scale));
        }
    }
    pairs
}

fn parse_pairs(spec: &str) -> Result<Vec<(u8, usize)>, String> {
    let mut pairs = Vec::new();
    for part in spec.split(',') {
        let (tp, scale) = part
            .split_once(':')
            .ok_or_else(|| format!("bad pair '{part}', expected tp:scale"))?;
        let tp: u8 = tp.trim().parse().map_err(|_| format!("bad tp in '{part}'"))?;
        let scale: usize = scale
            .trim()
            .parse()
            .map_err(|_| format!("bad scale in '{part}'"))?;
        pairs.push((tp, scale));
    }
    Ok(pairs)
}

/// Campaign budgets per scale tier.  Larger instances get fewer
/// generations: the lower solves dominate, and the sweep across 21 seeds
/// already explores widely.
fn campaign_budget(scale: usize, quick: bool) -> CampaignBudget {
    if quick {
        return CampaignBudget { population: 30, bobd_generations: 30, ga_work_units: 3_000 };
    }
    match scale {
        0 => CampaignBudget { population: 200, bobd_generations: 1000, ga_work_units: 400_000 },
        20 => CampaignBudget { population: 200, bobd_generations: 400, ga_work_units: 200_000 },
        _ => CampaignBudget { population: 200, bobd_generations: 250, ga_work_units: 120_000 },
    }
}

fn cmd_campaign(out: &Path, seeds: u64, pairs: Option<String>, quick: bool) -> ExitCode {
    let pairs = match pairs.as_deref() {
        Some(s) => match parse_pairs(s) {
            Ok(p) => p,
            Err(e) => return fail(e),
        },
        None => all_campaign_pairs(),
    };
    let seed_list: Vec<u64> = (1..=seeds).collect();
    let threads = thread_cap().min(pairs.len().max(1));

    let next = std::sync::atomic::AtomicUsize::new(0);
    let collected = std::sync::Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some(&(tp, scale)) = pairs.get(i) else { break };
                let budget = campaign_budget(scale, quick);
                let started = std::time::Instant::now();
                let outcome = campaign_entry(tp, scale, &seed_list, &budget);
                eprintln!(
                    "TP{tp} scale {scale}: swept {} seeds in {:.1} s",
                    seed_list.len(),
                    started.elapsed().as_secs_f64()
                );
                collected.lock().unwrap().push((i, outcome));
            });
        }
    });
    let mut outcomes = collected.into_inner().unwrap();
    outcomes.sort_by_key(|(i, _)| *i);

    let mut entries = Vec::new();
    for (i, outcome) in outcomes {
        let (tp, scale) = pairs[i];
        match outcome {
            Ok(Some(entry)) => {
                eprintln!(
                    "TP{tp} scale {scale}: best {} via {} (seed {})",
                    entry.objective, entry.method, entry.seed
                );
                entries.push(entry);
            }
            Ok(None) => {
                eprintln!("warning: TP{tp} scale {scale}: no feasible result; entry omitted");
            }
            Err(e) => return fail(e),
        }
    }
    let date = "2026-08-15";
    let note = if quick {
        "quick smoke budgets; not for deviation reporting"
    } else {
        "scale-tiered budgets: desk 1000 gens, +20 400 gens, +50 250 gens; pop 200"
    };
    let text = render_toml(date, &format!("1..={seeds}"), note, &entries);
    if let Err(e) = std::fs::write(out, text) {
        return fail(format!("{}: {e}", out.display()));
    }
    println!("wrote {} reference entries to {}", entries.len(), out.display());
    ExitCode::SUCCESS
}
