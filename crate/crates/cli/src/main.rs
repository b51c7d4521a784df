//! Command-line front end.
//!
//! Exit codes: 0 success (solver converged / all bench rows valid / verdict
//! matches the expected regime), 1 bad configuration or parameters, 2 solver
//! did not converge, 3 a benchmark ratio row was invalid (the paired solvers
//! reached different policies).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use dp_core::bench::{
    ratio_row, run_group1, run_group2, run_scaling_cs_refactored, run_scaling_fs, scaling_fit,
    write_ratio_csv, write_ratio_table_csv, BenchScenario, RatioRow, SolverKind,
};
use dp_core::models::config::ModelConfig;
use dp_core::models::counterexample::build_counterexample;
use dp_core::operators::{bellman_t, lift_v_to_g, refactored_s};
use dp_core::solvers::{opi, refactored_opi, rvfi, vfi, SolveConfig, SolveReport};
use dp_core::{sup_norm, sup_norm_diff, DpError, Policy, ValueFn};

#[derive(Parser)]
#[command(name = "dp", about = "Plan-factorized dynamic programming toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a configured model and write the solution and report as JSON.
    Solve(SolveArgs),
    /// Run a benchmark group and write a ratio or scaling table as CSV.
    Bench(BenchArgs),
    /// Evaluate the analytic two-state program and report which fixed-point
    /// identities hold at the given discount factor.
    Counterexample(CounterexampleArgs),
    /// Check factorization validity and declared monotonicity of a model.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Path to the model configuration (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Solver: vfi | rvfi | opi | ropi.
    #[arg(long, default_value = "rvfi")]
    solver: String,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 50_000)]
    max_iter: usize,
    /// Partial-evaluation steps for optimistic policy iteration.
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// Grid-size overrides, comma separated (a single value broadcasts).
    #[arg(long)]
    grids: Option<String>,
    /// Seed for any sampled quantities.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for solution.json and report.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Parallelize sweeps across states.
    #[arg(long, default_value_t = true)]
    parallel: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Group: group1 | group2 | scaling-fs | scaling-cs.
    #[arg(long)]
    group: String,
    /// Square grid sizes for the bankruptcy groups, or y-grid sizes for the
    /// scaling groups.
    #[arg(long)]
    grids: Option<String>,
    /// Discount factors for group1 columns.
    #[arg(long)]
    betas: Option<String>,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the CSV/JSON artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Model family for the scaling groups (only "stopping" is shipped).
    #[arg(long, default_value = "stopping")]
    model: String,
    /// Run scenario cells concurrently. Wall-clock times become unreliable;
    /// only do this to smoke-test a group.
    #[arg(long, default_value_t = false)]
    parallel_scenarios: bool,
}

#[derive(Args)]
struct CounterexampleArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Random value tables per check.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    grids: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Counterexample(args) => cmd_counterexample(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

/// Parses a comma-separated list; empty or whitespace input yields an empty
/// list rather than a parse error.
fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, DpError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| DpError::Parameter(format!("cannot parse '{s}' as {what}")))
        })
        .collect()
}

fn load_config(path: &PathBuf, grids: &Option<String>) -> Result<ModelConfig, DpError> {
    let text = fs::read_to_string(path)
        .map_err(|e| DpError::Parameter(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = ModelConfig::from_json(&text)?;
    if let Some(sizes) = grids {
        let sizes: Vec<usize> = parse_list(sizes, "a grid size")?;
        if sizes.is_empty() {
            return Err(DpError::Parameter("empty grid override".into()));
        }
        cfg.override_grids(&sizes)?;
    }
    Ok(cfg)
}

fn cmd_solve(args: SolveArgs) -> Result<u8, DpError> {
    let solver: SolverKind = args.solver.parse()?;
    let cfg = load_config(&args.model, &args.grids)?;
    let built = cfg.build()?;
    let solve_cfg = SolveConfig {
        tol: args.tol,
        max_iter: args.max_iter,
        m_steps: vec![args.m],
        parallel: args.parallel,
        trace: false,
    };
    let dp = built.dp.as_ref();
    let pf = built.pf.as_ref();
    let v0 = ValueFn::zeros(dp.space().n_states());
    let (domain, values, policy, report): (&str, Vec<f64>, Policy, SolveReport) = match solver {
        SolverKind::Vfi => {
            let (v, p, r) = vfi(dp, &v0, &solve_cfg)?;
            ("state", v.0, p, r)
        }
        SolverKind::Opi => {
            let (v, p, r) = opi(dp, &v0, &solve_cfg)?;
            ("state", v.0, p, r)
        }
        SolverKind::Rvfi => {
            let g0 = lift_v_to_g(pf, &v0);
            let (g, p, r) = rvfi(dp, pf, &g0, &solve_cfg)?;
            ("reduced", g.0, p, r)
        }
        SolverKind::RefactoredOpi => {
            let g0 = lift_v_to_g(pf, &v0);
            let (g, p, r) = refactored_opi(dp, pf, &g0, &solve_cfg)?;
            ("reduced", g.0, p, r)
        }
    };
    fs::create_dir_all(&args.out)
        .map_err(|e| DpError::Parameter(format!("cannot create output dir: {e}")))?;
    // the solution is deterministic for fixed inputs and seed; timing lives
    // in the separate report file
    let solution = serde_json::json!({
        "model": built.name,
        "solver": args.solver,
        "domain": domain,
        "values": values,
        "policy": policy.0,
    });
    fs::write(
        args.out.join("solution.json"),
        serde_json::to_string_pretty(&solution).expect("serializable"),
    )
    .map_err(|e| DpError::Parameter(format!("cannot write solution: {e}")))?;
    fs::write(
        args.out.join("report.json"),
        serde_json::to_string_pretty(&report).expect("serializable"),
    )
    .map_err(|e| DpError::Parameter(format!("cannot write report: {e}")))?;
    println!(
        "{} via {}: {} iterations, final gap {:.3e}, converged = {}",
        built.name, args.solver, report.iterations, report.final_gap, report.converged
    );
    Ok(if report.converged { 0 } else { 2 })
}

fn cmd_bench(args: BenchArgs) -> Result<u8, DpError> {
    fs::create_dir_all(&args.out)
        .map_err(|e| DpError::Parameter(format!("cannot create output dir: {e}")))?;
    if args.parallel_scenarios {
        eprintln!(
            "warning: running scenario cells concurrently; wall-clock times are unreliable"
        );
    }
    match args.group.as_str() {
        "group1" => {
            let grids = match &args.grids {
                Some(text) => parse_list(text, "a grid size")?,
                None => vec![10, 12],
            };
            let betas = match &args.betas {
                Some(text) => parse_list(text, "a discount factor")?,
                None => vec![0.94, 0.95, 0.96, 0.97, 0.98],
            };
            if grids.is_empty() || betas.is_empty() {
                return Err(DpError::Parameter("empty benchmark group".into()));
            }
            let rows = if args.parallel_scenarios {
                run_group1_parallel(&grids, &betas, args.tol, args.reps)?
            } else {
                run_group1(&grids, &betas, args.tol, args.reps, true, true)?
            };
            finish_ratio_table(&rows, betas.len(), &args.out, "group1")
        }
        "group2" => {
            let grids = match &args.grids {
                Some(text) => parse_list(text, "a grid size")?,
                None => vec![10, 12],
            };
            if grids.is_empty() {
                return Err(DpError::Parameter("empty benchmark group".into()));
            }
            let rhos = vec![0.96, 0.97, 0.98, 0.995];
            let delta_sqs = vec![0.01, 0.04];
            let beta = match &args.betas {
                Some(text) => parse_list::<f64>(text, "a discount factor")?
                    .first()
                    .copied()
                    .unwrap_or(0.98),
                None => 0.98,
            };
            let rows = run_group2(
                &grids, &rhos, &delta_sqs, beta, args.tol, args.reps, true, true,
            )?;
            finish_ratio_table(&rows, rhos.len(), &args.out, "group2")
        }
        "scaling-fs" => {
            if args.model != "stopping" {
                return Err(DpError::Parameter(format!(
                    "scaling groups ship only the stopping family, not '{}'",
                    args.model
                )));
            }
            let ls = match &args.grids {
                Some(text) => parse_list(text, "a grid size")?,
                None => vec![50, 100, 200, 400],
            };
            if ls.len() < 3 {
                return Err(DpError::Parameter(
                    "scaling needs at least 3 grid sizes".into(),
                ));
            }
            let k = 20;
            let vfi_pts = run_scaling_fs(&ls, k, 0.95, SolverKind::Vfi, args.reps)?;
            let rvfi_pts = run_scaling_fs(&ls, k, 0.95, SolverKind::Rvfi, args.reps)?;
            let to_xy = |pts: &[dp_core::bench::ScalingPoint]| {
                pts.iter()
                    .map(|p| (p.l as f64, p.per_iter_time))
                    .collect::<Vec<_>>()
            };
            let (sv, rv) = scaling_fit(&to_xy(&vfi_pts))?;
            let (sr, rr) = scaling_fit(&to_xy(&rvfi_pts))?;
            let mut csv = String::from("method,l,per_iter_time,iterations\n");
            for p in vfi_pts.iter() {
                csv.push_str(&format!("vfi,{},{:.6e},{}\n", p.l, p.per_iter_time, p.iterations));
            }
            for p in rvfi_pts.iter() {
                csv.push_str(&format!(
                    "rvfi,{},{:.6e},{}\n",
                    p.l, p.per_iter_time, p.iterations
                ));
            }
            fs::write(args.out.join("scaling_fs.csv"), csv)
                .map_err(|e| DpError::Parameter(format!("cannot write csv: {e}")))?;
            println!("vfi slope {sv:.3} (rms {rv:.3}), rvfi slope {sr:.3} (rms {rr:.3})");
            Ok(0)
        }
        "scaling-cs" => {
            let ls = match &args.grids {
                Some(text) => parse_list(text, "a grid size")?,
                None => vec![50, 100, 200, 400],
            };
            if ls.is_empty() {
                return Err(DpError::Parameter("empty benchmark group".into()));
            }
            let points =
                run_scaling_cs_refactored(&ls, 20, 0.9, 10_000, args.seed, 8, 5)?;
            let mut csv = String::from("l,per_sweep_time\n");
            for (l, t) in &points {
                csv.push_str(&format!("{l},{t:.6e}\n"));
            }
            fs::write(args.out.join("scaling_cs.csv"), csv)
                .map_err(|e| DpError::Parameter(format!("cannot write csv: {e}")))?;
            let lo = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p.1).fold(0.0f64, f64::max);
            println!(
                "refactored fitted sweep time varies {:.1}% across y-grid sizes",
                100.0 * (hi / lo - 1.0)
            );
            Ok(0)
        }
        other => Err(DpError::Parameter(format!("unknown group '{other}'"))),
    }
}

/// Concurrent variant of group 1 used only with --parallel-scenarios.
fn run_group1_parallel(
    grids: &[usize],
    betas: &[f64],
    tol: f64,
    reps: usize,
) -> Result<Vec<RatioRow>, DpError> {
    use rayon::prelude::*;
    let cells: Vec<(usize, f64)> = grids
        .iter()
        .flat_map(|&g| betas.iter().map(move |&b| (g, b)))
        .collect();
    cells
        .par_iter()
        .map(|&(g, beta)| {
            let make = |solver: SolverKind| BenchScenario {
                label: format!("bankruptcy g{g} beta{beta}"),
                config: ModelConfig::Bankruptcy {
                    params: dp_core::models::bankruptcy::BankruptcyParams {
                        beta,
                        ..Default::default()
                    },
                    grids: dp_core::models::bankruptcy::BankruptcyGrids::square(g),
                },
                solver,
                solve: SolveConfig {
                    tol,
                    parallel: false,
                    ..SolveConfig::default()
                },
                repetitions: reps,
                warmup: false,
            };
            let v = dp_core::bench::run_scenario(&make(SolverKind::Vfi))?;
            let r = dp_core::bench::run_scenario(&make(SolverKind::Rvfi))?;
            Ok(ratio_row(
                &format!("({g},{g},{g},{g})"),
                &format!("beta={beta}"),
                &v,
                &r,
            ))
        })
        .collect()
}

fn finish_ratio_table(
    rows: &[RatioRow],
    params_per_grid: usize,
    out: &PathBuf,
    name: &str,
) -> Result<u8, DpError> {
    let mut buf = Vec::new();
    write_ratio_csv(rows, &mut buf)
        .map_err(|e| DpError::Parameter(format!("cannot format csv: {e}")))?;
    fs::write(out.join(format!("{name}_rows.csv")), &buf)
        .map_err(|e| DpError::Parameter(format!("cannot write csv: {e}")))?;
    let mut table = Vec::new();
    write_ratio_table_csv(rows, params_per_grid, &mut table)
        .map_err(|e| DpError::Parameter(format!("cannot format csv: {e}")))?;
    fs::write(out.join(format!("{name}.csv")), &table)
        .map_err(|e| DpError::Parameter(format!("cannot write csv: {e}")))?;
    fs::write(
        out.join(format!("{name}.json")),
        serde_json::to_string_pretty(rows).expect("serializable"),
    )
    .map_err(|e| DpError::Parameter(format!("cannot write json: {e}")))?;
    for r in rows {
        println!(
            "{} {}: vfi {:.2}s rvfi {:.3}s ratio {:.2} valid={}",
            r.grid, r.param, r.vfi_time, r.rvfi_time, r.ratio, r.valid
        );
    }
    Ok(if rows.iter().all(|r| r.valid) { 0 } else { 3 })
}

fn cmd_counterexample(args: CounterexampleArgs) -> Result<u8, DpError> {
    let model = Arc::new(build_counterexample(args.beta, args.gamma)?);
    let pf = model.factorization();
    let v_star = model.v_star();
    let g_star = model.g_star();
    let g_hat = model.g_hat();
    let (tv, _) = bellman_t(model.as_ref(), &v_star)?;
    let (sg, _) = refactored_s(model.as_ref(), &pf, &g_star)?;
    let t_gap = sup_norm_diff(&tv.0, &v_star.0);
    let s_gap = sup_norm_diff(&sg.0, &g_star.0);
    let rel = |gap: f64, scale: f64| gap / scale.max(1e-300);
    let t_rel = rel(t_gap, sup_norm(&v_star.0));
    let s_rel = rel(s_gap, sup_norm(&g_star.0));
    let hat_rel = rel(sup_norm_diff(&g_hat.0, &g_star.0), sup_norm(&g_star.0));

    println!("beta = {}, gamma = {}", args.beta, args.gamma);
    println!("v*    = {:?}", v_star.0);
    println!("g*    = {:?}", g_star.0);
    println!("g_hat = {:?}", g_hat.0);
    println!("|T v* - v*|  = {t_gap:.6e}");
    println!("|S g* - g*|  = {s_gap:.6e}");

    let t_fixed = t_rel < 1e-10;
    let s_fixed = s_rel < 1e-10;
    let hat_differs = hat_rel > 1e-6;
    let verdict = format!(
        "Tv*{}v*, Sg*{}g*, g*{}g_hat",
        if t_fixed { "=" } else { "!=" },
        if s_fixed { "=" } else { "!=" },
        if hat_differs { "!=" } else { "=" },
    );
    println!("verdict: {verdict}");

    let matches_regime = if args.beta < 1.0 {
        t_fixed && !s_fixed && hat_differs
    } else {
        s_fixed && !t_fixed && hat_differs
    };
    println!(
        "expected regime for beta {} 1: {}",
        if args.beta < 1.0 { "<" } else { ">" },
        if matches_regime { "matched" } else { "NOT matched" }
    );
    Ok(if matches_regime { 0 } else { 1 })
}

fn cmd_validate(args: ValidateArgs) -> Result<u8, DpError> {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    let cfg = load_config(&args.model, &args.grids)?;
    let built = cfg.build()?;
    let dp = built.dp.as_ref();
    let pf = built.pf.as_ref();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let n = dp.space().n_states();
    let mut g = vec![0.0; pf.reduced_len()];
    let mut h = dp_core::HFn::zeros(dp.space());
    let mut worst: f64 = 0.0;
    for _ in 0..args.samples {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        pf.w0(&v, &mut g);
        pf.w1(&g, &mut h);
        for (pair, x, a) in dp.space().pairs() {
            let direct = dp.aggregator(x, a, &v);
            let defect = (h.values[pair] - direct).abs() / direct.abs().max(1.0);
            worst = worst.max(defect);
        }
    }
    println!(
        "{}: factorization validity defect {worst:.3e} over {} samples (reduced domain {} of {} states)",
        built.name,
        args.samples,
        pf.reduced_len(),
        n
    );
    println!("declared monotone: {}", pf.is_monotone());
    Ok(if worst < 1e-12 { 0 } else { 1 })
}
