//! `tbt`: encode, synthesize, monitor, and benchmark temporal behavior
//! tree specifications over linear systems.

mod bench;
mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tbt::encoder::{predict_size, EnforceMode};
use tbt::milp::{ModelStats, SolutionStatus};
use tbt::monitor;
use tbt::parser;
use tbt::synthesis::{build_problem, solve_built, SolverCmd, SynthesisError, SynthesisResult};
use tbt::{Ternary, Trace};

/// Exit codes: 0 success, 2 configuration or specification error,
/// 3 infeasible model, 4 solver failure, 5 certificate mismatch.
const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_SOLVER: u8 = 4;
const EXIT_CERTIFICATE: u8 = 5;

#[derive(Parser)]
#[command(name = "tbt", about = "Temporal behavior tree toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Specification file (.tbt DSL).
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Solver command template with {lp}, {sol}, {time_limit} placeholders.
    /// Falls back to $TBT_SOLVER_CMD.
    #[arg(long, global = true)]
    solver_cmd: Option<String>,
    /// Seed recorded in benchmark manifests.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Parallel benchmark workers.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Solver wall-clock limit in seconds.
    #[arg(long, global = true)]
    time_limit: Option<f64>,
    /// Satisfaction enforcement: "final" (z at (t*, T) = 1) or "any"
    /// (some partial horizon reaches +1). Overrides the config.
    #[arg(long, global = true)]
    enforce: Option<String>,
    /// Write the node-to-variable report next to the model.
    #[arg(long, global = true)]
    explain: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build the MILP model and write it in LP format without solving.
    Encode,
    /// Build, solve, certify, and write the synthesized trajectory.
    Synth,
    /// Evaluate a specification against a trace CSV.
    Monitor {
        /// Trace CSV (header t,x1,...,xn).
        #[arg(long)]
        trace: PathBuf,
        /// Sampling period of the trace.
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
        /// Write the full (t1, t2) verdict matrix CSV.
        #[arg(long)]
        matrix: bool,
    },
    /// Run a built-in benchmark suite: case1, case2, or scaling.
    Bench {
        suite: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Parse(#[from] parser::ParseError),
    #[error(transparent)]
    Trace(#[from] tbt::trace::TraceError),
    #[error(transparent)]
    Monitor(#[from] monitor::MonitorError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_)
            | CliError::Usage(_)
            | CliError::Parse(_)
            | CliError::Trace(_)
            | CliError::Monitor(_) => EXIT_CONFIG,
            CliError::Synthesis(SynthesisError::CertificateMismatch { .. }) => EXIT_CERTIFICATE,
            CliError::Synthesis(
                SynthesisError::NoSolver | SynthesisError::SolverFailed { .. },
            ) => EXIT_SOLVER,
            CliError::Synthesis(SynthesisError::DynamicsResidual { .. }) => EXIT_CERTIFICATE,
            CliError::Synthesis(_) => EXIT_CONFIG,
            CliError::Io(_) => 1,
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    match &cli.command {
        Command::Encode => cmd_encode(&cli.common),
        Command::Synth => cmd_synth(&cli.common),
        Command::Monitor { trace, dt, matrix } => cmd_monitor(&cli.common, trace, *dt, *matrix),
        Command::Bench { suite } => cmd_bench(&cli.common, suite),
    }
}

fn load_problem(common: &Common) -> Result<config::LoadedConfig, CliError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let mut loaded = config::load(path)?;
    if let Some(mode) = &common.enforce {
        loaded.problem.enforce = config::parse_enforce(mode)?;
    }
    Ok(loaded)
}

fn solver_cmd(common: &Common, loaded: &config::LoadedConfig) -> Result<SolverCmd, CliError> {
    let template = common
        .solver_cmd
        .clone()
        .or_else(|| loaded.solver_command.clone())
        .map(SolverCmd::new)
        .or_else(SolverCmd::from_env)
        .ok_or(CliError::Synthesis(SynthesisError::NoSolver))?;
    Ok(template.with_time_limit(common.time_limit.or(loaded.time_limit)))
}

fn cmd_encode(common: &Common) -> Result<ExitCode, CliError> {
    let loaded = load_problem(common)?;
    let built = build_problem(&loaded.problem)?;
    std::fs::create_dir_all(&common.out)?;
    std::fs::write(common.out.join("model.lp"), built.model.write_lp())?;
    if common.explain {
        std::fs::write(common.out.join("explain.txt"), &built.explain)?;
    }
    for w in &built.warnings {
        eprintln!("warning: {w}");
    }
    let stats = built.model.stats();
    let predicted = predict_size(
        &built.table,
        built.root,
        built.t_star,
        built.horizon,
        loaded.problem.enforce,
    );
    print!("{}", stats_block(&stats));
    println!("predicted_formula_trits: {}", predicted.trit_vars);
    println!("predicted_formula_binaries: {}", predicted.binary_vars);
    println!(
        "predicted_formula_constraints: {}",
        predicted.linear_constraints
    );
    println!("model: {}", common.out.join("model.lp").display());
    Ok(ExitCode::SUCCESS)
}

fn stats_block(stats: &ModelStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "continuous_vars: {}", stats.continuous_vars);
    let _ = writeln!(out, "binary_vars: {}", stats.binary_vars);
    let _ = writeln!(out, "trit_vars: {}", stats.trit_vars);
    let _ = writeln!(out, "linear_constraints: {}", stats.linear_constraints);
    let _ = writeln!(out, "quadratic_terms: {}", stats.quadratic_terms);
    out
}

fn trajectory_csv(result: &SynthesisResult, n: usize, m: usize) -> String {
    let mut out = String::from("t");
    for i in 1..=n {
        let _ = write!(out, ",x{i}");
    }
    for j in 1..=m {
        let _ = write!(out, ",u{j}");
    }
    out.push('\n');
    if let Some(trace) = &result.trajectory {
        for (t, x) in trace.samples().iter().enumerate() {
            let _ = write!(out, "{t}");
            for v in x {
                let _ = write!(out, ",{v}");
            }
            if let Some(u) = result.controls.get(t) {
                for v in u {
                    let _ = write!(out, ",{v}");
                }
            } else {
                for _ in 0..m {
                    out.push(',');
                }
            }
            out.push('\n');
        }
    }
    out
}

fn manifest(
    command: &str,
    problem: &tbt::synthesis::SynthesisProblem,
    result: &SynthesisResult,
    warnings: &[String],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "command: {command}");
    let _ = writeln!(out, "horizon: {}", problem.horizon);
    let _ = writeln!(out, "t_star: {}", problem.spec.t_star);
    let _ = writeln!(
        out,
        "enforce: {}",
        match problem.enforce {
            EnforceMode::AtFinal => "final",
            EnforceMode::AnyHorizon => "any",
        }
    );
    let _ = writeln!(
        out,
        "formula_hash: {:016x}",
        problem.spec.formula.normalize_kary().structural_hash()
    );
    let _ = writeln!(out, "status: {:?}", result.status);
    let _ = writeln!(out, "objective: {}", result.objective);
    let _ = writeln!(
        out,
        "certificate: {}",
        result
            .certificate
            .map(|c| c.to_string())
            .unwrap_or_else(|| "-".into())
    );
    out.push_str(&stats_block(&result.stats));
    let _ = writeln!(out, "wall_seconds: {:.3}", result.wall_seconds);
    for w in warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

fn cmd_synth(common: &Common) -> Result<ExitCode, CliError> {
    let loaded = load_problem(common)?;
    let cmd = solver_cmd(common, &loaded)?;
    let built = build_problem(&loaded.problem)?;
    std::fs::create_dir_all(&common.out)?;
    if common.explain {
        std::fs::write(common.out.join("explain.txt"), &built.explain)?;
    }
    for w in &built.warnings {
        eprintln!("warning: {w}");
    }
    let result = solve_built(&loaded.problem, &built, &cmd, &common.out, loaded.tol_int)?;
    std::fs::write(
        common.out.join("manifest.txt"),
        manifest("synth", &loaded.problem, &result, &built.warnings),
    )?;
    if !result.status.is_feasible() {
        println!("status: {:?}", result.status);
        return Ok(ExitCode::from(match result.status {
            SolutionStatus::Infeasible => EXIT_INFEASIBLE,
            _ => EXIT_SOLVER,
        }));
    }
    std::fs::write(
        common.out.join("trajectory.csv"),
        trajectory_csv(&result, loaded.problem.system.n, loaded.problem.system.m),
    )?;
    println!("status: {:?}", result.status);
    println!("objective: {}", result.objective);
    println!(
        "certificate: {}",
        result.certificate.unwrap_or(Ternary::Unknown)
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_monitor(
    common: &Common,
    trace_path: &Path,
    dt: f64,
    matrix: bool,
) -> Result<ExitCode, CliError> {
    let spec_path = common
        .spec
        .as_ref()
        .ok_or_else(|| CliError::Usage("--spec is required".into()))?;
    let trace_text = std::fs::read_to_string(trace_path)?;
    let trace = Trace::from_csv(&trace_text, dt)?;
    let spec_text = std::fs::read_to_string(spec_path)?;
    let doc = parser::parse_spec(&spec_text, trace.dim())?;
    let t1 = doc.t_star as usize;
    let t2 = trace.last_index();
    let verdict = monitor::eval(&doc.formula, &trace, t1, t2)?;
    println!("verdict: {verdict} (t1={t1}, t2={t2})");
    if matrix {
        let m = monitor::verdict_matrix(&doc.formula, &trace)?;
        std::fs::create_dir_all(&common.out)?;
        let path = common.out.join("verdicts.csv");
        std::fs::write(&path, m.to_csv())?;
        println!("matrix: {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn bench_solver(common: &Common) -> Result<SolverCmd, CliError> {
    let template = common
        .solver_cmd
        .clone()
        .map(SolverCmd::new)
        .or_else(SolverCmd::from_env)
        .ok_or(CliError::Synthesis(SynthesisError::NoSolver))?;
    Ok(template.with_time_limit(common.time_limit))
}

struct BranchOutcome {
    label: String,
    result: Result<SynthesisResult, SynthesisError>,
    route: String,
}

fn run_case1_branch(
    case: &bench::Case1,
    label: &str,
    cmd: &SolverCmd,
    out: &Path,
) -> BranchOutcome {
    let run = || -> Result<(SynthesisResult, String), SynthesisError> {
        let p = case.problem(1.0, tbt::encoder::DEFAULT_EPSILON)?;
        let built = build_problem(&p)?;
        let result = solve_built(&p, &built, cmd, out, tbt::milp::DEFAULT_TOL_INT)?;
        let route = match &result.trajectory {
            Some(tr) => {
                let entries = [
                    ("A", case.first_entry(tr, &case.goal_a)),
                    ("C", case.first_entry(tr, &case.goal_c)),
                    ("B", case.first_entry(tr, &case.goal_b)),
                ];
                let mut seen: Vec<(usize, &str)> = entries
                    .iter()
                    .filter_map(|(name, t)| t.map(|t| (t, *name)))
                    .collect();
                seen.sort();
                seen.iter()
                    .map(|(t, name)| format!("{name}@{t}"))
                    .collect::<Vec<_>>()
                    .join(" -> ")
            }
            None => String::new(),
        };
        Ok((result, route))
    };
    match run() {
        Ok((result, route)) => BranchOutcome {
            label: label.into(),
            result: Ok(result),
            route,
        },
        Err(e) => BranchOutcome {
            label: label.into(),
            result: Err(e),
            route: String::new(),
        },
    }
}

fn cmd_bench(common: &Common, suite: &str) -> Result<ExitCode, CliError> {
    std::fs::create_dir_all(&common.out)?;
    match suite {
        "case1" => bench_case1(common),
        "case2" => bench_case2(common),
        "scaling" => bench_scaling(common),
        other => Err(CliError::Usage(format!(
            "unknown bench suite {other:?}; expected case1, case2, or scaling"
        ))),
    }
}

fn bench_case1(common: &Common) -> Result<ExitCode, CliError> {
    let cmd = bench_solver(common)?;
    let scale = std::env::var("TBT_BENCH_SCALE").unwrap_or_default();
    let branches: Vec<(bench::Case1, String)> = if scale == "reduced" {
        vec![
            (bench::Case1::reduced(0.9), "reduced_high_battery".into()),
            (bench::Case1::reduced(0.7), "reduced_low_battery".into()),
        ]
    } else {
        vec![
            (bench::Case1::full(0.9), "full_high_battery".into()),
            (bench::Case1::full(0.7), "full_low_battery".into()),
        ]
    };
    let outcomes = run_parallel(common.jobs, branches, |(case, label)| {
        let dir = common.out.join(&label);
        let _ = std::fs::create_dir_all(&dir);
        run_case1_branch(&case, &label, &cmd, &dir)
    });
    let mut report = String::from("suite: case1\n");
    let _ = writeln!(report, "seed: {}", common.seed);
    let mut ok = true;
    for o in &outcomes {
        match &o.result {
            Ok(r) => {
                let _ = writeln!(
                    report,
                    "{}: status={:?} objective={:.4} certificate={} route={} wall={:.1}s",
                    o.label,
                    r.status,
                    r.objective,
                    r.certificate.map(|c| c.to_string()).unwrap_or_default(),
                    o.route,
                    r.wall_seconds,
                );
                if !r.status.is_feasible() {
                    ok = false;
                }
            }
            Err(e) => {
                let _ = writeln!(report, "{}: error {e}", o.label);
                ok = false;
            }
        }
    }
    print!("{report}");
    std::fs::write(common.out.join("case1_report.txt"), report)?;
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INFEASIBLE)
    })
}

fn bench_case2(common: &Common) -> Result<ExitCode, CliError> {
    let cmd = bench_solver(common)?;
    let case = bench::Case2::desk();
    let p = case.problem(1.0, tbt::encoder::DEFAULT_EPSILON)?;
    let built = build_problem(&p)?;
    let result = solve_built(&p, &built, &cmd, &common.out, tbt::milp::DEFAULT_TOL_INT)?;
    let min_l1 = result
        .trajectory
        .as_ref()
        .map(bench::Case2::min_l1_distance)
        .unwrap_or(f64::NAN);
    let mut report = String::from("suite: case2\n");
    let _ = writeln!(
        report,
        "status={:?} objective={:.4} certificate={} min_l1={:.4} d_min={} wall={:.1}s",
        result.status,
        result.objective,
        result.certificate.map(|c| c.to_string()).unwrap_or_default(),
        min_l1,
        case.d_min,
        result.wall_seconds,
    );
    print!("{report}");
    std::fs::write(common.out.join("case2_report.txt"), report)?;
    if let Some(tr) = &result.trajectory {
        std::fs::write(common.out.join("trajectory.csv"), tr.to_csv())?;
    }
    Ok(if result.status.is_feasible() && min_l1 >= case.d_min - 1e-6 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_INFEASIBLE)
    })
}

fn bench_scaling(common: &Common) -> Result<ExitCode, CliError> {
    let horizons = [6usize, 8, 10, 12];
    let rows = bench::scaling_sweep(&horizons, tbt::encoder::DEFAULT_EPSILON)?;
    let csv = bench::scaling_csv(&rows);
    std::fs::write(common.out.join("scaling.csv"), &csv)?;
    print!("{csv}");
    let mut exact = true;
    for r in &rows {
        if r.formula_trits != r.predicted.trit_vars
            || r.formula_binaries != r.predicted.binary_vars
            || r.formula_constraints != r.predicted.linear_constraints
        {
            exact = false;
            eprintln!(
                "T={}: model counts diverge from the analytic prediction",
                r.horizon
            );
        }
    }
    println!(
        "prediction: {}",
        if exact { "exact" } else { "MISMATCH" }
    );
    Ok(if exact {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

/// Runs `work` over `items` on up to `jobs` OS threads, preserving order.
fn run_parallel<T: Send, R: Send>(
    jobs: usize,
    items: Vec<T>,
    work: impl Fn(T) -> R + Sync,
) -> Vec<R> {
    if jobs <= 1 || items.len() <= 1 {
        return items.into_iter().map(work).collect();
    }
    let queue: Vec<(usize, T)> = items.into_iter().enumerate().collect();
    let queue = std::sync::Mutex::new(queue);
    let results = std::sync::Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let item = queue.lock().unwrap().pop();
                match item {
                    Some((idx, t)) => results.lock().unwrap().push((idx, work(t))),
                    None => break,
                }
            });
        }
    });
    let mut out = results.into_inner().unwrap();
    out.sort_by_key(|(idx, _)| *idx);
    out.into_iter().map(|(_, r)| r).collect()
}
