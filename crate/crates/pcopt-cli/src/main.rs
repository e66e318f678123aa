//! `pcopt` — solve smooth stochastic programs by expanding decisions in
//! orthonormal polynomials of the random parameters, baseline the statistics
//! with per-sample Monte Carlo, compare the two, and run the shipped example
//! problems.
//!
//! Exit codes: 0 success, 1 input or runtime error, 2 completed with a
//! non-converged solve (the report is still written).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pcopt_core::examples::{self, himmelblau_grid_csv, mc_aggregates, pc_aggregates};
use pcopt_core::mc::samples_csv;
use pcopt_core::{
    compare_text, parse_problem, run_mc, solve_pc, ConstraintMode, PcSettings, RunReport,
    SolveOptions, StochasticProblem,
};

const EXIT_OK: i32 = 0;
const EXIT_INPUT: i32 = 1;
const EXIT_NONCONVERGED: i32 = 2;

#[derive(Parser)]
#[command(
    name = "pcopt",
    version,
    about = "Polynomial chaos methods for smooth stochastic optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file via its polynomial-chaos reformulation.
    Solve(SolveArgs),
    /// Per-sample Monte Carlo baseline for a problem file.
    Baseline(BaselineArgs),
    /// Solve and baseline, then print a side-by-side statistics table.
    Compare(CompareArgs),
    /// Run a built-in example with its reference settings.
    Example(ExampleArgs),
}

#[derive(Args)]
struct PcFlags {
    /// Expansion order per decision variable.
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Quadrature nodes per random dimension (default 2·order + 2).
    #[arg(long)]
    quad: Option<usize>,
    /// How constraints are enforced across the random space.
    #[arg(long, value_enum, default_value_t = ModeArg::Expectation)]
    mode: ModeArg,
    /// Highest central moment to report.
    #[arg(long, default_value_t = 4)]
    moments: usize,
    /// Attach the interchange-gap diagnostic report.
    #[arg(long)]
    diagnostics: bool,
}

#[derive(Args)]
struct McFlags {
    /// Number of Monte Carlo samples.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Random seed (PCOPT_SEED in the environment overrides the default).
    #[arg(long, env = "PCOPT_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    /// Problem file.
    path: PathBuf,
    #[command(flatten)]
    pc: PcFlags,
    /// Start point as comma-separated values (default all zeros).
    #[arg(long)]
    start: Option<String>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    /// Problem file.
    path: PathBuf,
    #[command(flatten)]
    mc: McFlags,
    /// Start point as comma-separated values (default all zeros).
    #[arg(long)]
    start: Option<String>,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write every sample as CSV to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Problem file.
    path: PathBuf,
    #[command(flatten)]
    pc: PcFlags,
    #[command(flatten)]
    mc: McFlags,
    /// Start point as comma-separated values (default all zeros).
    #[arg(long)]
    start: Option<String>,
}

#[derive(Args)]
struct ExampleArgs {
    /// One of: quadratic, himmelblau, scheduling.
    name: String,
    /// 1-based start/basin index (default: run every one).
    #[arg(long)]
    equilibrium: Option<usize>,
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    method: MethodArg,
    /// Override the example's Monte Carlo sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Random seed (PCOPT_SEED in the environment overrides the default).
    #[arg(long, env = "PCOPT_SEED", default_value_t = 0)]
    seed: u64,
    /// Write the JSON report(s) here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where the himmelblau cost-surface grid CSV goes.
    #[arg(long, default_value = "himmelblau_grid.csv")]
    grid: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Expectation,
    Collocation,
}

impl From<ModeArg> for ConstraintMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Expectation => ConstraintMode::Expectation,
            ModeArg::Collocation => ConstraintMode::Collocation,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Pc,
    Mc,
    Both,
}

fn main() {
    // Unknown flags and malformed invocations are input errors; --help and
    // --version are ordinary successes.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("{msg}");
            EXIT_INPUT
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<i32, String> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Example(args) => cmd_example(args),
    }
}

fn load_problem(path: &Path) -> Result<StochasticProblem, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_problem(&text).map_err(|e| e.to_string())
}

fn parse_start(csv: Option<&str>, d: usize) -> Result<Vec<f64>, String> {
    let Some(csv) = csv else {
        return Ok(vec![0.0; d]);
    };
    let values: Vec<f64> = csv
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad start value `{s}`: {e}")))
        .collect::<Result<_, _>>()?;
    if values.len() != d {
        return Err(format!(
            "start has {} values but the problem has {d} decision variables",
            values.len()
        ));
    }
    Ok(values)
}

fn settings_from(flags: &PcFlags) -> PcSettings {
    PcSettings {
        order: flags.order,
        quad_points: flags.quad,
        mode: flags.mode.into(),
        moments_k: flags.moments,
        diagnostics: flags.diagnostics,
        opts: SolveOptions::default(),
    }
}

fn emit(json: &str, out: Option<&Path>) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, json)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn emit_reports(reports: &[RunReport], out: Option<&Path>) -> Result<(), String> {
    let json = if reports.len() == 1 {
        reports[0].to_json().map_err(|e| e.to_string())?
    } else {
        let mut s = serde_json::to_string_pretty(reports).map_err(|e| e.to_string())?;
        s.push('\n');
        s
    };
    emit(&json, out)
}

fn pc_converged(report: &RunReport) -> bool {
    report.pc.as_ref().is_some_and(|pc| pc.converged)
}

fn mc_clean(report: &RunReport) -> bool {
    report.mc.as_ref().is_some_and(|mc| mc.excluded == 0)
}

fn cmd_solve(args: SolveArgs) -> Result<i32, String> {
    let prob = load_problem(&args.path)?;
    let start = parse_start(args.start.as_deref(), prob.d())?;
    let report = solve_pc(&prob, &start, &settings_from(&args.pc)).map_err(|e| e.to_string())?;
    let code = if pc_converged(&report) { EXIT_OK } else { EXIT_NONCONVERGED };
    emit_reports(std::slice::from_ref(&report), args.out.as_deref())?;
    Ok(code)
}

fn cmd_baseline(args: BaselineArgs) -> Result<i32, String> {
    let prob = load_problem(&args.path)?;
    let start = parse_start(args.start.as_deref(), prob.d())?;
    let (report, run) = run_mc(
        &prob,
        args.mc.samples,
        args.mc.seed,
        &start,
        &SolveOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    if let Some(csv_path) = &args.csv {
        fs::write(csv_path, samples_csv(&run))
            .map_err(|e| format!("cannot write {}: {e}", csv_path.display()))?;
    }
    let code = if mc_clean(&report) { EXIT_OK } else { EXIT_NONCONVERGED };
    emit_reports(std::slice::from_ref(&report), args.out.as_deref())?;
    Ok(code)
}

fn cmd_compare(args: CompareArgs) -> Result<i32, String> {
    let prob = load_problem(&args.path)?;
    let start = parse_start(args.start.as_deref(), prob.d())?;
    let pc = solve_pc(&prob, &start, &settings_from(&args.pc)).map_err(|e| e.to_string())?;
    let (mc, _) = run_mc(
        &prob,
        args.mc.samples,
        args.mc.seed,
        &start,
        &SolveOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    print!("{}", compare_text(&pc, &mc));
    Ok(EXIT_OK)
}

fn cmd_example(args: ExampleArgs) -> Result<i32, String> {
    let ex = examples::by_name(&args.name).map_err(|e| e.to_string())?;
    let starts: Vec<&Vec<f64>> = match args.equilibrium {
        None => ex.starts.iter().collect(),
        Some(i) => {
            if i == 0 || i > ex.starts.len() {
                return Err(format!(
                    "equilibrium {i} out of range: {} has {} start(s)",
                    ex.name,
                    ex.starts.len()
                ));
            }
            vec![&ex.starts[i - 1]]
        }
    };
    let samples = args.samples.unwrap_or(ex.mc_samples);

    let mut reports = Vec::new();
    let mut all_clean = true;
    for start in starts {
        if args.method != MethodArg::Mc {
            let mut report =
                solve_pc(&ex.problem, start, &ex.settings).map_err(|e| e.to_string())?;
            if !ex.aggregates.is_empty() {
                report.aggregates =
                    Some(pc_aggregates(&report, &ex.aggregates).map_err(|e| e.to_string())?);
            }
            all_clean &= pc_converged(&report);
            reports.push(report);
        }
        if args.method != MethodArg::Pc {
            let (mut report, run) = run_mc(
                &ex.problem,
                samples,
                args.seed,
                start,
                &ex.settings.opts,
            )
            .map_err(|e| e.to_string())?;
            if !ex.aggregates.is_empty() {
                report.aggregates =
                    Some(mc_aggregates(&run, &ex.aggregates).map_err(|e| e.to_string())?);
            }
            all_clean &= mc_clean(&report);
            reports.push(report);
        }
    }

    if ex.name == "himmelblau" {
        fs::write(&args.grid, himmelblau_grid_csv(101))
            .map_err(|e| format!("cannot write {}: {e}", args.grid.display()))?;
    }

    emit_reports(&reports, args.out.as_deref())?;
    Ok(if all_clean { EXIT_OK } else { EXIT_NONCONVERGED })
}
