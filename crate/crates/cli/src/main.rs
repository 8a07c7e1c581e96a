//! `qkdplan`: solve planning instances, run sweeps, export models.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use qkd_milp::{export_lp_format, parse_exact, MilpStatus, Rational, SolverParams};
use qkd_sagin::builder::build_deterministic_equivalent;
use qkd_sagin::experiment::{
    cost_inflation_sweep, demand_sweep, km_reservation_sweep, reservation_sweep, ExperimentError, SweepTable,
};
use qkd_sagin::instance::{load_instance_file_seeded, Instance};
use qkd_sagin::report::{render_record, solve_record};
use qkd_sagin::solution::solve_instance;

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_LIMIT: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_ERROR: u8 = 1;

#[derive(Parser)]
#[command(name = "qkdplan", version, about = "Two-stage QKD resource planning over space-air-ground networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the full stochastic program and print the plan.
    Solve(Common),
    /// Fix the total reserved QKD wavelengths to each grid level.
    SweepReservation(SweepArgs),
    /// Scale every request's key-rate support by each grid factor.
    SweepDemand(SweepArgs),
    /// Fix the total reserved KM wavelengths to each grid level.
    SweepKm(SweepArgs),
    /// Multiply fiber and UAV reservation equipment prices by each factor.
    SweepCostInflation(SweepArgs),
    /// Write the deterministic-equivalent model in LP text format.
    ExportLp(Common),
    /// Load the instance, build the model and print its size.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long)]
    time_limit_s: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated values; decimals and `p/q` fractions are accepted.
    #[arg(long, value_parser = parse_grid)]
    grid: Grid,
}

#[derive(Clone)]
struct Grid(Vec<Rational>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    s.split(',')
        .map(|v| parse_exact(v).ok_or_else(|| format!("`{}` is not a number", v.trim())))
        .collect::<Result<Vec<_>, _>>()
        .map(Grid)
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }

    fn error(message: impl ToString) -> Self {
        Failure { code: EXIT_ERROR, message: message.to_string() }
    }
}

fn load(c: &Common) -> Result<(Instance, SolverParams), Failure> {
    let inst = load_instance_file_seeded(&c.instance, c.seed).map_err(Failure::error)?;
    let mut params = inst.solver.params().map_err(Failure::error)?;
    if let Some(t) = c.threads {
        if t == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        params.threads = t;
    }
    if let Some(n) = c.node_limit {
        if n == 0 {
            return Err(Failure::usage("--node-limit must be positive"));
        }
        params.node_limit = Some(n);
    }
    if let Some(t) = c.time_limit_s {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Failure::usage("--time-limit-s must be positive"));
        }
        params.time_limit = Some(Duration::from_secs_f64(t));
    }
    Ok((inst, params))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::error(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn status_code(status: MilpStatus) -> u8 {
    match status {
        MilpStatus::Optimal => 0,
        MilpStatus::Infeasible => EXIT_INFEASIBLE,
        MilpStatus::Feasible | MilpStatus::LimitReached => EXIT_LIMIT,
        // the deterministic equivalent has bounded columns
        MilpStatus::Unbounded => EXIT_ERROR,
    }
}

type SweepFn = fn(&Instance, &[Rational], &SolverParams) -> Result<SweepTable, ExperimentError>;

fn sweep(args: &SweepArgs, run: SweepFn) -> Result<u8, Failure> {
    let (inst, params) = load(&args.common)?;
    let table = match run(&inst, &args.grid.0, &params) {
        Ok(t) => t,
        Err(ExperimentError::Grid(m)) => return Err(Failure::usage(format!("--grid: {m}"))),
        Err(ExperimentError::BaseNotOptimal(s)) => {
            let code = if s == MilpStatus::Infeasible.as_str() { EXIT_INFEASIBLE } else { EXIT_LIMIT };
            return Err(Failure { code, message: format!("the unconstrained problem ended with status {s}") });
        }
        Err(e) => return Err(Failure::error(e)),
    };
    emit(&args.common.out, &table.to_csv().map_err(Failure::error)?)?;
    Ok(0)
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Solve(c) => {
            let (inst, params) = load(&c)?;
            let report = solve_instance(&inst, &params).map_err(Failure::error)?;
            emit(&c.out, &render_record(&solve_record(&inst, &report)))?;
            Ok(status_code(report.status))
        }
        Command::SweepReservation(a) => sweep(&a, reservation_sweep),
        Command::SweepDemand(a) => sweep(&a, demand_sweep),
        Command::SweepKm(a) => sweep(&a, km_reservation_sweep),
        Command::SweepCostInflation(a) => sweep(&a, cost_inflation_sweep),
        Command::ExportLp(c) => {
            let (inst, _) = load(&c)?;
            let built = build_deterministic_equivalent(&inst).map_err(Failure::error)?;
            emit(&c.out, &export_lp_format(&built.model))?;
            Ok(0)
        }
        Command::Validate(c) => {
            let (inst, _) = load(&c)?;
            let built = build_deterministic_equivalent(&inst).map_err(Failure::error)?;
            let text = format!(
                "instance={}\nnodes={}\nlinks={}\nrequests={}\nscenarios={}\ncolumns={}\nrows={}\n",
                inst.name,
                inst.topology.nodes().len(),
                inst.topology.links().len(),
                inst.requests.len(),
                inst.scenarios.len(),
                built.model.num_columns(),
                built.model.num_rows()
            );
            emit(&c.out, &text)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("qkdplan: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
