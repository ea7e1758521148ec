//! `ctsboson` command-line front end.
//!
//! Settings come from an optional `key = value` file (`--config`) and are
//! overridden by flags. Exit codes: 0 ok, 1 invalid input, 2 selftest
//! failure, 3 boundary search could not bracket or resolve the transition.

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ctsboson::sweep::{
    self, BenchSpec, BoundarySpec, ResultRecord, Solver, SweepSpec,
};
use ctsboson::{selftest, Error};

use config::Settings;

#[derive(Debug, Parser)]
#[command(name = "ctsboson", version, about = "Bose-Hubbard Gutzwiller and BDMFT solvers with coherent-tail truncation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Gutzwiller mean-field solutions over a μ × J grid.
    Gutzwiller(GridArgs),
    /// BDMFT solutions over a μ × J grid.
    Bdmft(GridArgs),
    /// Sweep with the solver chosen by --solver.
    Sweep(GridArgs),
    /// Bisect the Mott/superfluid boundary J_c at one μ.
    Boundary(BoundaryArgs),
    /// Median wall-clock times of cold solves and speedups against a reference scheme.
    Bench(BenchArgs),
    /// Run the built-in oracle checks.
    Selftest,
}

#[derive(Debug, Args, Default)]
struct CommonArgs {
    /// `key = value` file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gutzwiller | bdmft
    #[arg(long)]
    solver: Option<String>,
    /// Truncation schemes, `fock:<Nc>` or `cts:<Nc>`; repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<String>,
    /// α rule for coherent-tail schemes: eaim | etot | fixed:<v>
    #[arg(long)]
    alpha_scheme: Option<String>,
    /// Chemical potentials μ/U; repeat or comma-separate.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    mu: Vec<String>,
    /// Coordination number.
    #[arg(long)]
    z: Option<String>,
    /// Bath orbitals (BDMFT).
    #[arg(long)]
    lb: Option<String>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    mixing: Option<String>,
    #[arg(long)]
    tol_phi: Option<String>,
    #[arg(long)]
    tol_delta: Option<String>,
    /// Fictitious inverse temperature of the Matsubara grid (BDMFT).
    #[arg(long)]
    beta: Option<String>,
    /// Number of Matsubara frequencies (BDMFT).
    #[arg(long)]
    n_omega: Option<String>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Single J/U value (shorthand for equal --j-min and --j-max).
    #[arg(long)]
    j: Option<String>,
    #[arg(long)]
    j_min: Option<String>,
    #[arg(long)]
    j_max: Option<String>,
    #[arg(long)]
    j_step: Option<String>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<String>,
    /// Solve every J from scratch instead of warm-starting along J.
    #[arg(long)]
    cold_start: bool,
}

#[derive(Debug, Args)]
struct BoundaryArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Lower end of the J bracket (must be uncondensed).
    #[arg(long)]
    j_lo: Option<String>,
    /// Upper end of the J bracket (must be condensed).
    #[arg(long)]
    j_hi: Option<String>,
    /// Final bracket width.
    #[arg(long)]
    tol_j: Option<String>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    j: Option<String>,
    #[arg(long)]
    j_min: Option<String>,
    #[arg(long)]
    j_max: Option<String>,
    #[arg(long)]
    j_step: Option<String>,
    /// Timing repeats per point (at least 3).
    #[arg(long)]
    repeats: Option<String>,
    /// Scheme the speedups are measured against; defaults to the last one.
    #[arg(long)]
    reference: Option<String>,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
enum Failure {
    Invalid(String),
    SelfTest,
    Boundary(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::SelfTest) => ExitCode::from(2),
        Err(Failure::Boundary(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gutzwiller(args) => grid(args, Some(Solver::Gutzwiller)),
        Command::Bdmft(args) => grid(args, Some(Solver::Bdmft)),
        Command::Sweep(args) => grid(args, None),
        Command::Boundary(args) => boundary(args),
        Command::Bench(args) => bench(args),
        Command::Selftest => {
            let report = selftest::run();
            for c in &report.checks {
                println!("{c}");
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::SelfTest)
            }
        }
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            Failure::Invalid(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_records(path: &Option<PathBuf>, records: &[ResultRecord]) -> Result<(), Failure> {
    sweep::write_records(output(path)?, records)?;
    Ok(())
}

fn grid(args: GridArgs, solver: Option<Solver>) -> Result<(), Failure> {
    let mut s = Settings::load(&args.common)?;
    s.set_opt("j", args.j);
    s.set_opt("j-min", args.j_min);
    s.set_opt("j-max", args.j_max);
    s.set_opt("j-step", args.j_step);
    s.set_opt("workers", args.workers);
    if args.cold_start {
        s.set("cold-start", "true");
    }
    let solver = match solver {
        Some(fixed) => fixed,
        None => s.solver()?,
    };
    let mut spec = SweepSpec::new(solver, s.schemes(&[])?, s.mu_values()?, s.j_values()?);
    spec.z = s.z()?;
    spec.l_b = s.l_b()?;
    spec.overrides = s.overrides()?;
    spec.cold_start = s.flag("cold-start")?;
    spec.workers = s.opt_usize("workers")?;
    let records = sweep::run_sweep(&spec)?;
    write_records(&args.common.out, &records)
}

fn boundary(args: BoundaryArgs) -> Result<(), Failure> {
    let mut s = Settings::load(&args.common)?;
    s.set_opt("j-lo", args.j_lo);
    s.set_opt("j-hi", args.j_hi);
    s.set_opt("tol-j", args.tol_j);
    let schemes = s.schemes(&[])?;
    let mus = s.mu_values()?;
    if schemes.len() != 1 || mus.len() != 1 {
        return Err(Failure::Invalid("boundary takes exactly one --scheme and one --mu".into()));
    }
    let spec = BoundarySpec {
        solver: s.solver()?,
        scheme: schemes[0],
        mu_over_u: mus[0],
        z: s.z()?,
        l_b: s.l_b()?,
        overrides: s.overrides()?,
        j_lo: s.required_f64("j-lo")?,
        j_hi: s.required_f64("j-hi")?,
        tol_j: s.opt_f64("tol-j")?.unwrap_or(1e-4),
    };
    let result = sweep::detect_mott_boundary(&spec).map_err(|e| match e {
        Error::Bracket(msg) => Failure::Boundary(msg),
        other => Failure::Invalid(other.to_string()),
    })?;
    if let Some(path) = &args.common.out {
        write_records(&Some(path.clone()), &result.records)?;
    }
    println!(
        "j_c = {} (bracket [{}, {}], {} solves)",
        sweep::format_g12(result.j_c),
        sweep::format_g12(result.j_lo),
        sweep::format_g12(result.j_hi),
        result.records.len()
    );
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    let mut s = Settings::load(&args.common)?;
    s.set_opt("j", args.j);
    s.set_opt("j-min", args.j_min);
    s.set_opt("j-max", args.j_max);
    s.set_opt("j-step", args.j_step);
    s.set_opt("repeats", args.repeats);
    s.set_opt("reference", args.reference);
    let schemes = s.schemes(&["cts:5", "fock:20"])?;
    let mus = s.mu_values()?;
    if mus.len() != 1 {
        return Err(Failure::Invalid("bench takes exactly one --mu".into()));
    }
    let reference = match s.get("reference") {
        None => schemes.len() - 1,
        Some(label) => {
            let wanted: ctsboson::basis::TruncationScheme<f64> = label.parse()?;
            schemes
                .iter()
                .position(|x| x.scheme.kind == wanted.kind && x.scheme.n_c == wanted.n_c)
                .ok_or_else(|| Failure::Invalid(format!("reference `{label}` is not among the schemes")))?
        }
    };
    let spec = BenchSpec {
        solver: s.solver()?,
        schemes,
        reference,
        mu_over_u: mus[0],
        j_values: s.j_values()?,
        z: s.z()?,
        l_b: s.l_b()?,
        overrides: s.overrides()?,
        repeats: s.opt_usize("repeats")?.unwrap_or(3),
    };
    let report = sweep::run_bench(&spec)?;
    report.write_csv(output(&args.common.out)?)?;
    for (label, total, speedup) in &report.totals {
        let median = report.median_speedup(label).unwrap_or(f64::NAN);
        eprintln!(
            "{label}: total {} ms, total speedup {}, median speedup {}",
            sweep::format_g12(*total),
            sweep::format_g12(*speedup),
            sweep::format_g12(median)
        );
    }
    Ok(())
}
