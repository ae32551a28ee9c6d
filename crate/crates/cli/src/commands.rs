use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use herglotz::{
    certify_noether, direct_oracle, dubois_reymond, el_report, fd_tolerance, noether_charge, psi_backward_ode,
    psi_closed_form, psi_z_quadrature, shoot, transversality, Grid, HerglotzProblem, MultiplierSet, OracleConfig,
    ShootingConfig, Trajectory, VerificationReport,
};

use crate::error::{classify, CliError};
use crate::problem_file::{self, Method, ProblemFile, DEFAULT_GRID};
use crate::traj_csv;

#[derive(Debug, Parser)]
#[command(name = "herglotz", version, about = "Solve and certify higher-order Herglotz variational problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute an extremal and write it as CSV.
    Solve(SolveArgs),
    /// Check the Euler-Lagrange, transversality and DuBois-Reymond conditions.
    Verify(VerifyArgs),
    /// Check invariance under a symmetry family and constancy of its Noether charge.
    Noether(NoetherArgs),
    /// Shorthand for `solve --method direct`.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Shooting,
    Direct,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem file (TOML).
    pub file: PathBuf,
    /// Write the trajectory CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Number of grid nodes (odd, at least 3).
    #[arg(long, env = "HERGLOTZ_GRID")]
    pub grid: Option<usize>,
    /// Shooting residual tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Trajectory CSV as written by `solve`.
    pub traj: PathBuf,
    #[arg(long)]
    pub problem: PathBuf,
    /// Factor C in the tolerance C * h^2.
    #[arg(long, default_value_t = herglotz::verify::DEFAULT_TOL_SCALE)]
    pub tol_scale: f64,
}

#[derive(Debug, Args)]
pub struct NoetherArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub traj: PathBuf,
    #[arg(long, default_value_t = herglotz::verify::DEFAULT_TOL_SCALE)]
    pub tol_scale: f64,
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Solve(args) => cmd_solve(args, out, err),
        Command::Oracle(args) => cmd_solve(
            SolveArgs { file: args.file, out: args.out, method: Some(MethodArg::Direct), grid: None, tol: None, seed: args.seed },
            out,
            err,
        ),
        Command::Verify(args) => cmd_verify(args, out),
        Command::Noether(args) => cmd_noether(args, out, err),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io { path: path.to_path_buf(), message: e.to_string() }
}

fn emit_csv(
    target: Option<&Path>,
    out: &mut dyn Write,
    traj: &Trajectory,
    mult: &MultiplierSet,
) -> Result<(), CliError> {
    match target {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(io_err(path))?;
            traj_csv::write(std::io::BufWriter::new(file), traj, mult).map_err(io_err(path))
        }
        None => traj_csv::write(out, traj, mult).map_err(io_err(Path::new("<stdout>"))),
    }
}

pub fn shooting_config(file: &ProblemFile, args: &SolveArgs) -> Result<ShootingConfig, CliError> {
    let p = &file.problem;
    let nodes = args.grid.or(file.solver.grid_points).unwrap_or(DEFAULT_GRID);
    let grid = Grid::new(p.a, p.b, nodes).map_err(CliError::Input)?;
    let mut cfg = ShootingConfig::new(grid);
    cfg.tol = args.tol.unwrap_or(file.solver.tolerance);
    cfg.seed = args.seed.unwrap_or(file.solver.seed);
    cfg.max_iter = file.solver.max_iterations;
    cfg.multistart = file.solver.multistart;
    Ok(cfg)
}

fn cmd_solve(args: SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let file = problem_file::load(&args.file)?;
    let p = &file.problem;
    let method = match args.method {
        Some(MethodArg::Shooting) => Method::Shooting,
        Some(MethodArg::Direct) => Method::Direct,
        None => file.solver.method,
    };
    // keep stdout clean for the CSV when no --out is given
    let (converged, summary, traj, mult) = match method {
        Method::Shooting => {
            let cfg = shooting_config(&file, &args)?;
            let ext = shoot(p, &cfg).map_err(classify)?;
            let summary = format!(
                "z(b)={:.6e} converged={} residual={:.3e} iterations={} branch={}",
                ext.z_b, ext.converged, ext.residual_norm, ext.iterations, ext.branch
            );
            (ext.converged, summary, ext.traj, ext.mult)
        }
        Method::Direct => {
            let cfg = OracleConfig { seed: args.seed.unwrap_or(file.solver.seed), ..OracleConfig::default() };
            let sol = direct_oracle(p, &cfg).map_err(classify)?;
            let mult = psi_backward_ode(p, &sol.traj).map_err(classify)?;
            let summary =
                format!("z(b)={:.6e} converged={} evaluations={}", sol.z_b, sol.converged, sol.evaluations);
            (sol.converged, summary, sol.traj, mult)
        }
    };
    emit_csv(args.out.as_deref(), out, &traj, &mult)?;
    let sink: &mut dyn Write = if args.out.is_some() { out } else { err };
    writeln!(sink, "{summary}").map_err(io_err(Path::new("<output>")))?;
    Ok(if converged { 0 } else { 2 })
}

/// Trajectory from `path` checked against `p`, with multipliers rebuilt from
/// the trajectory alone (the stored multiplier columns are not trusted).
fn load_checked(path: &Path, p: &HerglotzProblem) -> Result<(Trajectory, MultiplierSet), CliError> {
    let file = traj_csv::read_file(path, p.order, p.dim)?;
    let grid = file.traj.grid();
    let span = p.b - p.a;
    if (grid.a() - p.a).abs() > 1e-9 * span || (grid.b() - p.b).abs() > 1e-9 * span {
        return Err(CliError::Csv {
            path: path.to_path_buf(),
            line: 2,
            message: format!("trajectory spans [{}, {}] but the problem interval is [{}, {}]", grid.a(), grid.b(), p.a, p.b),
        });
    }
    let psi_z = psi_z_quadrature(p, &file.traj).map_err(classify)?;
    let mult = psi_closed_form(p, &file.traj, &psi_z).map_err(classify)?;
    Ok((file.traj, mult))
}

fn print_report(out: &mut dyn Write, r: &VerificationReport) -> Result<(), CliError> {
    writeln!(out, "{r}").map_err(io_err(Path::new("<stdout>")))
}

fn cmd_verify(args: VerifyArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let file = problem_file::load(&args.problem)?;
    let p = &file.problem;
    let (traj, mult) = load_checked(&args.traj, p)?;
    let tol = fd_tolerance(&traj, args.tol_scale);
    let reports = [
        el_report(p, &traj, &mult.psi_z, tol).map_err(classify)?,
        transversality(&mult, tol),
        dubois_reymond(p, &traj, &mult, tol).map_err(classify)?,
    ];
    for r in &reports {
        print_report(out, r)?;
    }
    Ok(if reports.iter().all(|r| r.pass) { 0 } else { 2 })
}

fn cmd_noether(args: NoetherArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let file = problem_file::load(&args.file)?;
    let p = &file.problem;
    let fam = file
        .symmetry
        .as_ref()
        .ok_or_else(|| CliError::MissingSection { path: args.file.clone(), section: "symmetry" })?;
    let (traj, mult) = load_checked(&args.traj, p)?;
    let tol = fd_tolerance(&traj, args.tol_scale);
    match &file.finite_symmetry {
        Some(finite) => {
            let (inv, charge) = certify_noether(p, &traj, &mult, fam, finite, tol).map_err(classify)?;
            print_report(out, &inv)?;
            if !inv.pass {
                writeln!(out, "noether-charge   not asserted: invariance check failed")
                    .map_err(io_err(Path::new("<stdout>")))?;
                return Ok(2);
            }
            print_report(out, &charge)?;
            Ok(if charge.pass { 0 } else { 2 })
        }
        None => {
            let _ = writeln!(
                err,
                "warning: no [finite_symmetry] section; the charge is reported without an invariance certificate"
            );
            let charge = noether_charge(p, &traj, &mult, fam, tol).map_err(classify)?;
            print_report(out, &charge)?;
            Ok(if charge.pass { 0 } else { 2 })
        }
    }
}
