//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{DdrError, Result};
use crate::mesh::{build_structured_mesh, load_mesh, save_mesh, Mesh, MeshFamily};
use crate::operators::Discretization;
use crate::par::{with_threads, Execution};
use crate::scheme::{convergence_study, format_csv, format_rates, rates, solve_manufactured};
use crate::spaces::{dof_table, BoundaryCondition, SpaceKind, TABLE_SHAPES};
use crate::verify::{check_commutation, check_consistency, check_exactness, estimate_stability, FieldSuite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "ddr", version, about = "Discrete rot-rot complex on polygonal meshes")]
pub struct Cli {
    /// Worker threads (default: DDR_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run element computations on the calling thread only.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mesh generation.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Structural checks of the complex.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Local DOF counts.
    #[command(subcommand)]
    Dofs(DofsCommand),
    /// Solve the manufactured quad-rot problem once and report the errors.
    Solve(SolveArgs),
    /// Manufactured-solution convergence study.
    Convergence(ConvergenceArgs),
}

#[derive(Debug, Subcommand)]
pub enum MeshCommand {
    /// Write a structured mesh of the unit square and print its diagnostics.
    Gen {
        #[arg(long, value_enum)]
        family: MeshFamily,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct MeshSource {
    #[arg(long, value_enum, default_value = "cartesian")]
    pub family: MeshFamily,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Read the mesh from a file instead of generating it.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
}

impl MeshSource {
    fn load(&self) -> Result<(Mesh, String)> {
        match &self.mesh {
            Some(p) => Ok((load_mesh(p)?, p.display().to_string())),
            None => Ok((build_structured_mesh(self.family, self.n)?, format!("{}-{}", self.family, self.n))),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Ranks of the discrete gradient and rotor.
    Exactness {
        #[command(flatten)]
        source: MeshSource,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, value_enum, default_value = "none")]
        bc: BoundaryCondition,
    },
    /// Commutation of the interpolators with the discrete operators.
    Commutation {
        #[command(flatten)]
        source: MeshSource,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, value_enum, default_value = "polynomial")]
        suite: FieldSuite,
        /// Largest accepted residual (default 1e-10 for polynomials, 1e-8 otherwise).
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Polynomial consistency of the reconstructions.
    Consistency {
        #[command(flatten)]
        source: MeshSource,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Poincaré eigenvalue and inf-sup constant on a sequence of meshes.
    Stability {
        #[arg(long, value_enum, default_value = "cartesian")]
        family: MeshFamily,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        n: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum DofsCommand {
    /// Full and serendipity local DOF counts on regular polygons.
    Table {
        /// triangle, quadrangle, pentagon or hexagon (default: all).
        #[arg(long)]
        shape: Option<String>,
        /// Single degree (default: 0 to 4).
        #[arg(long)]
        k: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: MeshSource,
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    /// Degree of the load quadrature (default max(2k+6, 12)).
    #[arg(long)]
    pub quad_degree: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[arg(long, value_enum)]
    pub family: MeshFamily,
    #[arg(long, default_value_t = 0)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
    pub n: Vec<usize>,
    /// CSV output; rates go to the same path with extension `.rates`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub quad_degree: Option<usize>,
    /// Fail unless the last-interval rates are within this distance of (k+2, k+1, k+2, k+1).
    #[arg(long)]
    pub check_rates: Option<f64>,
}

/// Thread count from the flag, then `DDR_THREADS`, then the machine.
pub fn thread_count(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var("DDR_THREADS").ok().and_then(|s| s.trim().parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let threads = thread_count(cli.threads);
    match with_threads(threads, || dispatch(&cli.command, exec)) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILED,
        Err(e @ DdrError::InvalidArgument(_)) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILED
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn dispatch(cmd: &Command, exec: Execution) -> Result<bool> {
    match cmd {
        Command::Mesh(MeshCommand::Gen { family, n, out }) => {
            let mesh = build_structured_mesh(*family, *n)?;
            save_mesh(&mesh, out)?;
            let diag = mesh.diagnostics();
            println!(
                "vertices {}  edges {}  elements {}",
                mesh.num_vertices(),
                mesh.num_edges(),
                mesh.num_elements()
            );
            println!("{diag}");
            Ok(diag.is_valid())
        }
        Command::Verify(v) => verify(v, exec),
        Command::Dofs(DofsCommand::Table { shape, k }) => dofs(shape.as_deref(), *k),
        Command::Solve(args) => {
            let (mesh, label) = args.source.load()?;
            let (rec, sol) = solve_manufactured(mesh, args.k, exec, args.quad_degree)?;
            println!("mesh={label} k={}", args.k);
            println!("MeshSize={:.16e}", rec.mesh_size);
            println!("ErrUL2={:.16e}", rec.err_u_l2);
            println!("ErrURotRot={:.16e}", rec.err_u_rotrot);
            println!("ErrPL2={:.16e}", rec.err_p_l2);
            println!("ErrPGrad={:.16e}", rec.err_p_grad);
            println!("DivergenceDefect={:.3e}", sol.divergence_defect);
            Ok(sol.divergence_defect < 1e-9)
        }
        Command::Convergence(args) => convergence(args, exec),
    }
}

fn verify(cmd: &VerifyCommand, exec: Execution) -> Result<bool> {
    match cmd {
        VerifyCommand::Exactness { source, k, bc } => {
            let (mesh, label) = source.load()?;
            let report = check_exactness(&mesh, &label, *k, *bc, exec)?;
            println!("{report}");
            println!("{}", verdict(report.passed()));
            Ok(report.passed())
        }
        VerifyCommand::Commutation {
            source,
            k,
            suite,
            tolerance,
            seed,
        } => {
            let (mesh, label) = source.load()?;
            let d = Discretization::new(mesh, *k, exec)?;
            let tol = tolerance.unwrap_or(match suite {
                FieldSuite::Polynomial => 1e-10,
                FieldSuite::Trigonometric => 1e-8,
            });
            println!("mesh={label} k={k} tolerance={tol:e}");
            let mut ok = true;
            for r in check_commutation(&d, *suite, *seed) {
                println!("{r}");
                ok &= r.gradient_residual < tol && r.rotor_residual < tol;
            }
            println!("{}", verdict(ok));
            Ok(ok)
        }
        VerifyCommand::Consistency {
            source,
            k,
            tolerance,
            seed,
        } => {
            let (mesh, label) = source.load()?;
            let d = Discretization::new(mesh, *k, exec)?;
            let report = check_consistency(&d, *seed);
            println!("mesh={label} k={k} tolerance={tolerance:e}");
            println!("{report}");
            let ok = report.max_error() < *tolerance;
            println!("{}", verdict(ok));
            Ok(ok)
        }
        VerifyCommand::Stability { family, n, k, seed } => {
            let mut reports = Vec::new();
            for &ni in n {
                let mesh = build_structured_mesh(*family, ni)?;
                let d = Discretization::new(mesh, *k, exec)?;
                let r = estimate_stability(&d, &format!("{family}-{ni}"), *seed)?;
                println!("{r}");
                reports.push(r);
            }
            let Some(first) = reports.first() else {
                return Err(DdrError::InvalidArgument("no mesh sizes given".into()));
            };
            let min_l = reports.iter().map(|r| r.lambda_p).fold(f64::INFINITY, f64::min);
            let min_g = reports.iter().map(|r| r.gamma_h).fold(f64::INFINITY, f64::min);
            let ok = min_l > 0.0 && min_g > 0.0 && min_l >= 0.25 * first.lambda_p && min_g >= 0.25 * first.gamma_h;
            println!(
                "min_lambda_P/first={:.4} min_gamma_h/first={:.4}",
                min_l / first.lambda_p,
                min_g / first.gamma_h
            );
            println!("{}", verdict(ok));
            Ok(ok)
        }
    }
}

fn dofs(shape: Option<&str>, k: Option<usize>) -> Result<bool> {
    if let Some(s) = shape {
        if !TABLE_SHAPES.iter().any(|(name, _)| *name == s) {
            return Err(DdrError::InvalidArgument(format!("unknown shape '{s}'")));
        }
    }
    let degrees = k.map_or(0..=4, |k| k..=k);
    println!("{:<11} {:>2}  {:>11}  {:>11}  {:>11}", "shape", "k", "V", "Sigma", "W");
    let rows = dof_table(degrees);
    for chunk in rows.chunks(SpaceKind::ALL.len()) {
        if shape.is_some_and(|s| s != chunk[0].shape) {
            continue;
        }
        let cell = |i: usize| format!("{}/{}", chunk[i].full, chunk[i].serendipity);
        println!(
            "{:<11} {:>2}  {:>11}  {:>11}  {:>11}",
            chunk[0].shape,
            chunk[0].k,
            cell(0),
            cell(1),
            cell(2)
        );
    }
    println!("(full/serendipity)");
    Ok(true)
}

fn rates_path(out: &Path) -> PathBuf {
    out.with_extension("rates")
}

fn convergence(args: &ConvergenceArgs, exec: Execution) -> Result<bool> {
    if args.n.is_empty() || args.n.contains(&0) {
        return Err(DdrError::InvalidArgument("--n needs positive mesh sizes".into()));
    }
    let records = convergence_study(args.family, args.k, &args.n, exec, args.quad_degree)?;
    let csv = format_csv(&records);
    let rate_text = format_rates(&records);
    match &args.out {
        Some(out) => {
            fs::write(out, &csv)?;
            fs::write(rates_path(out), &rate_text)?;
        }
        None => print!("{csv}"),
    }
    print!("{rate_text}");
    let Some(tol) = args.check_rates else {
        return Ok(true);
    };
    let k = args.k as f64;
    let expected = [k + 2.0, k + 1.0, k + 2.0, k + 1.0];
    let Some(last) = rates(&records).last().copied() else {
        return Err(DdrError::InvalidArgument("rate check needs at least two meshes".into()));
    };
    let ok = last.iter().zip(expected).all(|(r, e)| (r - e).abs() <= tol);
    println!("{}", verdict(ok));
    Ok(ok)
}
