use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use fracdg::harness::{run_case, run_convergence, write_csv, write_json, write_matrix_dump};
use fracdg::{CaseConfig, Coefficients, Example, LdgContext, Mesh, ReferenceElement, RunResult, StepSize};

/// Manufactured-solution runs of the fractional diffusion DG solver.
#[derive(Debug, Parser)]
#[command(name = "fracdg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one case on one mesh.
    Run(CaseArgs),
    /// Solve one case on a sequence of meshes, coarse to fine, and report
    /// observed orders.
    Convergence(CaseArgs),
}

#[derive(Debug, Args)]
struct CaseArgs {
    /// Manufactured example: 1 (left-sided) or 2 (two-sided).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    example: u8,
    /// Mesh prefix (`<prefix>.node` and `<prefix>.ele`); repeat for sweeps.
    #[arg(long = "mesh", required = true)]
    meshes: Vec<PathBuf>,
    /// Polynomial degree N.
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// Fractional order in x, in (1, 2].
    #[arg(long)]
    alpha: f64,
    /// Fractional order in y; defaults to alpha.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    dplus: Option<f64>,
    #[arg(long)]
    dminus: Option<f64>,
    #[arg(long)]
    eplus: Option<f64>,
    #[arg(long)]
    eminus: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    /// Fixed time step.
    #[arg(long, conflicts_with = "cfl")]
    dt: Option<f64>,
    /// Step `cfl * h_min^2 / N^4`. Without either flag the step comes from
    /// the estimated spectral radius of the operator.
    #[arg(long, num_args = 0..=1, default_missing_value = "0.25")]
    cfl: Option<f64>,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write JSON instead of CSV.
    #[arg(long)]
    json: bool,
    /// Write the fractional matrices of the (finest) mesh in coordinate form.
    #[arg(long)]
    dump_matrix: Option<PathBuf>,
    /// Per-step progress on standard error.
    #[arg(long)]
    verbose: bool,
}

impl CaseArgs {
    fn config(&self) -> fracdg::Result<CaseConfig> {
        let example = Example::try_from(self.example).map_err(fracdg::Error::InvalidConfig)?;
        let mut cfg = CaseConfig::new(example, self.degree, self.alpha, self.beta.unwrap_or(self.alpha));
        let d = example.default_coefficients();
        cfg.coefficients = Coefficients {
            d_plus: self.dplus.unwrap_or(d.d_plus),
            d_minus: self.dminus.unwrap_or(d.d_minus),
            e_plus: self.eplus.unwrap_or(d.e_plus),
            e_minus: self.eminus.unwrap_or(d.e_minus),
        };
        cfg.meshes = self.meshes.clone();
        cfg.t_final = self.t_final;
        cfg.step = match (self.dt, self.cfl) {
            (Some(dt), _) => StepSize::Fixed(dt),
            (None, Some(cfl)) => StepSize::Cfl(cfl),
            (None, None) => StepSize::Auto,
        };
        cfg.verbose = self.verbose;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dump_matrices(cfg: &CaseConfig, mesh_prefix: &Path, path: &Path) -> fracdg::Result<()> {
    let mesh = Arc::new(Mesh::load(mesh_prefix)?);
    let reference = Arc::new(ReferenceElement::new(cfg.degree)?);
    let ctx = LdgContext::new(mesh, reference, cfg.alpha, cfg.beta, cfg.coefficients)?;
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix_dump(&ctx, &mut w)?;
    w.flush()?;
    Ok(())
}

fn emit(results: &[RunResult], args: &CaseArgs) -> fracdg::Result<()> {
    let mut w: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    if args.json {
        write_json(results, &mut w)?;
        writeln!(w)?;
    } else {
        write_csv(results, &mut w)?;
    }
    w.flush()?;
    Ok(())
}

fn execute(cli: Cli) -> fracdg::Result<()> {
    let (args, sweep) = match &cli.command {
        Command::Run(a) => (a, false),
        Command::Convergence(a) => (a, true),
    };
    if !sweep && args.meshes.len() != 1 {
        return Err(fracdg::Error::InvalidConfig(format!(
            "run takes exactly one mesh, got {}; use convergence for sweeps",
            args.meshes.len()
        )));
    }
    let cfg = args.config()?;
    if let Some(path) = &args.dump_matrix {
        dump_matrices(&cfg, args.meshes.last().expect("at least one mesh"), path)?;
    }
    let results = if sweep {
        run_convergence(&cfg)?
    } else {
        vec![run_case(&cfg, &args.meshes[0])?]
    };
    if args.verbose {
        for r in &results {
            eprintln!("K={} h={:.4} l2={:.4e} ({:.2} s)", r.k, r.h_max, r.l2_error, r.seconds);
        }
    }
    emit(&results, args)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
