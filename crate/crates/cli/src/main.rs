//! `pconvex`: property suites, prescribed curvature surface solves and
//! Dirichlet solves driven by JSON configs.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pconvex::{Domain, JacobianMode};

use config::{DirichletConfig, Mode, RunConfig, SurfaceConfig};

/// Exit status for usage and configuration errors.
const EXIT_USAGE: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "pconvex", version, about = "Solvers and property suites for the p-convex curvature operator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration (schema 1); flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report.json and field dumps.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Caps the width of the parallel maps.
    #[arg(long)]
    threads: Option<usize>,
    /// Run solvers with p < n/2, outside the range of the a priori estimates.
    #[arg(long)]
    allow_low_p: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Randomized checks of the operator identities, inequalities and derivatives.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        fd_samples: Option<usize>,
        #[arg(long)]
        concavity_samples: Option<usize>,
        #[arg(long)]
        directions: Option<usize>,
        #[arg(long)]
        near_boundary_samples: Option<usize>,
    },
    /// Star-shaped surface with prescribed curvature by homotopy from the unit sphere.
    SolveSurface {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_theta: Option<usize>,
        #[arg(long)]
        n_phi: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[command(flatten)]
        newton: NewtonFlags,
    },
    /// Dirichlet problem on the unit disk or square.
    SolveDirichlet {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        domain: Option<DomainArg>,
        /// Nodes per side.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        #[command(flatten)]
        newton: NewtonFlags,
    },
}

#[derive(Debug, Args)]
struct NewtonFlags {
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum)]
    jacobian: Option<JacobianArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum JacobianArg {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DomainArg {
    Disk,
    Square,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl NewtonFlags {
    fn apply(&self, c: &mut pconvex::NewtonConfig) {
        set(&mut c.tol, self.tol);
        set(&mut c.max_iter, self.max_iter);
        set(
            &mut c.jacobian,
            self.jacobian.map(|j| match j {
                JacobianArg::Analytic => JacobianMode::Analytic,
                JacobianArg::FiniteDifference => JacobianMode::FiniteDifference,
            }),
        );
    }
}

fn load(common: &Common, mode: Mode) -> Result<RunConfig, String> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            config::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(m) = cfg.mode {
        if m != mode {
            return Err(format!("config is for `{}` but the command is `{}`", m.name(), mode.name()));
        }
    }
    set(&mut cfg.n, common.n);
    if common.p.is_some() {
        cfg.p = common.p;
    }
    set(&mut cfg.seed, common.seed);
    if common.out.is_some() {
        cfg.output = common.out.clone();
    }
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    cfg.allow_low_p |= common.allow_low_p;
    Ok(cfg)
}

fn resolve(command: Command) -> Result<(Mode, RunConfig), String> {
    match command {
        Command::Verify { common, samples, fd_samples, concavity_samples, directions, near_boundary_samples } => {
            let mut cfg = load(&common, Mode::Verify)?;
            let v = &mut cfg.verify;
            set(&mut v.samples, samples);
            set(&mut v.fd_samples, fd_samples);
            set(&mut v.concavity_samples, concavity_samples);
            set(&mut v.directions, directions);
            set(&mut v.near_boundary_samples, near_boundary_samples);
            Ok((Mode::Verify, cfg))
        }
        Command::SolveSurface { common, n_theta, n_phi, steps, eps, newton } => {
            let mut cfg = load(&common, Mode::SolveSurface)?;
            let s: &mut SurfaceConfig =
                cfg.surface.as_mut().ok_or("solve-surface needs a `surface` section in the config")?;
            set(&mut s.grid.n_theta, n_theta);
            set(&mut s.grid.n_phi, n_phi);
            set(&mut s.homotopy.steps, steps);
            if eps.is_some() {
                s.homotopy.eps = eps;
            }
            newton.apply(&mut s.newton);
            Ok((Mode::SolveSurface, cfg))
        }
        Command::SolveDirichlet { common, domain, grid, beta, newton } => {
            let mut cfg = load(&common, Mode::SolveDirichlet)?;
            let d: &mut DirichletConfig =
                cfg.dirichlet.as_mut().ok_or("solve-dirichlet needs a `dirichlet` section in the config")?;
            set(
                &mut d.domain,
                domain.map(|d| match d {
                    DomainArg::Disk => Domain::Disk,
                    DomainArg::Square => Domain::Square,
                }),
            );
            set(&mut d.grid, grid);
            set(&mut d.beta, beta);
            newton.apply(&mut d.newton);
            Ok((Mode::SolveDirichlet, cfg))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (mode, cfg) = match resolve(cli.command) {
        Ok(r) => r,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(t) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match run::execute(mode, &cfg) {
        Ok(code) => ExitCode::from(code),
        Err(run::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(run::Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
