//! Command execution and artifact writing.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use pconvex::dirichlet::{monitor_field, C2Report, Extremum};
use pconvex::export::{write_dirichlet_csv, write_surface_csv, write_surface_obj};
use pconvex::surface::check_hypotheses;
use pconvex::verification::{
    render_table, run_concavity_suite, run_fd_suite, run_operator_suite, run_near_boundary_suite,
};
use pconvex::{
    curvature_field, global_c2_report, homotopy_solve, interior_monitor, solve_dirichlet, ConditionReport,
    DirichletReport, DiscreteDomain, Domain, DomainGrid, HomotopySchedule, PConvexOperator, PropertyReport,
    SampleSpec, SolveReport, SphericalGrid,
};
use serde::Serialize;

use crate::config::{Mode, RunConfig, SCHEMA_VERSION};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 2;

const DEFAULT_OUTPUT: &str = "pconvex-out";

const BETA_SWEEP: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Io(String),
}

impl From<pconvex::Error> for Failure {
    fn from(e: pconvex::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct Envelope<'a, B: Serialize> {
    schema: u32,
    command: &'static str,
    version: &'static str,
    timestamp: u64,
    status: &'static str,
    exit_code: u8,
    warnings: &'a [String],
    config: &'a RunConfig,
    artifacts: Vec<&'static str>,
    #[serde(flatten)]
    body: B,
}

struct Output {
    dir: PathBuf,
    warnings: Vec<String>,
}

impl Output {
    fn new(cfg: &RunConfig) -> Result<Self, Failure> {
        let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT));
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        Ok(Self { dir, warnings: Vec::new() })
    }

    fn file(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), Failure> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(io(&path))?;
        Ok((path, BufWriter::new(f)))
    }

    fn report<B: Serialize>(
        &self,
        mode: Mode,
        cfg: &RunConfig,
        status: &'static str,
        exit_code: u8,
        mut artifacts: Vec<&'static str>,
        body: B,
    ) -> Result<u8, Failure> {
        artifacts.insert(0, "report.json");
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let env = Envelope {
            schema: SCHEMA_VERSION,
            command: mode.name(),
            version: env!("CARGO_PKG_VERSION"),
            timestamp,
            status,
            exit_code,
            warnings: &self.warnings,
            config: cfg,
            artifacts,
            body,
        };
        let (path, mut w) = self.file("report.json")?;
        serde_json::to_writer_pretty(&mut w, &env).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        writeln!(w).and_then(|_| w.flush()).map_err(io(&path))?;
        Ok(exit_code)
    }
}

pub fn execute(mode: Mode, cfg: &RunConfig) -> Result<u8, Failure> {
    let p = cfg.p.ok_or_else(|| Failure::Usage("p is required (config key `p` or flag --p)".into()))?;
    let op = PConvexOperator::new(cfg.n, p)?;
    let mut out = Output::new(cfg)?;
    if mode != Mode::Verify && 2 * p < cfg.n {
        let msg = format!("p = {p} is below n/2 = {}; the a priori estimates do not cover this range", cfg.n as f64 / 2.0);
        if !cfg.allow_low_p {
            return Err(Failure::Usage(format!("{msg} (pass --allow-low-p to run anyway)")));
        }
        eprintln!("warning: {msg}");
        out.warnings.push(msg);
    }
    match mode {
        Mode::Verify => verify(cfg, p, &out),
        Mode::SolveSurface => surface(cfg, &op, &out),
        Mode::SolveDirichlet => dirichlet(cfg, &op, &out),
    }
}

#[derive(Serialize)]
struct VerifyBody {
    passed: bool,
    failed: Vec<String>,
    reports: Vec<PropertyReport>,
}

fn verify(cfg: &RunConfig, p: usize, out: &Output) -> Result<u8, Failure> {
    let v = &cfg.verify;
    let spec = |samples| SampleSpec::new(cfg.n, p, samples, cfg.seed);
    let mut reports = run_operator_suite(&spec(v.samples))?;
    if v.near_boundary_samples > 0 {
        reports.extend(run_near_boundary_suite(&spec(v.near_boundary_samples))?);
    }
    if v.fd_samples > 0 {
        reports.extend(run_fd_suite(&spec(v.fd_samples).with_floor(0.1))?);
    }
    if v.concavity_samples > 0 && v.directions > 0 {
        reports.extend(run_concavity_suite(&spec(v.concavity_samples), v.directions)?);
    }
    print!("{}", render_table(&reports));
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed).map(|r| r.property.clone()).collect();
    let passed = failed.is_empty();
    let (status, code) = if passed { ("passed", EXIT_OK) } else { ("failed", EXIT_FAILED) };
    out.report(Mode::Verify, cfg, status, code, Vec::new(), VerifyBody { passed, failed, reports })
}

#[derive(Serialize)]
struct SurfaceBody {
    failure: Option<String>,
    barrier: ConditionReport,
    monotonicity: ConditionReport,
    schedule: HomotopySchedule,
    spacing: f64,
    /// `max |ρ − 1|`, the distance from the unit sphere.
    max_abs_rho_minus_one: Option<f64>,
    solve: Option<SolveReport>,
}

fn surface(cfg: &RunConfig, op: &PConvexOperator, out: &Output) -> Result<u8, Failure> {
    let sc = cfg.surface.as_ref().ok_or_else(|| Failure::Usage("missing `surface` section".into()))?;
    sc.data.validate()?;
    let grid = SphericalGrid::new(sc.grid.n_theta, sc.grid.n_phi)?;
    let schedule = match sc.homotopy.eps {
        Some(eps) => {
            let s = HomotopySchedule { steps: sc.homotopy.steps, eps };
            s.validate(sc.data.r2, op)?;
            s
        }
        None => HomotopySchedule::with_default_eps(sc.homotopy.steps, sc.data.r2, op)?,
    };
    let (barrier, monotonicity) = check_hypotheses(&sc.data, op, cfg.seed)?;
    let mut body = SurfaceBody {
        failure: None,
        barrier,
        monotonicity,
        schedule,
        spacing: grid.spacing(),
        max_abs_rho_minus_one: None,
        solve: None,
    };
    if !body.barrier.passed || !body.monotonicity.passed {
        let failed = if body.barrier.passed { &body.monotonicity } else { &body.barrier };
        body.failure = Some(format!("hypothesis check `{}` failed: {}", failed.name, failed.detail));
        eprintln!("{}", body.failure.as_deref().unwrap_or_default());
        return out.report(Mode::SolveSurface, cfg, "hypothesis_failed", EXIT_FAILED, Vec::new(), body);
    }
    let (field, report) = match homotopy_solve(&sc.data, op, grid, &schedule, &sc.newton) {
        Ok(r) => r,
        Err(e) => {
            body.failure = Some(e.to_string());
            return out.report(Mode::SolveSurface, cfg, "error", EXIT_FAILED, Vec::new(), body);
        }
    };
    let curvature = curvature_field(&field, op)?;
    let (path, mut w) = out.file("fields.csv")?;
    write_surface_csv(&mut w, &field, &curvature).and_then(|_| w.flush()).map_err(io(&path))?;
    let (path, mut w) = out.file("surface.obj")?;
    write_surface_obj(&mut w, &field).and_then(|_| w.flush()).map_err(io(&path))?;

    body.max_abs_rho_minus_one = Some(field.values().iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max));
    body.failure = report.failure.clone();
    let (status, code) = if report.converged { ("converged", EXIT_OK) } else { ("not_converged", EXIT_FAILED) };
    eprintln!(
        "{status}: residual {:.3e}, sup|kappa| {:.6}, rho in [{:.6}, {:.6}]",
        report.final_residual, report.sup_abs_kappa, report.min_rho, report.max_rho
    );
    body.solve = Some(report);
    out.report(Mode::SolveSurface, cfg, status, code, vec!["fields.csv", "surface.obj"], body)
}

#[derive(Serialize)]
#[serde(untagged)]
enum Monitor {
    Value(Extremum),
    Unavailable { unavailable: String },
}

#[derive(Serialize)]
struct DirichletBody {
    failure: Option<String>,
    solve: Option<DirichletReport>,
    beta: f64,
    monitor: Option<Monitor>,
    /// `sup (v − u)^β Δu` for each β in [`BETA_SWEEP`].
    monitor_sweep: Vec<(f64, Option<f64>)>,
    c2: Option<C2Report>,
    /// Max nodal error against the manufactured solution, when there is one.
    max_error: Option<f64>,
}

fn dirichlet(cfg: &RunConfig, op: &PConvexOperator, out: &Output) -> Result<u8, Failure> {
    let dc = cfg.dirichlet.as_ref().ok_or_else(|| Failure::Usage("missing `dirichlet` section".into()))?;
    if op.n() != 2 {
        return Err(Failure::Usage(format!("the Dirichlet solver works in the plane (n = 2), got n = {}", op.n())));
    }
    dc.rhs.validate(op)?;
    let disc = DiscreteDomain::new(DomainGrid::new(dc.domain, dc.grid)?, dc.boundary.clone());
    let mut body = DirichletBody {
        failure: None,
        solve: None,
        beta: dc.beta,
        monitor: None,
        monitor_sweep: Vec::new(),
        c2: None,
        max_error: None,
    };
    let (u, report) = match solve_dirichlet(&disc, &dc.rhs, op, &dc.newton) {
        Ok(r) => r,
        Err(e) => {
            body.failure = Some(e.to_string());
            eprintln!("{e}");
            return out.report(Mode::SolveDirichlet, cfg, "error", EXIT_FAILED, Vec::new(), body);
        }
    };
    let monitor = monitor_field(&disc, &u, dc.beta).ok();
    body.monitor = Some(match interior_monitor(&disc, &u, dc.beta) {
        Ok(m) => Monitor::Value(m),
        Err(e) => Monitor::Unavailable { unavailable: e.to_string() },
    });
    body.monitor_sweep =
        BETA_SWEEP.iter().map(|&b| (b, interior_monitor(&disc, &u, b).ok().map(|m| m.value))).collect();
    body.c2 = Some(global_c2_report(&disc, &u));
    if dc.domain == Domain::Disk && dc.rhs.exact_boundary().as_ref() == Some(&dc.boundary) {
        let exact = disc.sample(|x| dc.rhs.exact_solution(x).unwrap_or(f64::NAN));
        body.max_error = Some(u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let (path, mut w) = out.file("fields.csv")?;
    write_dirichlet_csv(&mut w, &disc, &u, op, monitor.as_deref()).and_then(|_| w.flush()).map_err(io(&path))?;

    body.failure = report.failure.clone();
    let (status, code) = if report.converged { ("converged", EXIT_OK) } else { ("not_converged", EXIT_FAILED) };
    eprintln!("{status}: {} unknowns, residual {:.3e}", report.unknowns, report.final_residual);
    body.solve = Some(report);
    out.report(Mode::SolveDirichlet, cfg, status, code, vec!["fields.csv"], body)
}
