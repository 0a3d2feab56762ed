//! Prescribed curvature solver for star-shaped surfaces:
//! `F̃(κ(ρ)) = f̃(X, ν)` with `f̃ = f^{1/C}`, one equation per grid node.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{curvature_field, LocalJet, RadialField, SphericalGrid, Stencil, Vec3};
use crate::linalg::Sym2;
use crate::newton::{damped_newton, Evaluation, NewtonConfig, NewtonHistory, NewtonProblem, SparseRows};
use crate::prescribed::{
    check_barrier_conditions, check_monotonicity_condition, ConditionReport, HomotopyRhs, PrescribedData,
    RightHandSide,
};
use crate::spectral::PConvexOperator;

/// Positive floor of the continuation start data on `[r1, r2]`.
pub const HOMOTOPY_C0: f64 = 1e-3;

/// Local residual and its partial derivatives with respect to the jet
/// `(ρ, ρ_1, ρ_2, ρ_11, ρ_12, ρ_22)`.
#[derive(Debug, Clone, Copy)]
struct NodeLinearization {
    residual: f64,
    margin: f64,
    partials: [f64; 6],
}

fn node_residual(
    jet: &LocalJet,
    frame: &(Vec3, Vec3, Vec3),
    op: &PConvexOperator,
    rhs: &dyn RightHandSide,
    with_partials: bool,
) -> Result<NodeLinearization> {
    let (x, e1, e2) = frame;
    let LocalJet { rho, grad: [p1, p2], hess } = *jet;
    if !(rho > 0.0) {
        return Err(Error::ConeViolation { node: usize::MAX, margin: f64::NAN });
    }
    let w2 = rho * rho + p1 * p1 + p2 * p2;
    let w = w2.sqrt();
    let g = Sym2::new(rho * rho + p1 * p1, p1 * p2, rho * rho + p2 * p2);
    let h = Sym2::new(
        (rho * rho + 2.0 * p1 * p1 - rho * hess.a) / w,
        (2.0 * p1 * p2 - rho * hess.b) / w,
        (rho * rho + 2.0 * p2 * p2 - rho * hess.c) / w,
    );
    let gi = g.inv_sqrt()?;
    let (kappa, q) = h.congruence(&gi).eigen();
    let margin = op.margin(&kappa);
    if !(margin > 0.0) {
        return Err(Error::ConeViolation { node: usize::MAX, margin });
    }
    let (tilde, dk) = op.gradient(&kappa)?;

    let mut pos = [0.0; 3];
    let mut nu = [0.0; 3];
    for c in 0..3 {
        pos[c] = rho * x[c];
        nu[c] = (rho * x[c] - p1 * e1[c] - p2 * e2[c]) / w;
    }
    let f = rhs.value(&pos, &nu);
    if !(f > 0.0) {
        return Err(Error::Numeric(format!("prescribed f = {f} is not positive at X = {pos:?}")));
    }
    let inv_c = 1.0 / op.subset_count() as f64;
    let f_tilde = f.powf(inv_c);
    let residual = tilde - f_tilde;
    if !with_partials {
        return Ok(NodeLinearization { residual, margin, partials: [0.0; 6] });
    }

    // dF̃ = Φ : dh - Ψ : dg with Φ = Σ F̃_k v_k v_kᵀ, Ψ = Σ F̃_k κ_k v_k v_kᵀ
    // for the g-orthonormal eigenvectors v_k = g^{-1/2} q_k
    let phi = Sym2::from_spectral(dk_arr(&dk), q).congruence(&gi);
    let psi = Sym2::from_spectral([dk[0] * kappa[0], dk[1] * kappa[1]], q).congruence(&gi);

    let dg = [
        Sym2::new(2.0 * rho, 0.0, 2.0 * rho),
        Sym2::new(2.0 * p1, p2, 0.0),
        Sym2::new(0.0, p1, 2.0 * p2),
    ];
    let dh = [
        Sym2::new(2.0 * rho - hess.a, -hess.b, 2.0 * rho - hess.c).scale(1.0 / w).add(&h.scale(-rho / w2)),
        Sym2::new(4.0 * p1, 2.0 * p2, 0.0).scale(1.0 / w).add(&h.scale(-p1 / w2)),
        Sym2::new(0.0, 2.0 * p1, 4.0 * p2).scale(1.0 / w).add(&h.scale(-p2 / w2)),
        Sym2::new(-rho / w, 0.0, 0.0),
        Sym2::new(0.0, -rho / w, 0.0),
        Sym2::new(0.0, 0.0, -rho / w),
    ];
    let (gx, gn) = rhs.gradient(&pos, &nu);
    let df_tilde = inv_c * f_tilde / f;
    // dX/dρ = x; dν/dρ = (x - ν ρ/W)/W; dν/dρ_i = (-e_i - ν ρ_i/W)/W
    let mut dnu = [[0.0; 3]; 3];
    for c in 0..3 {
        dnu[0][c] = (x[c] - nu[c] * rho / w) / w;
        dnu[1][c] = (-e1[c] - nu[c] * p1 / w) / w;
        dnu[2][c] = (-e2[c] - nu[c] * p2 / w) / w;
    }
    let dot3 = |a: &Vec3, b: &Vec3| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];

    let mut partials = [0.0; 6];
    for c in 0..6 {
        let mut d = phi.contract(&dh[c]);
        if c < 3 {
            d -= psi.contract(&dg[c]);
            let mut df = dot3(&gn, &dnu[c]);
            if c == 0 {
                df += dot3(&gx, x);
            }
            d -= df_tilde * df;
        }
        partials[c] = d;
    }
    Ok(NodeLinearization { residual, margin, partials })
}

fn dk_arr(dk: &[f64]) -> [f64; 2] {
    [dk[0], dk[1]]
}

/// The nodal system of one solve.
pub struct SurfaceProblem<'a> {
    grid: SphericalGrid,
    op: &'a PConvexOperator,
    rhs: &'a dyn RightHandSide,
    stencils: Vec<Stencil>,
    frames: Vec<(Vec3, Vec3, Vec3)>,
    pattern: Vec<Vec<usize>>,
    positions: Vec<usize>,
}

impl<'a> SurfaceProblem<'a> {
    pub fn new(grid: SphericalGrid, op: &'a PConvexOperator, rhs: &'a dyn RightHandSide) -> Result<Self> {
        if op.n() != 2 {
            return Err(Error::Domain(format!("surface solver needs n = 2, got n = {}", op.n())));
        }
        let stencils = grid.stencils();
        let frames = (0..grid.len()).map(|i| grid.frame(i)).collect();
        let pattern = stencils.iter().map(|s| s.entries.iter().map(|(k, _)| *k).collect()).collect();
        // interleave longitudes 0, n-1, 1, n-2, ... so periodic neighbours stay close in the band
        let n_phi = grid.n_phi();
        let positions = (0..grid.len())
            .map(|i| match grid.node(i) {
                crate::geometry::Node::Ring { ring, lon } => {
                    let q = if lon < n_phi / 2 { 2 * lon } else { 2 * (n_phi - 1 - lon) + 1 };
                    1 + ring * n_phi + q
                }
                _ => i,
            })
            .collect();
        Ok(Self { grid, op, rhs, stencils, frames, pattern, positions })
    }

    fn linearize(&self, x: &[f64], i: usize, with_partials: bool) -> Result<NodeLinearization> {
        let jet = self.stencils[i].apply(x);
        node_residual(&jet, &self.frames[i], self.op, self.rhs, with_partials).map_err(|e| match e {
            Error::ConeViolation { margin, .. } => Error::ConeViolation { node: i, margin },
            other => other,
        })
    }
}

impl NewtonProblem for SurfaceProblem<'_> {
    fn len(&self) -> usize {
        self.grid.len()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let lins: Vec<Result<NodeLinearization>> =
            (0..self.len()).into_par_iter().map(|i| self.linearize(x, i, false)).collect();
        let mut residual = Vec::with_capacity(lins.len());
        let mut min_margin = f64::INFINITY;
        let mut worst_node = 0;
        let mut violation: Option<(usize, f64)> = None;
        for (i, l) in lins.into_iter().enumerate() {
            match l {
                Ok(l) => {
                    if l.margin < min_margin {
                        min_margin = l.margin;
                        worst_node = i;
                    }
                    residual.push(l.residual);
                }
                Err(Error::ConeViolation { margin, .. }) => {
                    let m = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
                    if violation.is_none_or(|(_, w)| m < w) {
                        violation = Some((i, m));
                    }
                    residual.push(f64::NAN);
                }
                Err(e) => return Err(e),
            }
        }
        if let Some((node, margin)) = violation {
            return Err(Error::ConeViolation { node, margin });
        }
        Ok(Evaluation { residual, min_margin, worst_node })
    }

    fn jacobian(&self, x: &[f64]) -> Result<SparseRows> {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let lin = self.linearize(x, i, true)?;
                Ok(self.stencils[i]
                    .entries
                    .iter()
                    .map(|(k, w)| (*k, (0..6).map(|c| lin.partials[c] * w[c]).sum()))
                    .collect())
            })
            .collect()
    }

    fn residual_row(&self, x: &[f64], row: usize) -> Result<f64> {
        Ok(self.linearize(x, row, false)?.residual)
    }

    fn pattern(&self) -> &[Vec<usize>] {
        &self.pattern
    }

    fn position(&self, i: usize) -> usize {
        self.positions[i]
    }
}

/// Nodal residual `F̃(κ) - f̃(X, ν)`; fails naming the worst node when some
/// node is outside the open cone.
pub fn residual(field: &RadialField, rhs: &dyn RightHandSide, op: &PConvexOperator) -> Result<Vec<f64>> {
    let problem = SurfaceProblem::new(*field.grid(), op, rhs)?;
    Ok(problem.evaluate(field.values())?.residual)
}

/// Continuation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomotopySchedule {
    pub steps: usize,
    pub eps: f64,
}

impl HomotopySchedule {
    /// Largest `ε ∈ {0.1, 0.05, 0.01}` keeping the start data above
    /// [`HOMOTOPY_C0`] on `[r1, r2]`.
    pub fn with_default_eps(steps: usize, r2: f64, op: &PConvexOperator) -> Result<Self> {
        let c = op.subset_count() as f64;
        for eps in [0.1, 0.05, 0.01] {
            let s = Self { steps, eps };
            if s.start_floor(r2, c) >= HOMOTOPY_C0 {
                return Ok(s);
            }
        }
        Err(Error::Precondition(format!("no default eps keeps the start data positive up to r2 = {r2}")))
    }

    /// `min_{r ≤ r2} r^{-C} + ε (r^{-C} - 1)`, attained at `r2`.
    pub fn start_floor(&self, r2: f64, c: f64) -> f64 {
        let v = r2.powf(-c);
        v + self.eps * (v - 1.0)
    }

    pub fn validate(&self, r2: f64, op: &PConvexOperator) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Precondition("homotopy needs at least one step".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Precondition(format!("eps must be positive, got {}", self.eps)));
        }
        let floor = self.start_floor(r2, op.subset_count() as f64);
        if floor < HOMOTOPY_C0 {
            return Err(Error::Precondition(format!(
                "eps = {} drives the start data down to {floor:e} < c0 = {HOMOTOPY_C0:e} at r2 = {r2}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// One continuation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TStep {
    pub t: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Convergence history and geometric diagnostics of a surface solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub failure: Option<String>,
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    pub sup_abs_kappa: f64,
    pub min_cone_margin: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub min_support: f64,
    pub newton_iterations: usize,
    pub homotopy_steps: usize,
    pub last_good_t: f64,
    pub t_history: Vec<TStep>,
    pub barrier: Option<ConditionReport>,
    pub monotonicity: Option<ConditionReport>,
}

impl SolveReport {
    fn from_field(field: &RadialField, op: &PConvexOperator, hist: &NewtonHistory) -> Result<Self> {
        let cf = curvature_field(field, op)?;
        let (min_rho, max_rho) =
            field.values().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        Ok(Self {
            converged: hist.converged,
            failure: hist.failure.clone(),
            residual_history: hist.residuals.clone(),
            final_residual: hist.residuals.last().copied().unwrap_or(f64::NAN),
            sup_abs_kappa: cf.sup_abs_kappa,
            min_cone_margin: cf.min_margin,
            min_rho,
            max_rho,
            r1: None,
            r2: None,
            min_support: cf.min_support,
            newton_iterations: hist.iterations,
            homotopy_steps: 0,
            last_good_t: 1.0,
            t_history: Vec::new(),
            barrier: None,
            monotonicity: None,
        })
    }
}

/// Damped Newton for `F̃(κ(ρ)) = f̃` from `initial`.
pub fn newton_solve(
    initial: &RadialField,
    rhs: &dyn RightHandSide,
    op: &PConvexOperator,
    config: &NewtonConfig,
) -> Result<(RadialField, SolveReport)> {
    let (field, hist) = newton_field(initial, rhs, op, config)?;
    let report = SolveReport::from_field(&field, op, &hist)?;
    Ok((field, report))
}

fn newton_field(
    initial: &RadialField,
    rhs: &dyn RightHandSide,
    op: &PConvexOperator,
    config: &NewtonConfig,
) -> Result<(RadialField, NewtonHistory)> {
    let grid = *initial.grid();
    let problem = SurfaceProblem::new(grid, op, rhs)?;
    let (x, _, hist) = damped_newton(&problem, initial.values().to_vec(), config)?;
    Ok((RadialField::new(grid, x)?, hist))
}

/// Number of samples used by the hypothesis checks run before a solve.
pub const CHECK_SAMPLES: usize = 400;

/// Runs both hypothesis checks on bound data.
pub fn check_hypotheses(
    data: &PrescribedData,
    op: &PConvexOperator,
    seed: u64,
) -> Result<(ConditionReport, ConditionReport)> {
    let rhs = data.bind(op)?;
    Ok((
        check_barrier_conditions(&rhs, op, data.r1, data.r2, CHECK_SAMPLES)?,
        check_monotonicity_condition(&rhs, op, data.r1, data.r2, CHECK_SAMPLES, seed),
    ))
}

/// Continuation from the unit sphere (`t = 0`) to the prescribed data
/// (`t = 1`), warm-starting Newton at each `t` and bisecting the `t`-step
/// up to ten times on failure.
pub fn homotopy_solve(
    data: &PrescribedData,
    op: &PConvexOperator,
    grid: SphericalGrid,
    schedule: &HomotopySchedule,
    config: &NewtonConfig,
) -> Result<(RadialField, SolveReport)> {
    schedule.validate(data.r2, op)?;
    let (barrier, monotonicity) = check_hypotheses(data, op, 0)?;
    if !barrier.passed || !monotonicity.passed {
        let failed = if barrier.passed { &monotonicity } else { &barrier };
        return Err(Error::Precondition(format!("hypothesis check failed: {}", failed.detail)));
    }
    let target = data.bind(op)?;
    let c = op.subset_count() as f64;
    let p_c = op.unit_sphere_value();

    let mut field = RadialField::constant(grid, 1.0)?;
    let nominal = 1.0 / schedule.steps as f64;
    let mut dt = nominal;
    let mut t = 0.0;
    let mut refinements = 0;
    let mut residuals = Vec::new();
    let mut t_history = Vec::new();
    let mut iterations = 0;
    let mut last: Option<NewtonHistory> = None;
    let mut failure = None;

    while t < 1.0 {
        let t_next = if t + dt >= 1.0 - 1e-14 { 1.0 } else { t + dt };
        let rhs = HomotopyRhs { target: &target, t: t_next, eps: schedule.eps, c, p_c };
        let (candidate, hist) = newton_field(&field, &rhs, op, config)?;
        iterations += hist.iterations;
        t_history.push(TStep { t: t_next, iterations: hist.iterations, converged: hist.converged });
        if hist.converged {
            residuals.extend_from_slice(&hist.residuals);
            field = candidate;
            t = t_next;
            refinements = 0;
            dt = (2.0 * dt).min(nominal);
            last = Some(hist);
        } else {
            refinements += 1;
            if refinements > 10 {
                failure = Some(format!(
                    "t-step underflow after 10 bisections at t = {t}: {}",
                    hist.failure.unwrap_or_default()
                ));
                break;
            }
            dt *= 0.5;
        }
    }

    let hist = last.unwrap_or_default();
    let mut report = SolveReport::from_field(&field, op, &hist)?;
    report.converged = failure.is_none() && hist.converged;
    report.failure = failure;
    report.residual_history = residuals;
    report.newton_iterations = iterations;
    report.homotopy_steps = t_history.len();
    report.last_good_t = t;
    report.t_history = t_history;
    report.r1 = Some(data.r1);
    report.r2 = Some(data.r2);
    report.barrier = Some(barrier);
    report.monotonicity = Some(monotonicity);
    if report.converged {
        report.final_residual = hist.residuals.last().copied().unwrap_or(f64::NAN);
    }
    Ok((field, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newton::{difference_jacobian, JacobianMode};
    use crate::prescribed::{PrescribedKind, TargetProfile};

    fn op(p: usize) -> PConvexOperator {
        PConvexOperator::new(2, p).unwrap()
    }

    fn power(eps: f64) -> PrescribedData {
        PrescribedData::new(0.5, 2.0, PrescribedKind::RadialPower { eps, exponent: None, scale: None }).unwrap()
    }

    #[test]
    fn residual_examples() {
        let grid = SphericalGrid::new(8, 16).unwrap();
        for p in 1..=2 {
            let o = op(p);
            let f = power(0.0).bind(&o).unwrap();
            let r = residual(&RadialField::constant(grid, 1.0).unwrap(), &f, &o).unwrap();
            assert!(r.iter().all(|v| v.abs() < 1e-9), "{r:?}");
        }
        // whole radial family solves the pure power equation (p = 2: F~ = 1 = 2/2)
        let o = op(2);
        let f = power(0.0).bind(&o).unwrap();
        let r = residual(&RadialField::constant(grid, 2.0).unwrap(), &f, &o).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-9));
        // f = (p+1)^C gives -1
        for p in 1..=2 {
            let o = op(p);
            let scale = ((p + 1) as f64).powi(o.subset_count() as i32);
            let d = PrescribedData::new(
                0.5,
                2.0,
                PrescribedKind::RadialPower { eps: 0.0, exponent: Some(0.0), scale: Some(scale) },
            )
            .unwrap();
            let r = residual(&RadialField::constant(grid, 1.0).unwrap(), &d.bind(&o).unwrap(), &o).unwrap();
            assert!(r.iter().all(|v| (v + 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn residual_names_worst_node_outside_cone() {
        let grid = SphericalGrid::new(8, 16).unwrap();
        let mut values = vec![1.0; grid.len()];
        let spike = grid.ring_index(4, 3);
        values[spike] = 1.6;
        let field = RadialField::new(grid, values).unwrap();
        let o = op(1);
        let f = power(0.1).bind(&o).unwrap();
        match residual(&field, &f, &o) {
            Err(Error::ConeViolation { node, margin }) => {
                assert!(margin < 0.0);
                assert!(grid.stencil(node).entries.iter().any(|(k, _)| *k == spike));
            }
            other => panic!("expected a cone violation, got {other:?}"),
        }
    }

    fn max_jacobian_gap(problem: &SurfaceProblem, x: &[f64]) -> f64 {
        let a = problem.jacobian(x).unwrap();
        let b = difference_jacobian(problem, x).unwrap();
        let mut worst = 0.0f64;
        for (ra, rb) in a.iter().zip(&b) {
            let scale = rb.iter().fold(1.0f64, |m, (_, v)| m.max(v.abs()));
            assert_eq!(ra.len(), rb.len());
            for (kb, vb) in rb {
                let va = ra.iter().find(|(ka, _)| ka == kb).map(|(_, v)| *v).unwrap();
                worst = worst.max((va - vb).abs() / scale);
            }
        }
        worst
    }

    #[test]
    fn analytic_jacobian_matches_differences() {
        let grid = SphericalGrid::new(10, 20).unwrap();
        let field =
            RadialField::from_fn(grid, |x| 1.0 + 0.08 * x[2] + 0.05 * x[0] * x[1] + 0.04 * x[0]).unwrap();
        let normal_dependent = PrescribedData::new(
            0.5,
            2.0,
            PrescribedKind::PerturbedRadial { eps: 0.5, delta: 0.2, direction: [0.3, 0.4, 1.0] },
        )
        .unwrap();
        for p in 1..=2 {
            let o = op(p);
            for data in [power(0.1), normal_dependent.clone()] {
                let f = data.bind(&o).unwrap();
                let problem = SurfaceProblem::new(grid, &o, &f).unwrap();
                let gap = max_jacobian_gap(&problem, field.values());
                assert!(gap < 1e-6, "p = {p}: {gap}");
            }
        }
    }

    #[test]
    fn newton_recovers_sphere_from_perturbation() {
        let grid = SphericalGrid::new(16, 32).unwrap();
        let initial = RadialField::from_fn(grid, |x| 1.0 + 0.1 * x[2]).unwrap();
        for p in 1..=2 {
            let o = op(p);
            let f = power(0.1).bind(&o).unwrap();
            for mode in [JacobianMode::Analytic, JacobianMode::FiniteDifference] {
                let cfg = NewtonConfig { jacobian: mode, ..Default::default() };
                let (sol, rep) = newton_solve(&initial, &f, &o, &cfg).unwrap();
                assert!(rep.converged, "{rep:?}");
                let err = sol.values().iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
                assert!(err < 1e-8, "p = {p}, {mode:?}: {err}");
                assert!(rep.residual_history.windows(2).all(|w| w[1] < w[0]));
            }
        }
    }

    #[test]
    fn newton_rejects_initial_outside_cone() {
        let grid = SphericalGrid::new(8, 16).unwrap();
        let mut values = vec![1.0; grid.len()];
        values[grid.ring_index(3, 5)] = 1.8;
        let initial = RadialField::new(grid, values).unwrap();
        let o = op(1);
        let f = power(0.1).bind(&o).unwrap();
        assert!(matches!(
            newton_solve(&initial, &f, &o, &NewtonConfig::default()),
            Err(Error::ConeViolation { .. })
        ));
    }

    #[test]
    fn default_eps_selection() {
        let o = op(2);
        assert_eq!(HomotopySchedule::with_default_eps(5, 2.0, &o).unwrap().eps, 0.1);
        // for C = 1 the floor at r2 is 1/r2 - eps (1 - 1/r2)
        let s = HomotopySchedule { steps: 5, eps: 0.1 };
        assert!((s.start_floor(2.0, 1.0) - 0.45).abs() < 1e-15);
        assert!(HomotopySchedule { steps: 5, eps: 2.0 }.validate(2.0, &o).is_err());
        assert!(HomotopySchedule { steps: 0, eps: 0.1 }.validate(2.0, &o).is_err());
    }

    #[test]
    fn homotopy_on_pure_power_stays_on_sphere() {
        let grid = SphericalGrid::new(8, 16).unwrap();
        for p in 1..=2 {
            let o = op(p);
            let schedule = HomotopySchedule { steps: 4, eps: 0.1 };
            let (sol, rep) = homotopy_solve(&power(0.1), &o, grid, &schedule, &NewtonConfig::default()).unwrap();
            assert!(rep.converged);
            assert!(rep.t_history.iter().all(|s| s.iterations <= 2));
            assert!(sol.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn homotopy_rejects_data_failing_barrier() {
        let grid = SphericalGrid::new(8, 16).unwrap();
        let o = op(2);
        let data = PrescribedData::new(
            0.5,
            2.0,
            PrescribedKind::RadialPower { eps: 0.0, exponent: None, scale: Some(0.2) },
        )
        .unwrap();
        let err = homotopy_solve(&data, &o, grid, &HomotopySchedule { steps: 2, eps: 0.1 }, &NewtonConfig::default())
            .unwrap_err();
        assert!(err.to_string().contains("r1"), "{err}");
    }

    #[test]
    fn homotopy_recovers_manufactured_target_on_coarse_grid() {
        let grid = SphericalGrid::new(16, 32).unwrap();
        let target = TargetProfile::Linear { delta: 0.1, direction: [0.0, 0.0, 1.0] };
        let data = PrescribedData::new(0.5, 2.0, PrescribedKind::Manufactured { target: target.clone(), eps: 0.5 })
            .unwrap();
        let o = op(2);
        let (sol, rep) =
            homotopy_solve(&data, &o, grid, &HomotopySchedule { steps: 2, eps: 0.1 }, &NewtonConfig::default())
                .unwrap();
        assert!(rep.converged, "{rep:?}");
        let exact = RadialField::from_fn(grid, |x| target.value(x)).unwrap();
        let err = sol.values().iter().zip(exact.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 5e-3, "{err}");
    }
}
