//! Dirichlet problem `F̃(λ(D²u)) = f̃(x, u, Du)` in `Ω ⊂ R²`, `u = v` on `∂Ω`.
//!
//! Second derivatives come from eight arms per interior node (axes and
//! diagonals). An arm that leaves the domain is cut at the boundary crossing
//! and the boundary data is evaluated there, so every three-point difference
//! is exact for quadratics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Sym2;
use crate::newton::{damped_newton, Evaluation, NewtonConfig, NewtonProblem, SparseRows};
use crate::spectral::PConvexOperator;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `[-1, 1]²`
    Square,
    /// Unit disk, masked out of the square grid.
    Disk,
}

impl Domain {
    fn contains(&self, x: Point, slack: f64) -> bool {
        match self {
            Domain::Square => x[0].abs() < 1.0 - slack && x[1].abs() < 1.0 - slack,
            Domain::Disk => x[0].hypot(x[1]) < 1.0 - slack,
        }
    }

    /// Distance from interior point `x` along unit `d` to the boundary.
    fn exit_distance(&self, x: Point, d: Point) -> f64 {
        match self {
            Domain::Square => (0..2)
                .filter(|&k| d[k] != 0.0)
                .map(|k| (d[k].signum() - x[k]) / d[k])
                .fold(f64::INFINITY, f64::min),
            Domain::Disk => {
                let xd = x[0] * d[0] + x[1] * d[1];
                let xx = x[0] * x[0] + x[1] * x[1];
                -xd + (xd * xd + 1.0 - xx).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Index among the unknowns.
    Interior(usize),
    Boundary,
    Outside,
}

/// Uniform `N × N` grid on `[-1, 1]²` with interior/boundary classification.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainGrid {
    domain: Domain,
    n: usize,
    h: f64,
    kinds: Vec<NodeKind>,
    interior: Vec<usize>,
}

impl DomainGrid {
    pub fn new(domain: Domain, n: usize) -> Result<Self> {
        if n < 5 {
            return Err(Error::Grid(format!("need at least 5 nodes per side, got {n}")));
        }
        let h = 2.0 / (n - 1) as f64;
        let mut kinds = Vec::with_capacity(n * n);
        let mut interior = Vec::new();
        for i in 0..n * n {
            let x = Self::point_of(n, h, i);
            let kind = if domain.contains(x, 1e-8 * h) {
                interior.push(i);
                NodeKind::Interior(interior.len() - 1)
            } else if domain.contains(x, -1e-8 * h) {
                NodeKind::Boundary
            } else {
                NodeKind::Outside
            };
            kinds.push(kind);
        }
        Ok(Self { domain, n, h, kinds, interior })
    }

    fn point_of(n: usize, h: f64, i: usize) -> Point {
        let (row, col) = (i / n, i % n);
        let x = if col == n - 1 { 1.0 } else { -1.0 + col as f64 * h };
        let y = if row == n - 1 { 1.0 } else { -1.0 + row as f64 * h };
        [x, y]
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Nodes per side.
    pub fn side(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn point(&self, i: usize) -> Point {
        Self::point_of(self.n, self.h, i)
    }

    pub fn kind(&self, i: usize) -> NodeKind {
        self.kinds[i]
    }

    /// Grid indices of the unknowns, in unknown order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    fn neighbour(&self, i: usize, di: isize, dj: isize) -> Option<usize> {
        let (row, col) = ((i / self.n) as isize + dj, (i % self.n) as isize + di);
        let n = self.n as isize;
        (row >= 0 && row < n && col >= 0 && col < n).then(|| (row * n + col) as usize)
    }
}

/// Boundary data `v`, defined on all of `Ω̄` and p-plurisubharmonic there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryData {
    Constant { value: f64 },
    /// `a + b |x|²`
    Radial { a: f64, b: f64 },
}

impl BoundaryData {
    pub fn value(&self, x: Point) -> f64 {
        match *self {
            BoundaryData::Constant { value } => value,
            BoundaryData::Radial { a, b } => a + b * (x[0] * x[0] + x[1] * x[1]),
        }
    }
}

/// Right-hand side `f(x, u, Du) > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DirichletRhs {
    Constant { value: f64 },
    /// `a + b |x|²`
    Quadratic { a: f64, b: f64 },
    /// Chosen so that `u* = exp(|x|²/2)` solves the equation:
    /// `f̃ = 2u + |Du|²/u` for `p = 2`, `f̃ = √(u² + |Du|²)` for `p = 1`.
    ExpRadial,
}

/// `f̃` and its partial derivatives in `u` and `Du`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhsJet {
    pub value: f64,
    pub du: f64,
    pub dgrad: [f64; 2],
}

impl DirichletRhs {
    pub fn validate(&self, op: &PConvexOperator) -> Result<()> {
        match *self {
            DirichletRhs::Constant { value } if !(value > 0.0) => {
                Err(Error::Precondition(format!("f must be positive, got {value}")))
            }
            DirichletRhs::Quadratic { a, b } if !(a > 0.0 && a + 2.0 * b > 0.0) => {
                Err(Error::Precondition(format!("f = {a} + {b}|x|² is not positive on [-1, 1]²")))
            }
            DirichletRhs::ExpRadial if op.n() != 2 => {
                Err(Error::Domain("the exp-radial right-hand side is defined for n = 2".into()))
            }
            _ => Ok(()),
        }
    }

    /// Exact solution, when the data is manufactured.
    pub fn exact_solution(&self, x: Point) -> Option<f64> {
        match self {
            DirichletRhs::ExpRadial => Some((0.5 * (x[0] * x[0] + x[1] * x[1])).exp()),
            _ => None,
        }
    }

    /// Boundary data matching [`Self::exact_solution`] on the unit disk.
    pub fn exact_boundary(&self) -> Option<BoundaryData> {
        match self {
            DirichletRhs::ExpRadial => Some(BoundaryData::Constant { value: 0.5f64.exp() }),
            _ => None,
        }
    }

    pub fn tilde(&self, x: Point, u: f64, grad: [f64; 2], op: &PConvexOperator) -> Result<RhsJet> {
        let inv_c = 1.0 / op.subset_count() as f64;
        let radial = |f: f64| {
            if f > 0.0 {
                Ok(RhsJet { value: f.powf(inv_c), du: 0.0, dgrad: [0.0; 2] })
            } else {
                Err(Error::Numeric(format!("f = {f} is not positive at {x:?}")))
            }
        };
        match *self {
            DirichletRhs::Constant { value } => radial(value),
            DirichletRhs::Quadratic { a, b } => radial(a + b * (x[0] * x[0] + x[1] * x[1])),
            DirichletRhs::ExpRadial => {
                if !(u > 0.0) {
                    return Err(Error::Numeric(format!("exp-radial data needs u > 0, got {u} at {x:?}")));
                }
                let g2 = grad[0] * grad[0] + grad[1] * grad[1];
                match op.p() {
                    2 => Ok(RhsJet {
                        value: 2.0 * u + g2 / u,
                        du: 2.0 - g2 / (u * u),
                        dgrad: [2.0 * grad[0] / u, 2.0 * grad[1] / u],
                    }),
                    _ => {
                        let s = (u * u + g2).sqrt();
                        Ok(RhsJet { value: s, du: u / s, dgrad: [grad[0] / s, grad[1] / s] })
                    }
                }
            }
        }
    }
}

/// Discrete value, gradient and Hessian at one interior node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneJet {
    pub u: f64,
    pub grad: [f64; 2],
    pub hess: Sym2,
}

// slots: u, u_x, u_y, u_xx, u_xy, u_yy
type Weights = [f64; 6];

#[derive(Debug, Clone)]
struct PlaneStencil {
    entries: Vec<(usize, Weights)>,
    constant: Weights,
}

impl PlaneStencil {
    fn add(&mut self, target: Option<usize>, slot: usize, w: f64, boundary_value: f64) {
        match target {
            Some(k) => match self.entries.iter_mut().find(|(j, _)| *j == k) {
                Some((_, ws)) => ws[slot] += w,
                None => {
                    let mut ws = [0.0; 6];
                    ws[slot] = w;
                    self.entries.push((k, ws));
                }
            },
            None => self.constant[slot] += w * boundary_value,
        }
    }

    fn apply(&self, u: &[f64]) -> PlaneJet {
        let mut s = self.constant;
        for (k, w) in &self.entries {
            for c in 0..6 {
                s[c] += w[c] * u[*k];
            }
        }
        PlaneJet { u: s[0], grad: [s[1], s[2]], hess: Sym2::new(s[3], s[4], s[5]) }
    }
}

/// Grid, boundary data and the discrete derivative stencils they induce.
#[derive(Debug, Clone)]
pub struct DiscreteDomain {
    grid: DomainGrid,
    boundary: BoundaryData,
    stencils: Vec<PlaneStencil>,
    /// Interior nodes with a cut or boundary arm.
    near_boundary: Vec<bool>,
}

impl DiscreteDomain {
    pub fn new(grid: DomainGrid, boundary: BoundaryData) -> Self {
        let h = grid.h;
        let diag = std::f64::consts::FRAC_1_SQRT_2;
        // (grid offset, unit direction, full length) for each arm pair (+, -)
        let pairs = [
            ((1isize, 0isize), [1.0, 0.0], h),
            ((0, 1), [0.0, 1.0], h),
            ((1, 1), [diag, diag], h * 2f64.sqrt()),
            ((1, -1), [diag, -diag], h * 2f64.sqrt()),
        ];
        let mut near_boundary = Vec::with_capacity(grid.interior.len());
        let stencils = grid
            .interior
            .iter()
            .enumerate()
            .map(|(me, &i)| {
                let x = grid.point(i);
                let mut st = PlaneStencil { entries: Vec::new(), constant: [0.0; 6] };
                st.add(Some(me), 0, 1.0, 0.0);
                let mut cut = false;
                let mut second_w: Vec<Vec<(Option<usize>, f64, f64)>> = vec![Vec::new(); 4];
                for (pi, &((di, dj), d, full)) in pairs.iter().enumerate() {
                    // each arm: (unknown, length, boundary value)
                    let mut arms = [(None, 0.0, 0.0); 2];
                    for (a, sign) in [1isize, -1].into_iter().enumerate() {
                        let dir = [d[0] * sign as f64, d[1] * sign as f64];
                        let nb = grid.neighbour(i, di * sign, dj * sign);
                        arms[a] = match nb.map(|k| grid.kinds[k]) {
                            Some(NodeKind::Interior(k)) => (Some(k), full, 0.0),
                            _ => {
                                cut = true;
                                let len = grid.domain.exit_distance(x, dir).min(full);
                                let y = [x[0] + len * dir[0], x[1] + len * dir[1]];
                                (None, len, boundary.value(y))
                            }
                        };
                    }
                    let ((kp, a, vp), (km, b, vm)) = (arms[0], arms[1]);
                    let ab = a + b;
                    second_w[pi] = vec![
                        (kp, 2.0 / (a * ab), vp),
                        (km, 2.0 / (b * ab), vm),
                        (Some(me), -2.0 / (a * b), 0.0),
                    ];
                    if pi < 2 {
                        // first derivative along the axis
                        let slot = 1 + pi;
                        st.add(kp, slot, b / (a * ab), vp);
                        st.add(km, slot, -a / (b * ab), vm);
                        st.add(Some(me), slot, (a - b) / (a * b), 0.0);
                    }
                }
                // u_xx, u_yy from the axes; u_xy = (D_{(1,1)} - D_{(1,-1)}) / 2
                for &(k, w, v) in &second_w[0] {
                    st.add(k, 3, w, v);
                }
                for &(k, w, v) in &second_w[1] {
                    st.add(k, 5, w, v);
                }
                for &(k, w, v) in &second_w[2] {
                    st.add(k, 4, 0.5 * w, v);
                }
                for &(k, w, v) in &second_w[3] {
                    st.add(k, 4, -0.5 * w, v);
                }
                near_boundary.push(cut);
                st
            })
            .collect();
        Self { grid, boundary, stencils, near_boundary }
    }

    pub fn grid(&self) -> &DomainGrid {
        &self.grid
    }

    pub fn boundary(&self) -> &BoundaryData {
        &self.boundary
    }

    pub fn unknowns(&self) -> usize {
        self.grid.interior.len()
    }

    /// Whether unknown `k` has an arm reaching the boundary.
    pub fn is_near_boundary(&self, k: usize) -> bool {
        self.near_boundary[k]
    }

    pub fn jet(&self, u: &[f64], k: usize) -> PlaneJet {
        self.stencils[k].apply(u)
    }

    /// `v` sampled at the unknowns.
    pub fn boundary_values(&self) -> Vec<f64> {
        self.grid.interior.iter().map(|&i| self.boundary.value(self.grid.point(i))).collect()
    }

    /// Samples `f` at the unknowns.
    pub fn sample(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.grid.interior.iter().map(|&i| f(self.grid.point(i))).collect()
    }

    /// Values on the whole grid: unknowns, `v` on boundary nodes, NaN outside.
    pub fn nodal_values(&self, u: &[f64]) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| match self.grid.kinds[i] {
                NodeKind::Interior(k) => u[k],
                NodeKind::Boundary => self.boundary.value(self.grid.point(i)),
                NodeKind::Outside => f64::NAN,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct Linearization {
    residual: f64,
    margin: f64,
    partials: Weights,
}

fn linearize(
    disc: &DiscreteDomain,
    rhs: &DirichletRhs,
    op: &PConvexOperator,
    u: &[f64],
    k: usize,
    with_partials: bool,
) -> Result<Linearization> {
    let jet = disc.jet(u, k);
    let (lambda, q) = jet.hess.eigen();
    let margin = op.margin(&lambda);
    if !(margin > 0.0) {
        return Err(Error::ConeViolation { node: k, margin });
    }
    let (tilde, dk) = op.gradient(&lambda)?;
    let x = disc.grid.point(disc.grid.interior[k]);
    let f = rhs.tilde(x, jet.u, jet.grad, op)?;
    let residual = tilde - f.value;
    if !with_partials {
        return Ok(Linearization { residual, margin, partials: [0.0; 6] });
    }
    let phi = Sym2::from_spectral([dk[0], dk[1]], q);
    Ok(Linearization {
        residual,
        margin,
        partials: [-f.du, -f.dgrad[0], -f.dgrad[1], phi.a, 2.0 * phi.b, phi.c],
    })
}

struct DirichletSystem<'a> {
    disc: &'a DiscreteDomain,
    rhs: &'a DirichletRhs,
    op: &'a PConvexOperator,
    pattern: Vec<Vec<usize>>,
}

impl NewtonProblem for DirichletSystem<'_> {
    fn len(&self) -> usize {
        self.disc.unknowns()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation> {
        let lins: Vec<Result<Linearization>> =
            (0..self.len()).into_par_iter().map(|k| linearize(self.disc, self.rhs, self.op, x, k, false)).collect();
        let mut residual = Vec::with_capacity(lins.len());
        let (mut min_margin, mut worst_node) = (f64::INFINITY, 0);
        for (k, l) in lins.into_iter().enumerate() {
            let l = l?;
            if l.margin < min_margin {
                min_margin = l.margin;
                worst_node = k;
            }
            residual.push(l.residual);
        }
        Ok(Evaluation { residual, min_margin, worst_node })
    }

    fn jacobian(&self, x: &[f64]) -> Result<SparseRows> {
        (0..self.len())
            .into_par_iter()
            .map(|k| {
                let lin = linearize(self.disc, self.rhs, self.op, x, k, true)?;
                Ok(self.disc.stencils[k]
                    .entries
                    .iter()
                    .map(|(j, w)| (*j, (0..6).map(|c| lin.partials[c] * w[c]).sum()))
                    .collect())
            })
            .collect()
    }

    fn residual_row(&self, x: &[f64], row: usize) -> Result<f64> {
        Ok(linearize(self.disc, self.rhs, self.op, x, row, false)?.residual)
    }

    fn pattern(&self) -> &[Vec<usize>] {
        &self.pattern
    }
}

fn system<'a>(disc: &'a DiscreteDomain, rhs: &'a DirichletRhs, op: &'a PConvexOperator) -> Result<DirichletSystem<'a>> {
    if op.n() != 2 {
        return Err(Error::Domain(format!("the Dirichlet solver works in the plane, got n = {}", op.n())));
    }
    rhs.validate(op)?;
    let pattern = disc.stencils.iter().map(|s| s.entries.iter().map(|(k, _)| *k).collect()).collect();
    Ok(DirichletSystem { disc, rhs, op, pattern })
}

/// `F̃(λ(D²u)) − f̃(x, u, Du)` at every unknown.
pub fn residual_dirichlet(
    disc: &DiscreteDomain,
    u: &[f64],
    rhs: &DirichletRhs,
    op: &PConvexOperator,
) -> Result<Vec<f64>> {
    Ok(system(disc, rhs, op)?.evaluate(u)?.residual)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletReport {
    pub converged: bool,
    pub failure: Option<String>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    pub min_cone_margin: f64,
    /// Scale `s` of the convex bump in the initial guess; zero when `v`
    /// already solved the discrete problem.
    pub initial_shift: f64,
    pub unknowns: usize,
    pub spacing: f64,
}

/// Smallest cone margin of the discrete Hessians of `v` relative to their
/// size; negative when `v` is not p-plurisubharmonic on the grid.
fn boundary_margin(disc: &DiscreteDomain, op: &PConvexOperator) -> f64 {
    let v = disc.boundary_values();
    (0..disc.unknowns())
        .map(|k| {
            let hess = disc.jet(&v, k).hess;
            op.margin(&hess.eigenvalues()) / (1.0 + hess.max_abs())
        })
        .fold(f64::INFINITY, f64::min)
}

/// Damped Newton from `v` or from `v + s(|x|² − R²)`.
pub fn solve_dirichlet(
    disc: &DiscreteDomain,
    rhs: &DirichletRhs,
    op: &PConvexOperator,
    config: &NewtonConfig,
) -> Result<(Vec<f64>, DirichletReport)> {
    let sys = system(disc, rhs, op)?;
    let margin = boundary_margin(disc, op);
    if margin < -1e-10 {
        return Err(Error::Precondition(format!(
            "boundary data is not p-plurisubharmonic on the grid (relative margin {margin:e})"
        )));
    }
    let v = disc.boundary_values();
    let mut shift = 0.0;
    let mut initial = None;
    if let Ok(e) = sys.evaluate(&v) {
        if e.max_norm() <= config.tol {
            initial = Some(v.clone());
        }
    }
    if initial.is_none() {
        let r2 = match disc.grid.domain {
            Domain::Disk => 1.0,
            Domain::Square => 2.0,
        };
        let bump = disc.sample(|x| x[0] * x[0] + x[1] * x[1] - r2);
        let mut s = 1.0;
        while s > 1e-8 {
            let u0: Vec<f64> = v.iter().zip(&bump).map(|(a, b)| a + s * b).collect();
            if sys.evaluate(&u0).is_ok() {
                shift = s;
                initial = Some(u0);
                break;
            }
            s *= 0.5;
        }
    }
    let u0 = initial.ok_or_else(|| Error::Precondition("no admissible initial guess v + s(|x|² - R²)".into()))?;
    let (u, eval, hist) = damped_newton(&sys, u0, config)?;
    let report = DirichletReport {
        converged: hist.converged,
        failure: hist.failure.clone(),
        iterations: hist.iterations,
        final_residual: eval.max_norm(),
        residual_history: hist.residuals,
        min_cone_margin: eval.min_margin,
        initial_shift: shift,
        unknowns: disc.unknowns(),
        spacing: disc.grid.h,
    };
    Ok((u, report))
}

/// Location and value of a supremum over unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub value: f64,
    pub node: usize,
    pub point: Point,
}

/// `(v − u)^β Δu` at every unknown.
pub fn monitor_field(disc: &DiscreteDomain, u: &[f64], beta: f64) -> Result<Vec<f64>> {
    let v = disc.boundary_values();
    let mut gap_max = f64::NEG_INFINITY;
    for (k, (vk, uk)) in v.iter().zip(u).enumerate() {
        let gap = vk - uk;
        if gap < -1e-12 {
            let x = disc.grid.point(disc.grid.interior[k]);
            return Err(Error::Precondition(format!("u exceeds v by {:e} at {x:?}", -gap)));
        }
        gap_max = gap_max.max(gap);
    }
    if gap_max <= 1e-12 {
        return Err(Error::Precondition("u coincides with v; the interior monitor needs u < v".into()));
    }
    Ok((0..u.len())
        .map(|k| {
            let gap = (v[k] - u[k]).max(0.0);
            let w = if beta == 0.0 { 1.0 } else { gap.powf(beta) };
            w * disc.jet(u, k).hess.trace()
        })
        .collect())
}

/// `sup (v − u)^β Δu` over the unknowns.
pub fn interior_monitor(disc: &DiscreteDomain, u: &[f64], beta: f64) -> Result<Extremum> {
    let m = monitor_field(disc, u, beta)?;
    let (node, value) =
        m.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |a, (k, v)| if v > a.1 { (k, v) } else { a });
    Ok(Extremum { value, node, point: disc.grid.point(disc.grid.interior[node]) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C2Report {
    /// Largest Hessian entry over all unknowns.
    pub interior: f64,
    /// Largest Hessian entry over unknowns with an arm reaching the boundary.
    pub boundary: f64,
    pub ratio: f64,
}

pub fn global_c2_report(disc: &DiscreteDomain, u: &[f64]) -> C2Report {
    let mut interior = 0.0f64;
    let mut boundary = 0.0f64;
    for k in 0..u.len() {
        let m = disc.jet(u, k).hess.max_abs();
        interior = interior.max(m);
        if disc.near_boundary[k] {
            boundary = boundary.max(m);
        }
    }
    C2Report { interior, boundary, ratio: interior / boundary }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newton::{difference_jacobian, JacobianMode};

    fn op(p: usize) -> PConvexOperator {
        PConvexOperator::new(2, p).unwrap()
    }

    fn disk(n: usize, boundary: BoundaryData) -> DiscreteDomain {
        DiscreteDomain::new(DomainGrid::new(Domain::Disk, n).unwrap(), boundary)
    }

    fn zero() -> BoundaryData {
        BoundaryData::Constant { value: 0.0 }
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn grid_classification() {
        let g = DomainGrid::new(Domain::Square, 9).unwrap();
        assert_eq!(g.interior().len(), 49);
        assert_eq!(g.point(80), [1.0, 1.0]);
        let d = DomainGrid::new(Domain::Disk, 9).unwrap();
        // (±1, 0) and (0, ±1) lie on the circle
        assert_eq!(d.kind(4), NodeKind::Boundary);
        assert_eq!(d.kind(0), NodeKind::Outside);
        assert!(matches!(d.kind(40), NodeKind::Interior(_)));
        assert!(DomainGrid::new(Domain::Disk, 3).is_err());
    }

    #[test]
    fn stencils_exact_for_quadratics() {
        let q = |x: Point| 0.3 + 0.2 * x[0] - 0.7 * x[1] + 1.1 * x[0] * x[0] - 0.4 * x[0] * x[1] + 0.6 * x[1] * x[1];
        for domain in [Domain::Square, Domain::Disk] {
            // boundary data equal to q on the circle is only possible for
            // radial q, so exercise the cut arms through a radial quadratic
            let radial = |x: Point| 0.5 + 0.8 * (x[0] * x[0] + x[1] * x[1]);
            let disc = DiscreteDomain::new(DomainGrid::new(domain, 13).unwrap(), BoundaryData::Radial { a: 0.5, b: 0.8 });
            let u = disc.sample(radial);
            for k in 0..disc.unknowns() {
                let j = disc.jet(&u, k);
                let x = disc.grid.point(disc.grid.interior[k]);
                assert!((j.hess.a - 1.6).abs() < 1e-9 && j.hess.b.abs() < 1e-9 && (j.hess.c - 1.6).abs() < 1e-9);
                assert!((j.grad[0] - 1.6 * x[0]).abs() < 1e-10 && (j.grad[1] - 1.6 * x[1]).abs() < 1e-10);
            }
        }
        // full stencils on a square interior
        let disc = DiscreteDomain::new(DomainGrid::new(Domain::Square, 11).unwrap(), zero());
        let u = disc.sample(q);
        for k in 0..disc.unknowns() {
            if disc.is_near_boundary(k) {
                continue;
            }
            let j = disc.jet(&u, k);
            assert!((j.hess.a - 2.2).abs() < 1e-10 && (j.hess.b + 0.4).abs() < 1e-10 && (j.hess.c - 1.2).abs() < 1e-10);
        }
    }

    #[test]
    fn residual_examples() {
        for p in 1..=2 {
            let o = op(p);
            let disc = disk(21, zero());
            let u = disc.sample(|x| 0.5 * (x[0] * x[0] + x[1] * x[1] - 1.0));
            let f = DirichletRhs::Constant { value: o.unit_sphere_value() };
            let r = residual_dirichlet(&disc, &u, &f, &o).unwrap();
            assert!(r.iter().all(|v| v.abs() < 1e-9));
            assert!(u.iter().all(|v| *v < 0.0));
        }
        let o = op(2);
        let disc = DiscreteDomain::new(DomainGrid::new(Domain::Square, 11).unwrap(), BoundaryData::Radial { a: 0.0, b: 1.0 });
        let u = disc.sample(|x| x[0] * x[0] + x[1] * x[1]);
        let r = residual_dirichlet(&disc, &u, &DirichletRhs::Constant { value: 4.0 }, &o).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-9));
        // λ = (2, -0.8) is in the cone for p = 2 with F̃ = 1.2
        let u = disc.sample(|x| x[0] * x[0] - 0.4 * x[1] * x[1]);
        let k = disc.grid.interior().iter().position(|&i| i == 60).unwrap();
        let r = residual_dirichlet(&disc, &u, &DirichletRhs::Constant { value: 1.0 }, &o).unwrap();
        assert!((r[k] - 0.2).abs() < 1e-9);
        // and outside for p = 1
        assert!(matches!(
            residual_dirichlet(&disc, &u, &DirichletRhs::Constant { value: 1.0 }, &op(1)),
            Err(Error::ConeViolation { .. })
        ));
    }

    #[test]
    fn analytic_jacobian_matches_differences() {
        for p in 1..=2 {
            let o = op(p);
            let rhs = DirichletRhs::ExpRadial;
            let disc = disk(15, rhs.exact_boundary().unwrap());
            let sys = system(&disc, &rhs, &o).unwrap();
            let u = disc.sample(|x| {
                let r2 = x[0] * x[0] + x[1] * x[1];
                (0.5 * r2).exp() + 0.1 * (r2 - 1.0) * (1.0 + 0.3 * x[0] + 0.2 * x[0] * x[1])
            });
            let a = sys.jacobian(&u).unwrap();
            let b = difference_jacobian(&sys, &u).unwrap();
            for (ra, rb) in a.iter().zip(&b) {
                let scale = rb.iter().fold(1.0f64, |m, (_, v)| m.max(v.abs()));
                for (kb, vb) in rb {
                    let va = ra.iter().find(|(ka, _)| ka == kb).unwrap().1;
                    assert!((va - vb).abs() < 1e-6 * scale, "p = {p}: {va} vs {vb}");
                }
            }
        }
    }

    #[test]
    fn exact_quadratic_solution_on_disk() {
        for p in 1..=2 {
            let o = op(p);
            for mode in [JacobianMode::Analytic, JacobianMode::FiniteDifference] {
                let disc = disk(21, zero());
                let f = DirichletRhs::Constant { value: o.unit_sphere_value() };
                let cfg = NewtonConfig { jacobian: mode, ..Default::default() };
                let (u, rep) = solve_dirichlet(&disc, &f, &o, &cfg).unwrap();
                assert!(rep.converged, "{rep:?}");
                let exact = disc.sample(|x| 0.5 * (x[0] * x[0] + x[1] * x[1] - 1.0));
                assert!(max_abs_diff(&u, &exact) < 1e-9);
            }
        }
    }

    #[test]
    fn boundary_data_that_already_solves_is_returned() {
        for p in 1..=2 {
            let o = op(p);
            let disc = disk(17, BoundaryData::Radial { a: 0.0, b: 0.5 });
            let f = DirichletRhs::Constant { value: o.unit_sphere_value() };
            let (u, rep) = solve_dirichlet(&disc, &f, &o, &NewtonConfig::default()).unwrap();
            assert!(rep.converged && rep.iterations <= 1);
            assert_eq!(rep.initial_shift, 0.0);
            assert!(max_abs_diff(&u, &disc.boundary_values()) < 1e-12);
            // the monitor is undefined for u = v
            assert!(interior_monitor(&disc, &u, 1.0).is_err());
        }
    }

    #[test]
    fn rejects_non_psh_boundary_data() {
        let disc = disk(11, BoundaryData::Radial { a: 0.0, b: -1.0 });
        let o = op(2);
        let err = solve_dirichlet(&disc, &DirichletRhs::Constant { value: 1.0 }, &o, &NewtonConfig::default());
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn monitor_examples() {
        let disc = disk(41, zero());
        let u = disc.sample(|x| 0.5 * (x[0] * x[0] + x[1] * x[1] - 1.0));
        let m = interior_monitor(&disc, &u, 1.0).unwrap();
        assert!((m.value - 1.0).abs() < 1e-9);
        assert_eq!(m.point, [0.0, 0.0]);
        let lap = interior_monitor(&disc, &u, 0.0).unwrap();
        assert!((lap.value - 2.0).abs() < 1e-9);
        let mut bad = u.clone();
        bad[0] = 0.1;
        assert!(interior_monitor(&disc, &bad, 1.0).is_err());
    }

    #[test]
    fn c2_report_examples() {
        let disc = disk(21, zero());
        let u = disc.sample(|x| 0.5 * (x[0] * x[0] + x[1] * x[1] - 1.0));
        let r = global_c2_report(&disc, &u);
        assert!((r.interior - 1.0).abs() < 1e-9 && (r.boundary - 1.0).abs() < 1e-9 && (r.ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn comparison_principle() {
        for p in 1..=2 {
            let o = op(p);
            let disc = disk(17, zero());
            let cfg = NewtonConfig::default();
            let (u1, r1) = solve_dirichlet(&disc, &DirichletRhs::Quadratic { a: 2.0, b: 1.0 }, &o, &cfg).unwrap();
            let (u2, r2) = solve_dirichlet(&disc, &DirichletRhs::Constant { value: 1.5 }, &o, &cfg).unwrap();
            assert!(r1.converged && r2.converged);
            assert!(u1.iter().zip(&u2).all(|(a, b)| *a <= b + 1e-8));
        }
    }

    #[test]
    fn manufactured_exp_radial_converges() {
        let rhs = DirichletRhs::ExpRadial;
        for p in 1..=2 {
            let o = op(p);
            let mut errs = Vec::new();
            for n in [17, 33] {
                let disc = disk(n, rhs.exact_boundary().unwrap());
                let (u, rep) = solve_dirichlet(&disc, &rhs, &o, &NewtonConfig::default()).unwrap();
                assert!(rep.converged, "{rep:?}");
                errs.push(max_abs_diff(&u, &disc.sample(|x| rhs.exact_solution(x).unwrap())));
            }
            assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
        }
    }
}
