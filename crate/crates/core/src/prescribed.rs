//! Right-hand sides `f(X, ν)` of the prescribed curvature equation and the
//! two hypotheses on `f` used for the a priori bounds: the barrier
//! inequalities on the spheres `|X| = r1, r2` and radial monotonicity of
//! `|X|^C f`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cross, dot, frame_from_jet, norm, LocalJet, Vec3};
use crate::linalg::Sym2;
use crate::spectral::PConvexOperator;

/// A positive function of position and unit normal.
pub trait RightHandSide: Sync {
    fn value(&self, x: &Vec3, nu: &Vec3) -> f64;

    /// `(∂f/∂X, ∂f/∂ν)`; central differences unless overridden.
    fn gradient(&self, x: &Vec3, nu: &Vec3) -> (Vec3, Vec3) {
        let h = 1e-6;
        let mut gx = [0.0; 3];
        let mut gn = [0.0; 3];
        for c in 0..3 {
            let (mut xp, mut xm) = (*x, *x);
            let s = h * (1.0 + x[c].abs());
            xp[c] += s;
            xm[c] -= s;
            gx[c] = (self.value(&xp, nu) - self.value(&xm, nu)) / (2.0 * s);
            let (mut np, mut nm) = (*nu, *nu);
            np[c] += h;
            nm[c] -= h;
            gn[c] = (self.value(x, &np) - self.value(x, &nm)) / (2.0 * h);
        }
        (gx, gn)
    }
}

/// Target radial function of the manufactured mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetProfile {
    /// `ρ*(x) = 1 + δ ⟨x, e⟩`.
    Linear { delta: f64, direction: Vec3 },
    /// `ρ*(x) = 1 + δ ⟨x, e⟩²`.
    Quadratic { delta: f64, direction: Vec3 },
}

impl TargetProfile {
    fn parts(&self) -> (f64, Vec3) {
        match self {
            Self::Linear { delta, direction } | Self::Quadratic { delta, direction } => {
                let n = norm(direction);
                (*delta, [direction[0] / n, direction[1] / n, direction[2] / n])
            }
        }
    }

    pub fn value(&self, x: &Vec3) -> f64 {
        let (d, e) = self.parts();
        let xe = dot(x, &e);
        match self {
            Self::Linear { .. } => 1.0 + d * xe,
            Self::Quadratic { .. } => 1.0 + d * xe * xe,
        }
    }

    /// Exact jet at direction `x` in the orthonormal frame `(e1, e2)`.
    pub fn jet(&self, x: &Vec3, e1: &Vec3, e2: &Vec3) -> LocalJet {
        let (d, e) = self.parts();
        let xe = dot(x, &e);
        let (t1, t2) = (dot(&e, e1), dot(&e, e2));
        match self {
            Self::Linear { .. } => LocalJet {
                rho: 1.0 + d * xe,
                grad: [d * t1, d * t2],
                hess: Sym2::new(-d * xe, 0.0, -d * xe),
            },
            Self::Quadratic { .. } => LocalJet {
                rho: 1.0 + d * xe * xe,
                grad: [2.0 * d * xe * t1, 2.0 * d * xe * t2],
                hess: Sym2::new(
                    2.0 * d * (t1 * t1 - xe * xe),
                    2.0 * d * t1 * t2,
                    2.0 * d * (t2 * t2 - xe * xe),
                ),
            },
        }
    }

    /// Exact principal curvatures of the target surface above direction `x`.
    pub fn curvatures(&self, x: &Vec3) -> Result<[f64; 2]> {
        let (e1, e2) = tangent_frame(x);
        Ok(frame_from_jet(&self.jet(x, &e1, &e2), x, &e1, &e2)?.curvatures)
    }
}

/// Some orthonormal tangent frame at the unit vector `x`.
pub fn tangent_frame(x: &Vec3) -> (Vec3, Vec3) {
    let a = if x[0].abs() < 0.6 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let ax = dot(&a, x);
    let mut e1 = [a[0] - ax * x[0], a[1] - ax * x[1], a[2] - ax * x[2]];
    let n = norm(&e1);
    e1.iter_mut().for_each(|v| *v /= n);
    let e2 = cross(x, &e1);
    (e1, e2)
}

/// The families of right-hand sides available from configuration files.
/// `P = p^C` and `C = C(n,p)` throughout; `r = |X|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrescribedKind {
    /// `f = s [(1+ε) r^{-k} - ε]` with `s = P` and `k = C` by default.
    /// With `ε > 0` the unit sphere is the only sphere solving the equation.
    RadialPower {
        #[serde(default)]
        eps: f64,
        #[serde(default)]
        exponent: Option<f64>,
        #[serde(default)]
        scale: Option<f64>,
    },
    /// `f = P [r^{-C} (1 + ε + δ ⟨ν, e⟩) - ε]`: normal-dependent data whose
    /// barrier inequalities hold when `|δ| ≤ ε min(1 - r1^C, r2^C - 1)`.
    PerturbedRadial { eps: f64, delta: f64, direction: Vec3 },
    /// `f = F(κ*(x)) [(1+ε) (ρ*(x)/r)^C - ε]` with `x = X/r`, solved
    /// exactly by the target surface `ρ*`.
    Manufactured { target: TargetProfile, eps: f64 },
}

/// Prescribed data: the family plus the annulus `r1 < 1 < r2` it lives on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrescribedData {
    pub r1: f64,
    pub r2: f64,
    pub f: PrescribedKind,
}

impl PrescribedData {
    pub fn new(r1: f64, r2: f64, f: PrescribedKind) -> Result<Self> {
        let d = Self { r1, r2, f };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r1 > 0.0 && self.r1 < 1.0 && self.r2 > 1.0 && self.r2.is_finite()) {
            return Err(Error::Precondition(format!(
                "annulus radii must satisfy 0 < r1 < 1 < r2, got r1 = {}, r2 = {}",
                self.r1, self.r2
            )));
        }
        Ok(())
    }

    /// Binds the data to an operator, producing an evaluable right-hand side.
    pub fn bind(&self, op: &PConvexOperator) -> Result<BoundData> {
        self.validate()?;
        if op.n() != 2 {
            return Err(Error::Domain("prescribed surface data is implemented for n = 2".into()));
        }
        Ok(BoundData {
            kind: self.f.clone(),
            c: op.subset_count() as f64,
            p_c: op.unit_sphere_value(),
            op: op.clone(),
        })
    }
}

/// [`PrescribedData`] bound to `(n, p)`.
#[derive(Debug, Clone)]
pub struct BoundData {
    kind: PrescribedKind,
    c: f64,
    p_c: f64,
    op: PConvexOperator,
}

impl BoundData {
    pub fn kind(&self) -> &PrescribedKind {
        &self.kind
    }
}

impl RightHandSide for BoundData {
    fn value(&self, x: &Vec3, nu: &Vec3) -> f64 {
        let r = norm(x);
        match &self.kind {
            PrescribedKind::RadialPower { eps, exponent, scale } => {
                let k = exponent.unwrap_or(self.c);
                scale.unwrap_or(self.p_c) * ((1.0 + eps) * r.powf(-k) - eps)
            }
            PrescribedKind::PerturbedRadial { eps, delta, direction } => {
                let e = unit(direction);
                self.p_c * (r.powf(-self.c) * (1.0 + eps + delta * dot(nu, &e)) - eps)
            }
            PrescribedKind::Manufactured { target, eps } => {
                let dir = [x[0] / r, x[1] / r, x[2] / r];
                let f_star = match target.curvatures(&dir) {
                    Ok(k) => self.op.eval(&k).map(|v| v.f.value()).unwrap_or(f64::NAN),
                    Err(_) => f64::NAN,
                };
                f_star * ((1.0 + eps) * (target.value(&dir) / r).powf(self.c) - eps)
            }
        }
    }

    fn gradient(&self, x: &Vec3, nu: &Vec3) -> (Vec3, Vec3) {
        let r = norm(x);
        match &self.kind {
            PrescribedKind::RadialPower { eps, exponent, scale } => {
                let k = exponent.unwrap_or(self.c);
                let s = -scale.unwrap_or(self.p_c) * (1.0 + eps) * k * r.powf(-k - 2.0);
                ([s * x[0], s * x[1], s * x[2]], [0.0; 3])
            }
            PrescribedKind::PerturbedRadial { eps, delta, direction } => {
                let e = unit(direction);
                let s = -self.p_c * self.c * r.powf(-self.c - 2.0) * (1.0 + eps + delta * dot(nu, &e));
                let t = self.p_c * r.powf(-self.c) * delta;
                ([s * x[0], s * x[1], s * x[2]], [t * e[0], t * e[1], t * e[2]])
            }
            PrescribedKind::Manufactured { .. } => {
                // F(κ*) depends on third derivatives of the target; differentiate numerically
                let h = 1e-6;
                let mut gx = [0.0; 3];
                for c in 0..3 {
                    let (mut xp, mut xm) = (*x, *x);
                    xp[c] += h;
                    xm[c] -= h;
                    gx[c] = (self.value(&xp, nu) - self.value(&xm, nu)) / (2.0 * h);
                }
                (gx, [0.0; 3])
            }
        }
    }
}

fn unit(v: &Vec3) -> Vec3 {
    let n = norm(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

/// The continuation family
/// `f^t = t f + (1-t) P [r^{-C} + ε (r^{-C} - 1)]`, solved by the unit
/// sphere at `t = 0`.
pub struct HomotopyRhs<'a> {
    pub target: &'a dyn RightHandSide,
    pub t: f64,
    pub eps: f64,
    pub c: f64,
    pub p_c: f64,
}

impl HomotopyRhs<'_> {
    fn start_value(&self, r: f64) -> f64 {
        self.p_c * ((1.0 + self.eps) * r.powf(-self.c) - self.eps)
    }
}

impl RightHandSide for HomotopyRhs<'_> {
    fn value(&self, x: &Vec3, nu: &Vec3) -> f64 {
        let start = self.start_value(norm(x));
        if self.t == 0.0 {
            return start;
        }
        self.t * self.target.value(x, nu) + (1.0 - self.t) * start
    }

    fn gradient(&self, x: &Vec3, nu: &Vec3) -> (Vec3, Vec3) {
        let r = norm(x);
        let s = -(1.0 - self.t) * self.p_c * (1.0 + self.eps) * self.c * r.powf(-self.c - 2.0);
        let mut gx = [s * x[0], s * x[1], s * x[2]];
        let mut gn = [0.0; 3];
        if self.t != 0.0 {
            let (tx, tn) = self.target.gradient(x, nu);
            for c in 0..3 {
                gx[c] += self.t * tx[c];
                gn[c] = self.t * tn[c];
            }
        }
        (gx, gn)
    }
}

/// Outcome of a hypothesis check on `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    /// Smallest slack found; negative means violated.
    pub worst_slack: f64,
    pub worst_point: Vec3,
    pub detail: String,
}

/// Deterministic, nearly uniform directions on the unit sphere.
pub fn fibonacci_directions(count: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            [r * a.cos(), r * a.sin(), z]
        })
        .collect()
}

/// Barrier inequalities with `ν = X/|X|`:
/// `f ≥ P / r1^C` on `|X| = r1` and `f ≤ P / r2^C` on `|X| = r2`.
/// Slack is relative to the bound; equality passes.
pub fn check_barrier_conditions(
    rhs: &dyn RightHandSide,
    op: &PConvexOperator,
    r1: f64,
    r2: f64,
    n_samples: usize,
) -> Result<ConditionReport> {
    if !(r1 > 0.0 && r1 < 1.0 && r2 > 1.0) {
        return Err(Error::Precondition(format!("need r1 < 1 < r2, got {r1}, {r2}")));
    }
    let c = op.subset_count() as i32;
    let p_c = op.unit_sphere_value();
    let inner_bound = p_c / r1.powi(c);
    let outer_bound = p_c / r2.powi(c);
    let mut worst = (f64::INFINITY, [0.0; 3], "");
    for x in fibonacci_directions(n_samples.max(1)) {
        let inner = [r1 * x[0], r1 * x[1], r1 * x[2]];
        let slack = (rhs.value(&inner, &x) - inner_bound) / inner_bound;
        if !(slack >= worst.0) {
            worst = (slack, inner, "inner");
        }
        let outer = [r2 * x[0], r2 * x[1], r2 * x[2]];
        let slack = (outer_bound - rhs.value(&outer, &x)) / outer_bound;
        if !(slack >= worst.0) {
            worst = (slack, outer, "outer");
        }
    }
    let passed = worst.0 >= -1e-12;
    let detail = if passed {
        "barrier inequalities hold on both spheres".to_string()
    } else if worst.2 == "inner" {
        format!("violated: f(X, X/|X|) >= p^C / r1^C fails on |X| = r1 = {r1}")
    } else {
        format!("violated: f(X, X/|X|) <= p^C / r2^C fails on |X| = r2 = {r2}")
    };
    Ok(ConditionReport {
        name: "barrier".into(),
        passed,
        samples: n_samples,
        worst_slack: worst.0,
        worst_point: worst.1,
        detail,
    })
}

/// Radial monotonicity `∂_ρ (ρ^C f(ρ x, ν)) ≤ 1e-8` for fixed `ν`, by
/// central differences along seeded random rays and radii in `[r1, r2]`.
/// The slack reported is `-∂_ρ(ρ^C f)`.
pub fn check_monotonicity_condition(
    rhs: &dyn RightHandSide,
    op: &PConvexOperator,
    r1: f64,
    r2: f64,
    n_samples: usize,
    seed: u64,
) -> ConditionReport {
    let c = op.subset_count() as i32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_unit = |rng: &mut ChaCha8Rng| loop {
        let v: Vec3 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = norm(&v);
        if n > 1e-3 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    };
    let h = 1e-5;
    let mut worst = (f64::INFINITY, [0.0; 3]);
    for _ in 0..n_samples.max(1) {
        let x = random_unit(&mut rng);
        let nu = random_unit(&mut rng);
        let rho: f64 = rng.random_range(r1..=r2);
        let g = |r: f64| r.powi(c) * rhs.value(&[r * x[0], r * x[1], r * x[2]], &nu);
        let d = (g(rho + h) - g(rho - h)) / (2.0 * h);
        if !(-d >= worst.0) {
            worst = (-d, [rho * x[0], rho * x[1], rho * x[2]]);
        }
    }
    let passed = worst.0 >= -1e-8;
    ConditionReport {
        name: "monotonicity".into(),
        passed,
        samples: n_samples,
        worst_slack: worst.0,
        worst_point: worst.1,
        detail: if passed {
            "d/drho (rho^C f) <= 0 along all sampled rays".into()
        } else {
            format!("violated: d/drho (rho^C f) = {:e} > 0", -worst.0)
        },
    }
}
