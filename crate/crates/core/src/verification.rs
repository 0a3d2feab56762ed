//! Randomized property suites for the operator, checked against
//! brute-force oracles that enumerate subsets on their own.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{binomial, theta_constant, PConvexOperator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub n: usize,
    pub p: usize,
    pub samples: usize,
    pub seed: u64,
    pub margin_floor: f64,
    pub cap: f64,
}

impl SampleSpec {
    /// Defaults: margin floor `1e-3`, cap `5`.
    pub fn new(n: usize, p: usize, samples: usize, seed: u64) -> Self {
        Self { n, p, samples, seed, margin_floor: 1e-3, cap: 5.0 }
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.margin_floor = floor;
        self
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.cap = cap;
        self
    }

    fn validate(&self) -> Result<PConvexOperator> {
        if self.samples == 0 {
            return Err(Error::Sampling("sample count must be at least 1".into()));
        }
        if !(self.margin_floor > 0.0) || !(self.cap > 0.0) {
            return Err(Error::Sampling(format!(
                "need margin floor > 0 and cap > 0, got {} and {}",
                self.margin_floor, self.cap
            )));
        }
        PConvexOperator::new(self.n, self.p)
    }
}

/// Rejection sampler for spectra in the cone, sorted descending.
pub struct ConeSampler {
    op: PConvexOperator,
    rng: ChaCha8Rng,
    floor: f64,
    cap: f64,
    max_norm: f64,
    accepted: usize,
    attempts: usize,
}

impl ConeSampler {
    pub fn new(spec: &SampleSpec) -> Result<Self> {
        let op = spec.validate()?;
        Ok(Self {
            op,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            floor: spec.margin_floor,
            cap: spec.cap,
            max_norm: f64::INFINITY,
            accepted: 0,
            attempts: 0,
        })
    }

    /// Additionally rejects spectra with Euclidean norm above `bound`.
    pub fn with_norm_bound(mut self, bound: f64) -> Self {
        self.max_norm = bound;
        self
    }

    pub fn next_spectrum(&mut self) -> Result<Vec<f64>> {
        loop {
            if self.attempts >= 10_000 * (self.accepted + 1) {
                return Err(Error::Sampling(format!(
                    "acceptance rate below 1e-4 for n = {}, p = {}, floor = {}, cap = {}; \
                     lower the margin floor or raise the cap",
                    self.op.n(),
                    self.op.p(),
                    self.floor,
                    self.cap
                )));
            }
            self.attempts += 1;
            let mut v: Vec<f64> = (0..self.op.n()).map(|_| self.rng.random_range(-self.cap..=self.cap)).collect();
            if self.op.margin(&v) < self.floor || v.iter().map(|x| x * x).sum::<f64>().sqrt() > self.max_norm {
                continue;
            }
            self.accepted += 1;
            v.sort_by(|a, b| b.total_cmp(a));
            return Ok(v);
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.attempts.max(1) as f64
    }

    fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

impl Iterator for ConeSampler {
    type Item = Result<Vec<f64>>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_spectrum())
    }
}

/// `spec.samples` cone spectra.
pub fn sample_cone(spec: &SampleSpec) -> Result<Vec<Vec<f64>>> {
    ConeSampler::new(spec)?.take(spec.samples).collect()
}

/// Brute-force enumeration, independent of the operator's subset table:
/// recursive, highest index first.
pub mod oracle {
    fn enumerate(n: usize, p: usize, visit: &mut dyn FnMut(&[usize])) {
        fn rec(top: usize, left: usize, chosen: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
            if left == 0 {
                visit(chosen);
                return;
            }
            for i in (left - 1..top).rev() {
                chosen.push(i);
                rec(i, left - 1, chosen, visit);
                chosen.pop();
            }
        }
        rec(n, p, &mut Vec::with_capacity(p), visit);
    }

    /// All `p`-subset sums, each with its (descending) index set.
    pub fn subset_sums(lambda: &[f64], p: usize) -> Vec<(Vec<usize>, f64)> {
        let mut out = Vec::new();
        enumerate(lambda.len(), p, &mut |s| out.push((s.to_vec(), s.iter().map(|&i| lambda[i]).sum())));
        out
    }

    pub fn margin(lambda: &[f64], p: usize) -> f64 {
        subset_sums(lambda, p).iter().map(|(_, s)| *s).fold(f64::INFINITY, f64::min)
    }

    /// `(log F, F^{kk}/F)` on the open cone.
    pub fn log_value_and_ratios(lambda: &[f64], p: usize) -> (f64, Vec<f64>) {
        let mut log_f = 0.0;
        let mut a = vec![0.0; lambda.len()];
        enumerate(lambda.len(), p, &mut |s| {
            let sum: f64 = s.iter().map(|&i| lambda[i]).sum();
            log_f += sum.ln();
            for &i in s {
                a[i] += 1.0 / sum;
            }
        });
        (log_f, a)
    }

    /// `(F̃, F̃^{kk})`.
    pub fn gradient(lambda: &[f64], p: usize) -> (f64, Vec<f64>) {
        let (log_f, a) = log_value_and_ratios(lambda, p);
        let c = super::binomial(lambda.len(), p) as f64;
        let tilde = (log_f / c).exp();
        (tilde, a.iter().map(|ak| tilde * ak / c).collect())
    }

    /// `F̃(λ + δ) / F̃(λ) − 1` without cancellation, for small shifts `δ`.
    pub fn relative_change(lambda: &[f64], delta: &[f64], p: usize) -> f64 {
        let mut acc = 0.0;
        let mut count = 0usize;
        enumerate(lambda.len(), p, &mut |s| {
            let sum: f64 = s.iter().map(|&i| lambda[i]).sum();
            let d: f64 = s.iter().map(|&i| delta[i]).sum();
            acc += (d / sum).ln_1p();
            count += 1;
        });
        (acc / count as f64).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyKind {
    /// `worst_slack` is the largest relative error; passes when `≤ tolerance`.
    Identity,
    /// `worst_slack` is the smallest normalized slack; passes when `≥ -tolerance`.
    Inequality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: String,
    pub kind: PropertyKind,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub samples: usize,
    pub worst_slack: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Spectrum attaining the worst slack.
    pub witness: Vec<f64>,
}

struct Check {
    name: &'static str,
    kind: PropertyKind,
    tolerance: f64,
}

/// Per-sample values of several checks; reduced to one report per check,
/// keeping the first worst sample so that parallel runs are reproducible.
fn reduce(
    checks: &[Check],
    spec: &SampleSpec,
    samples: &[Vec<f64>],
    values: Vec<Vec<f64>>,
) -> Vec<PropertyReport> {
    checks
        .iter()
        .enumerate()
        .map(|(c, check)| {
            let mut worst = match check.kind {
                PropertyKind::Identity => f64::NEG_INFINITY,
                PropertyKind::Inequality => f64::INFINITY,
            };
            let mut at = 0;
            let mut count = 0;
            for (s, v) in values.iter().enumerate() {
                let x = v[c];
                if x.is_nan() {
                    continue;
                }
                count += 1;
                let worse = match check.kind {
                    PropertyKind::Identity => x > worst,
                    PropertyKind::Inequality => x < worst,
                };
                if worse {
                    worst = x;
                    at = s;
                }
            }
            let passed = count > 0
                && match check.kind {
                    PropertyKind::Identity => worst <= check.tolerance,
                    PropertyKind::Inequality => worst >= -check.tolerance,
                };
            PropertyReport {
                property: check.name.to_string(),
                kind: check.kind,
                n: spec.n,
                p: spec.p,
                seed: spec.seed,
                samples: count,
                worst_slack: worst,
                tolerance: check.tolerance,
                passed,
                witness: samples.get(at).cloned().unwrap_or_default(),
            }
        })
        .collect()
}

const OPERATOR_CHECKS: [Check; 8] = [
    Check { name: "oracle_agreement", kind: PropertyKind::Identity, tolerance: 1e-10 },
    Check { name: "ellipticity", kind: PropertyKind::Inequality, tolerance: 0.0 },
    Check { name: "top_eigenvalue_bound", kind: PropertyKind::Inequality, tolerance: 1e-12 },
    Check { name: "trace_lower_bound", kind: PropertyKind::Inequality, tolerance: 1e-12 },
    Check { name: "euler_identity", kind: PropertyKind::Identity, tolerance: 1e-10 },
    Check { name: "homogeneity", kind: PropertyKind::Identity, tolerance: 1e-10 },
    Check { name: "theta_bound", kind: PropertyKind::Inequality, tolerance: 1e-12 },
    Check { name: "orthogonal_invariance", kind: PropertyKind::Identity, tolerance: 1e-10 },
];

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

fn operator_values(op: &PConvexOperator, lambda: &[f64], q: &DMatrix<f64>, theta: f64) -> Result<Vec<f64>> {
    let n = op.n();
    let p = op.p() as f64;
    let c = op.subset_count() as f64;
    let jet = op.jet(lambda)?;
    let a = &jet.f_grad_ratio;
    let g = &jet.grad;
    let tilde = jet.value_tilde;

    let (o_log, o_a) = oracle::log_value_and_ratios(lambda, op.p());
    let mut agreement = ((jet.value_f.log_magnitude - o_log) / o_log.abs().max(1.0)).abs();
    for k in 0..n {
        agreement = agreement.max((a[k] - o_a[k]).abs() / o_a[k].abs());
    }
    let ellipticity = g.iter().copied().fold(f64::INFINITY, f64::min) / tilde;
    let a1 = g[0] * lambda[0] / tilde - 1.0 / n as f64;
    let a2 = g.iter().sum::<f64>() - p;
    let a3 = (lambda.iter().zip(a).map(|(l, ak)| l * ak).sum::<f64>() - c).abs() / c;
    let a4 = (lambda.iter().zip(g).map(|(l, gk)| l * gk).sum::<f64>() - tilde).abs() / tilde;
    let total: f64 = a.iter().sum();
    let a5 = (n - op.p()..n).map(|j| a[j] / total - theta).fold(f64::INFINITY, f64::min);

    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(lambda));
    let rotated = q * diag * q.transpose();
    let rotated = (&rotated + rotated.transpose()) * 0.5;
    let invariance = (op.matrix_jet(&rotated)?.value_tilde - tilde).abs() / tilde;
    Ok(vec![agreement, ellipticity, a1, a2, a3, a4, a5, invariance])
}

/// Operator identities and bounds (top eigenvalue, trace, Euler, homogeneity,
/// theta), oracle agreement, ellipticity and orthogonal invariance on
/// `spec.samples` cone samples.
pub fn run_operator_suite(spec: &SampleSpec) -> Result<Vec<PropertyReport>> {
    let op = spec.validate()?;
    let theta = theta_constant(spec.n, spec.p)?;
    let mut sampler = ConeSampler::new(spec)?;
    let samples: Vec<Vec<f64>> = (0..spec.samples).map(|_| sampler.next_spectrum()).collect::<Result<_>>()?;
    let rotations: Vec<DMatrix<f64>> = (0..spec.samples).map(|_| random_orthogonal(spec.n, sampler.rng())).collect();
    let values = samples
        .par_iter()
        .zip(&rotations)
        .map(|(l, q)| operator_values(&op, l, q, theta))
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce(&OPERATOR_CHECKS, spec, &samples, values))
}

const NEAR_BOUNDARY_CHECKS: [Check; 2] = [
    Check { name: "near_boundary_euler_identity", kind: PropertyKind::Identity, tolerance: 1e-10 },
    Check { name: "near_boundary_homogeneity", kind: PropertyKind::Identity, tolerance: 1e-10 },
];

/// Identities on spectra shifted toward the cone boundary so that their
/// margin lies in `[1e-6, 1e-3]`. Errors are relative to the sum of the
/// absolute terms, since the individual terms grow like `1 / margin`.
pub fn run_near_boundary_suite(spec: &SampleSpec) -> Result<Vec<PropertyReport>> {
    let op = spec.validate()?;
    let mut sampler = ConeSampler::new(spec)?;
    let mut samples = Vec::with_capacity(spec.samples);
    for _ in 0..spec.samples {
        let mut l = sampler.next_spectrum()?;
        let target = 10f64.powf(sampler.rng().random_range(-6.0..=-3.0));
        let shift = (op.margin(&l) - target) / spec.p as f64;
        l.iter_mut().for_each(|x| *x -= shift);
        samples.push(l);
    }
    let c = op.subset_count() as f64;
    let values = samples
        .par_iter()
        .map(|l| {
            let jet = op.jet(l)?;
            let terms: Vec<f64> = l.iter().zip(&jet.f_grad_ratio).map(|(x, a)| x * a).collect();
            let scale = terms.iter().map(|t| t.abs()).sum::<f64>().max(c);
            let euler = (terms.iter().sum::<f64>() - c).abs() / scale;
            let tilde_terms: Vec<f64> = l.iter().zip(&jet.grad).map(|(x, g)| x * g).collect();
            let tilde_scale = tilde_terms.iter().map(|t| t.abs()).sum::<f64>().max(jet.value_tilde);
            let hom = (tilde_terms.iter().sum::<f64>() - jet.value_tilde).abs() / tilde_scale;
            Ok(vec![euler, hom])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce(&NEAR_BOUNDARY_CHECKS, spec, &samples, values))
}

const FD_CHECKS: [Check; 4] = [
    Check { name: "gradient_vs_differences", kind: PropertyKind::Identity, tolerance: 1e-6 },
    Check { name: "hessian_diag_vs_differences", kind: PropertyKind::Identity, tolerance: 1e-6 },
    Check { name: "hessian_offdiag_vs_differences", kind: PropertyKind::Identity, tolerance: 1e-6 },
    Check { name: "offdiag_formula_consistency", kind: PropertyKind::Identity, tolerance: 1e-8 },
];

/// Finite difference step for gradients and Hessians.
pub const FD_STEP: f64 = 1e-5;

fn fd_values(op: &PConvexOperator, l: &[f64]) -> Result<Vec<f64>> {
    let n = op.n();
    let p = op.p();
    let jet = op.jet(l)?;
    let h = FD_STEP;
    let mut work = l.to_vec();

    let gmax = jet.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut grad_err = 0.0f64;
    for k in 0..n {
        work[k] = l[k] + h;
        let up = op.tilde(&work)?;
        work[k] = l[k] - h;
        let down = op.tilde(&work)?;
        work[k] = l[k];
        let fd = (up - down) / (2.0 * h);
        grad_err = grad_err.max((jet.grad[k] - fd).abs() / fd.abs().max(gmax));
    }

    let margin = op.margin(l);
    // for p = n the Hessian vanishes identically; |∇F̃| / margin is its
    // natural size and keeps the relative error meaningful there
    let hmax = jet.hess_diag.iter().fold(gmax / margin, |m, v| m.max(v.abs()));
    let mut hess_err = 0.0f64;
    for l_idx in 0..n {
        work[l_idx] = l[l_idx] + h;
        let (_, up) = oracle::gradient(&work, p);
        work[l_idx] = l[l_idx] - h;
        let (_, down) = oracle::gradient(&work, p);
        work[l_idx] = l[l_idx];
        for k in 0..n {
            let fd = (up[k] - down[k]) / (2.0 * h);
            hess_err = hess_err.max((jet.hess_diag_at(k, l_idx) - fd).abs() / fd.abs().max(hmax));
        }
    }

    // t ↦ F̃(diag λ + t(e_k e_rᵀ + e_r e_kᵀ)) only moves λ_k, λ_r to
    // m ± √(d² + t²); its second derivative at 0 is 2 F̃^{kr,rk}
    let omax = jet.hess_offdiag.iter().fold(gmax / margin, |m, v| m.max(v.abs()));
    let mut off_err = 0.0f64;
    let mut consistency = f64::NAN;
    let mut delta = vec![0.0; n];
    for k in 0..n {
        for r in (k + 1)..n {
            let d = 0.5 * (l[k] - l[r]);
            if d.abs() < 1e-9 {
                continue;
            }
            let t = 1e-4 * d.abs().min(margin).min(1.0);
            let grow = t * t / ((d * d + t * t).sqrt() + d.abs());
            delta[k] = grow * d.signum();
            delta[r] = -grow * d.signum();
            let fd = 2.0 * jet.value_tilde * oracle::relative_change(l, &delta, p) / (t * t);
            delta[k] = 0.0;
            delta[r] = 0.0;
            let analytic = 2.0 * jet.hess_offdiag_at(k, r);
            off_err = off_err.max((analytic - fd).abs() / fd.abs().max(2.0 * omax));

            if (l[k] - l[r]).abs() > 1e-4 {
                let quotient = (jet.f_grad_ratio[k] - jet.f_grad_ratio[r]) / (l[k] - l[r]);
                let pair = op.offdiag_subset_pair(l, k, r)?;
                let scale = quotient.abs().max(pair.abs());
                let e = if scale == 0.0 { 0.0 } else { (quotient - pair).abs() / scale };
                consistency = if consistency.is_nan() { e } else { consistency.max(e) };
            }
        }
    }
    Ok(vec![grad_err, hess_err, off_err, consistency])
}

/// Gradient and Hessian against finite differences on well-conditioned
/// samples (`margin ≥ 0.1`, `|λ| ≤ 10`).
pub fn run_fd_suite(spec: &SampleSpec) -> Result<Vec<PropertyReport>> {
    let op = spec.validate()?;
    if spec.margin_floor < 0.1 {
        return Err(Error::Precondition(format!(
            "derivative suite needs a margin floor of at least 0.1, got {}",
            spec.margin_floor
        )));
    }
    let mut sampler = ConeSampler::new(spec)?.with_norm_bound(10.0);
    let samples: Vec<Vec<f64>> = (0..spec.samples).map(|_| sampler.next_spectrum()).collect::<Result<_>>()?;
    let values = samples.par_iter().map(|l| fd_values(&op, l)).collect::<Result<Vec<_>>>()?;
    Ok(reduce(&FD_CHECKS, spec, &samples, values))
}

const CONCAVITY_CHECKS: [Check; 2] = [
    Check { name: "concavity", kind: PropertyKind::Inequality, tolerance: 1e-8 },
    Check { name: "concavity_vs_differences", kind: PropertyKind::Identity, tolerance: 1e-4 },
];

/// Largest step of the matrix-path second difference, as a fraction of the
/// cone margin.
pub const CONCAVITY_STEP_FRACTION: f64 = 0.05;

fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&m + m.transpose()) * 0.5
}

fn concavity_values(op: &PConvexOperator, l: &[f64], dirs: &[DMatrix<f64>]) -> Result<Vec<f64>> {
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(l));
    let tilde = op.tilde(l)?;
    let mut slack = f64::INFINITY;
    let mut fd_err = 0.0f64;
    let margin = op.margin(l);
    // F̃(eig(diag λ + tB)) / F̃(λ) - 1, pairing sorted eigenvalues with λ
    let along = |t: f64, b: &DMatrix<f64>| -> f64 {
        let mut mu: Vec<f64> = SymmetricEigen::new(&diag + b * t).eigenvalues.iter().copied().collect();
        mu.sort_by(|a, b| b.total_cmp(a));
        let delta: Vec<f64> = mu.iter().zip(l).map(|(m, x)| m - x).collect();
        oracle::relative_change(l, &delta, op.p())
    };
    let second_difference = |t: f64, b: &DMatrix<f64>| tilde * (along(t, b) + along(-t, b)) / (t * t);
    for b in dirs {
        let norm2 = b.norm_squared();
        let second = op.second_directional(l, b)?;
        // normalized so that the pinned tolerance reads 1e-8 (1 + |B|²)
        slack = slack.min(-second / (1.0 + norm2));
        // t ↦ F̃(eig(diag λ + tB)) is analytic for |t| below roughly margin / |B|;
        // two Richardson levels keep the truncation at O(h⁶)
        let h = CONCAVITY_STEP_FRACTION * margin.min(1.0) / b.norm().max(1.0);
        let d = [second_difference(h, b), second_difference(0.5 * h, b), second_difference(0.25 * h, b)];
        let r1 = (4.0 * d[1] - d[0]) / 3.0;
        let r2 = (4.0 * d[2] - d[1]) / 3.0;
        let fd = (16.0 * r2 - r1) / 15.0;
        // F̃ |B|² / margin² bounds the second derivative and sets the scale
        // of the difference quotient's roundoff
        fd_err = fd_err.max((second - fd).abs() / (second.abs() + tilde * norm2 / (margin * margin)));
    }
    Ok(vec![slack, fd_err])
}

/// `d²F̃ ≤ 0` along random symmetric directions, with a finite difference
/// cross-check through a full eigendecomposition.
pub fn run_concavity_suite(spec: &SampleSpec, directions: usize) -> Result<Vec<PropertyReport>> {
    let op = spec.validate()?;
    let mut sampler = ConeSampler::new(spec)?;
    let mut samples = Vec::with_capacity(spec.samples);
    let mut dirs = Vec::with_capacity(spec.samples);
    for _ in 0..spec.samples {
        let mut l = sampler.next_spectrum()?;
        // the Hessian formulas assume distinct eigenvalues
        for i in 1..l.len() {
            if l[i - 1] - l[i] < 1e-10 {
                l[i] = l[i - 1] - 1e-10;
            }
        }
        samples.push(l);
        dirs.push((0..directions).map(|_| random_symmetric(spec.n, sampler.rng())).collect::<Vec<_>>());
    }
    let values = samples
        .par_iter()
        .zip(&dirs)
        .map(|(l, d)| concavity_values(&op, l, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce(&CONCAVITY_CHECKS, spec, &samples, values))
}

/// Fixed-width table, one row per report.
pub fn render_table(reports: &[PropertyReport]) -> String {
    let mut out = format!(
        "{:<34} {:>3} {:>3} {:>8} {:>12} {:>10}  {}\n",
        "property", "n", "p", "samples", "worst", "tol", "result"
    );
    for r in reports {
        out.push_str(&format!(
            "{:<34} {:>3} {:>3} {:>8} {:>12.3e} {:>10.1e}  {}\n",
            r.property,
            r.n,
            r.p,
            r.samples,
            r.worst_slack,
            r.tolerance,
            if r.passed { "pass" } else { "FAIL" }
        ));
    }
    out
}

/// `C(n,p)` and `θ(n,p)` for reporting.
pub fn constants(n: usize, p: usize) -> Result<(usize, f64)> {
    Ok((binomial(n, p), theta_constant(n, p)?))
}
