//! Damped Newton iteration kept inside the ellipticity cone.
//!
//! A step is accepted only if every node of the trial iterate stays in the
//! open cone with a minimum margin of at least a tenth of the current one
//! and the residual max-norm strictly decreases; otherwise the step length
//! is halved down to `damping_min`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::BandMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    /// Chain rule through the stencils.
    #[default]
    Analytic,
    /// Column-wise central differences at step `1e-6`.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping_min: f64,
    pub jacobian: JacobianMode,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, damping_min: 2f64.powi(-20), jacobian: JacobianMode::Analytic }
    }
}

/// Residual of an iterate together with its cone diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub residual: Vec<f64>,
    pub min_margin: f64,
    pub worst_node: usize,
}

impl Evaluation {
    pub fn max_norm(&self) -> f64 {
        self.residual.iter().fold(0.0f64, |m, r| m.max(r.abs()))
    }
}

/// Sparse rows `(column, value)` of a Jacobian.
pub type SparseRows = Vec<Vec<(usize, f64)>>;

/// A square nodal system `R(x) = 0`.
pub trait NewtonProblem: Sync {
    fn len(&self) -> usize;

    /// Full residual. Must fail with [`Error::ConeViolation`] when some
    /// node leaves the open cone.
    fn evaluate(&self, x: &[f64]) -> Result<Evaluation>;

    fn jacobian(&self, x: &[f64]) -> Result<SparseRows>;

    /// Residual of a single row, for the difference Jacobian.
    fn residual_row(&self, x: &[f64], row: usize) -> Result<f64>;

    /// Columns coupled to each row.
    fn pattern(&self) -> &[Vec<usize>];

    /// Position of unknown `i` in the banded factorization.
    fn position(&self, i: usize) -> usize {
        i
    }
}

/// Column-wise central difference Jacobian on the problem's sparsity pattern.
pub fn difference_jacobian<P: NewtonProblem + ?Sized>(problem: &P, x: &[f64]) -> Result<SparseRows> {
    let n = problem.len();
    let mut rows_of_col = vec![Vec::new(); n];
    for (row, cols) in problem.pattern().iter().enumerate() {
        for &c in cols {
            rows_of_col[c].push(row);
        }
    }
    let mut out: SparseRows = vec![Vec::new(); n];
    let mut work = x.to_vec();
    let h = 1e-6;
    for (col, rows) in rows_of_col.iter().enumerate() {
        let step = h * (1.0 + x[col].abs());
        work[col] = x[col] + step;
        let plus: Vec<f64> = rows.iter().map(|&r| problem.residual_row(&work, r)).collect::<Result<_>>()?;
        work[col] = x[col] - step;
        let minus: Vec<f64> = rows.iter().map(|&r| problem.residual_row(&work, r)).collect::<Result<_>>()?;
        work[col] = x[col];
        for (k, &r) in rows.iter().enumerate() {
            out[r].push((col, (plus[k] - minus[k]) / (2.0 * step)));
        }
    }
    Ok(out)
}

/// Iteration record of one Newton solve.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NewtonHistory {
    pub converged: bool,
    pub iterations: usize,
    /// Residual max-norm of the initial and every accepted iterate.
    pub residuals: Vec<f64>,
    /// Minimum cone margin of the initial and every accepted iterate.
    pub margins: Vec<f64>,
    pub step_lengths: Vec<f64>,
    pub failure: Option<String>,
}

fn factor_and_solve<P: NewtonProblem + ?Sized>(problem: &P, rows: &SparseRows, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = problem.len();
    let pos: Vec<usize> = (0..n).map(|i| problem.position(i)).collect();
    let mut bw = 0usize;
    for (i, row) in rows.iter().enumerate() {
        for &(j, _) in row {
            bw = bw.max(pos[i].abs_diff(pos[j]));
        }
    }
    let mut band = BandMatrix::zeros(n, bw, bw);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            band.add(pos[i], pos[j], v);
        }
    }
    let lu = band.factor()?;
    let mut b = vec![0.0; n];
    for i in 0..n {
        b[pos[i]] = rhs[i];
    }
    let y = lu.solve(&b);
    Ok((0..n).map(|i| y[pos[i]]).collect())
}

/// Runs damped Newton from `x0`. Fails only when `x0` itself is not
/// admissible; iteration failures are reported through the history.
pub fn damped_newton<P: NewtonProblem + ?Sized>(
    problem: &P,
    x0: Vec<f64>,
    config: &NewtonConfig,
) -> Result<(Vec<f64>, Evaluation, NewtonHistory)> {
    let mut x = x0;
    let mut eval = problem.evaluate(&x)?;
    let mut hist = NewtonHistory {
        residuals: vec![eval.max_norm()],
        margins: vec![eval.min_margin],
        ..Default::default()
    };
    loop {
        let norm = eval.max_norm();
        if norm <= config.tol {
            hist.converged = true;
            return Ok((x, eval, hist));
        }
        if hist.iterations >= config.max_iter {
            hist.failure = Some(format!(
                "maximum of {} iterations reached with residual {norm:e}",
                config.max_iter
            ));
            return Ok((x, eval, hist));
        }
        let jac = match config.jacobian {
            JacobianMode::Analytic => problem.jacobian(&x),
            JacobianMode::FiniteDifference => difference_jacobian(problem, &x),
        };
        let rhs: Vec<f64> = eval.residual.iter().map(|r| -r).collect();
        let step = match jac.and_then(|j| factor_and_solve(problem, &j, &rhs)) {
            Ok(s) => s,
            Err(e) => {
                hist.failure = Some(format!("linear solve failed: {e}"));
                return Ok((x, eval, hist));
            }
        };
        let mut alpha = 1.0;
        let mut last_reason = String::new();
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, d)| a + alpha * d).collect();
            match problem.evaluate(&trial) {
                Ok(e) if e.min_margin >= 0.1 * eval.min_margin && e.max_norm() < norm => {
                    break Some((trial, e));
                }
                Ok(e) if e.min_margin < 0.1 * eval.min_margin => {
                    last_reason = format!("cone margin dropped to {:e}", e.min_margin);
                }
                Ok(e) => {
                    last_reason = format!("residual did not decrease ({:e} >= {norm:e})", e.max_norm());
                }
                Err(Error::ConeViolation { node, margin }) => {
                    last_reason = format!("cone exit at node {node} (margin {margin:e})");
                }
                Err(e) => last_reason = e.to_string(),
            }
            alpha *= 0.5;
            if alpha < config.damping_min {
                break None;
            }
        };
        match accepted {
            Some((trial, e)) => {
                x = trial;
                eval = e;
                hist.iterations += 1;
                hist.residuals.push(eval.max_norm());
                hist.margins.push(eval.min_margin);
                hist.step_lengths.push(alpha);
            }
            None => {
                hist.failure = Some(format!("line search failed at minimal damping: {last_reason}"));
                return Ok((x, eval, hist));
            }
        }
    }
}
