//! The p-convex curvature operator
//!
//! ```text
//! F(λ) = Π_{i1<…<ip} (λ_{i1} + … + λ_{ip}),      F̃ = F^{1/C(n,p)}
//! ```
//!
//! evaluated and differentiated on eigenvalue vectors and symmetric
//! matrices. `F` itself is a product of `C(n,p)` factors and overflows a
//! double for moderate `n`, so it is only ever carried in the log domain;
//! every derivative is expressed through the ratios `F^{kk}/F`,
//! `F^{kk,ll}/F` and `F^{kr,rk}/F`, which are sums of reciprocal subset
//! sums and stay well scaled.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported dimension; `C(16, 8) = 12870` subsets.
pub const MAX_DIMENSION: usize = 16;

/// Relative gap below which the off-diagonal Hessian switches from the
/// difference quotient to the explicit subset-pair sum.
pub const TIE_TOLERANCE: f64 = 1e-6;

/// Binomial coefficient `C(n, k)`, zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// The constant of the lower bound `F^{jj} ≥ θ Σ_i F^{ii}` for the indices
/// `j ≥ n - p + 1` of a descending spectrum.
///
/// `F^{jj}` is at least `F` over the smallest subset sum, which dominates
/// the mean of `F / sum` over all subsets, while `Σ_i F^{ii}` equals
/// `n C(n-1,p-1) / C(n,p)` times that same total. Dividing gives
/// `θ = 1 / (n C(n-1, p-1))`. The value is what the bound yields, not an
/// optimal constant.
pub fn theta_constant(n: usize, p: usize) -> Result<f64> {
    check_np(n, p)?;
    Ok(1.0 / (n * binomial(n - 1, p - 1)) as f64)
}

fn check_np(n: usize, p: usize) -> Result<()> {
    if n > MAX_DIMENSION {
        return Err(Error::DimensionTooLarge { n, max: MAX_DIMENSION });
    }
    if n == 0 || p == 0 || p > n {
        return Err(Error::Domain(format!("need 1 <= p <= n, got n = {n}, p = {p}")));
    }
    Ok(())
}

/// Ordered vector of principal curvatures or Hessian eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    values: Vec<f64>,
    sorted_descending: bool,
}

impl EigenSpectrum {
    /// Wraps the values as given. Requires `n >= 2` finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Domain(format!(
                "a spectrum needs at least 2 entries, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite spectrum {values:?}")));
        }
        let sorted_descending = values.windows(2).all(|w| w[0] >= w[1]);
        Ok(Self { values, sorted_descending })
    }

    /// Sorts the values in descending order.
    pub fn sorted(mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(|a, b| b.total_cmp(a));
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn is_sorted_descending(&self) -> bool {
        self.sorted_descending
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl AsRef<[f64]> for EigenSpectrum {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// `F` in the log domain. `defined` is false whenever some subset sum is
/// not positive, in which case `log_magnitude` is `-inf` on the boundary
/// of the cone and `NaN` outside of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    pub log_magnitude: f64,
    pub defined: bool,
}

impl LogValue {
    /// `F` as a plain number: may overflow to `inf` for large `n`.
    pub fn value(&self) -> f64 {
        if self.defined {
            self.log_magnitude.exp()
        } else if self.log_magnitude == f64::NEG_INFINITY {
            0.0
        } else {
            f64::NAN
        }
    }
}

/// Output of [`PConvexOperator::eval`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorValue {
    pub f: LogValue,
    /// `F̃ = F^{1/C}`; zero on the cone boundary and `NaN` outside.
    pub tilde: f64,
}

/// Minimum subset sum and a subset attaining it (0-based indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeMargin {
    pub min_subset_sum: f64,
    pub witness_subset: Vec<usize>,
}

impl ConeMargin {
    pub fn inside(&self) -> bool {
        self.min_subset_sum > 0.0
    }
}

/// Value, gradient and Hessian data of `F` and `F̃` at a spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorJet {
    pub value_f: LogValue,
    pub value_tilde: f64,
    /// `F̃^{kk}`.
    pub grad: Vec<f64>,
    /// `F̃^{kk,ll}`, row-major `n × n`.
    pub hess_diag: Vec<f64>,
    /// `F̃^{kr,rk}` for `k ≠ r`, row-major `n × n`, zero on the diagonal.
    pub hess_offdiag: Vec<f64>,
    /// `F^{kk} / F`.
    pub f_grad_ratio: Vec<f64>,
    /// `F^{kk,ll} / F`, row-major.
    pub f_hess_ratio: Vec<f64>,
    /// `F^{kr,rk} / F`, row-major, zero on the diagonal.
    pub f_offdiag_ratio: Vec<f64>,
    n: usize,
}

impl OperatorJet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn hess_diag_at(&self, k: usize, l: usize) -> f64 {
        self.hess_diag[k * self.n + l]
    }

    pub fn hess_offdiag_at(&self, k: usize, r: usize) -> f64 {
        self.hess_offdiag[k * self.n + r]
    }

    /// `F^{kk}` (not normalized); overflows for large `n`.
    pub fn f_grad(&self) -> Vec<f64> {
        let f = self.value_f.value();
        self.f_grad_ratio.iter().map(|r| f * r).collect()
    }

    /// `F^{kk,ll}` (not normalized), row-major.
    pub fn f_hess_diag(&self) -> Vec<f64> {
        let f = self.value_f.value();
        self.f_hess_ratio.iter().map(|r| f * r).collect()
    }

    /// `F^{kr,rk}` (not normalized), row-major.
    pub fn f_hess_offdiag(&self) -> Vec<f64> {
        let f = self.value_f.value();
        self.f_offdiag_ratio.iter().map(|r| f * r).collect()
    }
}

/// `F̃` and its matrix gradient `∂F̃/∂A_ij` at a symmetric matrix.
#[derive(Debug, Clone)]
pub struct MatrixJet {
    pub value_tilde: f64,
    pub grad: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// Per-eigenvalue gradient `F̃^{kk}` in the order of `eigenvalues`.
    pub eigen_grad: Vec<f64>,
}

/// Lexicographic table of the `C(n,p)` index subsets.
#[derive(Debug)]
pub struct SubsetTable {
    n: usize,
    p: usize,
    /// Flattened members, `p` per subset.
    members: Vec<u8>,
    masks: Vec<u32>,
    /// For each index `k`, the subsets containing it.
    containing: Vec<Vec<u32>>,
}

impl SubsetTable {
    fn build(n: usize, p: usize) -> Self {
        let count = binomial(n, p);
        let mut members = Vec::with_capacity(count * p);
        let mut masks = Vec::with_capacity(count);
        let mut containing = vec![Vec::with_capacity(binomial(n - 1, p - 1)); n];
        let mut idx: Vec<usize> = (0..p).collect();
        loop {
            let s = masks.len() as u32;
            let mut mask = 0u32;
            for &i in &idx {
                members.push(i as u8);
                mask |= 1 << i;
                containing[i].push(s);
            }
            masks.push(mask);
            // next combination in lexicographic order
            let mut j = p;
            while j > 0 && idx[j - 1] == n - p + j - 1 {
                j -= 1;
            }
            if j == 0 {
                break;
            }
            idx[j - 1] += 1;
            for t in j..p {
                idx[t] = idx[t - 1] + 1;
            }
        }
        debug_assert_eq!(masks.len(), count);
        Self { n, p, members, masks, containing }
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn subset(&self, s: usize) -> &[u8] {
        &self.members[s * self.p..(s + 1) * self.p]
    }

    pub fn contains(&self, s: usize, k: usize) -> bool {
        self.masks[s] & (1 << k) != 0
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }
}

fn table_cache() -> &'static Mutex<HashMap<(usize, usize), Arc<SubsetTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<SubsetTable>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The operator for a fixed `(n, p)`, holding the shared subset table.
#[derive(Debug, Clone)]
pub struct PConvexOperator {
    n: usize,
    p: usize,
    count: usize,
    table: Arc<SubsetTable>,
}

impl PConvexOperator {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        check_np(n, p)?;
        let table = {
            let mut cache = table_cache().lock().expect("subset table cache poisoned");
            cache.entry((n, p)).or_insert_with(|| Arc::new(SubsetTable::build(n, p))).clone()
        };
        Ok(Self { n, p, count: table.len(), table })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `C(n, p)`.
    pub fn subset_count(&self) -> usize {
        self.count
    }

    pub fn table(&self) -> &SubsetTable {
        &self.table
    }

    /// `p^{C(n,p)}`: the value of `F` at the all-ones spectrum.
    pub fn unit_sphere_value(&self) -> f64 {
        (self.p as f64).powi(self.count as i32)
    }

    fn check_len(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.n {
            return Err(Error::Domain(format!(
                "spectrum has {} entries, operator expects n = {}",
                lambda.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// One sum per subset, in lexicographic subset order.
    pub fn subset_sums(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        self.check_len(lambda)?;
        Ok(self.sums_unchecked(lambda))
    }

    fn sums_unchecked(&self, lambda: &[f64]) -> Vec<f64> {
        (0..self.count)
            .map(|s| self.table.subset(s).iter().map(|&i| lambda[i as usize]).sum())
            .collect()
    }

    /// Subsets in the order used by [`Self::subset_sums`].
    pub fn subsets(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.count).map(|s| self.table.subset(s).iter().map(|&i| i as usize).collect())
    }

    /// Minimum subset sum; ties go to the lexicographically smallest subset.
    pub fn cone_margin(&self, lambda: &[f64]) -> Result<ConeMargin> {
        self.check_len(lambda)?;
        let (s, min) = self.margin_index(lambda);
        Ok(ConeMargin {
            min_subset_sum: min,
            witness_subset: self.table.subset(s).iter().map(|&i| i as usize).collect(),
        })
    }

    /// Minimum subset sum without building the witness.
    ///
    /// Equals the sum of the `p` smallest entries, so this needs no
    /// enumeration.
    pub fn margin(&self, lambda: &[f64]) -> f64 {
        let mut v = lambda.to_vec();
        v.sort_by(|a, b| a.total_cmp(b));
        v[..self.p].iter().sum()
    }

    fn margin_index(&self, lambda: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for s in 0..self.count {
            let sum: f64 = self.table.subset(s).iter().map(|&i| lambda[i as usize]).sum();
            if sum < best.1 {
                best = (s, sum);
            }
        }
        best
    }

    /// `F` (log domain) and `F̃`.
    pub fn eval(&self, lambda: &[f64]) -> Result<OperatorValue> {
        self.check_len(lambda)?;
        Ok(self.eval_sums(&self.sums_unchecked(lambda)))
    }

    fn eval_sums(&self, sums: &[f64]) -> OperatorValue {
        let min = sums.iter().copied().fold(f64::INFINITY, f64::min);
        if min < 0.0 || min.is_nan() {
            return OperatorValue {
                f: LogValue { log_magnitude: f64::NAN, defined: false },
                tilde: f64::NAN,
            };
        }
        if min == 0.0 {
            return OperatorValue {
                f: LogValue { log_magnitude: f64::NEG_INFINITY, defined: false },
                tilde: 0.0,
            };
        }
        let log_f: f64 = sums.iter().map(|s| s.ln()).sum();
        OperatorValue {
            f: LogValue { log_magnitude: log_f, defined: true },
            tilde: (log_f / self.count as f64).exp(),
        }
    }

    /// `F̃` alone; `NaN` outside the closed cone.
    pub fn tilde(&self, lambda: &[f64]) -> Result<f64> {
        Ok(self.eval(lambda)?.tilde)
    }

    fn interior_sums(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        self.check_len(lambda)?;
        let sums = self.sums_unchecked(lambda);
        let min = sums.iter().copied().fold(f64::INFINITY, f64::min);
        if min.is_nan() || min <= 0.0 {
            return Err(Error::OutsideCone { values: lambda.to_vec(), p: self.p, margin: min });
        }
        Ok(sums)
    }

    /// `F̃` and `F̃^{kk}` only; the cheap path used by the solvers.
    pub fn gradient(&self, lambda: &[f64]) -> Result<(f64, Vec<f64>)> {
        let sums = self.interior_sums(lambda)?;
        let mut a = vec![0.0; self.n];
        let mut log_f = 0.0;
        for (s, &sum) in sums.iter().enumerate() {
            log_f += sum.ln();
            let inv = 1.0 / sum;
            for &i in self.table.subset(s) {
                a[i as usize] += inv;
            }
        }
        let c = self.count as f64;
        let tilde = (log_f / c).exp();
        Ok((tilde, a.iter().map(|ak| tilde * ak / c).collect()))
    }

    /// Full first and second derivative data at an interior spectrum.
    pub fn jet(&self, lambda: &[f64]) -> Result<OperatorJet> {
        let sums = self.interior_sums(lambda)?;
        let n = self.n;
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n * n];
        let mut log_f = 0.0;
        for (s, &sum) in sums.iter().enumerate() {
            log_f += sum.ln();
            let inv = 1.0 / sum;
            let inv2 = inv * inv;
            let members = self.table.subset(s);
            for (t, &i) in members.iter().enumerate() {
                let i = i as usize;
                a[i] += inv;
                for &j in &members[t..] {
                    let j = j as usize;
                    b[i * n + j] += inv2;
                    if i != j {
                        b[j * n + i] += inv2;
                    }
                }
            }
        }
        let c = self.count as f64;
        let tilde = (log_f / c).exp();
        let scale = tilde / c;

        let grad: Vec<f64> = a.iter().map(|ak| scale * ak).collect();
        let mut f_hess_ratio = vec![0.0; n * n];
        let mut hess_diag = vec![0.0; n * n];
        for k in 0..n {
            for l in 0..n {
                f_hess_ratio[k * n + l] = a[k] * a[l] - b[k * n + l];
                hess_diag[k * n + l] = scale * (a[k] * a[l] / c - b[k * n + l]);
            }
        }

        let mut f_offdiag_ratio = vec![0.0; n * n];
        let mut hess_offdiag = vec![0.0; n * n];
        for k in 0..n {
            for r in (k + 1)..n {
                let gap = lambda[k] - lambda[r];
                let ratio = if is_tie(lambda[k], lambda[r]) {
                    self.pair_sum_from(&sums, lambda, k, r)
                } else {
                    (a[k] - a[r]) / gap
                };
                f_offdiag_ratio[k * n + r] = ratio;
                f_offdiag_ratio[r * n + k] = ratio;
                hess_offdiag[k * n + r] = scale * ratio;
                hess_offdiag[r * n + k] = scale * ratio;
            }
        }

        Ok(OperatorJet {
            value_f: LogValue { log_magnitude: log_f, defined: true },
            value_tilde: tilde,
            grad,
            hess_diag,
            hess_offdiag,
            f_grad_ratio: a,
            f_hess_ratio,
            f_offdiag_ratio,
            n,
        })
    }

    /// `F^{kr,rk} / F` from the explicit sum over subset pairs
    /// `S = U ∪ {r}`, `T = U ∪ {k}` with `k, r ∉ U`.
    pub fn offdiag_subset_pair(&self, lambda: &[f64], k: usize, r: usize) -> Result<f64> {
        let sums = self.interior_sums(lambda)?;
        if k == r || k >= self.n || r >= self.n {
            return Err(Error::Domain(format!("need distinct indices < {}, got {k}, {r}", self.n)));
        }
        Ok(self.pair_sum_from(&sums, lambda, k, r))
    }

    fn pair_sum_from(&self, sums: &[f64], lambda: &[f64], k: usize, r: usize) -> f64 {
        let shift = lambda[k] - lambda[r];
        -self.table.containing[r]
            .iter()
            .map(|&s| s as usize)
            .filter(|&s| !self.table.contains(s, k))
            .map(|s| 1.0 / (sums[s] * (sums[s] + shift)))
            .sum::<f64>()
    }

    /// `d²/dt² F̃(diag(λ) + tB)` at `t = 0`.
    pub fn second_directional(&self, lambda: &[f64], direction: &DMatrix<f64>) -> Result<f64> {
        let n = self.n;
        if direction.nrows() != n || direction.ncols() != n {
            return Err(Error::Domain(format!("direction must be {n} x {n}")));
        }
        let jet = self.jet(lambda)?;
        let mut acc = 0.0;
        for k in 0..n {
            for l in 0..n {
                acc += jet.hess_diag_at(k, l) * direction[(k, k)] * direction[(l, l)];
            }
            for r in 0..n {
                if r != k {
                    acc += jet.hess_offdiag_at(k, r) * direction[(k, r)] * direction[(r, k)];
                }
            }
        }
        Ok(acc)
    }

    /// `F̃` and `∂F̃/∂A` for a symmetric matrix via its eigendecomposition.
    pub fn matrix_jet(&self, a: &DMatrix<f64>) -> Result<MatrixJet> {
        let n = self.n;
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::Domain(format!("matrix must be {n} x {n}")));
        }
        let asym = (a - a.transpose()).amax();
        if asym > 1e-12 * (1.0 + a.amax()) {
            return Err(Error::Domain(format!("matrix is not symmetric (asymmetry {asym:e})")));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite matrix entry".into()));
        }
        let eig = SymmetricEigen::try_new(a.clone(), 1e-15, 10_000)
            .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
        let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let (tilde, eigen_grad) = self.gradient(&eigenvalues)?;
        let v = &eig.eigenvectors;
        let mut grad = DMatrix::zeros(n, n);
        for k in 0..n {
            let col = v.column(k);
            grad += eigen_grad[k] * col * col.transpose();
        }
        Ok(MatrixJet { value_tilde: tilde, grad, eigenvalues, eigenvectors: eig.eigenvectors, eigen_grad })
    }
}

fn is_tie(x: f64, y: f64) -> bool {
    (x - y).abs() < TIE_TOLERANCE * (1.0 + x.abs() + y.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(n: usize, p: usize) -> PConvexOperator {
        PConvexOperator::new(n, p).unwrap()
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(16, 8), 12870);
        assert_eq!(binomial(3, 0), 1);
        assert_eq!(binomial(2, 3), 0);
    }

    #[test]
    fn subset_sums_enumerate_lexicographically() {
        let o = op(3, 2);
        assert_eq!(o.subset_sums(&[1.0, 2.0, 3.0]).unwrap(), vec![3.0, 4.0, 5.0]);
        let subsets: Vec<_> = o.subsets().collect();
        assert_eq!(subsets, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(o.subset_sums(&[2.0, -1.0, -1.0]).unwrap(), vec![1.0, 1.0, -2.0]);
    }

    #[test]
    fn subset_sums_of_ones_equal_p() {
        for n in 2..=7 {
            for p in 1..=n {
                let sums = op(n, p).subset_sums(&vec![1.0; n]).unwrap();
                assert_eq!(sums.len(), binomial(n, p));
                assert!(sums.iter().all(|&s| s == p as f64));
            }
        }
    }

    #[test]
    fn p_out_of_range_is_a_domain_error() {
        assert!(matches!(PConvexOperator::new(3, 0), Err(Error::Domain(_))));
        assert!(matches!(PConvexOperator::new(3, 4), Err(Error::Domain(_))));
        assert!(matches!(PConvexOperator::new(17, 3), Err(Error::DimensionTooLarge { .. })));
        assert!(op(3, 2).subset_sums(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn cone_margin_examples() {
        let m = op(3, 2).cone_margin(&[2.0, -1.0, -1.0]).unwrap();
        assert_eq!(m.min_subset_sum, -2.0);
        assert_eq!(m.witness_subset, vec![1, 2]);
        assert!(!m.inside());

        let m = op(3, 1).cone_margin(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.min_subset_sum, 1.0);
        // lexicographically smallest minimizer
        assert_eq!(m.witness_subset, vec![0]);

        let m = op(3, 2).cone_margin(&[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(m.min_subset_sum, 3.0);
        assert_eq!(m.witness_subset, vec![1, 2]);
        assert_eq!(op(3, 2).margin(&[3.0, 2.0, 1.0]), 3.0);
    }

    #[test]
    fn eval_examples() {
        let o = op(3, 2);
        let v = o.eval(&[1.0, 2.0, 3.0]).unwrap();
        assert!(v.f.defined);
        assert!((v.f.value() - 60.0).abs() < 1e-12);
        assert!((v.tilde - 60f64.powf(1.0 / 3.0)).abs() < 1e-13);

        // scaled ones: F = p^C / rho^C, F~ = p / rho
        for (n, p) in [(2, 1), (3, 2), (5, 3), (6, 4)] {
            let rho = 1.7;
            let o = op(n, p);
            let c = binomial(n, p) as f64;
            let v = o.eval(&vec![1.0 / rho; n]).unwrap();
            let expect_log = c * (p as f64).ln() - c * rho.ln();
            assert!((v.f.log_magnitude - expect_log).abs() < 1e-12 * expect_log.abs().max(1.0));
            assert!((v.tilde - p as f64 / rho).abs() < 1e-13);
        }

        // p = n: single subset
        let v = op(4, 4).eval(&[3.0, -1.0, 0.5, -0.25]).unwrap();
        assert!((v.f.value() - 2.25).abs() < 1e-14);
        assert!((v.tilde - 2.25).abs() < 1e-14);
    }

    #[test]
    fn eval_on_boundary_and_outside() {
        let o = op(3, 2);
        let v = o.eval(&[1.0, 1.0, -1.0]).unwrap();
        assert!(!v.f.defined);
        assert_eq!(v.f.value(), 0.0);
        assert_eq!(v.tilde, 0.0);

        let v = o.eval(&[2.0, -1.0, -1.0]).unwrap();
        assert!(!v.f.defined);
        assert!(v.tilde.is_nan());
    }

    #[test]
    fn jet_examples_for_123() {
        let jet = op(3, 2).jet(&[1.0, 2.0, 3.0]).unwrap();
        let fg = jet.f_grad();
        assert!((fg[0] - 35.0).abs() < 1e-12);
        assert!((fg[1] - 32.0).abs() < 1e-12);
        assert!((fg[2] - 27.0).abs() < 1e-12);
        let fh = jet.f_hess_diag();
        assert!((fh[1] - 12.0).abs() < 1e-12);
        let fo = jet.f_hess_offdiag();
        assert!((fo[1] + 3.0).abs() < 1e-12);
        // quotient form and subset-pair form agree: -F / (5 * 4)
        let pair = op(3, 2).offdiag_subset_pair(&[1.0, 2.0, 3.0], 0, 1).unwrap() * 60.0;
        assert!((pair + 3.0).abs() < 1e-12);
    }

    #[test]
    fn jet_refuses_outside_open_cone() {
        assert!(matches!(op(3, 2).jet(&[1.0, 1.0, -1.0]), Err(Error::OutsideCone { .. })));
        assert!(op(3, 2).gradient(&[2.0, -1.0, -1.0]).is_err());
    }

    #[test]
    fn repeated_eigenvalues_use_pair_formula() {
        let o = op(4, 2);
        let lambda = [1.0, 1.0, 2.0, 0.5];
        let jet = o.jet(&lambda).unwrap();
        let expect = o.offdiag_subset_pair(&lambda, 0, 1).unwrap();
        assert!(jet.f_offdiag_ratio[1].is_finite());
        assert_eq!(jet.f_offdiag_ratio[1], expect);
        // the limit of the quotient is F^{kk,kk} - F^{kk,rr} at a tie
        let limit = jet.f_hess_ratio[0] - jet.f_hess_ratio[1];
        assert!((expect - limit).abs() < 1e-12 * expect.abs());
    }

    #[test]
    fn second_directional_zero_direction() {
        let b = DMatrix::zeros(3, 3);
        assert_eq!(op(3, 2).second_directional(&[1.0, 2.0, 3.0], &b).unwrap(), 0.0);
    }

    #[test]
    fn matrix_jet_diagonal_and_identity() {
        let o = op(3, 2);
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let mj = o.matrix_jet(&a).unwrap();
        let jet = o.jet(&[1.0, 2.0, 3.0]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { jet.grad[i] } else { 0.0 };
                assert!((mj.grad[(i, j)] - expect).abs() < 1e-14);
            }
        }
        for (n, p) in [(2, 1), (3, 2), (4, 3)] {
            let o = op(n, p);
            let mj = o.matrix_jet(&DMatrix::identity(n, n)).unwrap();
            assert!((mj.value_tilde - p as f64).abs() < 1e-13);
            let tr: f64 = (0..n).map(|i| mj.grad[(i, i)]).sum();
            assert!((tr - p as f64).abs() < 1e-13);
            for i in 0..n {
                assert!((mj.grad[(i, i)] - p as f64 / n as f64).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn matrix_jet_rejects_asymmetric() {
        let mut a = DMatrix::identity(3, 3);
        a[(0, 1)] = 0.5;
        assert!(op(3, 2).matrix_jet(&a).is_err());
    }

    #[test]
    fn theta_values() {
        assert!((theta_constant(3, 2).unwrap() - 1.0 / 6.0).abs() < 1e-16);
        assert!((theta_constant(2, 1).unwrap() - 0.5).abs() < 1e-16);
        assert!((theta_constant(2, 2).unwrap() - 0.5).abs() < 1e-16);
        assert!(theta_constant(2, 3).is_err());
        // p = n: F^{jj} = 1 for every j, so the bound 1 >= theta * n is exact
        let jet = op(2, 2).jet(&[0.7, 0.4]).unwrap();
        let g = jet.f_grad();
        assert!((g[1] - 0.5 * (g[0] + g[1])).abs() < 1e-15);
    }

    #[test]
    fn spectrum_construction() {
        let s = EigenSpectrum::sorted(vec![1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.values(), &[3.0, 2.0, 1.0]);
        assert!(s.is_sorted_descending());
        assert!(!EigenSpectrum::new(vec![1.0, 2.0]).unwrap().is_sorted_descending());
        assert!(EigenSpectrum::new(vec![1.0]).is_err());
        assert!(EigenSpectrum::new(vec![1.0, f64::NAN]).is_err());
    }
}
