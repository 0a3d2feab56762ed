//! Shared fixtures for the criterion benches in `benches/`.

use pconvex::prescribed::BoundData;
use pconvex::surface::SurfaceProblem;
use pconvex::verification::{sample_cone, SampleSpec};
use pconvex::{PConvexOperator, PrescribedData, PrescribedKind, RadialField, SphericalGrid, TargetProfile};

/// `count` seeded interior spectra for `(n, p)`.
pub fn spectra(n: usize, p: usize, count: usize) -> Vec<Vec<f64>> {
    sample_cone(&SampleSpec::new(n, p, count, 1).with_floor(0.1)).expect("cone sampling")
}

/// Manufactured surface data around a tilted target, bound for `n = 2`.
pub fn manufactured(p: usize) -> (PConvexOperator, BoundData) {
    let op = PConvexOperator::new(2, p).expect("operator");
    let target = TargetProfile::Quadratic { delta: 0.1, direction: [0.3, 0.0, 1.0] };
    let data = PrescribedData::new(0.6, 1.6, PrescribedKind::Manufactured { target, eps: 1.0 }).expect("data");
    let rhs = data.bind(&op).expect("bind");
    (op, rhs)
}

/// Problem on an `n_theta × 2 n_theta` grid and a nearby admissible iterate.
pub fn surface_problem<'a>(
    op: &'a PConvexOperator,
    rhs: &'a BoundData,
    n_theta: usize,
) -> (SurfaceProblem<'a>, Vec<f64>) {
    let grid = SphericalGrid::new(n_theta, 2 * n_theta).expect("grid");
    let problem = SurfaceProblem::new(grid, op, rhs).expect("problem");
    let x = RadialField::from_fn(grid, |x| 1.0 + 0.02 * x[0] * x[2]).expect("field").values().to_vec();
    (problem, x)
}
