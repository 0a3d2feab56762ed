use pconvex::geometry::Vec3;
use pconvex::{
    curvature_field, homotopy_solve, newton_solve, point_frame, residual, HomotopySchedule, NewtonConfig,
    PConvexOperator, PrescribedData, PrescribedKind, RadialField, RightHandSide, SphericalGrid, TargetProfile,
};

/// `f ≡ value`, independent of position and normal.
struct Constant(f64);

impl RightHandSide for Constant {
    fn value(&self, _: &Vec3, _: &Vec3) -> f64 {
        self.0
    }
}

fn op(p: usize) -> PConvexOperator {
    PConvexOperator::new(2, p).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn unit_sphere_residual_against_a_larger_constant() {
    let grid = SphericalGrid::new(8, 16).unwrap();
    let field = RadialField::constant(grid, 1.0).unwrap();
    for p in 1..=2 {
        let o = op(p);
        let c = o.subset_count() as i32;
        let r = residual(&field, &Constant(((p + 1) as f64).powi(c)), &o).unwrap();
        assert!(r.iter().all(|v| (v + 1.0).abs() < 1e-12), "p = {p}");
    }
}

#[test]
fn ellipsoid_pole_curvatures() {
    // x² + y² + z²/c² = 1 has both principal curvatures c at the poles
    let c: f64 = 1.2;
    let mut errs = Vec::new();
    for n_theta in [16, 32, 64] {
        let grid = SphericalGrid::new(n_theta, 2 * n_theta).unwrap();
        let field =
            RadialField::from_fn(grid, |x| 1.0 / (x[0] * x[0] + x[1] * x[1] + x[2] * x[2] / (c * c)).sqrt()).unwrap();
        let frame = point_frame(&field, grid.north()).unwrap();
        errs.push(frame.curvatures.iter().map(|k| (k - c).abs()).fold(0.0, f64::max));
        let south = point_frame(&field, grid.south()).unwrap();
        assert!((south.curvatures[0] - frame.curvatures[0]).abs() < 1e-12);
    }
    assert!(errs[2] < 1e-3, "{errs:?}");
    // second order in the colatitude step
    assert!(errs[0] / errs[1] > 3.0 && errs[1] / errs[2] > 3.0, "{errs:?}");
}

#[test]
fn radial_family_of_spheres() {
    let grid = SphericalGrid::new(8, 16).unwrap();
    let field = RadialField::constant(grid, 2.0).unwrap();
    let cf = curvature_field(&field, &op(1)).unwrap();
    // p = 1, n = 2: F = κ1 κ2 = 1/4
    assert!(cf.nodes.iter().all(|n| (n.tilde.powi(2) - 0.25).abs() < 1e-12));
    let pure = PrescribedData::new(0.5, 4.0, PrescribedKind::RadialPower { eps: 0.0, exponent: None, scale: None })
        .unwrap();
    let o = op(2);
    let r = residual(&field, &pure.bind(&o).unwrap(), &o).unwrap();
    assert!(r.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn newton_history_is_monotone_and_stays_in_the_cone() {
    let grid = SphericalGrid::new(16, 32).unwrap();
    let target = TargetProfile::Quadratic { delta: 0.15, direction: [1.0, 0.0, 0.0] };
    let data = PrescribedData::new(0.6, 1.6, PrescribedKind::Manufactured { target, eps: 1.0 }).unwrap();
    for p in 1..=2 {
        let o = op(p);
        let rhs = data.bind(&o).unwrap();
        let initial = RadialField::constant(grid, 1.0).unwrap();
        let (sol, rep) = newton_solve(&initial, &rhs, &o, &NewtonConfig::default()).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rep.residual_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(rep.min_cone_margin > 0.0 && rep.min_support > 0.0);
        assert!(residual(&sol, &rhs, &o).unwrap().iter().all(|r| r.abs() <= 1e-10));
    }
}

#[test]
fn schedule_refinement_and_bisection_exhaustion() {
    let grid = SphericalGrid::new(16, 32).unwrap();
    let target = TargetProfile::Linear { delta: 0.3, direction: [0.0, 0.0, 1.0] };
    let data = PrescribedData::new(0.35, 1.5, PrescribedKind::Manufactured { target, eps: 2.0 }).unwrap();
    let o = op(2);

    // one Newton iteration per t-solve cannot make progress, so the t-step
    // is bisected until it underflows
    let tight = NewtonConfig { max_iter: 1, ..Default::default() };
    let (_, rep) = homotopy_solve(&data, &o, grid, &HomotopySchedule { steps: 1, eps: 0.1 }, &tight).unwrap();
    assert!(!rep.converged);
    assert!(rep.failure.as_deref().unwrap_or("").contains("underflow"), "{rep:?}");
    assert!(rep.last_good_t < 1.0);

    let cfg = NewtonConfig::default();
    let (fine, rep) = homotopy_solve(&data, &o, grid, &HomotopySchedule { steps: 20, eps: 0.1 }, &cfg).unwrap();
    assert!(rep.converged, "{rep:?}");
    assert_eq!(rep.last_good_t, 1.0);
    assert!(rep.t_history.iter().filter(|s| s.converged).count() >= 20);
    let h = grid.spacing();
    assert!(rep.min_rho >= data.r1 - 2.0 * h && rep.max_rho <= data.r2 + 2.0 * h);
    // the end point does not depend on the path
    if let Ok((coarse, rep1)) = homotopy_solve(&data, &o, grid, &HomotopySchedule { steps: 1, eps: 0.1 }, &cfg) {
        if rep1.converged {
            assert!(max_diff(coarse.values(), fine.values()) < 1e-9);
        }
    }
}

#[test]
fn perturbed_radial_data_passes_checks_and_solves() {
    let (r1, r2, eps): (f64, f64, f64) = (0.7, 1.4, 0.5);
    let o = op(1);
    let c = o.subset_count() as f64;
    let delta = eps * (1.0 - r1.powf(c)).min(r2.powf(c) - 1.0);
    let data = PrescribedData::new(r1, r2, PrescribedKind::PerturbedRadial { eps, delta, direction: [0.0, 1.0, 1.0] })
        .unwrap();
    let grid = SphericalGrid::new(12, 24).unwrap();
    let schedule = HomotopySchedule::with_default_eps(4, r2, &o).unwrap();
    let (sol, rep) = homotopy_solve(&data, &o, grid, &schedule, &NewtonConfig::default()).unwrap();
    assert!(rep.converged, "{rep:?}");
    assert!(rep.barrier.as_ref().unwrap().passed && rep.monotonicity.as_ref().unwrap().passed);
    let h = grid.spacing();
    assert!(sol.values().iter().all(|v| *v >= r1 - 2.0 * h && *v <= r2 + 2.0 * h));
    // a normal-dependent perturbation moves the solution off the unit sphere
    assert!(sol.values().iter().any(|v| (v - 1.0).abs() > 1e-4));
}
