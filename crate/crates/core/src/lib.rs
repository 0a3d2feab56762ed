//! Numerical toolkit for the p-convex curvature operator: spectral calculus,
//! prescribed curvature problems for star-shaped surfaces, a Dirichlet
//! problem on planar domains and randomized property suites.

pub mod dirichlet;
pub mod error;
pub mod export;
pub mod geometry;
pub mod linalg;
pub mod newton;
pub mod prescribed;
pub mod spectral;
pub mod surface;
pub mod verification;

pub use dirichlet::{
    global_c2_report, interior_monitor, residual_dirichlet, solve_dirichlet, BoundaryData, DirichletReport,
    DirichletRhs, DiscreteDomain, Domain, DomainGrid,
};
pub use error::{Error, Result};
pub use geometry::{curvature_field, point_frame, RadialField, SphericalGrid};
pub use newton::{JacobianMode, NewtonConfig};
pub use prescribed::{
    check_barrier_conditions, check_monotonicity_condition, ConditionReport, PrescribedData, PrescribedKind,
    RightHandSide, TargetProfile,
};
pub use spectral::{theta_constant, EigenSpectrum, PConvexOperator};
pub use surface::{homotopy_solve, newton_solve, residual, HomotopySchedule, SolveReport};
pub use verification::{PropertyReport, SampleSpec};
