//! CSV field dumps and Wavefront OBJ meshes.

use std::io::{self, Write};

use crate::dirichlet::{DiscreteDomain, NodeKind};
use crate::geometry::{CurvatureField, RadialField};
use crate::spectral::PConvexOperator;

pub const SURFACE_CSV_HEADER: &str = "theta,phi,rho,kappa1,kappa2,Ftilde,u,margin";
pub const DIRICHLET_CSV_HEADER: &str = "x,y,u,lambda1,lambda2,margin,monitor";

/// One row per node in grid order.
pub fn write_surface_csv(w: &mut impl Write, field: &RadialField, curvature: &CurvatureField) -> io::Result<()> {
    writeln!(w, "{SURFACE_CSV_HEADER}")?;
    let grid = field.grid();
    for (i, (rho, c)) in field.values().iter().zip(&curvature.nodes).enumerate() {
        let (theta, phi) = grid.angles(i);
        writeln!(
            w,
            "{theta:.17e},{phi:.17e},{rho:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            c.kappa[0], c.kappa[1], c.tilde, c.support, c.margin
        )?;
    }
    Ok(())
}

/// Triangulated radial graph with counterclockwise faces seen from outside.
pub fn write_surface_obj(w: &mut impl Write, field: &RadialField) -> io::Result<()> {
    let grid = field.grid();
    writeln!(w, "# radial graph, {} x {} grid", grid.n_phi(), grid.n_theta())?;
    for i in 0..grid.len() {
        let x = field.position(i);
        writeln!(w, "v {:.17e} {:.17e} {:.17e}", x[0], x[1], x[2])?;
    }
    // OBJ indices are 1-based
    let v = |i: usize| i + 1;
    let (nt, np) = (grid.n_theta(), grid.n_phi());
    for b in 0..np {
        let b1 = (b + 1) % np;
        writeln!(w, "f {} {} {}", v(grid.north()), v(grid.ring_index(0, b)), v(grid.ring_index(0, b1)))?;
    }
    for a in 0..nt - 1 {
        for b in 0..np {
            let b1 = (b + 1) % np;
            let (p, q, r, s) =
                (grid.ring_index(a, b), grid.ring_index(a + 1, b), grid.ring_index(a + 1, b1), grid.ring_index(a, b1));
            writeln!(w, "f {} {} {}", v(p), v(q), v(r))?;
            writeln!(w, "f {} {} {}", v(p), v(r), v(s))?;
        }
    }
    for b in 0..np {
        let b1 = (b + 1) % np;
        writeln!(
            w,
            "f {} {} {}",
            v(grid.ring_index(nt - 1, b)),
            v(grid.south()),
            v(grid.ring_index(nt - 1, b1))
        )?;
    }
    Ok(())
}

/// Interior and boundary nodes; derivative columns are empty on the
/// boundary, and the monitor column is empty when `monitor` is `None`.
pub fn write_dirichlet_csv(
    w: &mut impl Write,
    disc: &DiscreteDomain,
    u: &[f64],
    op: &PConvexOperator,
    monitor: Option<&[f64]>,
) -> io::Result<()> {
    writeln!(w, "{DIRICHLET_CSV_HEADER}")?;
    let grid = disc.grid();
    for i in 0..grid.len() {
        let x = grid.point(i);
        match grid.kind(i) {
            NodeKind::Interior(k) => {
                let lambda = disc.jet(u, k).hess.eigenvalues();
                let m = monitor.map(|m| format!("{:.17e}", m[k])).unwrap_or_default();
                writeln!(
                    w,
                    "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{m}",
                    x[0],
                    x[1],
                    u[k],
                    lambda[0],
                    lambda[1],
                    op.margin(&lambda)
                )?;
            }
            NodeKind::Boundary => {
                writeln!(w, "{:.17e},{:.17e},{:.17e},,,,", x[0], x[1], disc.boundary().value(x))?;
            }
            NodeKind::Outside => {}
        }
    }
    Ok(())
}
