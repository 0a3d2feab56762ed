//! Star-shaped surfaces in R³ as radial graphs `X(x) = ρ(x) x` over a
//! latitude-longitude discretization of the unit sphere.
//!
//! Unknowns are ordered north pole first, then rings of constant colatitude
//! from north to south (longitude fastest), then the south pole. Each node
//! carries a linear stencil producing its local jet
//! `(ρ, ∇ρ, ∇²ρ)` in an orthonormal frame of the sphere.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Sym2;
use crate::spectral::PConvexOperator;

pub type Vec3 = [f64; 3];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Which kind of node an index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Node {
    North,
    South,
    /// Ring `ring` (0 is nearest the north pole), longitude index `lon`.
    Ring { ring: usize, lon: usize },
}

/// Uniform latitude-longitude grid with two pole nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SphericalGrid {
    n_theta: usize,
    n_phi: usize,
}

impl SphericalGrid {
    /// `n_theta` interior colatitudes at spacing `π/(n_theta+1)` and
    /// `n_phi` longitudes at spacing `2π/n_phi`.
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 8 {
            return Err(Error::Grid(format!("n_theta must be >= 8, got {n_theta}")));
        }
        if n_phi < 16 || n_phi % 2 != 0 {
            return Err(Error::Grid(format!("n_phi must be even and >= 16, got {n_phi}")));
        }
        Ok(Self { n_theta, n_phi })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn dtheta(&self) -> f64 {
        std::f64::consts::PI / (self.n_theta + 1) as f64
    }

    pub fn dphi(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n_phi as f64
    }

    /// Largest grid spacing in radians.
    pub fn spacing(&self) -> f64 {
        self.dtheta().max(self.dphi())
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn north(&self) -> usize {
        0
    }

    pub fn south(&self) -> usize {
        self.len() - 1
    }

    pub fn ring_index(&self, ring: usize, lon: usize) -> usize {
        1 + ring * self.n_phi + lon % self.n_phi
    }

    pub fn node(&self, i: usize) -> Node {
        if i == 0 {
            Node::North
        } else if i == self.len() - 1 {
            Node::South
        } else {
            let k = i - 1;
            Node::Ring { ring: k / self.n_phi, lon: k % self.n_phi }
        }
    }

    /// Colatitude and longitude of a node; the poles report `φ = 0`.
    pub fn angles(&self, i: usize) -> (f64, f64) {
        match self.node(i) {
            Node::North => (0.0, 0.0),
            Node::South => (std::f64::consts::PI, 0.0),
            Node::Ring { ring, lon } => ((ring + 1) as f64 * self.dtheta(), lon as f64 * self.dphi()),
        }
    }

    /// Unit position `x` and the orthonormal tangent frame `(e1, e2)` used
    /// for the jet at node `i`: `e1 = ∂_θ`, `e2 = ∂_φ / sin θ` on rings and
    /// the fixed `(x̂, ŷ)` pair at both poles.
    pub fn frame(&self, i: usize) -> (Vec3, Vec3, Vec3) {
        match self.node(i) {
            Node::North => ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
            Node::South => ([0.0, 0.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
            Node::Ring { .. } => {
                let (t, p) = self.angles(i);
                let (st, ct) = t.sin_cos();
                let (sp, cp) = p.sin_cos();
                ([st * cp, st * sp, ct], [ct * cp, ct * sp, -st], [-sp, cp, 0.0])
            }
        }
    }

    pub fn direction(&self, i: usize) -> Vec3 {
        self.frame(i).0
    }

    /// Linear stencils producing the jet of every node.
    pub fn stencils(&self) -> Vec<Stencil> {
        (0..self.len()).map(|i| self.stencil(i)).collect()
    }

    /// Stencil of node `i`: second-order central differences on rings with
    /// the connection terms of the sphere, and a least-squares fit of the
    /// `n_phi/2` through-the-pole difference lines at the poles.
    pub fn stencil(&self, i: usize) -> Stencil {
        let mut st = Stencil::default();
        let dt = self.dtheta();
        match self.node(i) {
            Node::North | Node::South => {
                let ring = if i == 0 { 0 } else { self.n_theta - 1 };
                let m = (self.n_phi / 2) as f64;
                st.add(i, [1.0, 0.0, 0.0, -2.0 / (dt * dt), 0.0, -2.0 / (dt * dt)]);
                for lon in 0..self.n_phi {
                    let phi = lon as f64 * self.dphi();
                    let (s1, c1) = phi.sin_cos();
                    let (s2, c2) = (2.0 * phi).sin_cos();
                    let half_trace = 1.0 / (m * dt * dt);
                    let dev = 2.0 * c2 / (m * dt * dt);
                    st.add(
                        self.ring_index(ring, lon),
                        [
                            0.0,
                            c1 / (m * dt),
                            s1 / (m * dt),
                            half_trace + dev,
                            2.0 * s2 / (m * dt * dt),
                            half_trace - dev,
                        ],
                    );
                }
            }
            Node::Ring { ring, lon } => {
                let dp = self.dphi();
                let theta = (ring + 1) as f64 * dt;
                let (s, c) = theta.sin_cos();
                let cot = c / s;
                let up = |l: usize| if ring == 0 { 0 } else { self.ring_index(ring - 1, l) };
                let down =
                    |l: usize| if ring + 1 == self.n_theta { self.len() - 1 } else { self.ring_index(ring + 1, l) };
                let left = (lon + self.n_phi - 1) % self.n_phi;
                let right = (lon + 1) % self.n_phi;

                // coordinate differences as weights on (θ-derivative, θθ, φ, φφ, θφ)
                let d_t = 1.0 / (2.0 * dt);
                let d_tt = 1.0 / (dt * dt);
                let d_p = 1.0 / (2.0 * dp);
                let d_pp = 1.0 / (dp * dp);
                let d_tp = 1.0 / (4.0 * dt * dp);
                let jet = |r_t: f64, r_tt: f64, r_p: f64, r_pp: f64, r_tp: f64, value: f64| -> [f64; 6] {
                    [
                        value,
                        r_t,
                        r_p / s,
                        r_tt,
                        (r_tp - cot * r_p) / s,
                        r_pp / (s * s) + cot * r_t,
                    ]
                };
                st.add(i, jet(0.0, -2.0 * d_tt, 0.0, -2.0 * d_pp, 0.0, 1.0));
                st.add(up(lon), jet(-d_t, d_tt, 0.0, 0.0, 0.0, 0.0));
                st.add(down(lon), jet(d_t, d_tt, 0.0, 0.0, 0.0, 0.0));
                st.add(self.ring_index(ring, left), jet(0.0, 0.0, -d_p, d_pp, 0.0, 0.0));
                st.add(self.ring_index(ring, right), jet(0.0, 0.0, d_p, d_pp, 0.0, 0.0));
                st.add(down(right), jet(0.0, 0.0, 0.0, 0.0, d_tp, 0.0));
                st.add(down(left), jet(0.0, 0.0, 0.0, 0.0, -d_tp, 0.0));
                st.add(up(right), jet(0.0, 0.0, 0.0, 0.0, -d_tp, 0.0));
                st.add(up(left), jet(0.0, 0.0, 0.0, 0.0, d_tp, 0.0));
            }
        }
        st
    }

    /// Half bandwidth of the node coupling graph.
    pub fn bandwidth(&self) -> usize {
        self.n_phi + 1
    }
}

/// Weights mapping nodal values to the jet
/// `(ρ, ρ_1, ρ_2, ρ_11, ρ_12, ρ_22)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stencil {
    pub entries: Vec<(usize, [f64; 6])>,
}

impl Stencil {
    fn add(&mut self, node: usize, w: [f64; 6]) {
        if let Some((_, acc)) = self.entries.iter_mut().find(|(k, _)| *k == node) {
            for (a, b) in acc.iter_mut().zip(w) {
                *a += b;
            }
        } else {
            self.entries.push((node, w));
        }
    }

    pub fn apply(&self, values: &[f64]) -> LocalJet {
        let mut j = [0.0; 6];
        for (k, w) in &self.entries {
            let v = values[*k];
            for c in 0..6 {
                j[c] += w[c] * v;
            }
        }
        LocalJet::from_array(j)
    }
}

/// `ρ`, its gradient and covariant Hessian in an orthonormal frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalJet {
    pub rho: f64,
    pub grad: [f64; 2],
    pub hess: Sym2,
}

impl LocalJet {
    pub fn from_array(j: [f64; 6]) -> Self {
        Self { rho: j[0], grad: [j[1], j[2]], hess: Sym2::new(j[3], j[4], j[5]) }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.rho, self.grad[0], self.grad[1], self.hess.a, self.hess.b, self.hess.c]
    }
}

/// Discrete radial function over a [`SphericalGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: SphericalGrid,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: SphericalGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!("expected {} values, got {}", grid.len(), values.len())));
        }
        if let Some(i) = values.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Precondition(format!("rho must be positive, node {i} has {}", values[i])));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: SphericalGrid, rho: f64) -> Result<Self> {
        Self::new(grid, vec![rho; grid.len()])
    }

    /// Samples `ρ(x)` at every node direction.
    pub fn from_fn(grid: SphericalGrid, f: impl Fn(&Vec3) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.direction(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &SphericalGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn north_value(&self) -> f64 {
        self.values[0]
    }

    pub fn south_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn position(&self, i: usize) -> Vec3 {
        let x = self.grid.direction(i);
        let r = self.values[i];
        [r * x[0], r * x[1], r * x[2]]
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|v| v * c).collect())
    }
}

/// `∇ρ` and `∇²ρ` at a node in its orthonormal frame.
pub fn sphere_derivatives(field: &RadialField, node: usize) -> LocalJet {
    field.grid.stencil(node).apply(&field.values)
}

/// Geometric data of the surface at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointFrame {
    pub position: Vec3,
    pub normal: Vec3,
    pub metric: Sym2,
    pub second_form: Sym2,
    /// Principal curvatures, descending.
    pub curvatures: [f64; 2],
    pub support: f64,
}

/// Surface quantities from the local jet and the node's frame.
pub fn frame_from_jet(jet: &LocalJet, x: &Vec3, e1: &Vec3, e2: &Vec3) -> Result<PointFrame> {
    let LocalJet { rho, grad: [p1, p2], hess } = *jet;
    if !(rho > 0.0) {
        return Err(Error::Precondition(format!("rho must be positive, got {rho}")));
    }
    let w = (rho * rho + p1 * p1 + p2 * p2).sqrt();
    let metric = Sym2::new(rho * rho + p1 * p1, p1 * p2, rho * rho + p2 * p2);
    let second_form = Sym2::new(
        (rho * rho + 2.0 * p1 * p1 - rho * hess.a) / w,
        (2.0 * p1 * p2 - rho * hess.b) / w,
        (rho * rho + 2.0 * p2 * p2 - rho * hess.c) / w,
    );
    let g_inv_sqrt = metric.inv_sqrt()?;
    let curvatures = second_form.congruence(&g_inv_sqrt).eigenvalues();
    let mut normal = [0.0; 3];
    for c in 0..3 {
        normal[c] = (rho * x[c] - p1 * e1[c] - p2 * e2[c]) / w;
    }
    Ok(PointFrame {
        position: [rho * x[0], rho * x[1], rho * x[2]],
        normal,
        metric,
        second_form,
        curvatures,
        support: rho * rho / w,
    })
}

pub fn point_frame(field: &RadialField, node: usize) -> Result<PointFrame> {
    let (x, e1, e2) = field.grid.frame(node);
    frame_from_jet(&sphere_derivatives(field, node), &x, &e1, &e2)
}

/// Per-node curvature data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeCurvature {
    pub kappa: [f64; 2],
    /// `F̃(κ)`; zero on the cone boundary, `NaN` outside.
    pub tilde: f64,
    pub margin: f64,
    pub support: f64,
}

/// [`curvature_field`] output: per-node values and global diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    pub nodes: Vec<NodeCurvature>,
    pub min_margin: f64,
    pub min_margin_node: usize,
    pub min_support: f64,
    pub max_support: f64,
    pub sup_abs_kappa: f64,
    /// Nodes whose curvatures lie outside the closed cone.
    pub outside: Vec<usize>,
}

/// Curvatures, `F̃`, cone margin and support function at every node.
/// Nodes outside the cone are flagged, not rejected.
pub fn curvature_field(field: &RadialField, op: &PConvexOperator) -> Result<CurvatureField> {
    if op.n() != 2 {
        return Err(Error::Domain(format!("surface geometry needs n = 2, operator has n = {}", op.n())));
    }
    let grid = field.grid;
    let nodes: Vec<NodeCurvature> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let f = point_frame(field, i)?;
            let v = op.eval(&f.curvatures)?;
            Ok(NodeCurvature {
                kappa: f.curvatures,
                tilde: v.tilde,
                margin: op.margin(&f.curvatures),
                support: f.support,
            })
        })
        .collect::<Result<_>>()?;
    let mut out = CurvatureField {
        nodes: Vec::new(),
        min_margin: f64::INFINITY,
        min_margin_node: 0,
        min_support: f64::INFINITY,
        max_support: f64::NEG_INFINITY,
        sup_abs_kappa: 0.0,
        outside: Vec::new(),
    };
    for (i, n) in nodes.iter().enumerate() {
        if n.margin < out.min_margin {
            out.min_margin = n.margin;
            out.min_margin_node = i;
        }
        if n.margin < 0.0 {
            out.outside.push(i);
        }
        out.min_support = out.min_support.min(n.support);
        out.max_support = out.max_support.max(n.support);
        out.sup_abs_kappa = out.sup_abs_kappa.max(n.kappa[0].abs()).max(n.kappa[1].abs());
    }
    out.nodes = nodes;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SphericalGrid {
        SphericalGrid::new(16, 32).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(SphericalGrid::new(7, 16).is_err());
        assert!(SphericalGrid::new(8, 15).is_err());
        assert!(SphericalGrid::new(8, 18).is_ok());
        assert!(SphericalGrid::new(8, 17).is_err());
        let g = SphericalGrid::new(8, 16).unwrap();
        assert_eq!(g.len(), 8 * 16 + 2);
        assert!((g.dtheta() - std::f64::consts::PI / 9.0).abs() < 1e-15);
        assert_eq!(g.dphi(), 2.0 * std::f64::consts::PI / 16.0);
    }

    #[test]
    fn frames_are_orthonormal() {
        let g = grid();
        for i in 0..g.len() {
            let (x, e1, e2) = g.frame(i);
            assert!((norm(&x) - 1.0).abs() < 1e-15);
            assert!((norm(&e1) - 1.0).abs() < 1e-15 && (norm(&e2) - 1.0).abs() < 1e-15);
            assert!(dot(&x, &e1).abs() < 1e-15 && dot(&x, &e2).abs() < 1e-15 && dot(&e1, &e2).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_field_has_zero_derivatives() {
        let f = RadialField::constant(grid(), 1.3).unwrap();
        for i in 0..f.grid().len() {
            let j = sphere_derivatives(&f, i);
            assert!((j.rho - 1.3).abs() < 1e-14);
            assert!(j.grad[0].abs() < 1e-11 && j.grad[1].abs() < 1e-11);
            assert!(j.hess.max_abs() < 1e-9, "node {i}: {:?}", j.hess);
        }
    }

    #[test]
    fn gradient_of_axisymmetric_field() {
        let g = SphericalGrid::new(32, 64).unwrap();
        let f = RadialField::from_fn(g, |x| 1.0 + 0.1 * x[2]).unwrap();
        let mut err = 0.0f64;
        for i in 0..g.len() {
            let (t, _) = g.angles(i);
            let j = sphere_derivatives(&f, i);
            if let Node::Ring { .. } = g.node(i) {
                err = err.max((j.grad[0] + 0.1 * t.sin()).abs()).max(j.grad[1].abs());
            }
        }
        assert!(err < 0.1 * g.dtheta().powi(2), "{err}");
    }

    #[test]
    fn sphere_of_radius_r() {
        let r = 2.5;
        let f = RadialField::constant(grid(), r).unwrap();
        for i in [0, 5, 200, f.grid().south()] {
            let pf = point_frame(&f, i).unwrap();
            let x = f.grid().direction(i);
            assert!((pf.metric.a - r * r).abs() < 1e-10 && pf.metric.b.abs() < 1e-10);
            assert!((pf.second_form.a - r).abs() < 1e-8 && (pf.second_form.c - r).abs() < 1e-8);
            assert!((pf.curvatures[0] - 1.0 / r).abs() < 1e-9 && (pf.curvatures[1] - 1.0 / r).abs() < 1e-9);
            assert!((pf.support - r).abs() < 1e-10);
            for c in 0..3 {
                assert!((pf.normal[c] - x[c]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn unit_sphere_field() {
        let f = RadialField::constant(grid(), 1.0).unwrap();
        for p in 1..=2 {
            let op = PConvexOperator::new(2, p).unwrap();
            let cf = curvature_field(&f, &op).unwrap();
            assert!((cf.sup_abs_kappa - 1.0).abs() < 1e-9);
            for n in &cf.nodes {
                assert!((n.tilde - p as f64).abs() < 1e-9);
                assert!((n.support - 1.0).abs() < 1e-12);
            }
        }
        let f = RadialField::constant(grid(), 2.0).unwrap();
        let op = PConvexOperator::new(2, 1).unwrap();
        let cf = curvature_field(&f, &op).unwrap();
        for n in &cf.nodes {
            // F = κ1 κ2 = 1/4
            assert!((n.tilde * n.tilde - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn perturbed_sphere_is_inside_cone() {
        let g = SphericalGrid::new(64, 128).unwrap();
        let f = RadialField::from_fn(g, |x| 1.0 + 0.05 * x[2]).unwrap();
        let cf = curvature_field(&f, &PConvexOperator::new(2, 2).unwrap()).unwrap();
        assert!(cf.min_margin > 0.0);
        assert!(cf.outside.is_empty());
        assert!(cf.min_support > 0.0);
    }

    #[test]
    fn hessian_of_linear_function_includes_connection_terms() {
        // on the unit sphere the Hessian of x -> <x, e> is -<x, e> I
        let e = [0.6, 0.0, 0.8];
        let g = SphericalGrid::new(64, 128).unwrap();
        let f = RadialField::from_fn(g, |x| 2.0 + dot(x, &e)).unwrap();
        let mut err = 0.0f64;
        for i in 0..g.len() {
            let (x, e1, e2) = g.frame(i);
            let j = sphere_derivatives(&f, i);
            let xe = dot(&x, &e);
            err = err
                .max((j.hess.a + xe).abs())
                .max(j.hess.b.abs())
                .max((j.hess.c + xe).abs())
                .max((j.grad[0] - dot(&e1, &e)).abs())
                .max((j.grad[1] - dot(&e2, &e)).abs());
        }
        assert!(err < 5.0 * g.spacing().powi(2), "{err}");
    }

    #[test]
    fn nonpositive_rho_rejected() {
        let g = grid();
        assert!(RadialField::constant(g, 0.0).is_err());
        assert!(RadialField::new(g, vec![1.0; 3]).is_err());
    }
}
