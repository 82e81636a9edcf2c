//! Exact solutions, interpolation of initial data and discrete error norms.

use std::f64::consts::PI;

use nalgebra::Vector2;

use crate::assembly::{eval_edge_field, Discretization, DofMap};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::reference_basis::{high_order_quadrature, line_gauss3};
use crate::timestepper::FieldState;

/// A time-dependent field pair `(E, H_z)`.
pub trait ExactSolution: Sync {
    fn e(&self, t: f64, x: Point) -> Vector2<f64>;
    fn h(&self, t: f64, x: Point) -> f64;
}

/// Standing wave in the PEC unit square with `eps = mu = 1`:
///
/// ```text
/// H  = cos(m pi x) cos(n pi y) cos(w t)
/// Ex = -(n pi / w) cos(m pi x) sin(n pi y) sin(w t)
/// Ey =  (m pi / w) sin(m pi x) cos(n pi y) sin(w t)
/// ```
///
/// with `w = pi sqrt(m^2 + n^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityMode {
    pub m: u32,
    pub n: u32,
}

impl CavityMode {
    pub fn new(m: u32, n: u32) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "cavity mode indices must be >= 1, got ({m}, {n})"
            )));
        }
        Ok(CavityMode { m, n })
    }

    pub fn omega(&self) -> f64 {
        PI * ((self.m * self.m + self.n * self.n) as f64).sqrt()
    }
}

impl ExactSolution for CavityMode {
    fn e(&self, t: f64, x: Point) -> Vector2<f64> {
        let (km, kn, w) = (self.m as f64 * PI, self.n as f64 * PI, self.omega());
        let s = (w * t).sin();
        Vector2::new(
            -kn / w * (km * x.x).cos() * (kn * x.y).sin() * s,
            km / w * (km * x.x).sin() * (kn * x.y).cos() * s,
        )
    }

    fn h(&self, t: f64, x: Point) -> f64 {
        let (km, kn) = (self.m as f64 * PI, self.n as f64 * PI);
        (km * x.x).cos() * (kn * x.y).cos() * (self.omega() * t).cos()
    }
}

/// Functional form of [`CavityMode`]: `(E, H)` at `(t, x)`.
pub fn cavity_mode(m: u32, n: u32, t: f64, x: Point) -> Result<(Vector2<f64>, f64)> {
    let c = CavityMode::new(m, n)?;
    Ok((c.e(t, x), c.h(t, x)))
}

/// The zero solution.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroSolution;

impl ExactSolution for ZeroSolution {
    fn e(&self, _t: f64, _x: Point) -> Vector2<f64> {
        Vector2::zeros()
    }
    fn h(&self, _t: f64, _x: Point) -> f64 {
        0.0
    }
}

/// Line integrals of `field` along every interior edge, oriented from the
/// lower to the higher vertex index (3-point Gauss).
pub fn interpolate_edges(
    mesh: &Mesh,
    dofs: &DofMap,
    field: impl Fn(Point) -> Vector2<f64>,
) -> Vec<f64> {
    (0..dofs.num_edge_dofs())
        .map(|i| {
            let [a, b] = mesh.edges()[dofs.dof_edge(i)].vertices;
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            let tangent = pb - pa;
            line_gauss3()
                .iter()
                .map(|&(s, w)| w * field(pa + s * tangent).dot(&tangent))
                .sum()
        })
        .collect()
}

/// Element means of `f`.
pub fn element_means(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Result<Vec<f64>> {
    (0..mesh.num_elements())
        .map(|t| {
            let kind = mesh.elements()[t].kind;
            let map = mesh.affine_map(t)?;
            Ok(
                high_order_quadrature(kind).integrate(kind, |p| f(map.apply(p)))
                    / kind.reference_measure(),
            )
        })
        .collect()
}

/// Leapfrog start values: `e` interpolated at `t0`, `h` averaged at
/// `t0 + dt/2`.
pub fn initial_state(
    disc: &Discretization,
    exact: &dyn ExactSolution,
    t0: f64,
    dt: f64,
) -> Result<FieldState> {
    let th = t0 + 0.5 * dt;
    Ok(FieldState {
        e: interpolate_edges(&disc.mesh, &disc.dofs, |x| exact.e(t0, x)),
        h: element_means(&disc.mesh, |x| exact.h(th, x))?,
        time_e: t0,
        time_h: th,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorNorms {
    /// `||E_h - E||` in L2.
    pub e: f64,
    /// `||H_h - H||` in L2.
    pub h: f64,
    /// `||H_h - mean_T H||` in L2: the superconvergent quantity.
    pub h_super: f64,
}

/// L2 errors of a state against `exact`, with `E` compared at `time_e` and
/// `H` at `time_h`.
pub fn error_norms(
    state: &FieldState,
    exact: &dyn ExactSolution,
    mesh: &Mesh,
    dofs: &DofMap,
) -> Result<ErrorNorms> {
    if state.e.len() != dofs.num_edge_dofs() || state.h.len() != mesh.num_elements() {
        return Err(Error::Shape {
            expected: format!(
                "{} edge and {} element values",
                dofs.num_edge_dofs(),
                mesh.num_elements()
            ),
            actual: format!("{} and {}", state.e.len(), state.h.len()),
        });
    }
    let (mut se, mut sh, mut ss) = (0.0, 0.0, 0.0);
    for t in 0..mesh.num_elements() {
        let kind = mesh.elements()[t].kind;
        let map = mesh.affine_map(t)?;
        let jac = map.determinant.abs();
        let rule = high_order_quadrature(kind);
        let scale = kind.reference_measure() * jac;
        let ht = state.h[t];
        let (mut ie, mut ih, mut mean) = (0.0, 0.0, 0.0);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let x = map.apply(*p);
            let d = eval_edge_field(mesh, dofs, &state.e, t, *p)? - exact.e(state.time_e, x);
            ie += w * d.norm_squared();
            let hx = exact.h(state.time_h, x);
            ih += w * (ht - hx).powi(2);
            mean += w * hx;
        }
        se += scale * ie;
        sh += scale * ih;
        ss += scale * (ht - mean).powi(2);
    }
    Ok(ErrorNorms {
        e: se.sqrt(),
        h: sh.sqrt(),
        h_super: ss.sqrt(),
    })
}
