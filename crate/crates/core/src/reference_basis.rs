//! Closed-form edge basis functions on the reference triangle and square.
//!
//! Every element edge carries two "half" functions, one per endpoint. Each
//! half is nonzero at exactly one reference vertex, which is what makes the
//! vertex-quadrature mass matrix block-diagonal. Their sum is the usual
//! lowest-order edge function.
//!
//! Local edge `k` (0-based) runs from local vertex `k + 1` to `k + 2`
//! (mod the vertex count); endpoint `gamma = 0` is the start vertex and
//! `gamma = 1` the end vertex. The tables below are the raw forms; the
//! triangle functions have circulation 1/2 on their edge, so
//! [`normalization`] rescales them by 2 to give every merged function unit
//! circulation.

use crate::error::{Error, Result};
use crate::mesh::ElementKind;

/// Polynomial `c0 + c1 x + c2 y + c3 xy + c4 x^2 + c5 y^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadratic(pub [f64; 6]);

impl Quadratic {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        let [x, y] = p;
        let c = &self.0;
        c[0] + c[1] * x + c[2] * y + c[3] * x * y + c[4] * x * x + c[5] * y * y
    }

    pub fn dx(&self, p: [f64; 2]) -> f64 {
        let c = &self.0;
        c[1] + c[3] * p[1] + 2.0 * c[4] * p[0]
    }

    pub fn dy(&self, p: [f64; 2]) -> f64 {
        let c = &self.0;
        c[2] + c[3] * p[0] + 2.0 * c[5] * p[1]
    }

    fn add(&self, other: &Quadratic) -> Quadratic {
        let mut c = self.0;
        c.iter_mut().zip(other.0).for_each(|(a, b)| *a += b);
        Quadratic(c)
    }

    fn render(&self) -> String {
        const NAMES: [&str; 6] = ["", "x", "y", "xy", "x^2", "y^2"];
        let mut s = String::new();
        for (c, name) in self.0.iter().zip(NAMES) {
            if *c == 0.0 {
                continue;
            }
            let sign = if *c < 0.0 {
                "-"
            } else if s.is_empty() {
                ""
            } else {
                "+"
            };
            let mag = c.abs();
            let coef = if name.is_empty() || mag != 1.0 {
                format!("{mag}")
            } else {
                String::new()
            };
            s.push_str(&format!("{sign}{coef}{name}"));
        }
        if s.is_empty() {
            s.push('0');
        }
        s
    }
}

/// A 2-vector field with quadratic components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VectorQuadratic(pub Quadratic, pub Quadratic);

impl VectorQuadratic {
    pub fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        [self.0.eval(p), self.1.eval(p)]
    }

    /// Scalar curl `d v2/dx - d v1/dy`.
    pub fn curl(&self, p: [f64; 2]) -> f64 {
        self.1.dx(p) - self.0.dy(p)
    }

    pub fn render(&self) -> String {
        format!("({}, {})", self.0.render(), self.1.render())
    }
}

const fn q(c: [f64; 6]) -> Quadratic {
    Quadratic(c)
}

const fn half(c: [f64; 6]) -> Quadratic {
    let mut out = [0.0; 6];
    let mut i = 0;
    while i < 6 {
        out[i] = 0.5 * c[i];
        i += 1;
    }
    Quadratic(out)
}

//                             1     x     y    xy   x^2   y^2
const SQUARE_HALVES: [[VectorQuadratic; 2]; 4] = [
    [
        VectorQuadratic(
            half([0.0, 0.0, 1.0, 0.0, 0.0, -1.0]),
            half([0.0, 2.0, 0.0, -2.0, 0.0, 0.0]),
        ),
        VectorQuadratic(
            half([0.0, 0.0, -1.0, 0.0, 0.0, 1.0]),
            half([0.0, 0.0, 0.0, 2.0, 0.0, 0.0]),
        ),
    ],
    [
        VectorQuadratic(
            half([0.0, 0.0, 0.0, -2.0, 0.0, 0.0]),
            half([0.0, 1.0, 0.0, 0.0, -1.0, 0.0]),
        ),
        VectorQuadratic(
            half([0.0, 0.0, -2.0, 2.0, 0.0, 0.0]),
            half([0.0, -1.0, 0.0, 0.0, 1.0, 0.0]),
        ),
    ],
    [
        VectorQuadratic(
            half([0.0, 0.0, -1.0, 0.0, 0.0, 1.0]),
            half([0.0, 0.0, -2.0, 2.0, 0.0, 0.0]),
        ),
        VectorQuadratic(
            half([0.0, 0.0, 1.0, 0.0, 0.0, -1.0]),
            half([-2.0, 2.0, 2.0, -2.0, 0.0, 0.0]),
        ),
    ],
    [
        VectorQuadratic(
            half([2.0, -2.0, -2.0, 2.0, 0.0, 0.0]),
            half([0.0, -1.0, 0.0, 0.0, 1.0, 0.0]),
        ),
        VectorQuadratic(
            half([0.0, 2.0, 0.0, -2.0, 0.0, 0.0]),
            half([0.0, 1.0, 0.0, 0.0, -1.0, 0.0]),
        ),
    ],
];

const TRIANGLE_HALVES: [[VectorQuadratic; 2]; 3] = [
    [
        VectorQuadratic(q([0.0; 6]), half([0.0, 1.0, 0.0, 0.0, 0.0, 0.0])),
        VectorQuadratic(half([0.0, 0.0, -1.0, 0.0, 0.0, 0.0]), q([0.0; 6])),
    ],
    [
        VectorQuadratic(
            half([0.0, 0.0, -1.0, 0.0, 0.0, 0.0]),
            half([0.0, 0.0, -1.0, 0.0, 0.0, 0.0]),
        ),
        VectorQuadratic(q([0.0; 6]), half([-1.0, 1.0, 1.0, 0.0, 0.0, 0.0])),
    ],
    [
        VectorQuadratic(half([1.0, -1.0, -1.0, 0.0, 0.0, 0.0]), q([0.0; 6])),
        VectorQuadratic(
            half([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
            half([0.0, 1.0, 0.0, 0.0, 0.0, 0.0]),
        ),
    ],
];

/// Local (start, end) vertex of each triangle edge.
pub const TRIANGLE_EDGE_VERTICES: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];
/// Local (start, end) vertex of each square edge.
pub const SQUARE_EDGE_VERTICES: [[usize; 2]; 4] = [[1, 2], [2, 3], [3, 0], [0, 1]];

pub fn num_edges(kind: ElementKind) -> usize {
    kind.num_vertices()
}

fn check(kind: ElementKind, edge: usize, gamma: usize) -> Result<()> {
    if edge >= num_edges(kind) || gamma > 1 {
        return Err(Error::Index(format!(
            "half basis (edge {edge}, endpoint {gamma}) does not exist on the reference {kind:?}"
        )));
    }
    Ok(())
}

/// Raw half basis function of local edge `edge` at endpoint `gamma`.
pub fn half_basis(kind: ElementKind, edge: usize, gamma: usize) -> Result<VectorQuadratic> {
    check(kind, edge, gamma)?;
    Ok(match kind {
        ElementKind::Triangle => TRIANGLE_HALVES[edge][gamma],
        ElementKind::Parallelogram => SQUARE_HALVES[edge][gamma],
    })
}

/// Raw merged basis function: the sum of both halves of `edge`.
pub fn merged_basis(kind: ElementKind, edge: usize) -> Result<VectorQuadratic> {
    let a = half_basis(kind, edge, 0)?;
    let b = half_basis(kind, edge, 1)?;
    Ok(VectorQuadratic(a.0.add(&b.0), a.1.add(&b.1)))
}

pub fn eval_half_basis(
    kind: ElementKind,
    edge: usize,
    gamma: usize,
    p: [f64; 2],
) -> Result<[f64; 2]> {
    Ok(half_basis(kind, edge, gamma)?.eval(p))
}

pub fn eval_merged_basis(kind: ElementKind, edge: usize, p: [f64; 2]) -> Result<[f64; 2]> {
    Ok(merged_basis(kind, edge)?.eval(p))
}

/// Constant reference curl of a raw half basis function.
pub fn curl_half_basis(kind: ElementKind, edge: usize, gamma: usize) -> Result<f64> {
    let c = reference_centroid(kind);
    Ok(half_basis(kind, edge, gamma)?.curl(c))
}

pub fn curl_merged_basis(kind: ElementKind, edge: usize) -> Result<f64> {
    Ok(curl_half_basis(kind, edge, 0)? + curl_half_basis(kind, edge, 1)?)
}

/// Scale applied to the raw tables so that merged functions have unit
/// circulation on their own edge.
pub fn normalization(kind: ElementKind) -> f64 {
    match kind {
        ElementKind::Triangle => 2.0,
        ElementKind::Parallelogram => 1.0,
    }
}

/// Local vertex at which the half function `(edge, gamma)` is nonzero.
pub fn vertex_of_half(kind: ElementKind, edge: usize, gamma: usize) -> Result<usize> {
    check(kind, edge, gamma)?;
    Ok(match kind {
        ElementKind::Triangle => TRIANGLE_EDGE_VERTICES[edge][gamma],
        ElementKind::Parallelogram => SQUARE_EDGE_VERTICES[edge][gamma],
    })
}

pub fn reference_centroid(kind: ElementKind) -> [f64; 2] {
    match kind {
        ElementKind::Triangle => [1.0 / 3.0, 1.0 / 3.0],
        ElementKind::Parallelogram => [0.5, 0.5],
    }
}

/// Quadrature rule on a reference element: points and weights. Weights of
/// the vertex rule are `1 / n_points`; an integral is approximated by
/// `|T_ref| * sum_l w_l f(x_l)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Integral over the reference element.
    pub fn integrate(&self, kind: ElementKind, f: impl Fn([f64; 2]) -> f64) -> f64 {
        kind.reference_measure()
            * self
                .points
                .iter()
                .zip(&self.weights)
                .map(|(p, w)| w * f(*p))
                .sum::<f64>()
    }
}

/// Vertex rule, exact for affine integrands.
pub fn vertex_quadrature(kind: ElementKind) -> QuadratureRule {
    let points = kind.reference_vertices().to_vec();
    let n = points.len();
    QuadratureRule {
        points,
        weights: vec![1.0 / n as f64; n],
    }
}

const GAUSS3_NODES: [f64; 3] = [0.112_701_665_379_258_3, 0.5, 0.887_298_334_620_741_7];
const GAUSS3_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// 9-point rule exact for polynomials of total degree 4 on the triangle
/// (collapsed tensor Gauss rule) and bi-degree 5 on the square.
pub fn high_order_quadrature(kind: ElementKind) -> QuadratureRule {
    let mut points = Vec::with_capacity(9);
    let mut weights = Vec::with_capacity(9);
    for (u, wu) in GAUSS3_NODES.iter().zip(GAUSS3_WEIGHTS) {
        for (v, wv) in GAUSS3_NODES.iter().zip(GAUSS3_WEIGHTS) {
            match kind {
                ElementKind::Parallelogram => {
                    points.push([*u, *v]);
                    weights.push(wu * wv);
                }
                ElementKind::Triangle => {
                    // x = u (1 - v), y = v, Jacobian (1 - v); weights rescaled by 1/|T_ref|
                    points.push([u * (1.0 - v), *v]);
                    weights.push(2.0 * wu * wv * (1.0 - v));
                }
            }
        }
    }
    QuadratureRule { points, weights }
}

/// 3-point Gauss rule on [0, 1]: (parameter, weight).
pub fn line_gauss3() -> [(f64, f64); 3] {
    [
        (GAUSS3_NODES[0], GAUSS3_WEIGHTS[0]),
        (GAUSS3_NODES[1], GAUSS3_WEIGHTS[1]),
        (GAUSS3_NODES[2], GAUSS3_WEIGHTS[2]),
    ]
}

/// Text listing of the basis tables, used by the `dump-basis` command.
pub fn dump_tables() -> String {
    let mut s = String::new();
    for kind in [ElementKind::Triangle, ElementKind::Parallelogram] {
        s.push_str(&format!(
            "{kind:?}: reference measure {}, normalization {}\n",
            kind.reference_measure(),
            normalization(kind)
        ));
        let vq = vertex_quadrature(kind);
        s.push_str(&format!(
            "  vertex quadrature points {:?} weight {}\n",
            vq.points, vq.weights[0]
        ));
        for edge in 0..num_edges(kind) {
            let (a, b) = kind.local_edge(edge);
            s.push_str(&format!(
                "  edge {edge}: vertex {a} -> {b}, merged {} curl {}\n",
                merged_basis(kind, edge).unwrap().render(),
                curl_merged_basis(kind, edge).unwrap()
            ));
            for gamma in 0..2 {
                s.push_str(&format!(
                    "    half {gamma}: at vertex {} {} curl {}\n",
                    vertex_of_half(kind, edge, gamma).unwrap(),
                    half_basis(kind, edge, gamma).unwrap().render(),
                    curl_half_basis(kind, edge, gamma).unwrap()
                ));
            }
        }
    }
    s
}
