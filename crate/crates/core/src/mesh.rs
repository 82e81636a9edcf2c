//! Hybrid triangle/parallelogram meshes.
//!
//! Elements store their vertices counter-clockwise. Edges are derived from
//! the element list, sorted by their (low, high) vertex pair and oriented from
//! the lower to the higher vertex index. Local edge `k` of an element with `n`
//! vertices runs from local vertex `(k + 1) % n` to `(k + 2) % n`, which is
//! the numbering used by the reference basis tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Relative tolerance for the parallelogram closure check.
const CLOSURE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementKind {
    Triangle,
    Parallelogram,
}

impl ElementKind {
    pub fn num_vertices(self) -> usize {
        match self {
            ElementKind::Triangle => 3,
            ElementKind::Parallelogram => 4,
        }
    }

    /// Area of the reference element.
    pub fn reference_measure(self) -> f64 {
        match self {
            ElementKind::Triangle => 0.5,
            ElementKind::Parallelogram => 1.0,
        }
    }

    /// Reference vertices: (0,0),(1,0),(0,1) or (0,0),(1,0),(1,1),(0,1).
    pub fn reference_vertices(self) -> &'static [[f64; 2]] {
        match self {
            ElementKind::Triangle => &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            ElementKind::Parallelogram => &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        }
    }

    /// Local (start, end) vertex pair of local edge `k`.
    pub fn local_edge(self, k: usize) -> (usize, usize) {
        let n = self.num_vertices();
        ((k + 1) % n, (k + 2) % n)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub kind: ElementKind,
    pub vertices: Vec<usize>,
    /// Material region label; 0 unless set by a generator or mesh file.
    pub region: i64,
}

impl Element {
    pub fn triangle(a: usize, b: usize, c: usize) -> Self {
        Element {
            kind: ElementKind::Triangle,
            vertices: vec![a, b, c],
            region: 0,
        }
    }

    pub fn parallelogram(a: usize, b: usize, c: usize, d: usize) -> Self {
        Element {
            kind: ElementKind::Parallelogram,
            vertices: vec![a, b, c, d],
            region: 0,
        }
    }

    pub fn with_region(mut self, region: i64) -> Self {
        self.region = region;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Endpoints, lower index first.
    pub vertices: [usize; 2],
    /// Incident elements in ascending order (one or two).
    pub elements: Vec<usize>,
    pub boundary: bool,
}

/// Axis-aligned rectangle used by the structured generators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl BBox {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        BBox {
            min: [xmin, ymin],
            max: [xmax, ymax],
        }
    }

    pub fn unit_square() -> Self {
        BBox::new(0.0, 0.0, 1.0, 1.0)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.min.iter().chain(&self.max).all(|v| v.is_finite())
            && self.max[0] > self.min[0]
            && self.max[1] > self.min[1];
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "degenerate bounding box {self:?}"
            )))
        }
    }
}

/// Affine element map `x = offset + matrix * x_ref`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap {
    pub offset: Point,
    pub matrix: Matrix2<f64>,
    pub determinant: f64,
    pub inverse_transpose: Matrix2<f64>,
}

impl AffineMap {
    pub fn apply(&self, x_ref: [f64; 2]) -> Point {
        self.offset + self.matrix * Vector2::new(x_ref[0], x_ref[1])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    elements: Vec<Element>,
    edges: Vec<Edge>,
    /// Global edge index of each local edge, per element.
    element_edges: Vec<Vec<usize>>,
    boundary_tags: BTreeMap<usize, i64>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds and validates a mesh. `boundary_tags` maps vertex pairs (either
    /// order) of boundary edges to integer labels.
    pub fn new(
        vertices: Vec<Point>,
        elements: Vec<Element>,
        boundary_tags: &[([usize; 2], i64)],
    ) -> Result<Self> {
        let nv = vertices.len();
        if let Some(i) = vertices
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite()))
        {
            return Err(Error::InvalidMesh(format!(
                "vertex {i} has non-finite coordinates"
            )));
        }
        for (t, el) in elements.iter().enumerate() {
            if el.vertices.len() != el.kind.num_vertices() {
                return Err(Error::InvalidMesh(format!(
                    "element {t}: {:?} needs {} vertices, got {}",
                    el.kind,
                    el.kind.num_vertices(),
                    el.vertices.len()
                )));
            }
            if let Some(&v) = el.vertices.iter().find(|&&v| v >= nv) {
                return Err(Error::Index(format!(
                    "element {t} references vertex {v} but mesh has {nv} vertices"
                )));
            }
            for (a, &va) in el.vertices.iter().enumerate() {
                if el.vertices[a + 1..].contains(&va) {
                    return Err(Error::InvalidMesh(format!(
                        "element {t} repeats vertex {va}"
                    )));
                }
            }
        }

        let mut edge_map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (t, el) in elements.iter().enumerate() {
            for k in 0..el.kind.num_vertices() {
                let (a, b) = el.kind.local_edge(k);
                edge_map
                    .entry(edge_key(el.vertices[a], el.vertices[b]))
                    .or_default()
                    .push(t);
            }
        }
        let mut index_of = BTreeMap::new();
        let mut edges = Vec::with_capacity(edge_map.len());
        for (i, (key, mut incident)) in edge_map.into_iter().enumerate() {
            incident.sort_unstable();
            if incident.len() > 2 || (incident.len() == 2 && incident[0] == incident[1]) {
                return Err(Error::InvalidMesh(format!(
                    "edge ({}, {}) is shared by elements {:?}; mesh is not conforming",
                    key.0, key.1, incident
                )));
            }
            index_of.insert(key, i);
            edges.push(Edge {
                vertices: [key.0, key.1],
                boundary: incident.len() == 1,
                elements: incident,
            });
        }
        let element_edges = elements
            .iter()
            .map(|el| {
                (0..el.kind.num_vertices())
                    .map(|k| {
                        let (a, b) = el.kind.local_edge(k);
                        index_of[&edge_key(el.vertices[a], el.vertices[b])]
                    })
                    .collect()
            })
            .collect();

        let mut tags = BTreeMap::new();
        for &([a, b], tag) in boundary_tags {
            let Some(&i) = index_of.get(&edge_key(a, b)) else {
                return Err(Error::InvalidMesh(format!(
                    "tagged edge ({a}, {b}) is not a mesh edge"
                )));
            };
            if !edges[i].boundary {
                return Err(Error::InvalidMesh(format!(
                    "tagged edge ({a}, {b}) is not on the boundary"
                )));
            }
            tags.insert(i, tag);
        }

        let mesh = Mesh {
            vertices,
            elements,
            edges,
            element_edges,
            boundary_tags: tags,
        };
        for t in 0..mesh.elements.len() {
            mesh.affine_map(t)?;
            if mesh.elements[t].kind == ElementKind::Parallelogram {
                mesh.check_parallelogram(t)?;
            }
        }
        Ok(mesh)
    }

    fn check_parallelogram(&self, t: usize) -> Result<()> {
        let v = &self.elements[t].vertices;
        let p = |i: usize| self.vertices[v[i]];
        let closure = p(1) + p(3) - p(0);
        if (closure - p(2)).norm() > CLOSURE_TOL * self.element_diameter(t) {
            return Err(Error::InvalidMesh(format!(
                "element {t} is not a parallelogram (closure defect {:e})",
                (closure - p(2)).norm()
            )));
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.edges.iter().filter(|e| !e.boundary).count()
    }

    /// Global edge indices of the local edges of element `t`.
    pub fn element_edges(&self, t: usize) -> &[usize] {
        &self.element_edges[t]
    }

    /// Boundary tags keyed by global edge index.
    pub fn boundary_tags(&self) -> &BTreeMap<usize, i64> {
        &self.boundary_tags
    }

    pub fn boundary_tag(&self, edge: usize) -> Option<i64> {
        self.boundary_tags.get(&edge).copied()
    }

    /// Maps the reference element onto element `t`, preserving vertex order.
    pub fn affine_map(&self, t: usize) -> Result<AffineMap> {
        let el = self
            .elements
            .get(t)
            .ok_or_else(|| Error::Index(format!("element {t} of {}", self.elements.len())))?;
        let p = |i: usize| self.vertices[el.vertices[i]];
        let last = el.kind.num_vertices() - 1;
        let matrix = Matrix2::from_columns(&[p(1) - p(0), p(last) - p(0)]);
        let determinant = matrix.determinant();
        if !(determinant > 0.0) {
            return Err(Error::Orientation {
                element: t,
                det: determinant,
            });
        }
        let inverse_transpose = Matrix2::new(
            matrix[(1, 1)],
            -matrix[(1, 0)],
            -matrix[(0, 1)],
            matrix[(0, 0)],
        ) / determinant;
        Ok(AffineMap {
            offset: p(0),
            matrix,
            determinant,
            inverse_transpose,
        })
    }

    pub fn element_area(&self, t: usize) -> f64 {
        let el = &self.elements[t];
        let v: Vec<Point> = el.vertices.iter().map(|&i| self.vertices[i]).collect();
        // shoelace
        let n = v.len();
        0.5 * (0..n)
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % n]);
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
    }

    pub fn element_diameter(&self, t: usize) -> f64 {
        let v = &self.elements[t].vertices;
        let mut d: f64 = 0.0;
        for (i, &a) in v.iter().enumerate() {
            for &b in &v[i + 1..] {
                d = d.max((self.vertices[a] - self.vertices[b]).norm());
            }
        }
        d
    }

    /// Maximal element diameter.
    pub fn mesh_size(&self) -> f64 {
        (0..self.num_elements())
            .map(|t| self.element_diameter(t))
            .fold(0.0, f64::max)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_elements()).map(|t| self.element_area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let v = &self.elements[t].vertices;
        v.iter().map(|&i| self.vertices[i]).sum::<Point>() / v.len() as f64
    }

    pub fn edge_midpoint(&self, edge: usize) -> Point {
        let [a, b] = self.edges[edge].vertices;
        (self.vertices[a] + self.vertices[b]) * 0.5
    }

    /// Number of edges incident to each vertex.
    pub fn vertex_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_vertices()];
        for e in &self.edges {
            deg[e.vertices[0]] += 1;
            deg[e.vertices[1]] += 1;
        }
        deg
    }

    /// Returns a copy with every element's region replaced by `region(t, centroid)`.
    pub fn with_regions(&self, mut region: impl FnMut(usize, Point) -> i64) -> Mesh {
        let mut out = self.clone();
        for t in 0..out.elements.len() {
            out.elements[t].region = region(t, self.centroid(t));
        }
        out
    }

    fn tag_list(&self) -> Vec<([usize; 2], i64)> {
        self.boundary_tags
            .iter()
            .map(|(&i, &tag)| (self.edges[i].vertices, tag))
            .collect()
    }
}

fn check_counts(nx: usize, ny: usize, bbox: &BBox) -> Result<()> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(format!(
            "cell counts must be positive, got {nx}x{ny}"
        )));
    }
    bbox.validate()
}

fn grid_vertices(nx: usize, ny: usize, bbox: &BBox) -> Vec<Point> {
    let (dx, dy) = (
        (bbox.max[0] - bbox.min[0]) / nx as f64,
        (bbox.max[1] - bbox.min[1]) / ny as f64,
    );
    let mut v = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            v.push(Point::new(
                bbox.min[0] + i as f64 * dx,
                bbox.min[1] + j as f64 * dy,
            ));
        }
    }
    v
}

/// Tags outer boundary edges: 1 bottom, 2 right, 3 top, 4 left.
fn grid_boundary_tags(nx: usize, ny: usize) -> Vec<([usize; 2], i64)> {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut tags = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        tags.push(([id(i, 0), id(i + 1, 0)], 1));
        tags.push(([id(i, ny), id(i + 1, ny)], 3));
    }
    for j in 0..ny {
        tags.push(([id(nx, j), id(nx, j + 1)], 2));
        tags.push(([id(0, j), id(0, j + 1)], 4));
    }
    tags
}

/// Structured grid where cell `(i, j)` is kept as a parallelogram, or split
/// into two triangles along its (i,j)-(i+1,j+1) diagonal when `split(i, j)`.
pub fn build_structured_mesh(
    nx: usize,
    ny: usize,
    bbox: BBox,
    split: impl Fn(usize, usize) -> bool,
) -> Result<Mesh> {
    check_counts(nx, ny, &bbox)?;
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if split(i, j) {
                elements.push(Element::triangle(a, b, c));
                elements.push(Element::triangle(a, c, d));
            } else {
                elements.push(Element::parallelogram(a, b, c, d));
            }
        }
    }
    Mesh::new(
        grid_vertices(nx, ny, &bbox),
        elements,
        &grid_boundary_tags(nx, ny),
    )
}

pub fn build_structured_quad_mesh(nx: usize, ny: usize, bbox: BBox) -> Result<Mesh> {
    build_structured_mesh(nx, ny, bbox, |_, _| false)
}

pub fn build_structured_tri_mesh(nx: usize, ny: usize, bbox: BBox) -> Result<Mesh> {
    build_structured_mesh(nx, ny, bbox, |_, _| true)
}

/// Randomly displaces vertices that touch no boundary edge and no
/// parallelogram, by at most `fraction` of the shortest incident edge.
pub fn jitter_vertices(mesh: &Mesh, fraction: f64, seed: u64) -> Result<Mesh> {
    let nv = mesh.num_vertices();
    let mut movable = vec![true; nv];
    let mut shortest = vec![f64::INFINITY; nv];
    for e in mesh.edges() {
        let [a, b] = e.vertices;
        let len = (mesh.vertices[a] - mesh.vertices[b]).norm();
        for v in [a, b] {
            shortest[v] = shortest[v].min(len);
            if e.boundary {
                movable[v] = false;
            }
        }
    }
    for el in mesh.elements() {
        if el.kind == ElementKind::Parallelogram {
            for &v in &el.vertices {
                movable[v] = false;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vertices = mesh.vertices.clone();
    for v in 0..nv {
        let (dx, dy): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if movable[v] {
            vertices[v] += Point::new(dx, dy) * (fraction * shortest[v] / std::f64::consts::SQRT_2);
        }
    }
    Mesh::new(vertices, mesh.elements.clone(), &mesh.tag_list())
}

/// Parent/child relations produced by [`refine_uniform_with_map`].
#[derive(Clone, Debug, PartialEq)]
pub struct RefinementMap {
    /// Children of coarse element `t` are fine elements `4t..4t+4`.
    pub element_children: Vec<[usize; 4]>,
    /// The two fine edges covering each coarse edge, with the sign relating
    /// the fine orientation to the coarse one.
    pub edge_children: Vec<[(usize, f64); 2]>,
}

impl RefinementMap {
    /// Composes `self` (coarse to mid) with `next` (mid to fine).
    pub fn compose(&self, next: &RefinementMap) -> ComposedRefinement {
        ComposedRefinement::from(self).then(next)
    }
}

/// Parent/child relations across several refinement levels.
#[derive(Clone, Debug, PartialEq)]
pub struct ComposedRefinement {
    pub element_children: Vec<Vec<usize>>,
    pub edge_children: Vec<Vec<(usize, f64)>>,
}

impl From<&RefinementMap> for ComposedRefinement {
    fn from(map: &RefinementMap) -> Self {
        ComposedRefinement {
            element_children: map.element_children.iter().map(|c| c.to_vec()).collect(),
            edge_children: map.edge_children.iter().map(|c| c.to_vec()).collect(),
        }
    }
}

impl ComposedRefinement {
    pub fn identity(mesh: &Mesh) -> Self {
        ComposedRefinement {
            element_children: (0..mesh.num_elements()).map(|t| vec![t]).collect(),
            edge_children: (0..mesh.num_edges()).map(|e| vec![(e, 1.0)]).collect(),
        }
    }

    pub fn then(&self, next: &RefinementMap) -> ComposedRefinement {
        ComposedRefinement {
            element_children: self
                .element_children
                .iter()
                .map(|kids| {
                    kids.iter()
                        .flat_map(|&k| next.element_children[k])
                        .collect()
                })
                .collect(),
            edge_children: self
                .edge_children
                .iter()
                .map(|kids| {
                    kids.iter()
                        .flat_map(|&(k, s)| {
                            next.edge_children[k].iter().map(move |&(f, t)| (f, s * t))
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    refine_uniform_with_map(mesh).map(|(m, _)| m)
}

/// Splits every element into four congruent children. New vertices are the
/// edge midpoints (index `n_vertices + edge`) followed by parallelogram centers.
pub fn refine_uniform_with_map(mesh: &Mesh) -> Result<(Mesh, RefinementMap)> {
    let nv = mesh.num_vertices();
    let ne = mesh.num_edges();
    let mut vertices = mesh.vertices.clone();
    vertices.extend((0..ne).map(|e| mesh.edge_midpoint(e)));
    let mut elements = Vec::with_capacity(4 * mesh.num_elements());
    for (t, el) in mesh.elements.iter().enumerate() {
        let v = &el.vertices;
        let edges = &mesh.element_edges[t];
        // midpoint of the side from local vertex i to i+1
        let side_mid = |i: usize| {
            let k = (i + el.kind.num_vertices() - 1) % el.kind.num_vertices();
            nv + edges[k]
        };
        let kids = match el.kind {
            ElementKind::Triangle => {
                let (m01, m12, m20) = (side_mid(0), side_mid(1), side_mid(2));
                [
                    Element::triangle(v[0], m01, m20),
                    Element::triangle(m01, v[1], m12),
                    Element::triangle(m20, m12, v[2]),
                    Element::triangle(m01, m12, m20),
                ]
            }
            ElementKind::Parallelogram => {
                let c = vertices.len();
                vertices.push(mesh.centroid(t));
                let (m01, m12, m23, m30) = (side_mid(0), side_mid(1), side_mid(2), side_mid(3));
                [
                    Element::parallelogram(v[0], m01, c, m30),
                    Element::parallelogram(m01, v[1], m12, c),
                    Element::parallelogram(c, m12, v[2], m23),
                    Element::parallelogram(m30, c, m23, v[3]),
                ]
            }
        };
        elements.extend(kids.into_iter().map(|k| k.with_region(el.region)));
    }
    let mut tags = Vec::new();
    for (&e, &tag) in &mesh.boundary_tags {
        let [a, b] = mesh.edges[e].vertices;
        tags.push(([a, nv + e], tag));
        tags.push(([b, nv + e], tag));
    }
    let fine = Mesh::new(vertices, elements, &tags)?;

    let lookup: BTreeMap<[usize; 2], usize> = fine
        .edges
        .iter()
        .enumerate()
        .map(|(i, e)| (e.vertices, i))
        .collect();
    let edge_children = mesh
        .edges
        .iter()
        .enumerate()
        .map(|(e, edge)| {
            let mid = nv + e;
            let [lo, hi] = edge.vertices;
            // midpoints carry larger indices than any coarse vertex
            [(lookup[&[lo, mid]], 1.0), (lookup[&[hi, mid]], -1.0)]
        })
        .collect();
    let element_children = (0..mesh.num_elements())
        .map(|t| [4 * t, 4 * t + 1, 4 * t + 2, 4 * t + 3])
        .collect();
    Ok((
        fine,
        RefinementMap {
            element_children,
            edge_children,
        },
    ))
}

pub const MESH_MAGIC: &str = "maxlump-mesh 1";

/// Writes the plain-text mesh format. Coordinates use the shortest decimal
/// representation that round-trips exactly.
pub fn write_mesh<W: Write>(mesh: &Mesh, mut out: W) -> Result<()> {
    let mut s = String::new();
    writeln!(s, "{MESH_MAGIC}").unwrap();
    writeln!(s, "{} {}", mesh.num_vertices(), mesh.num_elements()).unwrap();
    for p in &mesh.vertices {
        writeln!(s, "v {:?} {:?}", p.x, p.y).unwrap();
    }
    for el in &mesh.elements {
        let tag = match el.kind {
            ElementKind::Triangle => 't',
            ElementKind::Parallelogram => 'q',
        };
        s.push(tag);
        for v in &el.vertices {
            write!(s, " {v}").unwrap();
        }
        if el.region != 0 {
            write!(s, " {}", el.region).unwrap();
        }
        s.push('\n');
    }
    for ([a, b], tag) in mesh.tag_list() {
        writeln!(s, "b {a} {b} {tag}").unwrap();
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from '{tok}'")))
}

/// Reads the plain-text mesh format; errors carry 1-based line numbers.
pub fn read_mesh<R: BufRead>(input: R) -> Result<Mesh> {
    let mut lines = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim().to_string();
        if !body.is_empty() {
            lines.push((i + 1, body));
        }
    }
    let mut it = lines.into_iter();
    let (ln, header) = it.next().ok_or_else(|| parse_err(1, "empty mesh file"))?;
    if header.split_whitespace().collect::<Vec<_>>() != MESH_MAGIC.split(' ').collect::<Vec<_>>() {
        return Err(parse_err(
            ln,
            format!("expected header '{MESH_MAGIC}', got '{header}'"),
        ));
    }
    let (ln, counts) = it
        .next()
        .ok_or_else(|| parse_err(ln + 1, "missing count line"))?;
    let toks: Vec<&str> = counts.split_whitespace().collect();
    if toks.len() != 2 {
        return Err(parse_err(
            ln,
            "count line must be '<n_vertices> <n_elements>'",
        ));
    }
    let nv: usize = parse_num(toks[0], ln, "vertex count")?;
    let nt: usize = parse_num(toks[1], ln, "element count")?;

    let mut vertices = Vec::with_capacity(nv);
    let mut elements = Vec::with_capacity(nt);
    let mut element_lines = Vec::with_capacity(nt);
    let mut tags = Vec::new();
    let mut last = ln;
    for (ln, body) in it {
        last = ln;
        let toks: Vec<&str> = body.split_whitespace().collect();
        match toks[0] {
            "v" => {
                if !elements.is_empty() {
                    return Err(parse_err(ln, "vertex line after element lines"));
                }
                if toks.len() != 3 {
                    return Err(parse_err(ln, "vertex line must be 'v <x> <y>'"));
                }
                vertices.push(Point::new(
                    parse_num(toks[1], ln, "x")?,
                    parse_num(toks[2], ln, "y")?,
                ));
            }
            "t" | "q" => {
                let kind = if toks[0] == "t" {
                    ElementKind::Triangle
                } else {
                    ElementKind::Parallelogram
                };
                let n = kind.num_vertices();
                if toks.len() != n + 1 && toks.len() != n + 2 {
                    return Err(parse_err(
                        ln,
                        format!("'{}' line needs {n} vertex indices", toks[0]),
                    ));
                }
                let mut idx = Vec::with_capacity(n);
                for tok in &toks[1..=n] {
                    let v: usize = parse_num(tok, ln, "vertex index")?;
                    if v >= nv {
                        return Err(parse_err(
                            ln,
                            format!("vertex index {v} out of range (n_vertices = {nv})"),
                        ));
                    }
                    idx.push(v);
                }
                let region = match toks.get(n + 1) {
                    Some(tok) => parse_num(tok, ln, "region")?,
                    None => 0,
                };
                elements.push(Element {
                    kind,
                    vertices: idx,
                    region,
                });
                element_lines.push(ln);
            }
            "b" => {
                if toks.len() != 4 {
                    return Err(parse_err(ln, "boundary line must be 'b <i> <j> <tag>'"));
                }
                let a: usize = parse_num(toks[1], ln, "vertex index")?;
                let b: usize = parse_num(toks[2], ln, "vertex index")?;
                tags.push(([a, b], parse_num(toks[3], ln, "tag")?));
            }
            other => return Err(parse_err(ln, format!("unknown record '{other}'"))),
        }
    }
    if vertices.len() != nv {
        return Err(parse_err(
            last,
            format!("expected {nv} vertices, found {}", vertices.len()),
        ));
    }
    if elements.len() != nt {
        return Err(parse_err(
            last,
            format!("expected {nt} elements, found {}", elements.len()),
        ));
    }
    Mesh::new(vertices, elements, &tags).map_err(|e| match e {
        Error::Orientation { element, .. } => parse_err(element_lines[element], e.to_string()),
        other => parse_err(last, other.to_string()),
    })
}

/// One-line summary used by `mesh info`.
pub fn describe(mesh: &Mesh) -> String {
    let tri = mesh
        .elements()
        .iter()
        .filter(|e| e.kind == ElementKind::Triangle)
        .count();
    format!(
        "vertices {} elements {} (triangles {}, parallelograms {}) edges {} interior {} h {:.6} area {:.6}",
        mesh.num_vertices(),
        mesh.num_elements(),
        tri,
        mesh.num_elements() - tri,
        mesh.num_edges(),
        mesh.num_interior_edges(),
        mesh.mesh_size(),
        mesh.total_area()
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> BBox {
        BBox::unit_square()
    }

    fn counts(m: &Mesh) -> (usize, usize, usize, usize) {
        (
            m.num_elements(),
            m.num_vertices(),
            m.num_edges(),
            m.num_interior_edges(),
        )
    }

    #[test]
    fn quad_generator_counts() {
        assert_eq!(
            counts(&build_structured_quad_mesh(1, 1, unit()).unwrap()),
            (1, 4, 4, 0)
        );
        assert_eq!(
            counts(&build_structured_quad_mesh(2, 2, unit()).unwrap()),
            (4, 9, 12, 4)
        );
        assert_eq!(
            counts(&build_structured_quad_mesh(2, 1, unit()).unwrap()),
            (2, 6, 7, 1)
        );
        for (nx, ny) in [(3, 5), (7, 2)] {
            let m = build_structured_quad_mesh(nx, ny, unit()).unwrap();
            assert_eq!(m.num_edges(), nx * (ny + 1) + ny * (nx + 1));
            assert_eq!(m.num_interior_edges(), nx * (ny - 1) + ny * (nx - 1));
            // Euler characteristic of a disk
            assert_eq!(m.num_vertices() + m.num_elements(), m.num_edges() + 1);
        }
    }

    #[test]
    fn tri_generator_counts() {
        let c = |nx, ny| {
            let m = build_structured_tri_mesh(nx, ny, unit()).unwrap();
            (m.num_elements(), m.num_edges(), m.num_interior_edges())
        };
        assert_eq!(c(1, 1), (2, 5, 1));
        assert_eq!(c(2, 2), (8, 16, 8));
        // V - E + F = 1 gives 13 edges for 8 vertices and 6 triangles
        assert_eq!(c(3, 1), (6, 13, 5));
    }

    #[test]
    fn generator_rejects_bad_arguments() {
        assert!(matches!(
            build_structured_quad_mesh(0, 2, unit()),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            build_structured_tri_mesh(2, 2, BBox::new(0.0, 0.0, 0.0, 1.0)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn affine_map_cases() {
        let m = build_structured_quad_mesh(1, 1, unit()).unwrap();
        let f = m.affine_map(0).unwrap();
        assert_eq!(f.offset, Point::zeros());
        assert_eq!(f.matrix, Matrix2::identity());

        let h = 0.25;
        let m = build_structured_quad_mesh(1, 1, BBox::new(0.0, 0.0, h, h)).unwrap();
        let f = m.affine_map(0).unwrap();
        assert_eq!(f.matrix, Matrix2::identity() * h);
        assert_eq!(f.determinant, h * h);

        let m = Mesh::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(2.0, 0.0),
                Point::new(0.0, 2.0),
            ],
            vec![Element::triangle(0, 1, 2)],
            &[],
        )
        .unwrap();
        let f = m.affine_map(0).unwrap();
        assert_eq!(f.matrix, Matrix2::identity() * 2.0);
        assert_eq!(f.determinant, 4.0);
        let id = f.inverse_transpose * f.matrix.transpose();
        assert!((id - Matrix2::identity()).abs().max() < 1e-14);
        assert!(matches!(m.affine_map(3), Err(Error::Index(_))));
    }

    #[test]
    fn clockwise_element_is_rejected() {
        let err = Mesh::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
            ],
            vec![Element::triangle(0, 2, 1)],
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Orientation { element: 0, .. }));
    }

    #[test]
    fn non_parallelogram_quad_is_rejected() {
        let err = Mesh::new(
            vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.2, 1.0),
                Point::new(0.0, 1.0),
            ],
            vec![Element::parallelogram(0, 1, 2, 3)],
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn non_conforming_fan_is_rejected() {
        let v = vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(-1.0, 0.5),
            Point::new(0.5, 1.0),
        ];
        let els = vec![
            Element::triangle(0, 1, 2),
            Element::triangle(0, 2, 3),
            Element::triangle(0, 4, 2),
        ];
        assert!(Mesh::new(v, els, &[]).is_err());
    }

    #[test]
    fn edges_are_sorted_and_conforming() {
        let m = build_structured_mesh(4, 3, unit(), |i, j| (i + j) % 2 == 0).unwrap();
        for e in m.edges() {
            assert!(e.vertices[0] < e.vertices[1]);
            if e.boundary {
                assert_eq!(e.elements.len(), 1);
            } else {
                assert_eq!(e.elements.len(), 2);
                assert_ne!(e.elements[0], e.elements[1]);
            }
        }
        let tagged = m.boundary_tags().len();
        assert_eq!(tagged, m.num_edges() - m.num_interior_edges());
    }

    #[test]
    fn refinement_counts_and_diameter() {
        let q = build_structured_quad_mesh(1, 1, unit()).unwrap();
        let r1 = refine_uniform(&q).unwrap();
        assert_eq!(r1.num_elements(), 4);
        let r2 = refine_uniform(&r1).unwrap();
        assert_eq!(r2.num_elements(), 16);
        assert!((r2.mesh_size() - q.mesh_size() / 4.0).abs() < 1e-15);

        let t = build_structured_tri_mesh(1, 1, unit()).unwrap();
        let r = refine_uniform(&t).unwrap();
        assert_eq!(r.num_elements(), 8);
        assert!((r.mesh_size() - t.mesh_size() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn refinement_map_edges_cover_parent() {
        let m = build_structured_mesh(2, 2, unit(), |i, _| i == 0).unwrap();
        let (fine, map) = refine_uniform_with_map(&m).unwrap();
        for (e, kids) in map.edge_children.iter().enumerate() {
            let [a, b] = m.edges()[e].vertices;
            let dir = m.vertices()[b] - m.vertices()[a];
            let mut sum = Point::zeros();
            for &(k, s) in kids {
                let [c, d] = fine.edges()[k].vertices;
                sum += (fine.vertices()[d] - fine.vertices()[c]) * s;
            }
            assert!((sum - dir).norm() < 1e-15);
            assert_eq!(fine.edges()[kids[0].0].boundary, m.edges()[e].boundary);
        }
        for (t, kids) in map.element_children.iter().enumerate() {
            let a: f64 = kids.iter().map(|&k| fine.element_area(k)).sum();
            assert!((a - m.element_area(t)).abs() < 1e-15);
        }
    }

    #[test]
    fn write_read_round_trip() {
        let m = build_structured_quad_mesh(1, 1, unit()).unwrap();
        let mut buf = Vec::new();
        write_mesh(&m, &mut buf).unwrap();
        let back = read_mesh(buf.as_slice()).unwrap();
        assert_eq!(back, m);

        let m = jitter_vertices(
            &build_structured_tri_mesh(5, 4, BBox::new(-1.0, 0.3, 2.0, 1.7)).unwrap(),
            0.3,
            7,
        )
        .unwrap()
        .with_regions(|t, _| (t % 3) as i64);
        let mut buf = Vec::new();
        write_mesh(&m, &mut buf).unwrap();
        assert_eq!(read_mesh(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn hand_written_quad_file() {
        let text = "\
# 2x2 unit square
maxlump-mesh 1
9 4
v 0 0
v 0.5 0
v 1 0
v 0 0.5
v 0.5 0.5
v 1 0.5
v 0 1
v 0.5 1
v 1 1
q 0 1 4 3
q 1 2 5 4
q 3 4 7 6
q 4 5 8 7
b 0 1 1
";
        let m = read_mesh(text.as_bytes()).unwrap();
        assert_eq!(m.num_elements(), 4);
        assert_eq!(m.num_interior_edges(), 4);
        assert_eq!(m.boundary_tags().len(), 1);
    }

    #[test]
    fn out_of_range_vertex_reports_line() {
        let text = "maxlump-mesh 1\n3 1\nv 0 0\nv 1 0\nv 0 1\nt 0 1 3\n";
        match read_mesh(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_header_is_rejected() {
        let text = "meshfile 2\n0 0\n";
        assert!(matches!(
            read_mesh(text.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn jitter_keeps_boundary_fixed() {
        let m = build_structured_tri_mesh(6, 6, unit()).unwrap();
        let j = jitter_vertices(&m, 0.3, 1).unwrap();
        assert!((j.total_area() - 1.0).abs() < 1e-13);
        let moved = (0..m.num_vertices())
            .filter(|&v| m.vertices()[v] != j.vertices()[v])
            .count();
        assert_eq!(moved, 25);
    }
}
