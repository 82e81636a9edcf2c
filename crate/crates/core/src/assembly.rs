//! Degree-of-freedom numbering and matrix assembly.
//!
//! Electric unknowns live on interior edges (boundary edges carry none, which
//! imposes `E x n = 0`). Each interior edge `i` also owns two half unknowns:
//! `i` at its low vertex and `i + n_e` at its high vertex. Magnetic unknowns
//! are one value per element.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::mesh::{ElementKind, Mesh};
use crate::reference_basis::{
    curl_half_basis, curl_merged_basis, half_basis, merged_basis, normalization, vertex_of_half,
    vertex_quadrature,
};
use crate::sparse::{triple_product, CsrMatrix, DiagonalMatrix, VertexBlockMatrix};

/// Piecewise-constant material coefficients, one value per element.
#[derive(Clone, Debug, PartialEq)]
pub struct MaterialField {
    pub epsilon: Vec<Matrix2<f64>>,
    pub mu: Vec<f64>,
}

impl MaterialField {
    pub fn uniform(num_elements: usize, epsilon: f64, mu: f64) -> Result<Self> {
        Self::new(
            vec![Matrix2::identity() * epsilon; num_elements],
            vec![mu; num_elements],
        )
    }

    pub fn new(epsilon: Vec<Matrix2<f64>>, mu: Vec<f64>) -> Result<Self> {
        if epsilon.len() != mu.len() {
            return Err(Error::InvalidArgument(format!(
                "{} permittivities but {} permeabilities",
                epsilon.len(),
                mu.len()
            )));
        }
        for (t, e) in epsilon.iter().enumerate() {
            let asym = (e[(0, 1)] - e[(1, 0)]).abs();
            let scale = e.abs().max();
            if asym > 1e-14 * scale || !(e[(0, 0)] > 0.0) || !(e.determinant() > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "permittivity of element {t} is not symmetric positive definite: {e:?}"
                )));
            }
        }
        if let Some(t) = mu.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "permeability of element {t} must be positive"
            )));
        }
        Ok(MaterialField { epsilon, mu })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}

/// Local edge of an element as seen by the global numbering.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalEdgeDof {
    /// Electric unknown of the edge, `None` on the boundary.
    pub dof: Option<usize>,
    /// +1 when the local (counter-clockwise) direction agrees with the global
    /// low-to-high direction.
    pub sign: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    num_edge_dofs: usize,
    num_elements: usize,
    edge_dof: Vec<Option<usize>>,
    dof_edge: Vec<usize>,
    /// Vertex of each half unknown.
    half_vertex: Vec<usize>,
    vertex_halves: Vec<Vec<usize>>,
    element_dofs: Vec<Vec<LocalEdgeDof>>,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let mut edge_dof = vec![None; mesh.num_edges()];
        let mut dof_edge = Vec::new();
        for (e, edge) in mesh.edges().iter().enumerate() {
            if !edge.boundary {
                edge_dof[e] = Some(dof_edge.len());
                dof_edge.push(e);
            }
        }
        let ne = dof_edge.len();
        let mut half_vertex = vec![0; 2 * ne];
        let mut vertex_halves = vec![Vec::new(); mesh.num_vertices()];
        for ell in 0..2 {
            for (i, &e) in dof_edge.iter().enumerate() {
                let v = mesh.edges()[e].vertices[ell];
                half_vertex[i + ell * ne] = v;
                vertex_halves[v].push(i + ell * ne);
            }
        }
        let element_dofs = mesh
            .elements()
            .iter()
            .enumerate()
            .map(|(t, el)| {
                mesh.element_edges(t)
                    .iter()
                    .enumerate()
                    .map(|(k, &e)| {
                        let (start, _) = el.kind.local_edge(k);
                        let sign = if el.vertices[start] == mesh.edges()[e].vertices[0] {
                            1.0
                        } else {
                            -1.0
                        };
                        LocalEdgeDof {
                            dof: edge_dof[e],
                            sign,
                        }
                    })
                    .collect()
            })
            .collect();
        DofMap {
            num_edge_dofs: ne,
            num_elements: mesh.num_elements(),
            edge_dof,
            dof_edge,
            half_vertex,
            vertex_halves,
            element_dofs,
        }
    }

    /// Number of electric unknowns (interior edges).
    pub fn num_edge_dofs(&self) -> usize {
        self.num_edge_dofs
    }

    /// Number of half unknowns, `2 n_e`.
    pub fn num_half_dofs(&self) -> usize {
        2 * self.num_edge_dofs
    }

    pub fn num_element_dofs(&self) -> usize {
        self.num_elements
    }

    pub fn edge_dof(&self, edge: usize) -> Option<usize> {
        self.edge_dof[edge]
    }

    pub fn dof_edge(&self, dof: usize) -> usize {
        self.dof_edge[dof]
    }

    pub fn half_vertex(&self, half: usize) -> usize {
        self.half_vertex[half]
    }

    pub fn vertex_halves(&self, vertex: usize) -> &[usize] {
        &self.vertex_halves[vertex]
    }

    pub fn element_dofs(&self, t: usize) -> &[LocalEdgeDof] {
        &self.element_dofs[t]
    }

    /// Global half unknown of local half `(k, gamma)` on element `t`.
    pub fn local_half(&self, t: usize, k: usize, gamma: usize) -> Option<usize> {
        let LocalEdgeDof { dof, sign } = self.element_dofs[t][k];
        // gamma = 0 sits at the local start vertex, which is the global low
        // vertex exactly when the orientations agree
        let ell = if sign > 0.0 { gamma } else { 1 - gamma };
        dof.map(|i| i + ell * self.num_edge_dofs)
    }
}

fn check_materials(mesh: &Mesh, materials: &MaterialField) -> Result<()> {
    if materials.len() != mesh.num_elements() {
        return Err(Error::InvalidArgument(format!(
            "materials given for {} elements, mesh has {}",
            materials.len(),
            mesh.num_elements()
        )));
    }
    Ok(())
}

/// Diagonal magnetic mass matrix, entry `mu_T |T|`.
pub fn assemble_mass_h(mesh: &Mesh, materials: &MaterialField) -> Result<DiagonalMatrix> {
    check_materials(mesh, materials)?;
    let diag = (0..mesh.num_elements())
        .map(|t| {
            let f = mesh.affine_map(t)?;
            Ok(materials.mu[t] * f.determinant * mesh.elements()[t].kind.reference_measure())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagonalMatrix::new(diag))
}

/// Lumped electric mass matrix on the half unknowns, computed with the vertex
/// quadrature rule. Each half function is nonzero at a single quadrature
/// point, so all contributions land in the block of that vertex.
pub fn assemble_lumped_mass_e(
    mesh: &Mesh,
    materials: &MaterialField,
    dofs: &DofMap,
) -> Result<VertexBlockMatrix> {
    check_materials(mesh, materials)?;
    let blocks: Vec<Vec<usize>> = (0..mesh.num_vertices())
        .map(|v| dofs.vertex_halves(v).to_vec())
        .collect();
    let mut m = VertexBlockMatrix::new(dofs.num_half_dofs(), blocks)?;
    for (t, el) in mesh.elements().iter().enumerate() {
        let f = mesh.affine_map(t)?;
        let area = f.determinant * el.kind.reference_measure();
        let eps = materials.epsilon[t];
        let scale = normalization(el.kind);
        let rule = vertex_quadrature(el.kind);
        for (l, (x, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let mut active: Vec<(usize, Vector2<f64>)> = Vec::with_capacity(2);
            for k in 0..el.kind.num_vertices() {
                for gamma in 0..2 {
                    let Some(half) = dofs.local_half(t, k, gamma) else {
                        continue;
                    };
                    let v = half_basis(el.kind, k, gamma)?.eval(*x);
                    if v == [0.0, 0.0] {
                        continue;
                    }
                    debug_assert_eq!(vertex_of_half(el.kind, k, gamma)?, l);
                    let sign = dofs.element_dofs(t)[k].sign;
                    active.push((
                        half,
                        f.inverse_transpose * Vector2::new(v[0], v[1]) * (sign * scale),
                    ));
                }
            }
            for (i, ui) in &active {
                for (j, uj) in &active {
                    m.add(*i, *j, area * w * (eps * uj).dot(ui))?;
                }
            }
        }
    }
    Ok(m)
}

/// Curl matrix on the half unknowns, `n_T x 2 n_e`, entry `int_T curl phi`.
pub fn assemble_curl_tilde(mesh: &Mesh, dofs: &DofMap) -> Result<CsrMatrix> {
    let mut trips = Vec::new();
    for (t, el) in mesh.elements().iter().enumerate() {
        for k in 0..el.kind.num_vertices() {
            let sign = dofs.element_dofs(t)[k].sign;
            for gamma in 0..2 {
                if let Some(half) = dofs.local_half(t, k, gamma) {
                    // covariant Piola: int_T curl phi equals the reference integral
                    let c = curl_half_basis(el.kind, k, gamma)?
                        * normalization(el.kind)
                        * el.kind.reference_measure();
                    trips.push((t, half, sign * c));
                }
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_elements(), dofs.num_half_dofs(), trips)
}

/// Curl matrix on the edge unknowns, `n_T x n_e`, entries `+-1`.
pub fn assemble_curl(mesh: &Mesh, dofs: &DofMap) -> Result<CsrMatrix> {
    let mut trips = Vec::new();
    for (t, el) in mesh.elements().iter().enumerate() {
        for (k, ld) in dofs.element_dofs(t).iter().enumerate() {
            if let Some(i) = ld.dof {
                let c = curl_merged_basis(el.kind, k)?
                    * normalization(el.kind)
                    * el.kind.reference_measure();
                trips.push((t, i, ld.sign * c));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_elements(), dofs.num_edge_dofs(), trips)
}

/// Averaging map from half unknowns to edge unknowns.
pub fn build_projection(dofs: &DofMap) -> CsrMatrix {
    let ne = dofs.num_edge_dofs();
    CsrMatrix::from_triplets(
        ne,
        2 * ne,
        (0..ne).flat_map(|i| [(i, i, 0.5), (i, i + ne, 0.5)]),
    )
    .expect("projection indices are in range")
}

/// Sparse inverse electric mass `P M~^-1 P^T`.
pub fn build_inverse_mass_e(
    lumped: &VertexBlockMatrix,
    projection: &CsrMatrix,
) -> Result<CsrMatrix> {
    triple_product(projection, &lumped.invert_blocks()?)
}

/// Curl-curl stiffness `(mu^-1 curl phi_j, curl phi_i)`, assembled element
/// by element.
pub fn assemble_stiffness(
    mesh: &Mesh,
    materials: &MaterialField,
    dofs: &DofMap,
) -> Result<CsrMatrix> {
    check_materials(mesh, materials)?;
    let mut trips = Vec::new();
    for (t, el) in mesh.elements().iter().enumerate() {
        let f = mesh.affine_map(t)?;
        let area = f.determinant * el.kind.reference_measure();
        let local: Vec<(usize, f64)> = dofs
            .element_dofs(t)
            .iter()
            .enumerate()
            .filter_map(|(k, ld)| {
                ld.dof.map(|i| {
                    let c = curl_merged_basis(el.kind, k).expect("local edge in range");
                    (
                        i,
                        ld.sign * c * normalization(el.kind) * el.kind.reference_measure(),
                    )
                })
            })
            .collect();
        // curl phi is constant on T, equal to (int_T curl phi) / |T|
        for &(i, ci) in &local {
            for &(j, cj) in &local {
                trips.push((i, j, ci * cj / (materials.mu[t] * area)));
            }
        }
    }
    CsrMatrix::from_triplets(dofs.num_edge_dofs(), dofs.num_edge_dofs(), trips)
}

/// Evaluates `sum_i e_i phi_i` on element `t` at reference point `x_ref`.
pub fn eval_edge_field(
    mesh: &Mesh,
    dofs: &DofMap,
    e: &[f64],
    t: usize,
    x_ref: [f64; 2],
) -> Result<Vector2<f64>> {
    let el = &mesh.elements()[t];
    let f = mesh.affine_map(t)?;
    let mut v = Vector2::zeros();
    for (k, ld) in dofs.element_dofs(t).iter().enumerate() {
        if let Some(i) = ld.dof {
            let p = merged_basis(el.kind, k)?.eval(x_ref);
            v += Vector2::new(p[0], p[1]) * (e[i] * ld.sign * normalization(el.kind));
        }
    }
    Ok(f.inverse_transpose * v)
}

/// Every matrix of the scheme for one mesh and material distribution.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: Mesh,
    pub materials: MaterialField,
    pub dofs: DofMap,
    pub mass_h: DiagonalMatrix,
    pub mass_h_inv: DiagonalMatrix,
    pub lumped_mass_e: VertexBlockMatrix,
    pub lumped_mass_e_inv: VertexBlockMatrix,
    pub curl_tilde: CsrMatrix,
    pub curl_tilde_t: CsrMatrix,
    pub curl: CsrMatrix,
    pub curl_t: CsrMatrix,
    pub projection: CsrMatrix,
    pub inv_mass_e: CsrMatrix,
    pub stiffness: CsrMatrix,
}

impl Discretization {
    pub fn assemble(mesh: Mesh, materials: MaterialField) -> Result<Self> {
        let dofs = DofMap::new(&mesh);
        let mass_h = assemble_mass_h(&mesh, &materials)?;
        let mass_h_inv = mass_h.inverse()?;
        let lumped_mass_e = assemble_lumped_mass_e(&mesh, &materials, &dofs)?;
        let lumped_mass_e_inv = lumped_mass_e.invert_blocks()?;
        let curl_tilde = assemble_curl_tilde(&mesh, &dofs)?;
        let curl = assemble_curl(&mesh, &dofs)?;
        let projection = build_projection(&dofs);
        let inv_mass_e = triple_product(&projection, &lumped_mass_e_inv)?;
        let stiffness = assemble_stiffness(&mesh, &materials, &dofs)?;
        Ok(Discretization {
            curl_tilde_t: curl_tilde.transpose(),
            curl_t: curl.transpose(),
            mesh,
            materials,
            dofs,
            mass_h,
            mass_h_inv,
            lumped_mass_e,
            lumped_mass_e_inv,
            curl_tilde,
            curl,
            projection,
            inv_mass_e,
            stiffness,
        })
    }

    /// Element kinds present in the mesh.
    pub fn element_kinds(&self) -> Vec<ElementKind> {
        let mut k: Vec<ElementKind> = self.mesh.elements().iter().map(|e| e.kind).collect();
        k.sort();
        k.dedup();
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, build_structured_quad_mesh, jitter_vertices, BBox};
    use crate::sparse::LinearOperator;
    use nalgebra::DMatrix;

    fn two_squares() -> Mesh {
        build_structured_quad_mesh(2, 1, BBox::new(0.0, 0.0, 2.0, 1.0)).unwrap()
    }

    #[test]
    fn mass_h_examples() {
        let m = build_structured_quad_mesh(1, 1, BBox::unit_square()).unwrap();
        let mat = MaterialField::uniform(1, 1.0, 1.0).unwrap();
        assert_eq!(assemble_mass_h(&m, &mat).unwrap().diag, vec![1.0]);

        let tri = Mesh::new(
            vec![
                crate::mesh::Point::new(0.0, 0.0),
                crate::mesh::Point::new(1.0, 0.0),
                crate::mesh::Point::new(0.0, 1.0),
            ],
            vec![crate::mesh::Element::triangle(0, 1, 2)],
            &[],
        )
        .unwrap();
        let mat = MaterialField::uniform(1, 1.0, 2.0).unwrap();
        assert_eq!(assemble_mass_h(&tri, &mat).unwrap().diag, vec![1.0]);

        let h = 0.125;
        let m = build_structured_quad_mesh(1, 1, BBox::new(0.0, 0.0, h, h)).unwrap();
        let mat = MaterialField::uniform(1, 1.0, 3.0).unwrap();
        assert_eq!(assemble_mass_h(&m, &mat).unwrap().diag, vec![3.0 * h * h]);
    }

    #[test]
    fn lumped_mass_on_unit_grid() {
        let m = build_structured_quad_mesh(4, 4, BBox::new(0.0, 0.0, 4.0, 4.0)).unwrap();
        let dofs = DofMap::new(&m);
        let mat = MaterialField::uniform(m.num_elements(), 1.0, 1.0).unwrap();
        let mt = assemble_lumped_mass_e(&m, &mat, &dofs).unwrap();
        let d = mt.to_dense();
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                assert_eq!(d[(i, j)], if i == j { 0.5 } else { 0.0 });
            }
        }
        // anisotropic: an x-directed half sees eps_xx, a y-directed one eps_yy
        let (exx, eyy) = (2.0, 5.0);
        let mat = MaterialField::new(
            vec![Matrix2::new(exx, 0.0, 0.0, eyy); m.num_elements()],
            vec![1.0; m.num_elements()],
        )
        .unwrap();
        let mt = assemble_lumped_mass_e(&m, &mat, &dofs).unwrap();
        for h in 0..dofs.num_half_dofs() {
            let [a, b] = m.edges()[dofs.dof_edge(h % dofs.num_edge_dofs())].vertices;
            let horizontal = m.vertices()[a].y == m.vertices()[b].y;
            let want = 0.5 * if horizontal { exx } else { eyy };
            assert_eq!(mt.get(h, h), want);
        }
        assert_eq!(
            mt.to_dense().iter().filter(|&&v| v != 0.0).count(),
            dofs.num_half_dofs()
        );
    }

    #[test]
    fn single_element_has_no_dofs() {
        let m = build_structured_quad_mesh(1, 1, BBox::unit_square()).unwrap();
        let d = Discretization::assemble(m, MaterialField::uniform(1, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(d.lumped_mass_e.dim(), 0);
        assert_eq!(d.inv_mass_e.nnz(), 0);
        assert_eq!((d.curl.nrows(), d.curl.ncols()), (1, 0));
    }

    #[test]
    fn two_square_fixture() {
        let m = two_squares();
        let d = Discretization::assemble(m, MaterialField::uniform(2, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!(d.dofs.num_edge_dofs(), 1);
        let ct = d.curl_tilde.to_dense();
        assert_eq!(ct, DMatrix::from_row_slice(2, 2, &[0.5, 0.5, -0.5, -0.5]));
        assert_eq!(
            d.curl.to_dense(),
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0])
        );
        assert_eq!(d.stiffness.to_dense(), DMatrix::from_element(1, 1, 2.0));
        assert!((d.inv_mass_e.get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let dofs = DofMap::new(&two_squares());
        let p = build_projection(&dofs);
        assert_eq!(p.to_dense(), DMatrix::from_row_slice(1, 2, &[0.5, 0.5]));

        let m = build_structured_quad_mesh(3, 3, BBox::unit_square()).unwrap();
        let dofs = DofMap::new(&m);
        let p = build_projection(&dofs);
        let ne = dofs.num_edge_dofs();
        let x: Vec<f64> = (0..ne).map(|i| i as f64 * 0.3 - 1.0).collect();
        let xx: Vec<f64> = x.iter().chain(&x).copied().collect();
        assert_eq!(p.spmv(&xx).unwrap(), x);
        let ppt = p.matmul(&p.transpose()).unwrap().to_dense();
        assert_eq!(ppt, DMatrix::identity(ne, ne) * 0.5);
    }

    #[test]
    fn inverse_mass_on_uniform_grid_is_reciprocal_eps() {
        let m = build_structured_quad_mesh(5, 5, BBox::unit_square()).unwrap();
        for c in [1.0, 4.0] {
            let d =
                Discretization::assemble(m.clone(), MaterialField::uniform(25, c, 1.0).unwrap())
                    .unwrap();
            assert_eq!(d.inv_mass_e.nnz(), d.dofs.num_edge_dofs());
            for (i, j, v) in d.inv_mass_e.triplets() {
                assert_eq!(i, j);
                assert!((v - 1.0 / c).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn interior_element_curl_row_sums_to_zero() {
        let m = build_structured_quad_mesh(4, 4, BBox::unit_square()).unwrap();
        let dofs = DofMap::new(&m);
        let ct = assemble_curl_tilde(&m, &dofs).unwrap();
        let c = assemble_curl(&m, &dofs).unwrap();
        let t = 5; // cell (1, 1)
        let (_, v) = ct.row(t);
        assert_eq!(v.len(), 8);
        // the halves of a closed element boundary circulate to zero when
        // the field is a single constant on every edge, i.e. sum of signs
        let signs: f64 = dofs.element_dofs(t).iter().map(|d| d.sign).sum();
        assert_eq!(v.iter().sum::<f64>(), signs);
        assert_eq!(signs, 0.0);
        let (_, cv) = c.row(t);
        assert_eq!(cv.len(), 4);
        assert!(cv.iter().all(|v| v.abs() == 1.0));
    }

    #[test]
    fn stiffness_kills_gradient_fields() {
        // discrete gradient of a potential vanishing on the boundary
        let m = jitter_vertices(
            &build_structured_mesh(6, 5, BBox::unit_square(), |i, j| (i * j) % 2 == 0).unwrap(),
            0.2,
            4,
        )
        .unwrap();
        let n = m.num_elements();
        let d = Discretization::assemble(m, MaterialField::uniform(n, 1.0, 1.7).unwrap()).unwrap();
        let mut on_boundary = vec![false; d.mesh.num_vertices()];
        for e in d.mesh.edges().iter().filter(|e| e.boundary) {
            on_boundary[e.vertices[0]] = true;
            on_boundary[e.vertices[1]] = true;
        }
        let phi: Vec<f64> = (0..d.mesh.num_vertices())
            .map(|v| {
                if on_boundary[v] {
                    0.0
                } else {
                    (v as f64 * 0.7).sin()
                }
            })
            .collect();
        let e: Vec<f64> = (0..d.dofs.num_edge_dofs())
            .map(|i| {
                let [a, b] = d.mesh.edges()[d.dofs.dof_edge(i)].vertices;
                phi[b] - phi[a]
            })
            .collect();
        assert!(d.curl.spmv(&e).unwrap().iter().all(|v| v.abs() < 1e-15));
        let ke = d.stiffness.spmv(&e).unwrap();
        let norm = ke.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-12, "{norm}");
    }

    #[test]
    fn lumped_product_is_exact_for_affine_integrands() {
        // eps phi_j . c with a constant vector c is affine on both reference
        // elements, so the vertex rule must reproduce the exact integral
        use crate::reference_basis::high_order_quadrature;
        let b = Matrix2::new(1.3, 0.4, -0.2, 0.9);
        let bit = b.try_inverse().unwrap().transpose();
        let eps = Matrix2::new(2.0, 0.3, 0.3, 1.0);
        let c = Vector2::new(-0.7, 1.9);
        for kind in [ElementKind::Triangle, ElementKind::Parallelogram] {
            for j in 0..kind.num_vertices() {
                let fj = merged_basis(kind, j).unwrap();
                let integrand = |p: [f64; 2]| {
                    let v = fj.eval(p);
                    (eps * bit * Vector2::new(v[0], v[1])).dot(&c)
                };
                let lumped = vertex_quadrature(kind).integrate(kind, integrand);
                let exact = high_order_quadrature(kind).integrate(kind, integrand);
                assert!((lumped - exact).abs() < 1e-14, "{kind:?} {j}");
            }
        }
    }

    #[test]
    fn rejects_mismatched_materials() {
        let m = two_squares();
        let mat = MaterialField::uniform(3, 1.0, 1.0).unwrap();
        assert!(assemble_mass_h(&m, &mat).is_err());
        assert!(MaterialField::uniform(2, 1.0, 0.0).is_err());
        assert!(MaterialField::new(vec![Matrix2::new(1.0, 0.5, 0.0, 1.0)], vec![1.0]).is_err());
    }

    #[test]
    fn gradient_apply_matches_dense() {
        let m = build_structured_quad_mesh(3, 2, BBox::unit_square()).unwrap();
        let d = Discretization::assemble(m, MaterialField::uniform(6, 1.0, 1.0).unwrap()).unwrap();
        let x: Vec<f64> = (0..d.dofs.num_half_dofs())
            .map(|i| (i as f64).sin())
            .collect();
        let y = d.lumped_mass_e.apply(&x).unwrap();
        let want = d.lumped_mass_e.to_dense() * nalgebra::DVector::from_column_slice(&x);
        for i in 0..y.len() {
            assert!((y[i] - want[i]).abs() < 1e-15);
        }
    }
}
