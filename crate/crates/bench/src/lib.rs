//! Benchmark fixtures shared by the criterion targets.

use maxlump_core::benchmarks::{initial_state, CavityMode};
use maxlump_core::mesh::{build_structured_mesh, BBox, Mesh};
use maxlump_core::timestepper::estimate_cfl;
use maxlump_core::{Discretization, FieldState, MaterialField};

/// Unit-square mesh of `n`×`n` cells; every third cell is split into triangles.
pub fn hybrid_mesh(n: usize) -> Mesh {
    build_structured_mesh(n, n, BBox::unit_square(), |i, j| (i + j) % 3 == 0)
        .expect("structured mesh")
}

pub fn discretization(n: usize) -> Discretization {
    let mesh = hybrid_mesh(n);
    let materials = MaterialField::uniform(mesh.num_elements(), 1.0, 1.0).expect("materials");
    Discretization::assemble(mesh, materials).expect("assembly")
}

/// Cavity-mode initial data at 0.9 of the stability limit.
pub fn cavity_state(disc: &Discretization) -> (FieldState, f64) {
    let dt = 0.9 * estimate_cfl(&disc.inv_mass_e, &disc.stiffness).expect("cfl");
    let mode = CavityMode::new(1, 1).expect("mode");
    (
        initial_state(disc, &mode, 0.0, dt).expect("initial state"),
        dt,
    )
}
