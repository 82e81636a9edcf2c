//! Mass-lumped mixed finite elements for the 2D transverse-electric Maxwell
//! system on hybrid triangle/parallelogram meshes.
//!
//! The electric field uses lowest-order edge elements and the magnetic field
//! piecewise constants. Vertex quadrature on an enriched edge space makes the
//! electric mass block-diagonal, and averaging back to one unknown per edge
//! gives a sparse, explicitly assembled inverse mass matrix. On uniform
//! rectangular grids the resulting scheme reproduces the Yee scheme.

pub mod assembly;
pub mod benchmarks;
pub mod config;
pub mod eoc;
pub mod error;
pub mod mesh;
pub mod reference_basis;
pub mod scenario;
pub mod snapshot;
pub mod sparse;
pub mod timestepper;
pub mod yee;

pub use assembly::{Discretization, DofMap, MaterialField};
pub use benchmarks::{CavityMode, ErrorNorms, ExactSolution};
pub use config::SimConfig;
pub use eoc::{EocRow, EocTable};
pub use error::{Error, Result};
pub use mesh::{BBox, ElementKind, Mesh};
pub use sparse::{CsrMatrix, DiagonalMatrix, LinearOperator, VertexBlockMatrix};
pub use timestepper::{FieldState, FirstOrderOperators, Leapfrog, SourceTerm};
