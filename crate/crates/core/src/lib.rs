//! Topological invariants of disordered lattice models: bulk and boundary
//! Chern numbers, Fredholm indices, gap labels and Thouless pumps.

pub mod catalog;
pub mod clifford;
pub mod error;
pub mod gaplabel;
pub mod invariants;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod pump;
pub mod slab;
pub mod spectral;

pub use error::{Error, Result};
pub use lattice::{Bc, FiniteVolume, TraceWindow};
pub use linalg::{CMat, C64};
pub use model::{
    assemble_bulk, assemble_halfspace, bloch_fiber, magnetic_translation, sample_disorder, BoundaryTerm, BulkModel,
    DisorderConfig, HalfSpaceModel, HoppingSpec, LatticeOperator, MagneticField,
};
