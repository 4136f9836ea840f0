//! Cracked reference configuration: meshing, crack insertion, and the
//! element strain operator.

pub mod crack;
pub mod mesh;
pub mod snapshot;

pub use crack::{insert_crack, ConstraintSet, CrackPath, CrackedSpace, DofMap, Tie};
pub use mesh::{build_rect_mesh, build_rect_mesh_with, BoundaryEdge, BoundaryTag, ElementGeometry, Mesh, Point2, RectSide};
