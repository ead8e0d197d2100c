//! Fixed points of multivalued maps on boxes by orthant labeling.
//!
//! A grid over the box is labeled with the orthant of each vertex's
//! displacement `f(z) - z`. Cells that see every orthant, and faces whose
//! labels cannot be cut off by a hyperplane through the origin, mark where a
//! fixed point can hide; the solver refines around them and keeps the point
//! with the smallest residual `dist(z, conv f(z))`.

pub mod correspondence;
pub mod dcn;
pub mod degree;
pub mod error;
pub mod geometry;
pub mod hull;
pub mod labeling;
pub mod solver;

pub use correspondence::{Correspondence, MapSpec};
pub use error::{Error, Result};
pub use geometry::{BoxDomain, GridSpec, OrthantLabel, Region};
pub use labeling::{label_grid, GridLabeling, LabelConfig};
pub use solver::{solve, solve_map, SolveReport, SolveStatus, SolverConfig};
