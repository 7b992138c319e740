//! Exact construction and measurement of the typical cell of a
//! high-dimensional Poisson-Voronoi tessellation.
//!
//! The pipeline samples the Poisson process at intensity `1/κ_d` inside a
//! ball, builds the cell of the origin through polar duality (the convex
//! hull of the inverted points), certifies that the truncation cannot
//! change the cell, and then measures radii, widths, face counts and
//! near-regular simplex statistics.

pub mod cell;
pub mod error;
pub mod facestats;
pub mod functionals;
pub mod harness;
pub mod hull;
pub mod linalg;
pub mod lp;
pub mod mathkit;
pub mod meb;
pub mod sampler;

pub use cell::{build_typical_cell, TypicalCell};
pub use error::{Error, Result};
pub use facestats::{face_census, FaceCensus};
pub use functionals::{measure, FunctionalReport};
pub use harness::{run_replication, sweep, CellReport, ExperimentConfig, SweepTable};
pub use hull::{convex_hull, ConvexHull};
pub use mathkit::{circumball, Circumball};
pub use sampler::{PointSet, RngStream};
