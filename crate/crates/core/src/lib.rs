//! Reconstruction of 3D neural signed-distance fields from planar
//! cross-sections.
//!
//! The pipeline runs contour ingestion ([`geometry`]), labeled sample
//! generation ([`sampling`]), a hybrid hash-grid / Fourier-feature field
//! ([`encoding`], [`field`]), symmetric-difference training ([`training`]),
//! isosurface extraction ([`meshing`]) and evaluation ([`metrics`]).

pub mod error;
pub mod encoding;
pub mod field;
pub mod fixtures;
pub mod geometry;
pub mod meshing;
pub mod metrics;
pub mod real;
pub mod rng;
pub mod sampling;
pub mod shapes;
pub mod training;

pub use error::{Error, Result};
pub use geometry::{Vec2, Vec3};
