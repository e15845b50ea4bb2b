//! Planes, contours, 2D signed distances, scene normalization, and contour
//! extraction from meshes and binary masks.

mod contour;
mod mask;
mod mesh;
mod plane;
mod sections;
mod slice;

pub use contour::{distance_to_contours, point_in_contours, sdf2d_eval, Contour2D, ON_EDGE_TOL};
pub use mask::{contours_from_mask, sections_from_masks, BinaryMask, MaskSidecar, MaskSlice};
pub use mesh::TriMesh;
pub use plane::{Plane, Vec2, Vec3};
pub use sections::{normalize_scene, CrossSectionSet, NormalizationTransform, Section, NORMALIZED_EXTENT};
pub use slice::{plane_offsets, slice_into_sections, slice_mesh, slicing_planes, SliceLayout, SLICE_INSET, SNAP_TOL};
