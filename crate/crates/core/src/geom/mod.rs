//! Restricted solid kernel for sketch-and-extrude sequences.
//!
//! Each extrusion becomes a [`Prism`]: a polygonized planar region placed on a
//! frame and swept along its normal. The solid is never built explicitly;
//! it is the left fold of the prisms' boolean operations evaluated point by
//! point ([`CompiledModel::classify_point`]). Boundary meshes keep the prism
//! faces whose neighbourhood straddles the folded solid, and point clouds are
//! sampled from those meshes.

pub mod frame;
mod mesh;
mod model;
pub mod polygon;
mod profile;
mod sample;

pub use frame::{Aabb, Frame, Vec3};
pub use mesh::{default_subdivision, tessellate, tessellate_with, Mesh, MAX_SUBDIVISION};
pub use model::{
    classify_point, compile_sequence, compile_sequence_with, compile_unnormalized, normalize,
    normalize_with, CompiledModel, KernelConfig, KernelError, PointClass, Prism, Similarity,
};
pub use profile::{build_profile, polygonize, RealCurve, RealLoop, Region};
pub use sample::{sample_mesh, sample_point_cloud, sample_point_cloud_with, PointCloud};
