//! Parameterised semantic, photometric and geometric transformations.

pub mod affine;
pub mod chain;
pub mod geometric;
pub mod perm;
pub mod photometric;
pub mod ranges;
pub mod semantic;
pub mod warp;

pub use affine::{inverse_affine, recenter, step_matrix, AffineMatrix};
pub use chain::{apply_chain, ground_truth_watermarks, ChainFile, ChainSpec, GeoBlock, PhoBlock};
pub use geometric::{
    apply_geometric, apply_geometric_composed, composed_matrix, geometric_step, GeoOp, GeoOrder, GeoParams,
};
pub use perm::{ClassMember, Permutation};
pub use photometric::{adjust, apply_photometric, PhoOp, PhoOrder, PhoParams};
pub use ranges::{ParamRanges, Range};
pub use semantic::{apply_semantic, random_mask, shaped_mask, surrogate_fill, Fill, MaskShape, SemanticEdit};
pub use warp::warp_bilinear;
