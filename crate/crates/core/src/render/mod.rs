//! View ring, depth rendering, block masks and depth post-processing.

pub mod camera;
pub mod depth;
pub mod image;
pub mod mask;

use thiserror::Error;

pub use camera::{make_view_ring, make_view_ring_with, Camera, RingSpec, ViewRing};
pub use depth::{render_depth, render_depth_naive, DepthImage};
pub use image::{depth_to_pgm16, encode_depth_8bit, mask_from_png, mask_to_png, morphological_close, Gray8, ImageError};
pub use mask::{render_block_mask, BinaryMask, OwnerMap};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("DegenerateBounds: shape bounds have no extent")]
    DegenerateBounds,
}
