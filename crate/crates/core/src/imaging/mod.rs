//! Images, affine warps, photometric alignment and differential images.

mod affine;
mod align;
mod differential;
mod image;

pub use affine::{warp_affine, AffineParams, Warped};
pub use align::{estimate_affine, estimate_affine_with, AlignConfig};
pub use differential::{make_differential, make_differential_with, sparsity_stats, DifferentialImage};
pub use image::Image;
