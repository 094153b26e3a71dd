use alloc::vec;
use alloc::vec::Vec;

use super::affine::{warp_affine, AffineParams};
use super::align::{estimate_affine_with, AlignConfig};
use super::image::Image;
use crate::error::{bail, Result};

/// Signed differential image `I_v − aligned(I_{v+δ})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialImage {
    pub pixels: Image,
    pub alignment: AffineParams,
    /// False where the warp sampled outside the `v+δ` image; pixels there are zero.
    pub valid_mask: Vec<bool>,
}

impl DifferentialImage {
    pub fn valid_count(&self) -> usize {
        self.valid_mask.iter().filter(|&&v| v).count()
    }
}

pub fn make_differential(base: &Image, offset: &Image, align: bool) -> Result<DifferentialImage> {
    make_differential_with(base, offset, align.then(AlignConfig::default).as_ref())
}

/// With `align = Some(cfg)`, `offset` is first registered onto `base`.
pub fn make_differential_with(base: &Image, offset: &Image, align: Option<&AlignConfig>) -> Result<DifferentialImage> {
    if !base.same_dims(offset) {
        bail!(Dimension, "differential needs equal dims, got {:?} and {:?}", base.dims(), offset.dims());
    }
    let (w, h, ch) = base.dims();
    let (alignment, moved, valid_mask) = match align {
        Some(cfg) => {
            let a = estimate_affine_with(base, offset, cfg)?;
            let warped = warp_affine(offset, &a);
            (a, warped.image, warped.valid)
        }
        None => (AffineParams::IDENTITY, offset.clone(), vec![true; w * h]),
    };
    let mut pixels = Image::zeros(w, h, ch);
    for (i, &ok) in valid_mask.iter().enumerate() {
        if ok {
            for c in 0..ch {
                pixels.data_mut()[i * ch + c] = base.data()[i * ch + c] - moved.data()[i * ch + c];
            }
        }
    }
    Ok(DifferentialImage { pixels, alignment, valid_mask })
}

/// Fraction of valid pixels whose every channel satisfies `|value| < threshold`.
pub fn sparsity_stats(d: &DifferentialImage, threshold: f64) -> Result<f64> {
    if !(threshold >= 0.0) {
        bail!(Argument, "sparsity threshold must be >= 0, got {}", threshold);
    }
    let ch = d.pixels.channels();
    let mut valid = 0usize;
    let mut small = 0usize;
    for (i, &ok) in d.valid_mask.iter().enumerate() {
        if !ok {
            continue;
        }
        valid += 1;
        if d.pixels.data()[i * ch..(i + 1) * ch].iter().all(|v| (v.abs() as f64) < threshold) {
            small += 1;
        }
    }
    if valid == 0 {
        bail!(UndefinedStatistic, "differential image has no valid pixels");
    }
    Ok(small as f64 / valid as f64)
}
