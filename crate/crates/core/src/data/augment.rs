use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::imaging::Image;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentParams {
    /// Maximum relative stretch per axis.
    pub stretch: f64,
    pub flip_prob: f64,
    pub crop_size: usize,
    /// Square size every image is resized to first.
    pub resize: usize,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams { stretch: 0.1, flip_prob: 0.5, crop_size: 32, resize: 36 }
    }
}

impl AugmentParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.stretch) {
            bail!(Argument, "stretch must lie in [0, 1), got {}", self.stretch);
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            bail!(Argument, "flip_prob must lie in [0, 1], got {}", self.flip_prob);
        }
        let min_side = stretched(self.resize, 1.0 - self.stretch);
        if self.crop_size == 0 || self.crop_size > min_side {
            bail!(Argument, "crop {} does not fit the smallest stretched size {}", self.crop_size, min_side);
        }
        Ok(())
    }

    /// Deterministic evaluation transform: resize and center crop.
    pub fn center(&self, image: &Image) -> Result<Image> {
        self.validate()?;
        let off = (self.resize - self.crop_size) / 2;
        resized(image, self.resize, self.resize).crop(off, off, self.crop_size, self.crop_size)
    }
}

fn stretched(size: usize, factor: f64) -> usize {
    libm::round(size as f64 * factor) as usize
}

fn resized(image: &Image, w: usize, h: usize) -> Image {
    if image.width() == w && image.height() == h {
        image.clone()
    } else {
        image.resize(w, h)
    }
}

/// One geometric draw. Applying it to both members of a pair keeps them
/// registered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentDraw {
    pub width: usize,
    pub height: usize,
    pub flip: bool,
    pub crop_x: usize,
    pub crop_y: usize,
}

impl AugmentDraw {
    pub fn sample(params: &AugmentParams, rng: &mut Rng) -> Result<Self> {
        params.validate()?;
        let s = params.stretch;
        let width = stretched(params.resize, rng.uniform(1.0 - s, 1.0 + s));
        let height = stretched(params.resize, rng.uniform(1.0 - s, 1.0 + s));
        let flip = rng.bernoulli(params.flip_prob);
        let crop_x = rng.below((width - params.crop_size + 1) as u64) as usize;
        let crop_y = rng.below((height - params.crop_size + 1) as u64) as usize;
        Ok(AugmentDraw { width, height, flip, crop_x, crop_y })
    }
}

/// Applies a previously sampled draw.
pub fn augment_with(image: &Image, params: &AugmentParams, draw: &AugmentDraw) -> Result<Image> {
    let base = resized(image, params.resize, params.resize);
    let mut out = resized(&base, draw.width, draw.height);
    if draw.flip {
        out = out.flip_horizontal();
    }
    out.crop(draw.crop_x, draw.crop_y, params.crop_size, params.crop_size)
}

/// resize → per-axis stretch → optional horizontal flip → random crop.
pub fn augment(image: &Image, params: &AugmentParams, rng: &mut Rng) -> Result<Image> {
    let draw = AugmentDraw::sample(params, rng)?;
    augment_with(image, params, &draw)
}
