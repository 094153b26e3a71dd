use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::imaging::Image;

/// Per-channel mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Statistics over every pixel of `images`. Pass training images only.
pub fn normalize_stats<'a>(images: impl IntoIterator<Item = &'a Image>) -> Result<ChannelStats> {
    let images: Vec<&Image> = images.into_iter().collect();
    let Some(first) = images.first() else { bail!(UndefinedStatistic, "no images to compute statistics over") };
    let ch = first.channels();
    if images.iter().any(|i| i.channels() != ch) {
        bail!(Dimension, "images disagree on channel count");
    }
    let mut sum = vec![0.0f64; ch];
    let mut n = 0usize;
    for img in &images {
        for px in img.data().chunks_exact(ch) {
            for (s, &v) in sum.iter_mut().zip(px) {
                *s += v as f64;
            }
        }
        n += img.width() * img.height();
    }
    if n == 0 {
        bail!(UndefinedStatistic, "images contain no pixels");
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let mut sq = vec![0.0f64; ch];
    for img in &images {
        for px in img.data().chunks_exact(ch) {
            for c in 0..ch {
                let d = px[c] as f64 - mean[c];
                sq[c] += d * d;
            }
        }
    }
    let std: Vec<f64> = sq.iter().map(|s| libm::sqrt(s / n as f64)).collect();
    if let Some(c) = std.iter().position(|&s| !(s > 1e-12)) {
        bail!(Numeric, "channel {c} has zero variance");
    }
    Ok(ChannelStats { mean, std })
}

impl ChannelStats {
    /// (x − mean) / std per channel. Call once per image.
    pub fn apply(&self, image: &Image) -> Result<Image> {
        let ch = image.channels();
        if ch != self.mean.len() {
            bail!(Dimension, "stats for {} channels applied to a {}-channel image", self.mean.len(), ch);
        }
        let mut out = image.clone();
        for px in out.data_mut().chunks_exact_mut(ch) {
            for c in 0..ch {
                px[c] = ((px[c] as f64 - self.mean[c]) / self.std[c]) as f32;
            }
        }
        Ok(out)
    }
}
