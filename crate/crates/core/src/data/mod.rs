//! Dataset layout, the synthetic view-dependent material renderer, splits and
//! the per-sample augmentation / normalization pipeline.

mod augment;
mod dataset;
mod index;
mod normalize;
mod render;
mod split;
mod synth;
mod window;

pub use augment::{augment, augment_with, AugmentDraw, AugmentParams};
pub use dataset::{Dataset, ViewKey};
pub use index::{
    parse_view_file_name, view_file_name, DatasetIndex, SurfaceInstance, ViewRecord, ViewSource, BASE_THETAS, DELTAS,
    OFFSET_DELTA,
};
pub use normalize::{normalize_stats, ChannelStats};
pub use render::{render_view, Illumination, MaterialClass, SurfaceSample};
pub use split::{make_splits, ClassSplit, SplitConfig, SplitSpec};
pub use synth::{generate_synthetic, render_instances, synthetic_index, SynthConfig};
pub use window::{sample_view_window, window_start};

/// FNV-1a, used for configuration fingerprints in run records.
pub fn fingerprint(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
