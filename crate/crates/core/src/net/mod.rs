//! Backbone streams, two-stream fusion architectures and multiview combiners.
//!
//! A network is cut at the fusion layer `M`. Below the cut sit one or two
//! image streams (`I_v`, and `I_δ` for two-stream architectures); above it
//! sit one or two prediction heads, each consuming a layer-`M` map taken
//! from stream A, stream B or their fusion. The output probability vector
//! is the unweighted mean of the heads' softmax outputs.

mod fusion;
mod layers;
mod multiview;
mod network;
mod spec;

pub use fusion::{fuse_maps, fuse_maps_backward};
pub use layers::{Layer, Segment, SegmentTrace};
pub use multiview::{
    multiview_filter3d, multiview_filter3d_backward, multiview_pool, multiview_pool_backward, multiview_vote,
    Filter3dTrace, PoolTrace,
};
pub use network::{Decision, HeadSource, Network, ParamInfo, ParamKind, Prediction, StreamInput};
pub use spec::{Combiner, FusionArch, FusionOp, LayerDesc, NetworkSpec};
