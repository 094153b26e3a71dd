use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Error, Result};
use crate::ops::conv2d_output_size;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerDesc {
    Conv { out_channels: usize, kernel: usize, stride: usize, pad: usize },
    Relu,
    MaxPool { window: usize, stride: usize },
    Dense { out: usize },
    Dropout { rate: f64 },
}

macro_rules! string_enum {
    ($name:ident { $($variant:ident => $s:literal),+ $(,)? }) => {
        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self { $($name::$variant => $s),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($name::$variant),)+
                    _ => Err(Error::Argument(alloc::format!(concat!("unknown ", stringify!($name), " `{}`"), s))),
                }
            }
        }
    };
}

/// How the `I_v` and `I_δ` streams are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionArch {
    /// `I_v` only.
    Single,
    /// Two full streams, prediction vectors averaged.
    Final,
    /// Feature maps fused at `M`, one trunk above.
    Intermediate,
    /// Pure `I_v` path plus a fused-at-`M` path, prediction vectors averaged.
    Dain,
}
string_enum!(FusionArch { Single => "single", Final => "final", Intermediate => "intermediate", Dain => "dain" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionOp {
    Sum,
    Max,
}
string_enum!(FusionOp { Sum => "sum", Max => "max" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combiner {
    Voting,
    Pooling,
    Filter3d,
}
string_enum!(Combiner { Voting => "voting", Pooling => "pooling", Filter3d => "filter3d" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// `[channels, height, width]` of each stream's input.
    pub input: [usize; 3],
    /// Full single-stream layout, classifier included as the last layer.
    pub backbone: Vec<LayerDesc>,
    pub fusion_arch: FusionArch,
    pub fusion_op: FusionOp,
    /// Index of the ReLU whose output is the fusion / view-combination tap.
    pub fusion_layer: usize,
    pub num_classes: usize,
    pub combiner: Combiner,
}

impl NetworkSpec {
    /// Three conv(3×3)-ReLU-maxpool(2) blocks (16/32/32), dense 128 + ReLU +
    /// dropout 0.5, dense `num_classes`; tap after the third block's ReLU.
    pub fn toy(num_classes: usize, size: usize) -> Self {
        let conv = |c| LayerDesc::Conv { out_channels: c, kernel: 3, stride: 1, pad: 1 };
        let pool = LayerDesc::MaxPool { window: 2, stride: 2 };
        Self {
            input: [3, size, size],
            backbone: vec![
                conv(16),
                LayerDesc::Relu,
                pool,
                conv(32),
                LayerDesc::Relu,
                pool,
                conv(32),
                LayerDesc::Relu,
                pool,
                LayerDesc::Dense { out: 128 },
                LayerDesc::Relu,
                LayerDesc::Dropout { rate: 0.5 },
                LayerDesc::Dense { out: num_classes },
            ],
            fusion_arch: FusionArch::Dain,
            fusion_op: FusionOp::Sum,
            fusion_layer: 7,
            num_classes,
            combiner: Combiner::Pooling,
        }
    }

    /// Two conv blocks on 8×8 inputs, for gradient checks.
    pub fn tiny(num_classes: usize) -> Self {
        Self {
            input: [2, 8, 8],
            backbone: vec![
                LayerDesc::Conv { out_channels: 3, kernel: 3, stride: 1, pad: 1 },
                LayerDesc::Relu,
                LayerDesc::MaxPool { window: 2, stride: 2 },
                LayerDesc::Conv { out_channels: 3, kernel: 3, stride: 1, pad: 1 },
                LayerDesc::Relu,
                LayerDesc::MaxPool { window: 2, stride: 2 },
                LayerDesc::Dense { out: 6 },
                LayerDesc::Relu,
                LayerDesc::Dropout { rate: 0.25 },
                LayerDesc::Dense { out: num_classes },
            ],
            fusion_arch: FusionArch::Dain,
            fusion_op: FusionOp::Sum,
            fusion_layer: 4,
            num_classes,
            combiner: Combiner::Pooling,
        }
    }

    pub fn with_arch(mut self, arch: FusionArch, op: FusionOp) -> Self {
        self.fusion_arch = arch;
        self.fusion_op = op;
        self
    }

    pub fn with_combiner(mut self, combiner: Combiner) -> Self {
        self.combiner = combiner;
        self
    }

    pub fn two_stream(&self) -> bool {
        self.fusion_arch != FusionArch::Single
    }

    /// Output shape of every backbone layer, checking the layout as it goes.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let [c, h, w] = self.input;
        if c == 0 || h == 0 || w == 0 {
            bail!(Spec, "input dims must be positive, got {:?}", self.input);
        }
        let mut shape = vec![c, h, w];
        let mut out = Vec::with_capacity(self.backbone.len());
        for (i, layer) in self.backbone.iter().enumerate() {
            shape = match *layer {
                LayerDesc::Conv { out_channels, kernel, stride, pad } => {
                    if shape.len() != 3 {
                        bail!(Spec, "layer {} conv after a dense layer", i);
                    }
                    if out_channels == 0 || kernel == 0 || stride == 0 {
                        bail!(Spec, "layer {} conv has a zero size", i);
                    }
                    if kernel > shape[1] + 2 * pad || kernel > shape[2] + 2 * pad {
                        bail!(Spec, "layer {} kernel {} exceeds padded map {:?}", i, kernel, shape);
                    }
                    vec![
                        out_channels,
                        conv2d_output_size(shape[1], kernel, stride, pad),
                        conv2d_output_size(shape[2], kernel, stride, pad),
                    ]
                }
                LayerDesc::MaxPool { window, stride } => {
                    if shape.len() != 3 || window == 0 || stride == 0 || window > shape[1] || window > shape[2] {
                        bail!(Spec, "layer {} pool window {} does not fit {:?}", i, window, shape);
                    }
                    vec![shape[0], (shape[1] - window) / stride + 1, (shape[2] - window) / stride + 1]
                }
                LayerDesc::Dense { out } => {
                    if out == 0 {
                        bail!(Spec, "layer {} dense has zero outputs", i);
                    }
                    vec![out]
                }
                LayerDesc::Relu => shape,
                LayerDesc::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        bail!(Spec, "layer {} dropout rate {} outside [0,1)", i, rate);
                    }
                    shape
                }
            };
            out.push(shape.clone());
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            bail!(Spec, "need at least 2 classes, got {}", self.num_classes);
        }
        let shapes = self.layer_shapes()?;
        match self.backbone.last() {
            Some(LayerDesc::Dense { out }) if *out == self.num_classes => {}
            _ => bail!(Spec, "backbone must end in a dense layer with {} outputs", self.num_classes),
        }
        let m = self.fusion_layer;
        if m + 1 >= self.backbone.len() {
            bail!(Spec, "fusion layer {} leaves no layers above it", m);
        }
        if self.backbone[m] != LayerDesc::Relu {
            bail!(Spec, "fusion layer {} is {:?}, not a ReLU", m, self.backbone[m]);
        }
        if shapes[m].len() != 3 || self.backbone[..m].iter().any(|l| matches!(l, LayerDesc::Dense { .. })) {
            bail!(Spec, "fusion layer {} must tap a convolutional feature map", m);
        }
        Ok(())
    }

    /// `[D, H, W]` of the layer-`M` map.
    pub fn fusion_shape(&self) -> Result<[usize; 3]> {
        let s = &self.layer_shapes()?[self.fusion_layer];
        if s.len() != 3 {
            bail!(Spec, "fusion layer output {:?} is not a feature map", s);
        }
        Ok([s[0], s[1], s[2]])
    }

    pub fn describe(&self) -> String {
        alloc::format!("{}/{}/{}", self.fusion_arch, self.fusion_op, self.combiner)
    }
}
