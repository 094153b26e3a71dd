use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct MaxPoolCache {
    in_shape: [usize; 3],
    /// Flat input index of the winner for each output element.
    argmax: Vec<usize>,
}

impl MaxPoolCache {
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// Max pooling over `window x window` patches of a `[C, H, W]` map.
///
/// Ties go to the first element in row-major scan order of the window.
pub fn maxpool2d<T: Real>(input: &Tensor<T>, window: usize, stride: usize) -> Result<(Tensor<T>, MaxPoolCache)> {
    if input.rank() != 3 {
        bail!(Dimension, "maxpool2d expects [C,H,W], got {:?}", input.shape());
    }
    let [c, h, w] = [input.shape()[0], input.shape()[1], input.shape()[2]];
    if window == 0 || stride == 0 {
        bail!(Argument, "maxpool2d window and stride must be >= 1");
    }
    if window > h || window > w {
        bail!(Dimension, "pool window {} larger than {}x{} map", window, h, w);
    }
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (ch * h + oy * stride) * w + ox * stride;
                for ky in 0..window {
                    for kx in 0..window {
                        let i = (ch * h + oy * stride + ky) * w + ox * stride + kx;
                        if x[i] > x[best] {
                            best = i;
                        }
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(&[c, oh, ow], out)?, MaxPoolCache { in_shape: [c, h, w], argmax }))
}

/// Scatters each output gradient onto its window's winner.
pub fn maxpool2d_backward<T: Real>(cache: &MaxPoolCache, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if grad_out.len() != cache.argmax.len() {
        bail!(Dimension, "pool gradient has {} elements, forward produced {}", grad_out.len(), cache.argmax.len());
    }
    let mut g = Tensor::zeros(&cache.in_shape);
    let gd = g.data_mut();
    for (&i, &v) in cache.argmax.iter().zip(grad_out.data()) {
        gd[i] = gd[i] + v;
    }
    Ok(g)
}
