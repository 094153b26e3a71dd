use alloc::vec::Vec;

use super::network::Prediction;
use crate::error::{bail, Result};
use crate::ops::{conv3d_depthwise, conv3d_depthwise_backward};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Class chosen by per-view argmax votes.
///
/// Ties in vote count go to the class with the larger summed probability,
/// then to the lowest class index.
pub fn multiview_vote(preds: &[Prediction]) -> Result<usize> {
    let Some(first) = preds.first() else { bail!(Argument, "vote over zero views") };
    let k = first.probs.len();
    let mut votes = alloc::vec![0usize; k];
    let mut mass = alloc::vec![0.0f64; k];
    for p in preds {
        if p.probs.len() != k {
            bail!(Dimension, "predictions disagree on class count");
        }
        votes[p.class] += 1;
        for (m, &q) in mass.iter_mut().zip(&p.probs) {
            *m += q;
        }
    }
    let mut best = 0;
    for c in 1..k {
        if votes[c] > votes[best] || (votes[c] == votes[best] && mass[c] > mass[best]) {
            best = c;
        }
    }
    Ok(best)
}

fn check_stack<T: Real>(maps: &[Tensor<T>]) -> Result<()> {
    let Some(first) = maps.first() else { bail!(Argument, "multiview stack is empty") };
    if let Some(m) = maps.iter().find(|m| m.shape() != first.shape()) {
        bail!(Dimension, "view maps disagree: {:?} vs {:?}", first.shape(), m.shape());
    }
    Ok(())
}

/// Winning view per element.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolTrace {
    views: usize,
    argmax: Vec<u32>,
}

impl PoolTrace {
    pub fn argmax(&self) -> &[u32] {
        &self.argmax
    }
}

/// Pointwise maximum across views; ties go to the lowest view index.
pub fn multiview_pool<T: Real>(maps: &[Tensor<T>]) -> Result<(Tensor<T>, PoolTrace)> {
    check_stack(maps)?;
    let mut out = maps[0].clone();
    let mut argmax = alloc::vec![0u32; out.len()];
    for (v, m) in maps.iter().enumerate().skip(1) {
        for ((o, a), &x) in out.data_mut().iter_mut().zip(argmax.iter_mut()).zip(m.data()) {
            if x > *o {
                *o = x;
                *a = v as u32;
            }
        }
    }
    Ok((out, PoolTrace { views: maps.len(), argmax }))
}

pub fn multiview_pool_backward<T: Real>(trace: &PoolTrace, grad: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
    if grad.len() != trace.argmax.len() {
        bail!(Dimension, "pool gradient has {} elements, trace {}", grad.len(), trace.argmax.len());
    }
    let mut out: Vec<Tensor<T>> = (0..trace.views).map(|_| Tensor::zeros(grad.shape())).collect();
    for (i, (&v, &g)) in trace.argmax.iter().zip(grad.data()).enumerate() {
        out[v as usize].data_mut()[i] = g;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Filter3dTrace<T = f32> {
    stack: Tensor<T>,
    pool: PoolTrace,
}

/// Stacks `N` maps `[D,H,W]` into `[D,N,H,W]`.
fn stack_views<T: Real>(maps: &[Tensor<T>]) -> Tensor<T> {
    let (d, hw) = (maps[0].shape()[0], maps[0].shape()[1] * maps[0].shape()[2]);
    let n = maps.len();
    let mut data = Vec::with_capacity(d * n * hw);
    for c in 0..d {
        for m in maps {
            data.extend_from_slice(&m.data()[c * hw..(c + 1) * hw]);
        }
    }
    Tensor::new(&[d, n, maps[0].shape()[1], maps[0].shape()[2]], data).unwrap()
}

fn unstack_views<T: Real>(stack: &Tensor<T>) -> Vec<Tensor<T>> {
    let s = stack.shape();
    let (d, n, hw) = (s[0], s[1], s[2] * s[3]);
    (0..n)
        .map(|v| {
            let mut data = Vec::with_capacity(d * hw);
            for c in 0..d {
                data.extend_from_slice(&stack.data()[(c * n + v) * hw..(c * n + v + 1) * hw]);
            }
            Tensor::new(&[d, s[2], s[3]], data).unwrap()
        })
        .collect()
}

/// Depthwise 3×3×3 filtering across (view, height, width), then view-axis max pooling.
pub fn multiview_filter3d<T: Real>(maps: &[Tensor<T>], kernels: &Tensor<T>) -> Result<(Tensor<T>, Filter3dTrace<T>)> {
    check_stack(maps)?;
    if maps[0].rank() != 3 {
        bail!(Dimension, "filter3d needs [D,H,W] maps, got {:?}", maps[0].shape());
    }
    let stack = stack_views(maps);
    let filtered = conv3d_depthwise(&stack, kernels)?;
    let (out, pool) = multiview_pool(&unstack_views(&filtered))?;
    Ok((out, Filter3dTrace { stack, pool }))
}

/// Returns `(per-view map gradients, kernel gradient)`.
pub fn multiview_filter3d_backward<T: Real>(
    trace: &Filter3dTrace<T>,
    kernels: &Tensor<T>,
    grad: &Tensor<T>,
) -> Result<(Vec<Tensor<T>>, Tensor<T>)> {
    let per_view = multiview_pool_backward(&trace.pool, grad)?;
    let g_filtered = stack_views(&per_view);
    let (g_stack, g_kernels) = conv3d_depthwise_backward(&trace.stack, kernels, &g_filtered)?;
    Ok((unstack_views(&g_stack), g_kernels))
}
