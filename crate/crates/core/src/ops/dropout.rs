use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::rng::Rng;
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Kept-set of one inverted-dropout draw; `None` means the pass was an identity.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep: Option<Vec<bool>>,
    scale: f64,
}

impl DropoutMask {
    pub fn kept(&self) -> Option<&[bool]> {
        self.keep.as_deref()
    }
}

/// Inverted dropout: survivors are scaled by `1/(1−rate)` so inference is the identity.
pub fn dropout<T: Real>(input: &Tensor<T>, rate: f64, rng: &mut Rng, training: bool) -> Result<(Tensor<T>, DropoutMask)> {
    if !(0.0..1.0).contains(&rate) {
        bail!(Argument, "dropout rate {} outside [0,1)", rate);
    }
    if !training || rate == 0.0 {
        return Ok((input.clone(), DropoutMask { keep: None, scale: 1.0 }));
    }
    let scale = 1.0 / (1.0 - rate);
    let keep: Vec<bool> = (0..input.len()).map(|_| rng.next_f64() >= rate).collect();
    let data = input
        .data()
        .iter()
        .zip(&keep)
        .map(|(&x, &k)| if k { T::narrow(x.widen() * scale) } else { T::zero() })
        .collect();
    Ok((Tensor::new(input.shape(), data)?, DropoutMask { keep: Some(keep), scale }))
}

pub fn dropout_backward<T: Real>(mask: &DropoutMask, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    match &mask.keep {
        None => Ok(grad_out.clone()),
        Some(keep) => {
            if keep.len() != grad_out.len() {
                bail!(Dimension, "dropout mask has {} entries, gradient {}", keep.len(), grad_out.len());
            }
            let data = grad_out
                .data()
                .iter()
                .zip(keep)
                .map(|(&g, &k)| if k { T::narrow(g.widen() * mask.scale) } else { T::zero() })
                .collect();
            Tensor::new(grad_out.shape(), data)
        }
    }
}
