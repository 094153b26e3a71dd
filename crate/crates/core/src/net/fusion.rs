use super::spec::FusionOp;
use crate::error::{bail, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Pointwise sum or maximum of two equally shaped feature maps.
pub fn fuse_maps<T: Real>(a: &Tensor<T>, b: &Tensor<T>, op: FusionOp) -> Result<Tensor<T>> {
    if a.shape() != b.shape() {
        bail!(Dimension, "cannot fuse maps of shapes {:?} and {:?}", a.shape(), b.shape());
    }
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| match op {
            FusionOp::Sum => x + y,
            FusionOp::Max => if x >= y { x } else { y },
        })
        .collect();
    Tensor::new(a.shape(), data)
}

/// Gradients for `(a, b)`. Max routes each element to the larger input, ties to `a`.
pub fn fuse_maps_backward<T: Real>(a: &Tensor<T>, b: &Tensor<T>, op: FusionOp, grad: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    if a.shape() != b.shape() {
        bail!(Dimension, "cannot fuse maps of shapes {:?} and {:?}", a.shape(), b.shape());
    }
    grad.expect_shape(a.shape())?;
    match op {
        FusionOp::Sum => Ok((grad.clone(), grad.clone())),
        FusionOp::Max => {
            let mut ga = Tensor::zeros(a.shape());
            let mut gb = Tensor::zeros(a.shape());
            for (i, (&x, &y)) in a.data().iter().zip(b.data()).enumerate() {
                if x >= y {
                    ga.data_mut()[i] = grad.data()[i];
                } else {
                    gb.data_mut()[i] = grad.data()[i];
                }
            }
            Ok((ga, gb))
        }
    }
}
