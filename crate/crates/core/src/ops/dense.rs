use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// `weights · x + bias`. The input is read flat, whatever its shape.
pub fn dense<T: Real>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    if weights.rank() != 2 {
        bail!(Dimension, "dense weights must be [m,n], got {:?}", weights.shape());
    }
    let (m, n) = (weights.shape()[0], weights.shape()[1]);
    if input.len() != n {
        bail!(Dimension, "dense expects {} inputs, got {}", n, input.len());
    }
    bias.expect_shape(&[m])?;
    let x = input.data();
    let out = (0..m)
        .map(|r| {
            let row = &weights.data()[r * n..(r + 1) * n];
            let dot: f64 = row.iter().zip(x).map(|(&w, &v)| w.widen() * v.widen()).sum();
            T::narrow(dot + bias.data()[r].widen())
        })
        .collect();
    Tensor::new(&[m], out)
}

pub fn dense_backward<T: Real>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
    need_input_grad: bool,
) -> Result<DenseGrads<T>> {
    let (m, n) = (weights.shape()[0], weights.shape()[1]);
    grad_out.expect_shape(&[m])?;
    if input.len() != n {
        bail!(Dimension, "dense expects {} inputs, got {}", n, input.len());
    }
    let g = grad_out.data();
    let x = input.data();
    let mut gw = Vec::with_capacity(m * n);
    for &gr in g {
        gw.extend(x.iter().map(|&v| T::narrow(gr.widen() * v.widen())));
    }
    let gin = if need_input_grad {
        let mut acc = alloc::vec![0.0f64; n];
        for (r, &gr) in g.iter().enumerate() {
            let gr = gr.widen();
            for (a, &w) in acc.iter_mut().zip(&weights.data()[r * n..(r + 1) * n]) {
                *a += gr * w.widen();
            }
        }
        Some(Tensor::new(input.shape(), acc.into_iter().map(T::narrow).collect())?)
    } else {
        None
    };
    Ok(DenseGrads { input: gin, weights: Tensor::new(&[m, n], gw)?, bias: grad_out.clone() })
}
