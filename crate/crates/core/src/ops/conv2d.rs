use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Output extent of a convolution or pooling window along one axis.
pub fn conv2d_output_size(len: usize, k: usize, stride: usize, pad: usize) -> usize {
    (len + 2 * pad - k) / stride + 1
}

/// Everything `conv2d_backward` needs from the forward pass.
#[derive(Debug, Clone)]
pub struct Conv2dCache {
    in_shape: [usize; 3],
    kernel: [usize; 2],
    stride: usize,
    pad: usize,
    out_hw: [usize; 2],
    /// Unfolded input, `[C_in*kH*kW, H'*W']`.
    cols: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Conv2dGrads<T> {
    /// `None` when the caller did not ask for it.
    pub input: Option<Tensor<T>>,
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
}

fn im2col<T: Real>(input: &Tensor<T>, kh: usize, kw: usize, stride: usize, pad: usize, oh: usize, ow: usize) -> Vec<f64> {
    let [c_in, h, w] = [input.shape()[0], input.shape()[1], input.shape()[2]];
    let p = oh * ow;
    let x = input.data();
    let mut cols = vec![0.0f64; c_in * kh * kw * p];
    for c in 0..c_in {
        for ky in 0..kh {
            for kx in 0..kw {
                let row = &mut cols[((c * kh + ky) * kw + kx) * p..][..p];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &x[(c * h + iy as usize) * w..][..w];
                    let dst = &mut row[oy * ow..][..ow];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            *d = src[ix as usize].widen();
                        }
                    }
                }
            }
        }
    }
    cols
}

/// 2D cross-correlation with zero padding.
///
/// `input` is `[C_in, H, W]`, `kernels` `[C_out, C_in, kH, kW]`, `bias` `[C_out]`.
pub fn conv2d<T: Real>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<(Tensor<T>, Conv2dCache)> {
    if input.rank() != 3 || kernels.rank() != 4 {
        bail!(Dimension, "conv2d expects [C,H,W] input and [Co,Ci,kH,kW] kernels, got {:?} and {:?}", input.shape(), kernels.shape());
    }
    if stride == 0 {
        bail!(Argument, "conv2d stride must be >= 1");
    }
    let [c_in, h, w] = [input.shape()[0], input.shape()[1], input.shape()[2]];
    let [c_out, kc, kh, kw] = [kernels.shape()[0], kernels.shape()[1], kernels.shape()[2], kernels.shape()[3]];
    if kc != c_in {
        bail!(Dimension, "input has {} channels, kernels expect {}", c_in, kc);
    }
    if bias.shape() != [c_out] {
        bail!(Dimension, "bias shape {:?} does not match {} output channels", bias.shape(), c_out);
    }
    if kh > h + 2 * pad || kw > w + 2 * pad {
        bail!(Dimension, "kernel {}x{} larger than padded input {}x{}", kh, kw, h + 2 * pad, w + 2 * pad);
    }
    let oh = conv2d_output_size(h, kh, stride, pad);
    let ow = conv2d_output_size(w, kw, stride, pad);
    let p = oh * ow;
    let k = c_in * kh * kw;
    let cols = im2col(input, kh, kw, stride, pad, oh, ow);

    let wk = kernels.data();
    let mut out = Vec::with_capacity(c_out * p);
    let mut acc = vec![0.0f64; p];
    for co in 0..c_out {
        acc.fill(bias.data()[co].widen());
        for (ki, &wv) in wk[co * k..(co + 1) * k].iter().enumerate() {
            let wv = wv.widen();
            if wv == 0.0 {
                continue;
            }
            for (a, &c) in acc.iter_mut().zip(&cols[ki * p..(ki + 1) * p]) {
                *a += wv * c;
            }
        }
        out.extend(acc.iter().map(|&a| T::narrow(a)));
    }
    let cache = Conv2dCache { in_shape: [c_in, h, w], kernel: [kh, kw], stride, pad, out_hw: [oh, ow], cols };
    Ok((Tensor::new(&[c_out, oh, ow], out)?, cache))
}

/// Gradients of `sum(grad_out * conv2d(input, kernels, bias))`.
pub fn conv2d_backward<T: Real>(
    cache: &Conv2dCache,
    kernels: &Tensor<T>,
    grad_out: &Tensor<T>,
    need_input_grad: bool,
) -> Result<Conv2dGrads<T>> {
    let [c_in, h, w] = cache.in_shape;
    let [kh, kw] = cache.kernel;
    let [oh, ow] = cache.out_hw;
    let c_out = kernels.shape()[0];
    grad_out.expect_shape(&[c_out, oh, ow])?;
    kernels.expect_shape(&[c_out, c_in, kh, kw])?;
    let p = oh * ow;
    let k = c_in * kh * kw;
    let g = grad_out.data();
    let wk = kernels.data();
    let cols = &cache.cols;

    let mut grad_bias = Vec::with_capacity(c_out);
    let mut grad_k = Vec::with_capacity(c_out * k);
    for co in 0..c_out {
        let grow = &g[co * p..(co + 1) * p];
        grad_bias.push(T::narrow(grow.iter().map(|x| x.widen()).sum()));
        for ki in 0..k {
            let crow = &cols[ki * p..(ki + 1) * p];
            let dot: f64 = grow.iter().zip(crow).map(|(&a, &b)| a.widen() * b).sum();
            grad_k.push(T::narrow(dot));
        }
    }

    let input = if need_input_grad {
        let mut gcols = vec![0.0f64; k * p];
        for co in 0..c_out {
            let grow = &g[co * p..(co + 1) * p];
            for ki in 0..k {
                let wv = wk[co * k + ki].widen();
                if wv == 0.0 {
                    continue;
                }
                for (d, &gv) in gcols[ki * p..(ki + 1) * p].iter_mut().zip(grow) {
                    *d += wv * gv.widen();
                }
            }
        }
        let mut gin = vec![0.0f64; c_in * h * w];
        let (stride, pad) = (cache.stride, cache.pad);
        for c in 0..c_in {
            for ky in 0..kh {
                for kx in 0..kw {
                    let row = &gcols[((c * kh + ky) * kw + kx) * p..][..p];
                    for oy in 0..oh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst = &mut gin[(c * h + iy as usize) * w..][..w];
                        for ox in 0..ow {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += row[oy * ow + ox];
                            }
                        }
                    }
                }
            }
        }
        Some(Tensor::new(&[c_in, h, w], gin.into_iter().map(T::narrow).collect())?)
    } else {
        None
    };

    Ok(Conv2dGrads {
        input,
        kernels: Tensor::new(&[c_out, c_in, kh, kw], grad_k)?,
        bias: Tensor::new(&[c_out], grad_bias)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{grad_check, GradCheckConfig};
    use crate::rng::Rng;
    use alloc::vec;

    /// Direct nested-loop cross-correlation, independent of the im2col path.
    fn conv_oracle(x: &Tensor<f64>, k: &Tensor<f64>, b: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
        let (ci, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (co, kh, kw) = (k.shape()[0], k.shape()[2], k.shape()[3]);
        let oh = (h + 2 * pad - kh) / stride + 1;
        let ow = (w + 2 * pad - kw) / stride + 1;
        let mut out = Tensor::zeros(&[co, oh, ow]);
        for o in 0..co {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut s = b.data()[o];
                    for c in 0..ci {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    s += x.data()[(c * h + iy as usize) * w + ix as usize]
                                        * k.data()[((o * ci + c) * kh + ky) * kw + kx];
                                }
                            }
                        }
                    }
                    out.data_mut()[(o * oh + oy) * ow + ox] = s;
                }
            }
        }
        out
    }

    fn t(shape: &[usize], v: &[f32]) -> Tensor<f32> {
        Tensor::new(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn identity_kernel() {
        let x = t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let (y, _) = conv2d(&x, &t(&[1, 1, 1, 1], &[1.0]), &t(&[1], &[0.0]), 1, 0).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn all_ones_kernel_sums() {
        let x = t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let (y, _) = conv2d(&x, &Tensor::full(&[1, 1, 2, 2], 1.0), &t(&[1], &[0.0]), 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[10.0]);
    }

    #[test]
    fn channel_mismatch_is_dimension_error() {
        let x = Tensor::<f32>::zeros(&[2, 4, 4]);
        let k = Tensor::<f32>::zeros(&[1, 3, 3, 3]);
        let err = conv2d(&x, &k, &Tensor::zeros(&[1]), 1, 1).unwrap_err();
        assert!(matches!(err, crate::Error::Dimension(_)));
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let mut rng = Rng::new(11);
        for &(stride, pad) in &[(1, 0), (1, 1), (2, 1), (2, 0)] {
            let x = Tensor::<f32>::uniform(&[3, 8, 8], -1.0, 1.0, &mut rng);
            let k = Tensor::<f32>::uniform(&[4, 3, 3, 3], -1.0, 1.0, &mut rng);
            let b = Tensor::<f32>::uniform(&[4], -1.0, 1.0, &mut rng);
            let (y, _) = conv2d(&x, &k, &b, stride, pad).unwrap();
            let want = conv_oracle(&x.cast(), &k.cast(), &b.cast(), stride, pad);
            assert_eq!(y.shape(), want.shape());
            for (a, b) in y.data().iter().zip(want.data()) {
                assert!((*a as f64 - b).abs() < 1e-5, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn centered_identity_kernel_preserves_input() {
        let mut rng = Rng::new(5);
        let x = Tensor::<f32>::uniform(&[2, 7, 5], -3.0, 3.0, &mut rng);
        let mut k = Tensor::<f32>::zeros(&[2, 2, 3, 3]);
        for c in 0..2 {
            k.data_mut()[((c * 2 + c) * 3 + 1) * 3 + 1] = 1.0;
        }
        let (y, _) = conv2d(&x, &k, &Tensor::zeros(&[2]), 1, 1).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_grad_out_gives_zero_grads() {
        let mut rng = Rng::new(2);
        let x = Tensor::<f32>::uniform(&[2, 5, 5], -1.0, 1.0, &mut rng);
        let k = Tensor::<f32>::uniform(&[3, 2, 3, 3], -1.0, 1.0, &mut rng);
        let (y, cache) = conv2d(&x, &k, &Tensor::zeros(&[3]), 1, 1).unwrap();
        let g = conv2d_backward(&cache, &k, &Tensor::zeros(y.shape()), true).unwrap();
        assert!(g.input.unwrap().data().iter().all(|&v| v == 0.0));
        assert!(g.kernels.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_kernel_backward_is_transpose() {
        let mut rng = Rng::new(3);
        let x = Tensor::<f32>::uniform(&[1, 4, 4], -1.0, 1.0, &mut rng);
        let k = t(&[1, 1, 1, 1], &[1.0]);
        let (y, cache) = conv2d(&x, &k, &t(&[1], &[0.0]), 1, 0).unwrap();
        let grad = Tensor::<f32>::uniform(y.shape(), -1.0, 1.0, &mut rng);
        let g = conv2d_backward(&cache, &k, &grad, true).unwrap();
        assert_eq!(g.input.unwrap(), grad);
        assert!((g.bias.data()[0] as f64 - grad.sum()).abs() < 1e-6);
    }

    #[test]
    fn finite_difference_f32() {
        // Sum-weighted output is linear in every parameter, so central
        // differences at eps = 1e-2 are exact up to rounding.
        for seed in 0..10 {
            let mut rng = Rng::new(100 + seed);
            let x = Tensor::<f32>::uniform(&[2, 5, 5], -1.0, 1.0, &mut rng);
            let k = Tensor::<f32>::uniform(&[3, 2, 3, 3], -1.0, 1.0, &mut rng);
            let b = Tensor::<f32>::uniform(&[3], -1.0, 1.0, &mut rng);
            let wts = Tensor::<f32>::uniform(&[3, 5, 5], -1.0, 1.0, &mut rng);
            let loss = |k: &Tensor<f32>| -> f64 {
                let (y, _) = conv2d(&x, k, &b, 1, 1).unwrap();
                y.data().iter().zip(wts.data()).map(|(a, w)| (*a as f64) * (*w as f64)).sum()
            };
            let (_, cache) = conv2d(&x, &k, &b, 1, 1).unwrap();
            let g = conv2d_backward(&cache, &k, &wts, false).unwrap();
            // Only check coordinates whose gradient is well above f32 noise.
            let mut worst = 0.0f64;
            for i in 0..k.len() {
                let mut kp = k.clone();
                kp.data_mut()[i] += 1e-2;
                let mut km = k.clone();
                km.data_mut()[i] -= 1e-2;
                let num = (loss(&kp) - loss(&km)) / 2e-2;
                let ana = g.kernels.data()[i] as f64;
                let rel = (ana - num).abs() / ana.abs().max(num.abs()).max(1e-8);
                if ana.abs() > 0.05 {
                    worst = worst.max(rel);
                }
            }
            assert!(worst < 1e-3, "seed {seed}: {worst}");
        }
    }

    #[test]
    fn gradient_check_f64_all_inputs() {
        for seed in 0..10 {
            let mut rng = Rng::new(seed);
            let x = Tensor::<f64>::uniform(&[2, 6, 6], -1.0, 1.0, &mut rng);
            let k = Tensor::<f64>::uniform(&[3, 2, 3, 3], -1.0, 1.0, &mut rng);
            let b = Tensor::<f64>::uniform(&[3], -1.0, 1.0, &mut rng);
            let wts = Tensor::<f64>::uniform(&[3, 3, 3], -1.0, 1.0, &mut rng);
            let mut params = vec![x, k, b];
            let err = grad_check(
                &mut params,
                |p| {
                    let (y, cache) = conv2d(&p[0], &p[1], &p[2], 2, 1)?;
                    let loss = y.data().iter().zip(wts.data()).map(|(a, w)| a * w).sum();
                    let g = conv2d_backward(&cache, &p[1], &wts, true)?;
                    Ok((loss, vec![g.input.unwrap(), g.kernels, g.bias]))
                },
                &GradCheckConfig { eps: 1e-6, samples: 64, seed },
            )
            .unwrap();
            assert!(err < 1e-5, "seed {seed}: {err}");
        }
    }
}
