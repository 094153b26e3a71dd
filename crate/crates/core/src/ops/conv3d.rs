use alloc::vec;

use crate::error::{bail, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

fn dims(stack: &Tensor<impl Real>, kernels: &Tensor<impl Real>) -> Result<[usize; 4]> {
    if stack.rank() != 4 {
        bail!(Dimension, "conv3d stack must be [D,N,H,W], got {:?}", stack.shape());
    }
    let [d, n, h, w] = [stack.shape()[0], stack.shape()[1], stack.shape()[2], stack.shape()[3]];
    if kernels.shape() != [d, 3, 3, 3] {
        bail!(Dimension, "conv3d kernels must be [{},3,3,3], got {:?}", d, kernels.shape());
    }
    if n == 0 || h == 0 || w == 0 {
        bail!(Dimension, "conv3d stack has an empty axis: {:?}", stack.shape());
    }
    Ok([d, n, h, w])
}

/// Visits every (output index, input index, kernel index) triple of the
/// depthwise 3×3×3 correlation with zero padding 1 on view, height and width.
#[inline]
fn for_each_tap(d: usize, n: usize, h: usize, w: usize, mut f: impl FnMut(usize, usize, usize)) {
    for c in 0..d {
        for v in 0..n {
            for y in 0..h {
                for x in 0..w {
                    let o = ((c * n + v) * h + y) * w + x;
                    for dv in 0..3 {
                        let iv = v as isize + dv as isize - 1;
                        if iv < 0 || iv >= n as isize {
                            continue;
                        }
                        for dy in 0..3 {
                            let iy = y as isize + dy as isize - 1;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for dx in 0..3 {
                                let ix = x as isize + dx as isize - 1;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                let i = ((c * n + iv as usize) * h + iy as usize) * w + ix as usize;
                                f(o, i, c * 27 + (dv * 3 + dy) * 3 + dx);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Per-channel 3×3×3 correlation over (view, height, width); shape preserved.
pub fn conv3d_depthwise<T: Real>(stack: &Tensor<T>, kernels: &Tensor<T>) -> Result<Tensor<T>> {
    let [d, n, h, w] = dims(stack, kernels)?;
    let (x, k) = (stack.data(), kernels.data());
    let mut acc = vec![0.0f64; stack.len()];
    for_each_tap(d, n, h, w, |o, i, ki| acc[o] += k[ki].widen() * x[i].widen());
    Tensor::new(stack.shape(), acc.into_iter().map(T::narrow).collect())
}

/// Returns `(grad_stack, grad_kernels)`.
pub fn conv3d_depthwise_backward<T: Real>(
    stack: &Tensor<T>,
    kernels: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let [d, n, h, w] = dims(stack, kernels)?;
    grad_out.expect_shape(stack.shape())?;
    let (x, k, g) = (stack.data(), kernels.data(), grad_out.data());
    let mut gx = vec![0.0f64; stack.len()];
    let mut gk = vec![0.0f64; kernels.len()];
    for_each_tap(d, n, h, w, |o, i, ki| {
        let go = g[o].widen();
        gx[i] += k[ki].widen() * go;
        gk[ki] += x[i].widen() * go;
    });
    Ok((
        Tensor::new(stack.shape(), gx.into_iter().map(T::narrow).collect())?,
        Tensor::new(kernels.shape(), gk.into_iter().map(T::narrow).collect())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{grad_check, GradCheckConfig};
    use crate::rng::Rng;

    fn center_one(d: usize) -> Tensor<f32> {
        Tensor::from_fn(&[d, 3, 3, 3], |i| if i % 27 == 13 { 1.0 } else { 0.0 })
    }

    /// Straightforward 6-deep loop with explicit bounds checks.
    fn oracle(x: &Tensor<f64>, k: &Tensor<f64>) -> Tensor<f64> {
        let s = x.shape();
        let (n, h, w) = (s[1], s[2], s[3]);
        let at = |c: usize, v: isize, y: isize, xx: isize| -> f64 {
            if v < 0 || y < 0 || xx < 0 || v >= n as isize || y >= h as isize || xx >= w as isize {
                0.0
            } else {
                x.data()[((c * n + v as usize) * h + y as usize) * w + xx as usize]
            }
        };
        Tensor::from_fn(s, |o| {
            let xx = o % w;
            let y = (o / w) % h;
            let v = (o / (w * h)) % n;
            let c = o / (w * h * n);
            let mut s = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    for e in 0..3 {
                        s += k.data()[c * 27 + a * 9 + b * 3 + e]
                            * at(c, v as isize + a as isize - 1, y as isize + b as isize - 1, xx as isize + e as isize - 1);
                    }
                }
            }
            s
        })
    }

    #[test]
    fn center_one_is_identity() {
        let mut rng = Rng::new(1);
        let x = Tensor::<f32>::uniform(&[3, 4, 5, 5], -1.0, 1.0, &mut rng);
        assert_eq!(conv3d_depthwise(&x, &center_one(3)).unwrap(), x);
    }

    #[test]
    fn zero_kernel_gives_zero() {
        let mut rng = Rng::new(1);
        let x = Tensor::<f32>::uniform(&[2, 3, 4, 4], -1.0, 1.0, &mut rng);
        let y = conv3d_depthwise(&x, &Tensor::zeros(&[2, 3, 3, 3])).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_kernel_shape() {
        let x = Tensor::<f32>::zeros(&[2, 3, 4, 4]);
        assert!(matches!(conv3d_depthwise(&x, &Tensor::zeros(&[2, 3, 3, 1])), Err(crate::Error::Dimension(_))));
        assert!(matches!(conv3d_depthwise(&x, &Tensor::zeros(&[3, 3, 3, 3])), Err(crate::Error::Dimension(_))));
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let mut rng = Rng::new(4);
        for &n in &[1usize, 2, 4] {
            let x = Tensor::<f32>::uniform(&[3, n, 5, 4], -1.0, 1.0, &mut rng);
            let k = Tensor::<f32>::uniform(&[3, 3, 3, 3], -1.0, 1.0, &mut rng);
            let y = conv3d_depthwise(&x, &k).unwrap();
            let want = oracle(&x.cast(), &k.cast());
            for (a, b) in y.data().iter().zip(want.data()) {
                assert!((*a as f64 - b).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn gradient_check() {
        for seed in 0..10 {
            let mut rng = Rng::new(seed);
            let mut p = vec![
                Tensor::<f64>::uniform(&[2, 3, 4, 4], -1.0, 1.0, &mut rng),
                Tensor::<f64>::uniform(&[2, 3, 3, 3], -1.0, 1.0, &mut rng),
            ];
            let w = Tensor::<f64>::uniform(&[2, 3, 4, 4], -1.0, 1.0, &mut rng);
            let err = grad_check(
                &mut p,
                |p| {
                    let y = conv3d_depthwise(&p[0], &p[1])?;
                    let loss = y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum();
                    let (gx, gk) = conv3d_depthwise_backward(&p[0], &p[1], &w)?;
                    Ok((loss, vec![gx, gk]))
                },
                &GradCheckConfig { eps: 1e-6, samples: 80, seed },
            )
            .unwrap();
            assert!(err < 1e-3, "{err}");
        }
    }
}
