use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Max-subtracted softmax, normalized in f64.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Tensor<T> {
    let max = logits.data().iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v.widen()));
    let exps: Vec<f64> = logits.data().iter().map(|&v| libm::exp(v.widen() - max)).collect();
    let total: f64 = exps.iter().sum();
    Tensor::new(logits.shape(), exps.iter().map(|&e| T::narrow(e / total)).collect()).unwrap()
}

/// Vector-Jacobian product of softmax: `p ⊙ (g − ⟨p, g⟩)`.
pub fn softmax_backward<T: Real>(probs: &Tensor<T>, grad_probs: &Tensor<T>) -> Result<Tensor<T>> {
    grad_probs.expect_shape(probs.shape())?;
    let dot: f64 = probs.data().iter().zip(grad_probs.data()).map(|(p, g)| p.widen() * g.widen()).sum();
    let data = probs
        .data()
        .iter()
        .zip(grad_probs.data())
        .map(|(&p, &g)| T::narrow(p.widen() * (g.widen() - dot)))
        .collect();
    Tensor::new(probs.shape(), data)
}

/// Returns `(−log p[label], p)`.
pub fn softmax_cross_entropy<T: Real>(logits: &Tensor<T>, label: usize) -> Result<(f64, Tensor<T>)> {
    let k = logits.len();
    if label >= k {
        bail!(Argument, "label {} out of range for {} classes", label, k);
    }
    let max = logits.data().iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v.widen()));
    let lse = libm::log(logits.data().iter().map(|&v| libm::exp(v.widen() - max)).sum::<f64>()) + max;
    let loss = lse - logits.data()[label].widen();
    Ok((loss, softmax(logits)))
}

/// Gradient w.r.t. logits: `p − onehot(label)`.
pub fn softmax_cross_entropy_backward<T: Real>(probs: &Tensor<T>, label: usize) -> Result<Tensor<T>> {
    if label >= probs.len() {
        bail!(Argument, "label {} out of range for {} classes", label, probs.len());
    }
    let mut g = probs.clone();
    g.data_mut()[label] = g.data()[label] - T::one();
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{grad_check, GradCheckConfig};
    use crate::rng::Rng;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits() {
        let (loss, p) = softmax_cross_entropy(&Tensor::<f32>::zeros(&[2]), 0).unwrap();
        assert!((loss - core::f64::consts::LN_2).abs() < 1e-6);
        assert_eq!(p.data(), &[0.5, 0.5]);
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let logits = Tensor::<f32>::new(&[2], vec![1000.0, 0.0]).unwrap();
        let (loss, p) = softmax_cross_entropy(&logits, 0).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!(p.all_finite());
    }

    #[test]
    fn label_out_of_range() {
        let e = softmax_cross_entropy(&Tensor::<f32>::zeros(&[3]), 3).unwrap_err();
        assert!(matches!(e, crate::Error::Argument(_)));
    }

    #[test]
    fn gradient_check_eight_classes() {
        for seed in 0..10 {
            let mut rng = Rng::new(seed);
            let mut p = vec![Tensor::<f64>::uniform(&[8], -3.0, 3.0, &mut rng)];
            let label = rng.below(8) as usize;
            let err = grad_check(
                &mut p,
                |p| {
                    let (loss, probs) = softmax_cross_entropy(&p[0], label)?;
                    Ok((loss, vec![softmax_cross_entropy_backward(&probs, label)?]))
                },
                &GradCheckConfig { eps: 1e-6, samples: 8, seed },
            )
            .unwrap();
            assert!(err < 1e-3, "{err}");
        }
    }

    #[test]
    fn softmax_backward_gradient_check() {
        for seed in 0..10 {
            let mut rng = Rng::new(seed);
            let mut p = vec![Tensor::<f64>::uniform(&[6], -2.0, 2.0, &mut rng)];
            let w = Tensor::<f64>::uniform(&[6], -1.0, 1.0, &mut rng);
            let err = grad_check(
                &mut p,
                |p| {
                    let probs = softmax(&p[0]);
                    let loss = probs.data().iter().zip(w.data()).map(|(a, b)| a * b).sum();
                    Ok((loss, vec![softmax_backward(&probs, &w)?]))
                },
                &GradCheckConfig { eps: 1e-6, samples: 6, seed },
            )
            .unwrap();
            assert!(err < 1e-3, "{err}");
        }
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(logits in proptest::collection::vec(-80.0f32..80.0, 1..20)) {
            let t = Tensor::new(&[logits.len()], logits).unwrap();
            let p = softmax(&t);
            prop_assert!(p.data().iter().all(|&v| v >= 0.0));
            prop_assert!((p.sum() - 1.0).abs() < 1e-6);
        }
    }
}
