use crate::error::Result;
use crate::scalar::Real;
use crate::tensor::Tensor;

pub fn relu<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| if x > T::zero() { x } else { T::zero() })
}

/// Passes gradient where the forward input was strictly positive.
pub fn relu_backward<T: Real>(grad_out: &Tensor<T>, input: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.expect_shape(input.shape())?;
    let data = grad_out
        .data()
        .iter()
        .zip(input.data())
        .map(|(&g, &x)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(input.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{grad_check, GradCheckConfig};
    use crate::rng::Rng;
    use alloc::vec;

    #[test]
    fn clamps_negatives() {
        let x = Tensor::<f32>::new(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let g = relu_backward(&Tensor::full(&[3], 1.0), &x).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn positive_input_is_identity() {
        let x = Tensor::<f32>::new(&[4], vec![0.5, 1.0, 2.0, 9.0]).unwrap();
        assert_eq!(relu(&x), x);
    }

    #[test]
    fn gradient_check_away_from_kink() {
        for seed in 0..10 {
            let mut rng = Rng::new(seed);
            let x = Tensor::<f64>::from_fn(&[40], |_| loop {
                let v = rng.uniform(-1.0, 1.0);
                if v.abs() >= 1e-3 {
                    break v;
                }
            });
            let w = Tensor::<f64>::uniform(&[40], -1.0, 1.0, &mut rng);
            let mut p = vec![x];
            let err = grad_check(
                &mut p,
                |p| {
                    let y = relu(&p[0]);
                    let loss = y.data().iter().zip(w.data()).map(|(a, b)| a * b * a).sum();
                    let g = Tensor::new(&[40], y.data().iter().zip(w.data()).map(|(a, b)| 2.0 * a * b).collect())?;
                    Ok((loss, vec![relu_backward(&g, &p[0])?]))
                },
                &GradCheckConfig { eps: 1e-6, samples: 40, seed },
            )
            .unwrap();
            assert!(err < 1e-3, "{err}");
        }
    }
}
