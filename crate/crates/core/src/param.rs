use crate::scalar::Real;
use crate::tensor::Tensor;

/// A trainable tensor with its gradient and momentum buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<T = f32> {
    pub value: Tensor<T>,
    pub gradient: Tensor<T>,
    pub velocity: Tensor<T>,
    /// Multiplier on the base learning rate (10 for the classifier layer).
    pub learn_rate_scale: f64,
    pub frozen: bool,
}

impl<T: Real> Parameter<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let gradient = Tensor::zeros(value.shape());
        let velocity = Tensor::zeros(value.shape());
        Self { value, gradient, velocity, learn_rate_scale: 1.0, frozen: false }
    }

    pub fn with_lr_scale(mut self, scale: f64) -> Self {
        self.learn_rate_scale = scale;
        self
    }

    pub fn accumulate(&mut self, grad: &Tensor<T>) -> crate::Result<()> {
        self.gradient.add_assign(grad)
    }

    pub fn zero_grad(&mut self) {
        self.gradient.fill(T::zero());
    }
}

/// One SGD-with-momentum step: `v ← μv + g`, `w ← w − η·scale·v`.
///
/// Frozen parameters keep value and velocity. Every gradient is zeroed.
pub fn sgd_momentum_step<'a, T: Real>(params: impl IntoIterator<Item = &'a mut Parameter<T>>, base_lr: f64, momentum: f64) {
    for p in params {
        if !p.frozen {
            let lr = base_lr * p.learn_rate_scale;
            let (value, velocity) = (p.value.data_mut(), p.velocity.data_mut());
            for ((w, v), g) in value.iter_mut().zip(velocity.iter_mut()).zip(p.gradient.data()) {
                let nv = momentum * v.widen() + g.widen();
                *v = T::narrow(nv);
                *w = T::narrow(w.widen() - lr * nv);
            }
        }
        p.zero_grad();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn param(v: &[f64]) -> Parameter<f64> {
        Parameter::new(Tensor::new(&[v.len()], v.to_vec()).unwrap())
    }

    #[test]
    fn zero_gradient_keeps_value() {
        let mut p = param(&[1.0, -2.0]);
        sgd_momentum_step([&mut p], 0.1, 0.9);
        assert_eq!(p.value.data(), &[1.0, -2.0]);
    }

    #[test]
    fn plain_gradient_step() {
        let mut p = param(&[1.0, -2.0]);
        p.gradient = Tensor::new(&[2], vec![0.5, 0.25]).unwrap();
        sgd_momentum_step([&mut p], 1.0, 0.0);
        assert_eq!(p.value.data(), &[0.5, -2.25]);
        assert!(p.gradient.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn two_momentum_steps_unroll() {
        // v1 = g, w1 = w0 − ηg; v2 = 0.9g + g = 1.9g, w2 = w1 − η·1.9g.
        let (eta, g) = (0.1, 0.5);
        let mut p = param(&[2.0]);
        for _ in 0..2 {
            p.gradient = Tensor::full(&[1], g);
            sgd_momentum_step([&mut p], eta, 0.9);
        }
        let want = 2.0 - eta * g - eta * 1.9 * g;
        assert!((p.value.data()[0] - want).abs() < 1e-12);
        assert!((p.velocity.data()[0] - 1.9 * g).abs() < 1e-12);
    }

    #[test]
    fn learn_rate_scale_multiplies() {
        let mut p = param(&[0.0]).with_lr_scale(10.0);
        p.gradient = Tensor::full(&[1], 1.0);
        sgd_momentum_step([&mut p], 0.01, 0.0);
        assert!((p.value.data()[0] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn frozen_is_bitwise_untouched() {
        let mut p = param(&[1.5, 2.5]);
        p.velocity = Tensor::new(&[2], vec![0.3, -0.7]).unwrap();
        p.gradient = Tensor::new(&[2], vec![9.0, 9.0]).unwrap();
        p.frozen = true;
        let (v0, w0) = (p.velocity.clone(), p.value.clone());
        sgd_momentum_step([&mut p], 1.0, 0.9);
        assert_eq!(p.value, w0);
        assert_eq!(p.velocity, v0);
    }
}
