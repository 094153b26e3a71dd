//! Central-difference verification of hand-written backward passes.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::net::{Combiner, Network, StreamInput};
use crate::rng::Rng;
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub eps: f64,
    /// Coordinates to probe; every coordinate is probed when the inputs have fewer.
    pub samples: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { eps: 1e-6, samples: 64, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose one-sided differences disagree, i.e. the probe
    /// straddles a ReLU kink or a max tie. They carry no derivative to compare.
    pub nonsmooth: usize,
}

/// `max(|a−n| / max(|a|, |n|, 1e-8))` over the probed coordinates.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the analytic gradients returned by `f` against central differences.
///
/// `f` maps the current inputs to `(loss, [d loss / d input_i])`. Inputs are
/// perturbed in place and restored afterwards.
pub fn grad_check_report<T: Real>(
    inputs: &mut [Tensor<T>],
    mut f: impl FnMut(&[Tensor<T>]) -> Result<(f64, Vec<Tensor<T>>)>,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let (loss0, grads) = f(inputs)?;
    if !loss0.is_finite() {
        bail!(Numeric, "loss is not finite: {}", loss0);
    }
    if grads.len() != inputs.len() {
        bail!(Dimension, "closure returned {} gradients for {} inputs", grads.len(), inputs.len());
    }
    for (g, x) in grads.iter().zip(inputs.iter()) {
        g.expect_shape(x.shape())?;
    }

    let mut coords: Vec<(usize, usize)> =
        inputs.iter().enumerate().flat_map(|(t, x)| (0..x.len()).map(move |i| (t, i))).collect();
    if coords.len() > cfg.samples {
        let mut rng = Rng::new(cfg.seed);
        rng.shuffle(&mut coords);
        coords.truncate(cfg.samples);
        coords.sort_unstable();
    }

    let mut eval = |inputs: &mut [Tensor<T>], t: usize, i: usize, x: T| -> Result<f64> {
        inputs[t].data_mut()[i] = x;
        let (l, _) = f(inputs)?;
        if !l.is_finite() {
            bail!(Numeric, "loss is not finite at input {} coordinate {}", t, i);
        }
        Ok(l)
    };

    let mut report = GradCheckReport::default();
    for (t, i) in coords {
        let x0 = inputs[t].data()[i];
        let xp = T::narrow(x0.widen() + cfg.eps);
        let xm = T::narrow(x0.widen() - cfg.eps);
        let lp = eval(inputs, t, i, xp)?;
        let lm = eval(inputs, t, i, xm)?;
        inputs[t].data_mut()[i] = x0;
        let (hp, hm) = (xp.widen() - x0.widen(), x0.widen() - xm.widen());
        report.record(loss0, lp, lm, hp, hm, grads[t].data()[i].widen());
    }
    Ok(report)
}

impl GradCheckReport {
    /// Folds one probed coordinate into the report.
    fn record(&mut self, loss0: f64, lp: f64, lm: f64, hp: f64, hm: f64, analytic: f64) {
        let fwd = (lp - loss0) / hp;
        let bwd = (loss0 - lm) / hm;
        if (fwd - bwd).abs() > 1e-3 * fwd.abs().max(bwd.abs()) + 1e-7 {
            self.nonsmooth += 1;
            return;
        }
        let numeric = (lp - lm) / (hp + hm);
        self.max_rel_error = self.max_rel_error.max(relative_error(analytic, numeric));
        self.checked += 1;
    }
}

/// Checks a whole network's parameter gradients for the cross-entropy of
/// `label`. Dropout masks are replayed from `seed` on every evaluation.
pub fn network_grad_check(
    net: &mut Network<f64>,
    views: &[StreamInput<f64>],
    combiner: Option<Combiner>,
    label: usize,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let eval = |net: &mut Network<f64>| -> Result<f64> {
        let mut rng = Rng::new(cfg.seed ^ 0x5eed);
        net.forward_views(views, combiner, true, &mut rng)?;
        let loss = net.backward(label)?;
        if !loss.is_finite() {
            bail!(Numeric, "loss is not finite: {}", loss);
        }
        Ok(loss)
    };
    net.zero_grads();
    let loss0 = eval(net)?;
    let mut analytic: Vec<Vec<f64>> = Vec::new();
    let mut coords: Vec<(usize, usize)> = Vec::new();
    for (t, (_, p)) in net.params_mut().into_iter().enumerate() {
        if p.frozen {
            analytic.push(Vec::new());
            continue;
        }
        coords.extend((0..p.value.len()).map(|i| (t, i)));
        analytic.push(p.gradient.data().to_vec());
    }
    net.zero_grads();
    if coords.len() > cfg.samples {
        let mut rng = Rng::new(cfg.seed);
        rng.shuffle(&mut coords);
        coords.truncate(cfg.samples);
        coords.sort_unstable();
    }
    let set = |net: &mut Network<f64>, t: usize, i: usize, v: f64| {
        net.params_mut()[t].1.value.data_mut()[i] = v;
    };
    let mut report = GradCheckReport::default();
    for (t, i) in coords {
        let x0 = net.params_mut()[t].1.value.data()[i];
        set(net, t, i, x0 + cfg.eps);
        let lp = eval(net)?;
        set(net, t, i, x0 - cfg.eps);
        let lm = eval(net)?;
        set(net, t, i, x0);
        report.record(loss0, lp, lm, cfg.eps, cfg.eps, analytic[t][i]);
    }
    net.zero_grads();
    Ok(report)
}

/// Maximum relative error; see [`grad_check_report`].
pub fn grad_check<T: Real>(
    inputs: &mut [Tensor<T>],
    f: impl FnMut(&[Tensor<T>]) -> Result<(f64, Vec<Tensor<T>>)>,
    cfg: &GradCheckConfig,
) -> Result<f64> {
    grad_check_report(inputs, f, cfg).map(|r| r.max_rel_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn linear_map_is_exact() {
        let mut rng = Rng::new(0);
        let w = Tensor::<f64>::uniform(&[30], -2.0, 2.0, &mut rng);
        let mut p = vec![Tensor::<f64>::uniform(&[30], -1.0, 1.0, &mut rng)];
        let err = grad_check(
            &mut p,
            |p| Ok((p[0].data().iter().zip(w.data()).map(|(a, b)| a * b).sum(), vec![w.clone()])),
            &GradCheckConfig { eps: 1e-3, samples: 30, seed: 0 },
        )
        .unwrap();
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn zero_gradient_closure() {
        let mut p = vec![Tensor::<f64>::full(&[5], 1.0)];
        let err = grad_check(&mut p, |_| Ok((3.0, vec![Tensor::zeros(&[5])])), &GradCheckConfig::default()).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let mut p = vec![Tensor::<f64>::full(&[3], 1.0)];
        let err = grad_check(
            &mut p,
            |p| Ok((p[0].data().iter().map(|x| x * x).sum(), vec![Tensor::full(&[3], 1.0)])),
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(err > 0.4);
    }

    #[test]
    fn non_finite_loss_is_numeric_error() {
        let mut p = vec![Tensor::<f64>::zeros(&[2])];
        let e = grad_check(&mut p, |_| Ok((f64::NAN, vec![Tensor::zeros(&[2])])), &GradCheckConfig::default());
        assert!(matches!(e, Err(crate::Error::Numeric(_))));
    }

    #[test]
    fn kink_straddle_is_skipped() {
        let mut p = vec![Tensor::<f64>::zeros(&[1])];
        let r = grad_check_report(
            &mut p,
            |p| Ok((p[0].data()[0].abs(), vec![Tensor::full(&[1], 0.3)])),
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert_eq!(r.nonsmooth, 1);
        assert_eq!(r.checked, 0);
    }
}
