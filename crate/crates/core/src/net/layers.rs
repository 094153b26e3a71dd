use alloc::vec::Vec;

use super::spec::LayerDesc;
use crate::error::{bail, Result};
use crate::ops::{self, Conv2dCache, DropoutMask, MaxPoolCache};
use crate::param::Parameter;
use crate::rng::Rng;
use crate::scalar::Real;
use crate::tensor::Tensor;

/// One backbone layer with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T = f32> {
    Conv { kernels: Parameter<T>, bias: Parameter<T>, stride: usize, pad: usize },
    Relu,
    MaxPool { window: usize, stride: usize },
    Dense { weights: Parameter<T>, bias: Parameter<T> },
    Dropout { rate: f64 },
}

impl<T: Real> Layer<T> {
    /// Glorot-uniform weights, zero biases. `in_shape` is the layer's input shape.
    pub fn init(desc: &LayerDesc, in_shape: &[usize], rng: &mut Rng) -> Self {
        let glorot = |shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut Rng| {
            let s = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            Parameter::new(Tensor::uniform(shape, -s, s, rng))
        };
        match *desc {
            LayerDesc::Conv { out_channels, kernel, stride, pad } => {
                let c_in = in_shape[0];
                let kk = kernel * kernel;
                Layer::Conv {
                    kernels: glorot(&[out_channels, c_in, kernel, kernel], c_in * kk, out_channels * kk, rng),
                    bias: Parameter::new(Tensor::zeros(&[out_channels])),
                    stride,
                    pad,
                }
            }
            LayerDesc::Dense { out } => {
                let n: usize = in_shape.iter().product();
                Layer::Dense { weights: glorot(&[out, n], n, out, rng), bias: Parameter::new(Tensor::zeros(&[out])) }
            }
            LayerDesc::Relu => Layer::Relu,
            LayerDesc::MaxPool { window, stride } => Layer::MaxPool { window, stride },
            LayerDesc::Dropout { rate } => Layer::Dropout { rate },
        }
    }

    pub fn params(&self) -> Vec<(&'static str, &Parameter<T>)> {
        match self {
            Layer::Conv { kernels, bias, .. } => alloc::vec![("kernels", kernels), ("bias", bias)],
            Layer::Dense { weights, bias } => alloc::vec![("weights", weights), ("bias", bias)],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut Parameter<T>)> {
        match self {
            Layer::Conv { kernels, bias, .. } => alloc::vec![("kernels", kernels), ("bias", bias)],
            Layer::Dense { weights, bias } => alloc::vec![("weights", weights), ("bias", bias)],
            _ => Vec::new(),
        }
    }

    fn trainable(&self) -> bool {
        self.params().iter().any(|(_, p)| !p.frozen)
    }

    pub fn cast<U: Real>(&self) -> Layer<U> {
        let cp = |p: &Parameter<T>| Parameter {
            value: p.value.cast(),
            gradient: p.gradient.cast(),
            velocity: p.velocity.cast(),
            learn_rate_scale: p.learn_rate_scale,
            frozen: p.frozen,
        };
        match self {
            Layer::Conv { kernels, bias, stride, pad } => {
                Layer::Conv { kernels: cp(kernels), bias: cp(bias), stride: *stride, pad: *pad }
            }
            Layer::Dense { weights, bias } => Layer::Dense { weights: cp(weights), bias: cp(bias) },
            Layer::Relu => Layer::Relu,
            Layer::MaxPool { window, stride } => Layer::MaxPool { window: *window, stride: *stride },
            Layer::Dropout { rate } => Layer::Dropout { rate: *rate },
        }
    }
}

#[derive(Debug, Clone)]
enum Cache<T> {
    Conv(Conv2dCache),
    Relu(Tensor<T>),
    Pool(MaxPoolCache),
    Dense(Tensor<T>),
    Dropout(DropoutMask),
}

/// Activations a [`Segment`] recorded during one forward pass.
#[derive(Debug, Clone)]
pub struct SegmentTrace<T = f32> {
    caches: Vec<Cache<T>>,
}

/// A contiguous run of backbone layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T = f32> {
    /// Backbone index of the first layer.
    pub offset: usize,
    pub layers: Vec<Layer<T>>,
}

impl<T: Real> Segment<T> {
    pub fn forward(&self, input: &Tensor<T>, training: bool, rng: &mut Rng) -> Result<(Tensor<T>, SegmentTrace<T>)> {
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, cache) = match layer {
                Layer::Conv { kernels, bias, stride, pad } => {
                    let (y, c) = ops::conv2d(&x, &kernels.value, &bias.value, *stride, *pad)?;
                    (y, Cache::Conv(c))
                }
                Layer::Relu => (ops::relu(&x), Cache::Relu(x)),
                Layer::MaxPool { window, stride } => {
                    let (y, c) = ops::maxpool2d(&x, *window, *stride)?;
                    (y, Cache::Pool(c))
                }
                Layer::Dense { weights, bias } => (ops::dense(&x, &weights.value, &bias.value)?, Cache::Dense(x)),
                Layer::Dropout { rate } => {
                    let (y, m) = ops::dropout(&x, *rate, rng, training)?;
                    (y, Cache::Dropout(m))
                }
            };
            x = y;
            caches.push(cache);
        }
        Ok((x, SegmentTrace { caches }))
    }

    /// Whether any parameter in this segment will be updated.
    pub fn trainable(&self) -> bool {
        self.layers.iter().any(Layer::trainable)
    }

    /// Accumulates parameter gradients and returns the input gradient when
    /// `need_input_grad` is set. Layers below the lowest trainable layer are
    /// skipped unless the input gradient is needed.
    pub fn backward(&mut self, trace: &SegmentTrace<T>, grad_out: &Tensor<T>, need_input_grad: bool) -> Result<Option<Tensor<T>>> {
        if trace.caches.len() != self.layers.len() {
            bail!(State, "trace has {} entries for {} layers", trace.caches.len(), self.layers.len());
        }
        let lowest = if need_input_grad { 0 } else {
            match self.layers.iter().position(Layer::trainable) {
                Some(i) => i,
                None => return Ok(None),
            }
        };
        let mut g = grad_out.clone();
        for i in (lowest..self.layers.len()).rev() {
            let need = i > lowest || need_input_grad;
            let next = match (&mut self.layers[i], &trace.caches[i]) {
                (Layer::Conv { kernels, bias, .. }, Cache::Conv(c)) => {
                    let gr = ops::conv2d_backward(c, &kernels.value, &g, need)?;
                    if !kernels.frozen {
                        kernels.accumulate(&gr.kernels)?;
                    }
                    if !bias.frozen {
                        bias.accumulate(&gr.bias)?;
                    }
                    gr.input
                }
                (Layer::Relu, Cache::Relu(x)) => Some(ops::relu_backward(&g, x)?),
                (Layer::MaxPool { .. }, Cache::Pool(c)) => Some(ops::maxpool2d_backward(c, &g)?),
                (Layer::Dense { weights, bias }, Cache::Dense(x)) => {
                    let gr = ops::dense_backward(x, &weights.value, &g, need)?;
                    if !weights.frozen {
                        weights.accumulate(&gr.weights)?;
                    }
                    if !bias.frozen {
                        bias.accumulate(&gr.bias)?;
                    }
                    gr.input
                }
                (Layer::Dropout { .. }, Cache::Dropout(m)) => Some(ops::dropout_backward(m, &g)?),
                _ => bail!(State, "trace entry {} does not match its layer", i),
            };
            match next {
                Some(n) => g = n,
                None => return Ok(None),
            }
        }
        Ok(need_input_grad.then_some(g))
    }
}
