use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::fusion::{fuse_maps, fuse_maps_backward};
use super::layers::{Layer, Segment, SegmentTrace};
use super::multiview::{
    multiview_filter3d, multiview_filter3d_backward, multiview_pool, multiview_pool_backward, multiview_vote,
    Filter3dTrace, PoolTrace,
};
use super::spec::{Combiner, FusionArch, NetworkSpec};
use crate::error::{bail, Result};
use crate::ops::{softmax, softmax_backward};
use crate::param::Parameter;
use crate::rng::Rng;
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Classifier output: a probability vector and its argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub class: usize,
}

impl Prediction {
    pub fn from_probs(probs: Vec<f64>) -> Self {
        let mut class = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[class] {
                class = i;
            }
        }
        Self { probs, class }
    }
}

/// Result of a multiview pass. Voting yields only a class.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub class: usize,
    pub prediction: Option<Prediction>,
}

/// One view's network input: `I_v` and, for two-stream networks, `I_δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamInput<T = f32> {
    pub image: Tensor<T>,
    pub differential: Option<Tensor<T>>,
}

/// Which layer-`M` map a prediction head consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadSource {
    A,
    B,
    Fused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    ConvKernels,
    ConvBias,
    DenseWeights,
    DenseBias,
    /// 3×3×3 view-filter bank of a head.
    Filter,
}

/// Where a parameter sits, for checkpoint names and stage scopes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamInfo {
    pub name: String,
    pub kind: ParamKind,
    /// `None` for the streams below the fusion layer.
    pub head: Option<usize>,
    /// Part of the last dense layer of its head.
    pub classifier: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct Head<T> {
    source: HeadSource,
    layers: Segment<T>,
    filter: Parameter<T>,
}

#[derive(Debug, Clone)]
struct ViewTrace<T> {
    a_map: Tensor<T>,
    a_trace: SegmentTrace<T>,
    b: Option<(Tensor<T>, SegmentTrace<T>)>,
}

#[derive(Debug, Clone)]
enum CombineTrace<T> {
    None,
    Pool(PoolTrace),
    Filter(Filter3dTrace<T>),
}

#[derive(Debug, Clone)]
struct HeadTrace<T> {
    combine: CombineTrace<T>,
    layers: SegmentTrace<T>,
    probs: Tensor<T>,
}

#[derive(Debug, Clone)]
struct ForwardTrace<T> {
    views: Vec<ViewTrace<T>>,
    heads: Vec<HeadTrace<T>>,
    probs: Vec<f64>,
}

/// A two-stream (or single-stream) classifier built from a [`NetworkSpec`].
#[derive(Debug, Clone)]
pub struct Network<T = f32> {
    spec: NetworkSpec,
    lower_a: Segment<T>,
    lower_b: Option<Segment<T>>,
    heads: Vec<Head<T>>,
    trace: Option<ForwardTrace<T>>,
}

impl<T: Real> PartialEq for Network<T> {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.lower_a == other.lower_a && self.lower_b == other.lower_b && self.heads == other.heads
    }
}

fn center_one<T: Real>(d: usize) -> Tensor<T> {
    Tensor::from_fn(&[d, 3, 3, 3], |i| if i % 27 == 13 { T::one() } else { T::zero() })
}

fn build_segment<T: Real>(spec: &NetworkSpec, shapes: &[Vec<usize>], range: core::ops::Range<usize>, rng: &mut Rng) -> Segment<T> {
    let offset = range.start;
    let layers = range
        .map(|i| {
            let in_shape: &[usize] = if i == 0 { &spec.input } else { &shapes[i - 1] };
            Layer::init(&spec.backbone[i], in_shape, rng)
        })
        .collect();
    Segment { offset, layers }
}

impl<T: Real> Network<T> {
    /// Glorot-uniform conv/dense weights, zero biases, center-one view filters.
    pub fn build(spec: &NetworkSpec, rng: &Rng) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.layer_shapes()?;
        let m = spec.fusion_layer;
        let n = spec.backbone.len();
        let lower_a = build_segment(spec, &shapes, 0..m + 1, &mut rng.split(1));
        let lower_b = spec.two_stream().then(|| build_segment(spec, &shapes, 0..m + 1, &mut rng.split(2)));
        let sources: &[HeadSource] = match spec.fusion_arch {
            FusionArch::Single => &[HeadSource::A],
            FusionArch::Final => &[HeadSource::A, HeadSource::B],
            FusionArch::Intermediate => &[HeadSource::Fused],
            FusionArch::Dain => &[HeadSource::A, HeadSource::Fused],
        };
        let depth = shapes[m][0];
        let heads = sources
            .iter()
            .map(|&source| {
                let stream = match source {
                    HeadSource::A => 11,
                    HeadSource::B => 12,
                    HeadSource::Fused => 13,
                };
                let mut layers = build_segment(spec, &shapes, m + 1..n, &mut rng.split(stream));
                if let Some(Layer::Dense { weights, bias }) = layers.layers.last_mut() {
                    weights.learn_rate_scale = 10.0;
                    bias.learn_rate_scale = 10.0;
                }
                Head { source, layers, filter: Parameter::new(center_one(depth)) }
            })
            .collect();
        Ok(Self { spec: spec.clone(), lower_a, lower_b, heads, trace: None })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn head_sources(&self) -> Vec<HeadSource> {
        self.heads.iter().map(|h| h.source).collect()
    }

    /// Same network in another precision; caches are dropped.
    pub fn cast<U: Real>(&self) -> Network<U> {
        let seg = |s: &Segment<T>| Segment { offset: s.offset, layers: s.layers.iter().map(Layer::cast).collect() };
        Network {
            spec: self.spec.clone(),
            lower_a: seg(&self.lower_a),
            lower_b: self.lower_b.as_ref().map(seg),
            heads: self
                .heads
                .iter()
                .map(|h| Head {
                    source: h.source,
                    layers: seg(&h.layers),
                    filter: Parameter {
                        value: h.filter.value.cast(),
                        gradient: h.filter.gradient.cast(),
                        velocity: h.filter.velocity.cast(),
                        learn_rate_scale: h.filter.learn_rate_scale,
                        frozen: h.filter.frozen,
                    },
                })
                .collect(),
            trace: None,
        }
    }

    fn segment_params<'a>(
        seg: &'a mut Segment<T>,
        prefix: &str,
        head: Option<usize>,
        out: &mut Vec<(ParamInfo, &'a mut Parameter<T>)>,
    ) {
        let last_dense = seg.layers.iter().rposition(|l| matches!(l, Layer::Dense { .. }));
        let offset = seg.offset;
        for (i, layer) in seg.layers.iter_mut().enumerate() {
            let is_conv = matches!(layer, Layer::Conv { .. });
            for (pname, p) in layer.params_mut() {
                let kind = match (is_conv, pname) {
                    (true, "kernels") => ParamKind::ConvKernels,
                    (true, _) => ParamKind::ConvBias,
                    (false, "weights") => ParamKind::DenseWeights,
                    _ => ParamKind::DenseBias,
                };
                let info = ParamInfo {
                    name: format!("{}.{}.{}", prefix, offset + i, pname),
                    kind,
                    head,
                    classifier: head.is_some() && Some(i) == last_dense,
                };
                out.push((info, p));
            }
        }
    }

    /// Every parameter with its name and role, in a fixed order.
    pub fn params_mut(&mut self) -> Vec<(ParamInfo, &mut Parameter<T>)> {
        let mut out = Vec::new();
        Self::segment_params(&mut self.lower_a, "a", None, &mut out);
        if let Some(b) = self.lower_b.as_mut() {
            Self::segment_params(b, "b", None, &mut out);
        }
        for (k, h) in self.heads.iter_mut().enumerate() {
            let prefix = format!("h{k}");
            Self::segment_params(&mut h.layers, &prefix, Some(k), &mut out);
            let info = ParamInfo { name: format!("h{k}.filter"), kind: ParamKind::Filter, head: Some(k), classifier: false };
            out.push((info, &mut h.filter));
        }
        out
    }

    /// Names and values of all parameters, in `params_mut` order.
    pub fn named_values(&self) -> Vec<(String, Tensor<T>)> {
        let mut copy = self.clone();
        copy.params_mut().into_iter().map(|(i, p)| (i.name, p.value.clone())).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.named_values().iter().map(|(_, t)| t.len()).sum()
    }

    /// Copies parameter values from `other`; `rename` maps each of our names
    /// to the source name (or `None` to keep ours). Returns how many were copied.
    pub fn import_from(&mut self, other: &Network<T>, rename: impl Fn(&str) -> Option<String>) -> Result<usize> {
        let source = other.named_values();
        let mut copied = 0;
        for (info, p) in self.params_mut() {
            let Some(src_name) = rename(&info.name) else { continue };
            let Some((_, v)) = source.iter().find(|(n, _)| *n == src_name) else {
                bail!(Argument, "source network has no parameter `{}`", src_name);
            };
            if v.shape() != p.value.shape() {
                bail!(Dimension, "parameter `{}` shape {:?} vs source {:?}", info.name, p.value.shape(), v.shape());
            }
            p.value = v.clone();
            copied += 1;
        }
        Ok(copied)
    }

    /// Replaces every parameter value from `(name, value)` pairs, as produced
    /// by [`Network::named_values`]. Missing or extra names are errors.
    pub fn load_values(&mut self, values: &[(String, Tensor<T>)]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != values.len() {
            bail!(Format, "checkpoint has {} parameters, network has {}", values.len(), params.len());
        }
        for (info, p) in params.iter_mut() {
            let Some((_, v)) = values.iter().find(|(n, _)| *n == info.name) else {
                bail!(Format, "checkpoint lacks parameter `{}`", info.name);
            };
            if v.shape() != p.value.shape() {
                bail!(Format, "parameter `{}` has shape {:?}, expected {:?}", info.name, v.shape(), p.value.shape());
            }
            p.value = v.clone();
            p.velocity.fill(T::zero());
            p.zero_grad();
        }
        Ok(())
    }

    fn check_input(&self, input: &StreamInput<T>) -> Result<()> {
        input.image.expect_shape(&self.spec.input)?;
        if self.spec.two_stream() {
            match &input.differential {
                Some(d) => d.expect_shape(&self.spec.input)?,
                None => bail!(Argument, "{} network needs a differential image", self.spec.fusion_arch),
            }
        }
        Ok(())
    }

    /// Single-view forward pass; caches activations for [`Network::backward`].
    pub fn forward(&mut self, input: &StreamInput<T>, training: bool, rng: &mut Rng) -> Result<Prediction> {
        self.forward_views(core::slice::from_ref(input), None, training, rng)
    }

    /// Multiview forward pass with the given combiner.
    ///
    /// Voting runs an independent single-view pass per view and leaves no
    /// cache behind. Pooling and filter3d combine each head's layer-`M` maps
    /// across views and run the head once.
    pub fn forward_multiview(&mut self, views: &[StreamInput<T>], combiner: Combiner, training: bool, rng: &mut Rng) -> Result<Decision> {
        if views.is_empty() {
            bail!(Argument, "multiview forward needs at least one view");
        }
        match combiner {
            Combiner::Voting => {
                let mut preds = Vec::with_capacity(views.len());
                for v in views {
                    preds.push(self.forward(v, training, rng)?);
                }
                self.trace = None;
                Ok(Decision { class: multiview_vote(&preds)?, prediction: None })
            }
            _ => {
                let p = self.forward_views(views, Some(combiner), training, rng)?;
                Ok(Decision { class: p.class, prediction: Some(p) })
            }
        }
    }

    /// Forward over one or more views; `combiner` must be pooling or filter3d
    /// when there is more than one view, and `None` skips view combination.
    pub fn forward_views(&mut self, views: &[StreamInput<T>], combiner: Option<Combiner>, training: bool, rng: &mut Rng) -> Result<Prediction> {
        self.trace = None;
        if views.is_empty() {
            bail!(Argument, "forward needs at least one view");
        }
        if views.len() > 1 && !matches!(combiner, Some(Combiner::Pooling | Combiner::Filter3d)) {
            bail!(Argument, "{} views need a pooling or filter3d combiner", views.len());
        }
        let mut vtraces = Vec::with_capacity(views.len());
        for v in views {
            self.check_input(v)?;
            let (a_map, a_trace) = self.lower_a.forward(&v.image, training, rng)?;
            let b = match (&self.lower_b, &v.differential) {
                (Some(seg), Some(d)) => Some(seg.forward(d, training, rng)?),
                _ => None,
            };
            vtraces.push(ViewTrace { a_map, a_trace, b });
        }

        let op = self.spec.fusion_op;
        let mut htraces = Vec::with_capacity(self.heads.len());
        let mut mean = alloc::vec![0.0f64; self.spec.num_classes];
        for head in &self.heads {
            let maps = vtraces
                .iter()
                .map(|vt| match head.source {
                    HeadSource::A => Ok(vt.a_map.clone()),
                    HeadSource::B => Ok(vt.b.as_ref().expect("two-stream").0.clone()),
                    HeadSource::Fused => fuse_maps(&vt.a_map, &vt.b.as_ref().expect("two-stream").0, op),
                })
                .collect::<Result<Vec<_>>>()?;
            let (combined, combine) = match combiner {
                None => (maps.into_iter().next().unwrap(), CombineTrace::None),
                Some(Combiner::Pooling) => {
                    let (y, t) = multiview_pool(&maps)?;
                    (y, CombineTrace::Pool(t))
                }
                Some(Combiner::Filter3d) => {
                    let (y, t) = multiview_filter3d(&maps, &head.filter.value)?;
                    (y, CombineTrace::Filter(t))
                }
                Some(Combiner::Voting) => unreachable!(),
            };
            let (logits, layers) = head.layers.forward(&combined, training, rng)?;
            if !logits.all_finite() {
                bail!(Numeric, "non-finite logits");
            }
            let probs = softmax(&logits);
            for (m, p) in mean.iter_mut().zip(probs.data()) {
                *m += p.widen();
            }
            htraces.push(HeadTrace { combine, layers, probs });
        }
        let inv = 1.0 / self.heads.len() as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        let pred = Prediction::from_probs(mean.clone());
        self.trace = Some(ForwardTrace { views: vtraces, heads: htraces, probs: mean });
        Ok(pred)
    }

    /// Cross-entropy of the last forward pass against `label`; accumulates
    /// gradients into every non-frozen parameter and consumes the cache.
    pub fn backward(&mut self, label: usize) -> Result<f64> {
        let Some(trace) = self.trace.take() else { bail!(State, "backward called without a forward pass") };
        let k = self.spec.num_classes;
        if label >= k {
            bail!(Argument, "label {} out of range for {} classes", label, k);
        }
        let p_label = trace.probs[label].max(1e-30);
        let loss = -libm::log(p_label);
        let n_heads = self.heads.len() as f64;
        let lower_trainable = self.lower_a.trainable() || self.lower_b.as_ref().is_some_and(Segment::trainable);

        let n_views = trace.views.len();
        let mut grad_a: Vec<Option<Tensor<T>>> = (0..n_views).map(|_| None).collect();
        let mut grad_b: Vec<Option<Tensor<T>>> = (0..n_views).map(|_| None).collect();
        let add = |slot: &mut Option<Tensor<T>>, g: Tensor<T>| -> Result<()> {
            match slot {
                Some(s) => s.add_assign(&g),
                None => {
                    *slot = Some(g);
                    Ok(())
                }
            }
        };

        let op = self.spec.fusion_op;
        for (head, ht) in self.heads.iter_mut().zip(&trace.heads) {
            let mut g_probs = Tensor::zeros(&[k]);
            g_probs.data_mut()[label] = T::narrow(-1.0 / (n_heads * p_label));
            let g_logits = softmax_backward(&ht.probs, &g_probs)?;
            let filter_trainable = matches!(ht.combine, CombineTrace::Filter(_)) && !head.filter.frozen;
            let need = lower_trainable || filter_trainable;
            let Some(g_in) = head.layers.backward(&ht.layers, &g_logits, need)? else { continue };
            let per_view = match &ht.combine {
                CombineTrace::None => alloc::vec![g_in],
                CombineTrace::Pool(t) => multiview_pool_backward(t, &g_in)?,
                CombineTrace::Filter(t) => {
                    let (gv, gk) = multiview_filter3d_backward(t, &head.filter.value, &g_in)?;
                    if !head.filter.frozen {
                        head.filter.accumulate(&gk)?;
                    }
                    gv
                }
            };
            if !lower_trainable {
                continue;
            }
            for (v, g) in per_view.into_iter().enumerate() {
                let vt = &trace.views[v];
                match head.source {
                    HeadSource::A => add(&mut grad_a[v], g)?,
                    HeadSource::B => add(&mut grad_b[v], g)?,
                    HeadSource::Fused => {
                        let b_map = &vt.b.as_ref().expect("two-stream").0;
                        let (ga, gb) = fuse_maps_backward(&vt.a_map, b_map, op, &g)?;
                        add(&mut grad_a[v], ga)?;
                        add(&mut grad_b[v], gb)?;
                    }
                }
            }
        }

        for (v, vt) in trace.views.iter().enumerate() {
            if let Some(g) = grad_a[v].take() {
                self.lower_a.backward(&vt.a_trace, &g, false)?;
            }
            if let (Some(g), Some(seg), Some((_, bt))) = (grad_b[v].take(), self.lower_b.as_mut(), vt.b.as_ref()) {
                seg.backward(bt, &g, false)?;
            }
        }
        Ok(loss)
    }

    pub fn zero_grads(&mut self) {
        for (_, p) in self.params_mut() {
            p.zero_grad();
        }
    }
}
