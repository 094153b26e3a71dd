//! The full gradient-check battery: every differentiable op and every
//! architecture × fusion operator × view combiner, at toy sizes in `f64`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::gradcheck::{grad_check_report, network_grad_check, GradCheckConfig, GradCheckReport};
use crate::net::{self, Combiner, FusionArch, FusionOp, Network, NetworkSpec, ParamKind, StreamInput};
use crate::ops;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Threshold every entry must stay below.
pub const MAX_REL_ERROR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub name: String,
    /// Worst over all instances.
    pub max_rel_error: f64,
    pub checked: usize,
    pub nonsmooth: usize,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        self.max_rel_error < MAX_REL_ERROR && self.checked > 0
    }
}

fn weighted(y: &Tensor<f64>, w: &Tensor<f64>) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

type Case = fn(&mut Rng, &GradCheckConfig) -> Result<GradCheckReport>;

fn op_cases() -> Vec<(&'static str, Case)> {
    vec![
        ("conv2d", |rng, cfg| {
            let mut p = vec![
                Tensor::uniform(&[2, 6, 6], -1.0, 1.0, rng),
                Tensor::uniform(&[3, 2, 3, 3], -1.0, 1.0, rng),
                Tensor::uniform(&[3], -1.0, 1.0, rng),
            ];
            let w = Tensor::uniform(&[3, 6, 6], -1.0, 1.0, rng);
            grad_check_report(&mut p, |p| {
                let (y, c) = ops::conv2d(&p[0], &p[1], &p[2], 1, 1)?;
                let g = ops::conv2d_backward(&c, &p[1], &w, true)?;
                Ok((weighted(&y, &w), vec![g.input.unwrap(), g.kernels, g.bias]))
            }, cfg)
        }),
        ("relu", |rng, cfg| {
            let mut p = vec![Tensor::uniform(&[30], -1.0, 1.0, rng)];
            let w = Tensor::uniform(&[30], -1.0, 1.0, rng);
            grad_check_report(&mut p, |p| {
                let y = ops::relu(&p[0]);
                Ok((weighted(&y, &w), vec![ops::relu_backward(&w, &p[0])?]))
            }, cfg)
        }),
        ("maxpool2d", |rng, cfg| {
            let mut p = vec![Tensor::uniform(&[2, 6, 6], -1.0, 1.0, rng)];
            let w = Tensor::uniform(&[2, 3, 3], -1.0, 1.0, rng);
            grad_check_report(&mut p, |p| {
                let (y, c) = ops::maxpool2d(&p[0], 2, 2)?;
                Ok((weighted(&y, &w), vec![ops::maxpool2d_backward(&c, &w)?]))
            }, cfg)
        }),
        ("dense", |rng, cfg| {
            let mut p = vec![
                Tensor::uniform(&[7], -1.0, 1.0, rng),
                Tensor::uniform(&[4, 7], -1.0, 1.0, rng),
                Tensor::uniform(&[4], -1.0, 1.0, rng),
            ];
            let w = Tensor::uniform(&[4], -1.0, 1.0, rng);
            grad_check_report(&mut p, |p| {
                let y = ops::dense(&p[0], &p[1], &p[2])?;
                let g = ops::dense_backward(&p[0], &p[1], &w, true)?;
                Ok((weighted(&y, &w), vec![g.input.unwrap(), g.weights, g.bias]))
            }, cfg)
        }),
        ("softmax_cross_entropy", |rng, cfg| {
            let mut p: Vec<Tensor<f64>> = vec![Tensor::uniform(&[8], -3.0, 3.0, rng)];
            let label = rng.below(8) as usize;
            grad_check_report(&mut p, |p| {
                let (loss, probs) = ops::softmax_cross_entropy(&p[0], label)?;
                Ok((loss, vec![ops::softmax_cross_entropy_backward(&probs, label)?]))
            }, cfg)
        }),
        ("dropout", |rng, cfg| {
            let mut p = vec![Tensor::uniform(&[40], -1.0, 1.0, rng)];
            let w = Tensor::uniform(&[40], -1.0, 1.0, rng);
            let seed = rng.next_u64();
            grad_check_report(&mut p, |p| {
                let (y, m) = ops::dropout(&p[0], 0.5, &mut Rng::new(seed), true)?;
                Ok((weighted(&y, &w), vec![ops::dropout_backward(&m, &w)?]))
            }, cfg)
        }),
        ("conv3d_depthwise", |rng, cfg| {
            let mut p = vec![Tensor::uniform(&[2, 3, 4, 4], -1.0, 1.0, rng), Tensor::uniform(&[2, 3, 3, 3], -1.0, 1.0, rng)];
            let w = Tensor::uniform(&[2, 3, 4, 4], -1.0, 1.0, rng);
            grad_check_report(&mut p, |p| {
                let y = ops::conv3d_depthwise(&p[0], &p[1])?;
                let (gx, gk) = ops::conv3d_depthwise_backward(&p[0], &p[1], &w)?;
                Ok((weighted(&y, &w), vec![gx, gk]))
            }, cfg)
        }),
        ("fuse_maps/sum", |rng, cfg| fuse_case(rng, cfg, FusionOp::Sum)),
        ("fuse_maps/max", |rng, cfg| fuse_case(rng, cfg, FusionOp::Max)),
        ("multiview_pool", |rng, cfg| {
            let mut p: Vec<Tensor<f64>> = (0..3).map(|_| Tensor::uniform(&[2, 3, 3], -1.0, 1.0, rng)).collect();
            let w = Tensor::uniform(&[2, 3, 3], -1.0, 1.0, rng);
            grad_check_report(&mut p, |p| {
                let (y, t) = net::multiview_pool(p)?;
                Ok((weighted(&y, &w), net::multiview_pool_backward(&t, &w)?))
            }, cfg)
        }),
        ("multiview_filter3d", |rng, cfg| {
            let mut p: Vec<Tensor<f64>> = (0..3).map(|_| Tensor::uniform(&[2, 3, 3], -1.0, 1.0, rng)).collect();
            p.push(Tensor::uniform(&[2, 3, 3, 3], -0.5, 0.5, rng));
            let w = Tensor::uniform(&[2, 3, 3], -1.0, 1.0, rng);
            grad_check_report(&mut p, |p| {
                let (y, t) = net::multiview_filter3d(&p[..3], &p[3])?;
                let (mut g, gk) = net::multiview_filter3d_backward(&t, &p[3], &w)?;
                g.push(gk);
                Ok((weighted(&y, &w), g))
            }, cfg)
        }),
    ]
}

fn fuse_case(rng: &mut Rng, cfg: &GradCheckConfig, op: FusionOp) -> Result<GradCheckReport> {
    let mut p = vec![Tensor::uniform(&[2, 3, 3], -1.0, 1.0, rng), Tensor::uniform(&[2, 3, 3], -1.0, 1.0, rng)];
    let w = Tensor::uniform(&[2, 3, 3], -1.0, 1.0, rng);
    grad_check_report(&mut p, |p| {
        let y = net::fuse_maps(&p[0], &p[1], op)?;
        let (ga, gb) = net::fuse_maps_backward(&p[0], &p[1], op, &w)?;
        Ok((weighted(&y, &w), vec![ga, gb]))
    }, cfg)
}

/// Views used for network checks.
const NETWORK_VIEWS: usize = 3;

fn network_case(arch: FusionArch, op: FusionOp, combiner: Combiner, rng: &mut Rng, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let spec = NetworkSpec::tiny(3).with_arch(arch, op).with_combiner(combiner);
    let mut net = Network::<f32>::build(&spec, &Rng::new(rng.next_u64()))?.cast::<f64>();
    for (info, p) in net.params_mut() {
        // Non-trivial filters and biases so every path carries signal.
        let (lo, hi) = if info.kind == ParamKind::Filter { (-0.5, 0.5) } else { (-0.1, 0.1) };
        if matches!(info.kind, ParamKind::Filter | ParamKind::ConvBias | ParamKind::DenseBias) {
            p.value = Tensor::uniform(p.value.shape(), lo, hi, rng);
        }
    }
    let n = match combiner {
        Combiner::Voting => 1,
        _ => NETWORK_VIEWS,
    };
    let views: Vec<StreamInput<f64>> = (0..n)
        .map(|_| StreamInput {
            image: Tensor::uniform(&spec.input, 0.0, 1.0, rng),
            differential: spec.two_stream().then(|| Tensor::uniform(&spec.input, -0.5, 0.5, rng)),
        })
        .collect();
    let label = rng.below(spec.num_classes as u64) as usize;
    // Voting is not differentiable; its trainable path is the per-view pass.
    let comb = match combiner {
        Combiner::Voting => None,
        c => Some(c),
    };
    network_grad_check(&mut net, &views, comb, label, cfg)
}

/// Runs every check over `instances` seeded random instances.
pub fn run(seed: u64, instances: usize, samples: usize) -> Result<Vec<SuiteEntry>> {
    let master = Rng::new(seed);
    let mut entries = Vec::new();
    let mut run_case = |name: String, stream: u64, f: &dyn Fn(&mut Rng, &GradCheckConfig) -> Result<GradCheckReport>| -> Result<()> {
        let mut e = SuiteEntry { name, max_rel_error: 0.0, checked: 0, nonsmooth: 0 };
        for inst in 0..instances {
            let mut rng = master.split(stream).split(inst as u64);
            let cfg = GradCheckConfig { eps: 1e-5, samples, seed: rng.next_u64() };
            let r = f(&mut rng, &cfg)?;
            e.max_rel_error = e.max_rel_error.max(r.max_rel_error);
            e.checked += r.checked;
            e.nonsmooth += r.nonsmooth;
        }
        entries.push(e);
        Ok(())
    };
    let mut stream = 0u64;
    for (name, case) in op_cases() {
        run_case(String::from(name), stream, &case)?;
        stream += 1;
    }
    for &arch in FusionArch::ALL {
        let ops: &[FusionOp] = if arch == FusionArch::Single { &[FusionOp::Sum] } else { FusionOp::ALL };
        for &op in ops {
            for &combiner in Combiner::ALL {
                let name = if arch == FusionArch::Single {
                    format!("network/{arch}/{combiner}")
                } else {
                    format!("network/{arch}/{op}/{combiner}")
                };
                run_case(name, stream, &|rng, cfg| network_case(arch, op, combiner, rng, cfg))?;
                stream += 1;
            }
        }
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let entries = run(1, 2, 24).unwrap();
        assert_eq!(entries.len(), 11 + 3 + 3 * 2 * 3);
        for e in &entries {
            assert!(e.passed(), "{e:?}");
        }
    }
}
