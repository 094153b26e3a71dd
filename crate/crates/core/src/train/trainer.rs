use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::config::{StageLength, TrainConfig};
use super::prepare::PreparedData;
use crate::error::{bail, Result};
use crate::net::{Combiner, FusionArch, Network};
use crate::param::sgd_momentum_step;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: usize,
    /// 1-based across all stages.
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub train_acc: f64,
}

/// Runs the stages of `cfg` in order, freezing everything outside each
/// stage's scope. `on_epoch` sees every record as it is produced.
///
/// A non-finite loss aborts with a numeric error and leaves `net` in the
/// state it had at that step.
pub fn train_staged(
    net: &mut Network<f32>,
    data: &PreparedData,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    if net.spec().num_classes != data.num_classes() {
        bail!(Argument, "network has {} classes, data has {}", net.spec().num_classes, data.num_classes());
    }
    let combiner = net.spec().combiner;
    let two_stream = net.spec().fusion_arch != FusionArch::Single;
    // Voting combines decisions, not features, so it trains on single views.
    let joint_views = if combiner == Combiner::Voting { 1 } else { cfg.n_views };
    let master = Rng::new(cfg.seed);
    let mut records = Vec::new();
    let mut epoch = 0usize;
    for (si, stage) in cfg.stages.iter().enumerate() {
        for (info, p) in net.params_mut() {
            p.frozen = !stage.scope.contains(&info);
            p.velocity.fill(0.0);
            p.zero_grad();
        }
        let mut lr = stage.base_lr;
        let mut accs: Vec<f64> = Vec::new();
        let mut last_decay = 0usize;
        for _ in 0..stage.length.epochs() {
            epoch += 1;
            let mut sample_rng = master.split(2 * epoch as u64);
            let mut drop_rng = master.split(2 * epoch as u64 + 1);
            let samples = data.epoch(cfg.n_views, cfg.samples_per_instance, two_stream, &mut sample_rng)?;
            let units: Vec<(usize, &[crate::net::StreamInput<f32>])> = samples
                .iter()
                .flat_map(|s| s.views.chunks(joint_views).map(move |c| (s.label, c)))
                .collect();
            let (mut loss_sum, mut correct, mut in_batch) = (0.0, 0usize, 0usize);
            for (step, (label, views)) in units.iter().enumerate() {
                let combine = (views.len() > 1).then_some(combiner);
                let pred = net.forward_views(views, combine, true, &mut drop_rng)?;
                let loss = net.backward(*label)?;
                if !loss.is_finite() {
                    bail!(Numeric, "non-finite loss at epoch {} step {}", epoch, step);
                }
                loss_sum += loss;
                correct += (pred.class == *label) as usize;
                in_batch += 1;
                if in_batch == cfg.batch_size || step + 1 == units.len() {
                    let scale = 1.0 / in_batch as f64;
                    sgd_momentum_step(net.params_mut().into_iter().map(|(_, p)| p), lr * scale, cfg.momentum);
                    in_batch = 0;
                }
            }
            let n = units.len().max(1) as f64;
            let rec = EpochRecord { stage: si, epoch, lr, loss: loss_sum / n, train_acc: correct as f64 / n };
            on_epoch(&rec);
            records.push(rec);
            accs.push(correct as f64 / n);
            if let StageLength::Saturation { .. } = stage.length {
                let e = accs.len();
                let w = cfg.saturation_window;
                if e - last_decay >= w && e > w && (accs[e - 1] - accs[e - 1 - w]) * 100.0 < cfg.saturation_points {
                    lr *= cfg.lr_decay_factor;
                    last_decay = e;
                }
            }
        }
    }
    for (_, p) in net.params_mut() {
        p.frozen = false;
        p.velocity.fill(0.0);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, make_splits, AugmentParams, SplitConfig, SynthConfig};
    use crate::imaging::AlignConfig;
    use crate::net::{FusionOp, LayerDesc, NetworkSpec};
    use crate::train::{DifferentialSet, Scope, Stage};
    use alloc::vec;

    fn small_spec(classes: usize) -> NetworkSpec {
        NetworkSpec {
            input: [3, 16, 16],
            backbone: vec![
                LayerDesc::Conv { out_channels: 6, kernel: 3, stride: 1, pad: 1 },
                LayerDesc::Relu,
                LayerDesc::MaxPool { window: 2, stride: 2 },
                LayerDesc::Conv { out_channels: 8, kernel: 3, stride: 1, pad: 1 },
                LayerDesc::Relu,
                LayerDesc::MaxPool { window: 2, stride: 2 },
                LayerDesc::Dense { out: 16 },
                LayerDesc::Relu,
                LayerDesc::Dropout { rate: 0.5 },
                LayerDesc::Dense { out: classes },
            ],
            fusion_arch: FusionArch::Dain,
            fusion_op: FusionOp::Sum,
            fusion_layer: 4,
            num_classes: classes,
            combiner: Combiner::Pooling,
        }
    }

    fn toy_data() -> PreparedData {
        let ds = generate_synthetic(&SynthConfig {
            classes: 2,
            instances_per_class: 4,
            image_size: 16,
            illuminations: 1,
            seed: 4,
            ..Default::default()
        })
        .unwrap();
        let diffs = DifferentialSet::compute(&ds, Some(&AlignConfig::default())).unwrap();
        let split = make_splits(&ds.index, &SplitConfig::default()).unwrap().remove(0);
        PreparedData::build(&ds, &diffs, &split, &AugmentParams { resize: 18, crop_size: 16, ..Default::default() }).unwrap()
    }

    fn cfg(stages: Vec<Stage>) -> TrainConfig {
        let mut c = TrainConfig::desk_two_branch();
        c.stages = stages;
        c.augment = AugmentParams { resize: 18, crop_size: 16, ..Default::default() };
        c.batch_size = 8;
        c.seed = 1;
        c
    }

    #[test]
    fn stage_scope_freezes_everything_else() {
        let data = toy_data();
        let mut net: Network<f32> = Network::build(&small_spec(2), &Rng::new(0)).unwrap();
        let before = net.named_values();
        let c = cfg(vec![Stage { scope: Scope::LastDense, base_lr: 0.05, length: StageLength::Epochs(1) }]);
        train_staged(&mut net, &data, &c, |_| {}).unwrap();
        let mut changed = 0;
        let mut probe = net.clone();
        let infos: Vec<_> = probe.params_mut().into_iter().map(|(i, _)| i).collect();
        for ((info, (_, a)), (_, b)) in infos.iter().zip(&before).zip(net.named_values()) {
            if info.classifier {
                changed += (a != &b) as usize;
            } else {
                assert_eq!(a, &b, "{} moved", info.name);
            }
        }
        assert!(changed > 0);
    }

    #[test]
    fn staged_training_reduces_loss() {
        let data = toy_data();
        let mut net: Network<f32> = Network::build(&small_spec(2), &Rng::new(0)).unwrap();
        let c = cfg(vec![
            Stage { scope: Scope::PostFusion, base_lr: 0.02, length: StageLength::Epochs(2) },
            Stage { scope: Scope::All, base_lr: 0.02, length: StageLength::Saturation { max_epochs: 8 } },
        ]);
        let rec = train_staged(&mut net, &data, &c, |_| {}).unwrap();
        assert_eq!(rec.len(), 10);
        assert!(rec.last().unwrap().loss < rec[0].loss, "{rec:?}");
        // Learning rate never rises inside the last stage.
        let last: Vec<f64> = rec.iter().filter(|r| r.stage == 1).map(|r| r.lr).collect();
        assert!(last.windows(2).all(|w| w[1] <= w[0]));
        let mut again: Network<f32> = Network::build(&small_spec(2), &Rng::new(0)).unwrap();
        assert_eq!(rec, train_staged(&mut again, &data, &c, |_| {}).unwrap());
        assert!(again == net);
    }

    #[test]
    fn multiview_training_runs() {
        let data = toy_data();
        let mut net: Network<f32> = Network::build(&small_spec(2).with_combiner(Combiner::Filter3d), &Rng::new(0)).unwrap();
        let mut c = cfg(vec![Stage { scope: Scope::All, base_lr: 0.01, length: StageLength::Epochs(1) }]);
        c.n_views = 4;
        c.samples_per_instance = 2;
        let rec = train_staged(&mut net, &data, &c, |_| {}).unwrap();
        assert!(rec[0].loss.is_finite());
    }
}
