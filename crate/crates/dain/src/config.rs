//! Flat run configuration: built-in defaults, then a JSON config file, then
//! `key=value` overrides. Unknown keys are rejected at every step.

use std::path::Path;

use dain_core::data::{AugmentParams, SplitConfig, SynthConfig};
use dain_core::imaging::AlignConfig;
use dain_core::net::{Combiner, FusionArch, FusionOp, LayerDesc, NetworkSpec};
use dain_core::train::{EvalMode, Scope, Stage, StageLength, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Training from scratch at desk scale.
    Desk,
    /// The paper's stage list, learning rates and batch sizes.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewMode {
    Single,
    Multiview,
}

/// Every key the command line understands, with its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,

    pub classes: usize,
    pub instances_per_class: usize,
    pub image_size: usize,
    pub illuminations: usize,
    pub noise: f64,
    pub phi_deg: f64,
    pub lambertian_control: bool,

    pub n_splits: usize,
    pub train_frac: f64,
    pub min_instances: usize,
    /// Which generated split `train`/`eval` use when no split file is given.
    pub split_id: usize,

    pub align: bool,
    pub align_levels: usize,
    pub align_max_iters: usize,
    pub align_tol: f64,

    pub fusion_arch: FusionArch,
    pub fusion_op: FusionOp,
    pub combiner: Combiner,
    pub dropout_rate: f64,

    pub schedule: Schedule,
    pub lr: f64,
    pub epochs: usize,
    pub post_fusion_epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub lr_decay_factor: f64,
    pub saturation_window: usize,
    pub saturation_points: f64,
    pub stretch: f64,
    pub flip_prob: f64,
    pub crop_size: usize,
    pub resize: usize,
    pub samples_per_instance: usize,
    /// Views per training sample.
    pub n_views: usize,

    pub eval_mode: ViewMode,
    /// Views per evaluation window in multiview mode.
    pub eval_views: usize,
    pub eval_windows: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        let split = SplitConfig::default();
        let align = AlignConfig::default();
        let aug = AugmentParams::default();
        RunConfig {
            seed: 0,
            classes: synth.classes,
            instances_per_class: synth.instances_per_class,
            image_size: synth.image_size,
            illuminations: synth.illuminations,
            noise: synth.noise,
            phi_deg: synth.phi_deg,
            lambertian_control: synth.lambertian_control,
            n_splits: split.n_splits,
            train_frac: split.train_frac,
            min_instances: split.min_instances,
            split_id: 0,
            align: true,
            align_levels: align.levels,
            align_max_iters: align.max_iters,
            align_tol: align.tol,
            fusion_arch: FusionArch::Dain,
            fusion_op: FusionOp::Sum,
            combiner: Combiner::Pooling,
            dropout_rate: 0.5,
            schedule: Schedule::Desk,
            lr: 1e-2,
            epochs: 0,
            post_fusion_epochs: 0,
            batch_size: 32,
            momentum: 0.9,
            lr_decay_factor: 0.1,
            saturation_window: 3,
            saturation_points: 0.2,
            stretch: aug.stretch,
            flip_prob: aug.flip_prob,
            crop_size: aug.crop_size,
            resize: aug.resize,
            samples_per_instance: 12,
            n_views: 1,
            eval_mode: ViewMode::Single,
            eval_views: 4,
            eval_windows: 3,
        }
    }
}

/// Parses `key=value`; the value is read as JSON when it parses, otherwise
/// as a bare string (so `fusion_arch=dain` works unquoted).
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (k, v) = s.split_once('=').ok_or_else(|| Error::Usage(format!("override `{s}` is not key=value")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(Error::Usage(format!("override `{s}` has an empty key")));
    }
    let v = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.to_string(), v))
}

impl RunConfig {
    /// Defaults, then the config file, then `key=value` overrides in order.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
        let mut map = match serde_json::to_value(RunConfig::default()).expect("serializable") {
            Value::Object(m) => m,
            _ => unreachable!(),
        };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
            let v: Value = serde_json::from_str(&text).map_err(Error::json(path))?;
            // A run directory's config.json nests the flat keys under "run".
            let v = match v {
                Value::Object(mut m) if m.contains_key("network") && m.get("run").is_some_and(Value::is_object) => m.remove("run").unwrap(),
                v => v,
            };
            let Value::Object(m) = v else {
                return Err(Error::Usage(format!("{}: config must be a JSON object of flat keys", path.display())));
            };
            merge(&mut map, m, &path.display().to_string())?;
        }
        let mut ov = Map::new();
        for o in overrides {
            let (k, v) = parse_override(o)?;
            ov.insert(k, v);
        }
        merge(&mut map, ov, "override")?;
        let cfg: RunConfig = serde_json::from_value(Value::Object(map)).map_err(|e| Error::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            classes: self.classes,
            instances_per_class: self.instances_per_class,
            image_size: self.image_size,
            illuminations: self.illuminations,
            noise: self.noise,
            phi_deg: self.phi_deg,
            lambertian_control: self.lambertian_control,
            seed: self.seed,
        }
    }

    pub fn split(&self) -> SplitConfig {
        SplitConfig { n_splits: self.n_splits, train_frac: self.train_frac, min_instances: self.min_instances, seed: self.seed }
    }

    pub fn align_config(&self) -> Option<AlignConfig> {
        self.align.then_some(AlignConfig { levels: self.align_levels, max_iters: self.align_max_iters, tol: self.align_tol })
    }

    pub fn augment(&self) -> AugmentParams {
        AugmentParams { stretch: self.stretch, flip_prob: self.flip_prob, crop_size: self.crop_size, resize: self.resize }
    }

    /// Toy backbone at the crop size, with this config's dropout and fusion.
    pub fn network_spec(&self, num_classes: usize) -> NetworkSpec {
        let mut spec = NetworkSpec::toy(num_classes, self.crop_size).with_arch(self.fusion_arch, self.fusion_op).with_combiner(self.combiner);
        for l in spec.backbone.iter_mut() {
            if let LayerDesc::Dropout { rate } = l {
                *rate = self.dropout_rate;
            }
        }
        spec
    }

    pub fn train_config(&self) -> TrainConfig {
        let two_stream = self.fusion_arch != FusionArch::Single;
        let mut tc = match (self.schedule, two_stream) {
            (Schedule::Paper, false) => TrainConfig::paper_single_stream(),
            (Schedule::Paper, true) => TrainConfig::paper_two_branch(),
            (Schedule::Desk, false) => TrainConfig::desk_single_stream(),
            (Schedule::Desk, true) => TrainConfig::desk_two_branch(),
        };
        if self.schedule == Schedule::Desk {
            let total = if self.epochs > 0 { self.epochs } else { tc.total_epochs() };
            tc.stages = if two_stream && self.post_fusion_epochs > 0 {
                let pf = self.post_fusion_epochs.min(total);
                vec![
                    Stage { scope: Scope::PostFusion, base_lr: self.lr, length: StageLength::Epochs(pf) },
                    Stage { scope: Scope::All, base_lr: self.lr, length: StageLength::Saturation { max_epochs: total - pf } },
                ]
            } else {
                vec![Stage { scope: Scope::All, base_lr: self.lr, length: StageLength::Saturation { max_epochs: total } }]
            };
            tc.batch_size = self.batch_size;
            tc.augment = self.augment();
        }
        tc.momentum = self.momentum;
        tc.dropout_rate = self.dropout_rate;
        tc.lr_decay_factor = self.lr_decay_factor;
        tc.saturation_window = self.saturation_window;
        tc.saturation_points = self.saturation_points;
        tc.samples_per_instance = self.samples_per_instance;
        tc.n_views = self.n_views;
        tc.seed = self.seed;
        tc
    }

    pub fn eval_mode(&self) -> EvalMode {
        match self.eval_mode {
            ViewMode::Single => EvalMode::Single,
            ViewMode::Multiview => EvalMode::Multiview { combiner: self.combiner, n_views: self.eval_views, windows: self.eval_windows },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |e: dain_core::Error| Error::Usage(e.to_string());
        self.synth().validate().map_err(usage)?;
        self.augment().validate().map_err(usage)?;
        self.train_config().validate().map_err(usage)?;
        self.network_spec(self.classes.max(2)).validate().map_err(usage)?;
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::Usage(format!("train_frac must lie in (0, 1), got {}", self.train_frac)));
        }
        if self.n_splits == 0 || self.eval_views == 0 || self.eval_views > 9 {
            return Err(Error::Usage("n_splits must be >= 1 and eval_views in 1..=9".into()));
        }
        Ok(())
    }

    /// Stable hex fingerprint of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("serializable");
        format!("{:016x}", dain_core::data::fingerprint(json.as_bytes()))
    }
}

fn merge(base: &mut Map<String, Value>, add: Map<String, Value>, origin: &str) -> Result<()> {
    for (k, v) in add {
        match base.get_mut(&k) {
            Some(slot) => *slot = v,
            None => return Err(Error::Usage(format!("{origin}: unknown key `{k}`"))),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let c = RunConfig::resolve(None, &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.train_config().total_epochs(), 20);
    }

    #[test]
    fn overrides_apply_after_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"batch_size": 8, "fusion_arch": "final", "lr": 0.5}"#).unwrap();
        let c = RunConfig::resolve(Some(&p), &["lr=0.02".into(), "fusion_op=max".into()]).unwrap();
        assert_eq!((c.batch_size, c.fusion_arch, c.fusion_op, c.lr), (8, FusionArch::Final, FusionOp::Max, 0.02));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::resolve(None, &["bogus=1".into()]), Err(Error::Usage(_))));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"learning_rate": 0.1}"#).unwrap();
        assert!(matches!(RunConfig::resolve(Some(&p), &[]), Err(Error::Usage(_))));
        assert!(matches!(RunConfig::resolve(None, &["lr".into()]), Err(Error::Usage(_))));
        assert!(matches!(RunConfig::resolve(None, &["fusion_arch=weird".into()]), Err(Error::Usage(_))));
    }

    #[test]
    fn desk_stages_follow_epochs() {
        let c = RunConfig::resolve(None, &["epochs=10".into(), "post_fusion_epochs=2".into()]).unwrap();
        let t = c.train_config();
        assert_eq!(t.stages.len(), 2);
        assert_eq!(t.stages[0].length, StageLength::Epochs(2));
        assert_eq!(t.stages[1].length, StageLength::Saturation { max_epochs: 8 });
        let c = RunConfig::resolve(None, &["fusion_arch=single".into()]).unwrap();
        assert_eq!(c.train_config().total_epochs(), 30);
        assert_eq!(c.train_config().stages.len(), 1);
    }
}
