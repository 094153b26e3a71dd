use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::AugmentParams;
use crate::error::{bail, Result};
use crate::net::{ParamInfo, ParamKind};

/// Which parameters a stage updates; everything else is frozen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    LastDense,
    AllDense,
    PostFusion,
    All,
}

impl Scope {
    pub fn contains(&self, info: &ParamInfo) -> bool {
        match self {
            Scope::LastDense => info.classifier,
            Scope::AllDense => matches!(info.kind, ParamKind::DenseWeights | ParamKind::DenseBias),
            Scope::PostFusion => info.head.is_some(),
            Scope::All => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageLength {
    Epochs(usize),
    /// Runs up to `max_epochs`, decaying the learning rate whenever training
    /// accuracy stalls.
    Saturation { max_epochs: usize },
}

impl StageLength {
    pub fn epochs(&self) -> usize {
        match *self {
            StageLength::Epochs(n) | StageLength::Saturation { max_epochs: n } => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub scope: Scope,
    pub base_lr: f64,
    pub length: StageLength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub stages: Vec<Stage>,
    pub batch_size: usize,
    pub momentum: f64,
    pub dropout_rate: f64,
    pub lr_decay_factor: f64,
    /// Epochs over which training accuracy has to improve.
    pub saturation_window: usize,
    /// Minimum improvement, in accuracy points, over the window.
    pub saturation_points: f64,
    pub augment: AugmentParams,
    /// Training samples drawn per instance and epoch; 0 uses every
    /// (illumination, view) pair once.
    pub samples_per_instance: usize,
    /// Contiguous views per training sample; 1 trains single-view.
    pub n_views: usize,
    pub seed: u64,
}

impl TrainConfig {
    fn base(stages: Vec<Stage>, batch_size: usize, stretch: f64) -> Self {
        TrainConfig {
            stages,
            batch_size,
            momentum: 0.9,
            dropout_rate: 0.5,
            lr_decay_factor: 0.1,
            saturation_window: 3,
            saturation_points: 0.2,
            augment: AugmentParams { stretch, ..AugmentParams::default() },
            samples_per_instance: 0,
            n_views: 1,
            seed: 0,
        }
    }

    /// Single-stream fine-tuning schedule of the paper, batch 196.
    pub fn paper_single_stream() -> Self {
        Self::base(
            vec![
                Stage { scope: Scope::LastDense, base_lr: 5e-2, length: StageLength::Epochs(5) },
                Stage { scope: Scope::AllDense, base_lr: 1e-2, length: StageLength::Epochs(5) },
                Stage { scope: Scope::All, base_lr: 1e-3, length: StageLength::Saturation { max_epochs: 20 } },
            ],
            196,
            0.1,
        )
    }

    /// Two-branch schedule of the paper: post-fusion layers for 3 epochs, then
    /// everything; batch 64, ±25% stretch.
    pub fn paper_two_branch() -> Self {
        Self::base(
            vec![
                Stage { scope: Scope::PostFusion, base_lr: 1e-3, length: StageLength::Epochs(3) },
                Stage { scope: Scope::All, base_lr: 1e-3, length: StageLength::Saturation { max_epochs: 17 } },
            ],
            64,
            0.25,
        )
        .with_resize(43)
    }

    /// Resize target before stretching; a ±25% stretch needs 43 px for a 32 px crop.
    pub fn with_resize(mut self, resize: usize) -> Self {
        self.augment.resize = resize;
        self
    }

    /// Desk-scale single-stream training from scratch: 30 epochs, batch 32.
    pub fn desk_single_stream() -> Self {
        Self::base(vec![Stage { scope: Scope::All, base_lr: 1e-2, length: StageLength::Saturation { max_epochs: 30 } }], 32, 0.1)
    }

    /// Desk-scale two-branch schedule: 3 post-fusion epochs then 17 more, batch 32.
    pub fn desk_two_branch() -> Self {
        Self::base(
            vec![
                Stage { scope: Scope::PostFusion, base_lr: 1e-2, length: StageLength::Epochs(3) },
                Stage { scope: Scope::All, base_lr: 1e-2, length: StageLength::Saturation { max_epochs: 17 } },
            ],
            32,
            0.1,
        )
    }

    pub fn total_epochs(&self) -> usize {
        self.stages.iter().map(|s| s.length.epochs()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            bail!(Argument, "training needs at least one stage");
        }
        for (i, s) in self.stages.iter().enumerate() {
            if !(s.base_lr > 0.0 && s.base_lr.is_finite()) {
                bail!(Argument, "stage {} learning rate must be positive, got {}", i, s.base_lr);
            }
        }
        if self.batch_size == 0 {
            bail!(Argument, "batch_size must be at least 1");
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor < 1.0) {
            bail!(Argument, "lr_decay_factor must lie in (0, 1), got {}", self.lr_decay_factor);
        }
        if !(0.0..1.0).contains(&self.momentum) {
            bail!(Argument, "momentum must lie in [0, 1), got {}", self.momentum);
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            bail!(Argument, "dropout_rate must lie in [0, 1), got {}", self.dropout_rate);
        }
        if self.saturation_window == 0 {
            bail!(Argument, "saturation_window must be at least 1");
        }
        if self.n_views == 0 {
            bail!(Argument, "n_views must be at least 1");
        }
        self.augment.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_schedule_values() {
        let c = TrainConfig::paper_single_stream();
        let stages: Vec<(Scope, f64, Option<usize>)> = c
            .stages
            .iter()
            .map(|s| (s.scope, s.base_lr, if let StageLength::Epochs(n) = s.length { Some(n) } else { None }))
            .collect();
        assert_eq!(stages, vec![(Scope::LastDense, 5e-2, Some(5)), (Scope::AllDense, 1e-2, Some(5)), (Scope::All, 1e-3, None)]);
        assert_eq!((c.batch_size, c.momentum, c.dropout_rate), (196, 0.9, 0.5));
        let t = TrainConfig::paper_two_branch();
        assert_eq!(t.batch_size, 64);
        assert_eq!((t.stages[0].scope, t.stages[0].length), (Scope::PostFusion, StageLength::Epochs(3)));
        assert_eq!(t.augment.stretch, 0.25);
        c.validate().unwrap();
        t.validate().unwrap();
    }

    #[test]
    fn desk_defaults() {
        assert_eq!(TrainConfig::desk_single_stream().total_epochs(), 30);
        assert_eq!(TrainConfig::desk_two_branch().total_epochs(), 20);
        assert_eq!(TrainConfig::desk_two_branch().batch_size, 32);
        TrainConfig::desk_single_stream().validate().unwrap();
        TrainConfig::desk_two_branch().validate().unwrap();
    }

    #[test]
    fn invalid_values_rejected() {
        let mut c = TrainConfig::desk_single_stream();
        c.lr_decay_factor = 1.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::desk_single_stream();
        c.batch_size = 0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::desk_single_stream();
        c.stages[0].base_lr = 0.0;
        assert!(c.validate().is_err());
    }
}
