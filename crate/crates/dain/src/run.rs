//! Training and evaluation runs, and the run-directory layout.

use std::fmt::Write as _;
use std::path::Path;

use dain_core::data::{Dataset, SplitSpec};
use dain_core::net::{FusionArch, Network, NetworkSpec};
use dain_core::train::{
    cross_split_report, evaluate, train_staged, DifferentialSet, EpochRecord, EvalMode, EvalResult, MetricsReport,
    PreparedData, RunResult, TrainConfig,
};
use dain_core::Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::save_checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{write_bytes, write_json};
use crate::parallel::par_map;

/// Report rows in display order; runs with other labels follow these.
pub const ROW_ORDER: &[&str] = &[
    "single view CNN",
    "multiview CNN, voting",
    "multiview CNN, pooling",
    "single view final fusion (sum)",
    "single view final fusion (max)",
    "single view intermediate fusion (sum)",
    "single view intermediate fusion (max)",
    "single view DAIN (sum)",
    "single view DAIN (max)",
    "multiview DAIN (sum, voting)",
    "multiview DAIN (sum, pooling)",
    "multiview DAIN (sum, filter3d)",
    "multiview DAIN (max, voting)",
    "multiview DAIN (max, pooling)",
    "multiview DAIN (max, filter3d)",
];

/// Report row name for a network evaluated in `mode`.
pub fn run_label(spec: &NetworkSpec, mode: &EvalMode) -> String {
    let arch = match spec.fusion_arch {
        FusionArch::Single => "CNN".to_string(),
        FusionArch::Final => format!("final fusion ({})", spec.fusion_op),
        FusionArch::Intermediate => format!("intermediate fusion ({})", spec.fusion_op),
        FusionArch::Dain => format!("DAIN ({})", spec.fusion_op),
    };
    match mode {
        EvalMode::Single => format!("single view {arch}"),
        EvalMode::Multiview { combiner, .. } => match spec.fusion_arch {
            FusionArch::Single => format!("multiview CNN, {combiner}"),
            _ => format!("multiview {}, {combiner})", arch.trim_end_matches(')')),
        },
    }
}

/// Differential images for the whole dataset, computed in instance chunks.
pub fn differentials(ds: &Dataset, cfg: &RunConfig, workers: usize) -> Result<DifferentialSet> {
    let align = cfg.align_config();
    let n = ds.index.instances.len();
    let chunks: Vec<Vec<usize>> = (0..workers.max(1)).map(|w| (w..n).step_by(workers.max(1)).collect()).collect();
    let parts = par_map(&chunks, workers, |c| DifferentialSet::compute_instances(ds, align.as_ref(), c));
    let mut parts = parts.into_iter();
    let mut all = parts.next().expect("at least one chunk")?;
    for p in parts {
        all.merge(p?)?;
    }
    all.alignment_failures.sort();
    for f in &all.alignment_failures {
        log::info!("alignment failed, using the raw difference: {f}");
    }
    Ok(all)
}

pub fn prepare(ds: &Dataset, diffs: &DifferentialSet, split: &SplitSpec, cfg: &RunConfig) -> Result<PreparedData> {
    Ok(PreparedData::build(ds, diffs, split, &cfg.augment())?)
}

/// The split a run uses when none is given explicitly.
pub fn default_split(ds: &Dataset, cfg: &RunConfig) -> Result<SplitSpec> {
    let mut splits = dain_core::data::make_splits(&ds.index, &cfg.split())?;
    if cfg.split_id >= splits.len() {
        return Err(Error::Usage(format!("split_id {} but only {} splits", cfg.split_id, splits.len())));
    }
    Ok(splits.swap_remove(cfg.split_id))
}

pub struct Trained {
    pub network: Network<f32>,
    pub train: TrainConfig,
    pub records: Vec<EpochRecord>,
}

/// Builds the configured network and runs its stage schedule.
pub fn train(cfg: &RunConfig, data: &PreparedData) -> Result<Trained> {
    let spec = cfg.network_spec(data.num_classes());
    let train = cfg.train_config();
    let mut network = Network::build(&spec, &Rng::new(cfg.seed))?;
    let records = train_staged(&mut network, data, &train, |r| {
        log::info!("stage {} epoch {} lr {:.2e} loss {:.4} train acc {:.4}", r.stage, r.epoch, r.lr, r.loss, r.train_acc);
    })?;
    Ok(Trained { network, train, records })
}

/// What `metrics.json` holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub label: String,
    pub classes: Vec<String>,
    pub config_hash: String,
    pub eval_mode: EvalMode,
    pub correct: usize,
    pub total: usize,
    pub result: RunResult,
}

pub fn evaluate_run(net: &mut Network<f32>, data: &PreparedData, split: &SplitSpec, cfg: &RunConfig) -> Result<RunMetrics> {
    let mode = cfg.eval_mode();
    let EvalResult { accuracy, correct, total, confusion } = evaluate(net, data, mode, cfg.seed)?;
    let label = run_label(net.spec(), &mode);
    Ok(RunMetrics {
        label: label.clone(),
        classes: split.class_names(),
        config_hash: cfg.hash(),
        eval_mode: mode,
        correct,
        total,
        result: RunResult { name: label, split_id: split.split_id, seed: cfg.seed, accuracy, confusion },
    })
}

pub fn losses_csv(records: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,loss,train_acc\n");
    for (e, r) in records.iter().enumerate() {
        writeln!(s, "{},{},{}", e + 1, r.loss, r.train_acc).unwrap();
    }
    s
}

pub fn report(runs: &[RunResult], classes: &[String], config_hash: &str, seed: u64) -> MetricsReport {
    cross_split_report(runs, ROW_ORDER, classes, config_hash, seed)
}

/// `config.json` of a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: RunConfig,
    pub network: NetworkSpec,
    pub train: TrainConfig,
    pub split_id: usize,
    pub split_seed: u64,
    pub split_hash: String,
}

/// Writes config.json, checkpoint/, losses.csv, metrics.json and report.txt.
pub fn write_run_dir(out: &Path, cfg: &RunConfig, split: &SplitSpec, trained: &Trained, metrics: &RunMetrics) -> Result<()> {
    let record = RunRecord {
        run: cfg.clone(),
        network: trained.network.spec().clone(),
        train: trained.train.clone(),
        split_id: split.split_id,
        split_seed: split.seed,
        split_hash: split.config_hash.clone(),
    };
    write_json(&out.join("config.json"), &record)?;
    let stage = trained.records.last().and_then(|r| serde_json::to_value(trained.train.stages[r.stage].scope).ok()).and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    save_checkpoint(&out.join("checkpoint"), &trained.network, cfg.seed, &stage)?;
    write_bytes(&out.join("losses.csv"), losses_csv(&trained.records).as_bytes())?;
    write_metrics(out, metrics)
}

/// metrics.json plus a one-run report.txt.
pub fn write_metrics(out: &Path, metrics: &RunMetrics) -> Result<()> {
    write_json(&out.join("metrics.json"), metrics)?;
    let r = report(std::slice::from_ref(&metrics.result), &metrics.classes, &metrics.config_hash, metrics.result.seed);
    write_bytes(&out.join("report.txt"), r.to_text().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use dain_core::net::{Combiner, FusionOp};

    #[test]
    fn labels_match_row_order() {
        let base = NetworkSpec::toy(4, 32);
        let mv = |c| EvalMode::Multiview { combiner: c, n_views: 4, windows: 3 };
        assert_eq!(run_label(&base.clone().with_arch(FusionArch::Single, FusionOp::Sum), &EvalMode::Single), "single view CNN");
        assert_eq!(run_label(&base.clone().with_arch(FusionArch::Single, FusionOp::Sum), &mv(Combiner::Voting)), "multiview CNN, voting");
        assert_eq!(run_label(&base.clone().with_arch(FusionArch::Dain, FusionOp::Max), &EvalMode::Single), "single view DAIN (max)");
        assert_eq!(run_label(&base.clone(), &mv(Combiner::Pooling)), "multiview DAIN (sum, pooling)");
        for l in [
            run_label(&base.clone().with_arch(FusionArch::Final, FusionOp::Sum), &EvalMode::Single),
            run_label(&base.clone().with_arch(FusionArch::Intermediate, FusionOp::Max), &EvalMode::Single),
            run_label(&base, &mv(Combiner::Filter3d)),
        ] {
            assert!(ROW_ORDER.contains(&l.as_str()), "{l}");
        }
    }

    #[test]
    fn losses_csv_has_header_and_rows() {
        let r = EpochRecord { stage: 0, epoch: 0, lr: 0.01, loss: 1.5, train_acc: 0.25 };
        assert_eq!(losses_csv(&[r.clone(), r]), "epoch,loss,train_acc\n1,1.5,0.25\n2,1.5,0.25\n");
    }
}
