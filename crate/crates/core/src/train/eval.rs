use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::prepare::PreparedData;
use crate::error::{bail, Result};
use crate::net::{Combiner, FusionArch, Network, StreamInput};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Single,
    Multiview { combiner: Combiner, n_views: usize, windows: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// What a predictor sees. The label is there for fixtures and bookkeeping.
pub struct EvalItem<'a> {
    pub views: &'a [StreamInput<f32>],
    pub label: usize,
}

/// Scores an arbitrary predictor over the center-cropped test set.
pub fn evaluate_with(
    data: &PreparedData,
    mode: EvalMode,
    with_differential: bool,
    seed: u64,
    mut predict: impl FnMut(&EvalItem) -> Result<usize>,
) -> Result<EvalResult> {
    let samples = match mode {
        EvalMode::Single => data.test_samples(1, 0, with_differential, seed)?,
        EvalMode::Multiview { n_views, windows, .. } => data.test_samples(n_views, windows.max(1), with_differential, seed)?,
    };
    if samples.is_empty() {
        bail!(Evaluation, "test set is empty");
    }
    let k = data.num_classes();
    let mut confusion = vec![vec![0usize; k]; k];
    let mut correct = 0;
    for s in &samples {
        let p = predict(&EvalItem { views: &s.views, label: s.label })?;
        if p >= k {
            bail!(Evaluation, "predicted class {} out of range", p);
        }
        confusion[s.label][p] += 1;
        correct += (p == s.label) as usize;
    }
    Ok(EvalResult { accuracy: correct as f64 / samples.len() as f64, correct, total: samples.len(), confusion })
}

/// Deterministic evaluation of a network (dropout off, center crops).
pub fn evaluate(net: &mut Network<f32>, data: &PreparedData, mode: EvalMode, seed: u64) -> Result<EvalResult> {
    let two_stream = net.spec().fusion_arch != FusionArch::Single;
    let mut rng = Rng::new(seed);
    evaluate_with(data, mode, two_stream, seed, |item| match mode {
        EvalMode::Single => Ok(net.forward(&item.views[0], false, &mut rng)?.class),
        EvalMode::Multiview { combiner, .. } => Ok(net.forward_multiview(item.views, combiner, false, &mut rng)?.class),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, make_splits, AugmentParams, SplitConfig, SynthConfig};
    use crate::train::DifferentialSet;

    fn data(classes: usize, per_class: usize) -> PreparedData {
        let ds = generate_synthetic(&SynthConfig {
            classes,
            instances_per_class: per_class,
            image_size: 16,
            illuminations: 1,
            seed: 8,
            ..Default::default()
        })
        .unwrap();
        let diffs = DifferentialSet::compute(&ds, None).unwrap();
        let split = make_splits(&ds.index, &SplitConfig::default()).unwrap().remove(0);
        PreparedData::build(&ds, &diffs, &split, &AugmentParams { resize: 18, crop_size: 16, ..Default::default() }).unwrap()
    }

    #[test]
    fn oracle_scores_one_and_rows_match_counts() {
        let d = data(3, 4);
        let r = evaluate_with(&d, EvalMode::Single, false, 0, |it| Ok(it.label)).unwrap();
        assert_eq!(r.accuracy, 1.0);
        for (row, &n) in r.confusion.iter().zip(&d.test_counts()) {
            assert_eq!(row.iter().sum::<usize>(), n * 9);
        }
    }

    #[test]
    fn uniform_guessing_scores_chance() {
        let d = data(8, 4);
        let mut rng = Rng::new(77);
        let mut correct = 0;
        let mut total = 0;
        while total < 10_000 {
            let r = evaluate_with(&d, EvalMode::Single, false, 0, |_| Ok(rng.below(8) as usize)).unwrap();
            correct += r.correct;
            total += r.total;
        }
        let acc = correct as f64 / total as f64;
        assert!((acc - 0.125).abs() < 0.03, "{acc}");
    }

    #[test]
    fn network_evaluation_is_repeatable() {
        let d = data(2, 4);
        let spec = crate::net::NetworkSpec::toy(2, 16);
        let mut net: Network<f32> = Network::build(&spec, &Rng::new(3)).unwrap();
        let mode = EvalMode::Multiview { combiner: Combiner::Pooling, n_views: 4, windows: 2 };
        let a = evaluate(&mut net, &d, mode, 9).unwrap();
        assert_eq!(a, evaluate(&mut net, &d, mode, 9).unwrap());
        assert_eq!(a.total, 2 * 2);
        let s = evaluate(&mut net, &d, EvalMode::Single, 9).unwrap();
        assert_eq!(s, evaluate(&mut net, &d, EvalMode::Single, 9).unwrap());
    }

    #[test]
    fn empty_test_set_is_an_error() {
        let d = data(2, 4);
        let mode = EvalMode::Multiview { combiner: Combiner::Pooling, n_views: 10, windows: 1 };
        assert!(matches!(evaluate_with(&d, mode, false, 0, |_| Ok(0)), Err(crate::Error::Evaluation(_))));
    }
}
