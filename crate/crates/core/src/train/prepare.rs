use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::{normalize_stats, AugmentDraw, AugmentParams, ChannelStats, Dataset, SplitSpec, BASE_THETAS};
use crate::error::{bail, Result};
use crate::imaging::{make_differential_with, AlignConfig, Image};
use crate::net::StreamInput;
use crate::rng::Rng;

/// Differential images for every complete base/offset pair of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialSet {
    /// Indexed like the dataset: `(instance, illumination, theta)`.
    images: Vec<Option<Image>>,
    n_illum: usize,
    /// Pairs whose alignment failed; their differential is unaligned.
    pub alignment_failures: Vec<String>,
}

impl DifferentialSet {
    /// `align = None` takes raw differences.
    pub fn compute(ds: &Dataset, align: Option<&AlignConfig>) -> Result<Self> {
        Self::compute_instances(ds, align, &(0..ds.index.instances.len()).collect::<Vec<_>>())
    }

    /// Only the listed instances; others stay empty.
    pub fn compute_instances(ds: &Dataset, align: Option<&AlignConfig>, instances: &[usize]) -> Result<Self> {
        let n_illum = ds.index.illuminations.len();
        let mut images = alloc::vec![None; ds.index.instances.len() * n_illum * BASE_THETAS.len()];
        let mut alignment_failures = Vec::new();
        for &i in instances {
            for il in 0..n_illum {
                for t in 0..BASE_THETAS.len() {
                    let Some((base, off)) = ds.pair(i, il, t) else { continue };
                    let d = match make_differential_with(base, off, align) {
                        Ok(d) => d,
                        Err(crate::Error::Alignment(msg)) => {
                            alignment_failures.push(format!(
                                "{} {} theta {}: {}",
                                ds.index.instances[i].instance_id, ds.index.illuminations[il], BASE_THETAS[t], msg
                            ));
                            make_differential_with(base, off, None)?
                        }
                        Err(e) => return Err(e),
                    };
                    images[(i * n_illum + il) * BASE_THETAS.len() + t] = Some(d.pixels);
                }
            }
        }
        Ok(DifferentialSet { images, n_illum, alignment_failures })
    }

    /// Takes every image `other` holds; both must come from the same dataset.
    pub fn merge(&mut self, other: DifferentialSet) -> Result<()> {
        if other.n_illum != self.n_illum || other.images.len() != self.images.len() {
            bail!(Argument, "differential sets come from different datasets");
        }
        for (slot, img) in self.images.iter_mut().zip(other.images) {
            if img.is_some() {
                *slot = img;
            }
        }
        self.alignment_failures.extend(other.alignment_failures);
        Ok(())
    }

    pub fn get(&self, instance: usize, illumination: usize, theta: usize) -> Option<&Image> {
        self.images.get((instance * self.n_illum + illumination) * BASE_THETAS.len() + theta)?.as_ref()
    }
}

#[derive(Debug, Clone)]
struct Pair {
    image: Image,
    differential: Image,
}

#[derive(Debug, Clone)]
struct InstanceData {
    id: String,
    label: usize,
    /// `[illumination][theta]`, resized and normalized.
    pairs: Vec<[Option<Pair>; 9]>,
}

impl InstanceData {
    fn complete(&self, illumination: usize) -> [bool; 9] {
        core::array::from_fn(|t| self.pairs[illumination][t].is_some())
    }
}

/// One split's train and test data: resized to the augmentation input size and
/// normalized once with train-only statistics (separate for each stream).
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub classes: Vec<String>,
    pub stats_image: ChannelStats,
    pub stats_differential: ChannelStats,
    pub augment: AugmentParams,
    train: Vec<InstanceData>,
    test: Vec<InstanceData>,
}

/// A training or evaluation sample: its label and per-view inputs.
#[derive(Debug, Clone)]
pub struct Sample {
    pub label: usize,
    pub instance: String,
    pub views: Vec<StreamInput<f32>>,
}

impl PreparedData {
    pub fn build(ds: &Dataset, diffs: &DifferentialSet, split: &SplitSpec, augment: &AugmentParams) -> Result<Self> {
        augment.validate()?;
        split.validate(&ds.index)?;
        let classes = split.class_names();
        let collect = |ids: &mut dyn Iterator<Item = &str>| -> Result<Vec<InstanceData>> {
            let mut out = Vec::new();
            for id in ids {
                let idx = ds.index.instances.iter().position(|i| i.instance_id == id).expect("validated split");
                let inst = &ds.index.instances[idx];
                let label = classes.iter().position(|c| *c == inst.class_name).expect("validated split");
                let mut pairs = Vec::new();
                for il in 0..ds.index.illuminations.len() {
                    let row: [Option<Pair>; 9] = core::array::from_fn(|t| {
                        let (base, _) = ds.pair(idx, il, t)?;
                        let d = diffs.get(idx, il, t)?;
                        let r = augment.resize;
                        Some(Pair { image: resize(base, r), differential: resize(d, r) })
                    });
                    pairs.push(row);
                }
                out.push(InstanceData { id: id.into(), label, pairs });
            }
            Ok(out)
        };
        let mut train = collect(&mut split.train_ids())?;
        let mut test = collect(&mut split.test_ids())?;
        if train.iter().all(|i| i.pairs.iter().all(|row| row.iter().all(Option::is_none))) {
            bail!(Argument, "split {} has no training images", split.split_id);
        }
        let stats_image = normalize_stats(train.iter().flat_map(|i| i.pairs.iter().flatten().flatten().map(|p| &p.image)))?;
        let stats_differential =
            normalize_stats(train.iter().flat_map(|i| i.pairs.iter().flatten().flatten().map(|p| &p.differential)))?;
        for inst in train.iter_mut().chain(test.iter_mut()) {
            for p in inst.pairs.iter_mut().flatten().flatten() {
                p.image = stats_image.apply(&p.image)?;
                p.differential = stats_differential.apply(&p.differential)?;
            }
        }
        Ok(PreparedData { classes, stats_image, stats_differential, augment: *augment, train, test })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn train_instances(&self) -> usize {
        self.train.len()
    }

    pub fn test_instances(&self) -> usize {
        self.test.len()
    }

    /// Per-class number of test instances.
    pub fn test_counts(&self) -> Vec<usize> {
        let mut c = alloc::vec![0; self.classes.len()];
        for i in &self.test {
            c[i.label] += 1;
        }
        c
    }

    /// One epoch of training samples in shuffled order. Each sample is a
    /// window of `n_views` contiguous views under one illumination, with one
    /// augmentation draw shared by every image in it.
    pub fn epoch(&self, n_views: usize, per_instance: usize, with_differential: bool, rng: &mut Rng) -> Result<Vec<Sample>> {
        let mut plan: Vec<(usize, usize, usize)> = Vec::new();
        for (k, inst) in self.train.iter().enumerate() {
            let windows = self.windows(inst, n_views);
            if windows.is_empty() {
                continue;
            }
            if per_instance == 0 {
                plan.extend(windows.iter().map(|&(il, s)| (k, il, s)));
            } else {
                for _ in 0..per_instance {
                    let (il, s) = windows[rng.below(windows.len() as u64) as usize];
                    plan.push((k, il, s));
                }
            }
        }
        if plan.is_empty() {
            bail!(Sampling, "no training instance has {} contiguous complete views", n_views);
        }
        rng.shuffle(&mut plan);
        plan.into_iter()
            .map(|(k, il, s)| {
                let inst = &self.train[k];
                let draw = AugmentDraw::sample(&self.augment, rng)?;
                let views = (s..s + n_views)
                    .map(|t| {
                        let p = inst.pairs[il][t].as_ref().expect("complete window");
                        let image = crate::data::augment_with(&p.image, &self.augment, &draw)?.to_tensor();
                        let differential = if with_differential {
                            Some(crate::data::augment_with(&p.differential, &self.augment, &draw)?.to_tensor())
                        } else {
                            None
                        };
                        Ok(StreamInput { image, differential })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Sample { label: inst.label, instance: inst.id.clone(), views })
            })
            .collect()
    }

    /// Valid `(illumination, start)` windows of an instance.
    fn windows(&self, inst: &InstanceData, n: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        if n == 0 || n > BASE_THETAS.len() {
            return out;
        }
        for il in 0..inst.pairs.len() {
            let ok = inst.complete(il);
            for s in 0..=BASE_THETAS.len() - n {
                if ok[s..s + n].iter().all(|&b| b) {
                    out.push((il, s));
                }
            }
        }
        out
    }

    /// Center-cropped test samples. Single view (`n_views = 1`) enumerates
    /// every view; otherwise `windows` windows per (instance, illumination) are
    /// drawn with `sample_view_window` semantics from `seed`.
    pub fn test_samples(&self, n_views: usize, windows: usize, with_differential: bool, seed: u64) -> Result<Vec<Sample>> {
        let mut out = Vec::new();
        let master = Rng::new(seed);
        for (k, inst) in self.test.iter().enumerate() {
            for il in 0..inst.pairs.len() {
                let ok = inst.complete(il);
                let starts: Vec<usize> = if n_views == 1 {
                    (0..BASE_THETAS.len()).filter(|&t| ok[t]).collect()
                } else {
                    let mut rng = master.split((k * inst.pairs.len() + il) as u64);
                    let mut s = Vec::new();
                    for _ in 0..windows {
                        match crate::data::window_start(&ok, n_views, &mut rng) {
                            Ok(v) => s.push(v),
                            Err(_) => break,
                        }
                    }
                    s
                };
                for s in starts {
                    let views = (s..s + n_views)
                        .map(|t| {
                            let p = inst.pairs[il][t].as_ref().expect("complete window");
                            let image = self.augment.center(&p.image)?.to_tensor();
                            let differential =
                                if with_differential { Some(self.augment.center(&p.differential)?.to_tensor()) } else { None };
                            Ok(StreamInput { image, differential })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    out.push(Sample { label: inst.label, instance: inst.id.clone(), views });
                }
            }
        }
        Ok(out)
    }
}

fn resize(img: &Image, size: usize) -> Image {
    if img.width() == size && img.height() == size {
        img.clone()
    } else {
        img.resize(size, size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, make_splits, SplitConfig, SynthConfig};

    fn setup() -> (Dataset, DifferentialSet, SplitSpec) {
        let ds = generate_synthetic(&SynthConfig {
            classes: 2,
            instances_per_class: 4,
            image_size: 16,
            illuminations: 1,
            seed: 2,
            ..Default::default()
        })
        .unwrap();
        let diffs = DifferentialSet::compute(&ds, Some(&AlignConfig::default())).unwrap();
        let split = make_splits(&ds.index, &SplitConfig::default()).unwrap().remove(0);
        (ds, diffs, split)
    }

    fn params() -> AugmentParams {
        AugmentParams { stretch: 0.1, flip_prob: 0.5, crop_size: 16, resize: 18 }
    }

    #[test]
    fn train_stats_standardize_train_images_only() {
        let (ds, diffs, split) = setup();
        let p = PreparedData::build(&ds, &diffs, &split, &params()).unwrap();
        assert_eq!(p.train_instances(), 6);
        assert_eq!(p.test_instances(), 2);
        let imgs: Vec<&Image> = p.train.iter().flat_map(|i| i.pairs.iter().flatten().flatten().map(|q| &q.image)).collect();
        let s = normalize_stats(imgs).unwrap();
        for c in 0..3 {
            assert!(s.mean[c].abs() < 1e-4 && (s.std[c] - 1.0).abs() < 1e-3);
        }
        assert_ne!(p.stats_image, p.stats_differential);
    }

    #[test]
    fn epochs_are_seeded_and_windowed() {
        let (ds, diffs, split) = setup();
        let p = PreparedData::build(&ds, &diffs, &split, &params()).unwrap();
        let a = p.epoch(1, 0, true, &mut Rng::new(3)).unwrap();
        assert_eq!(a.len(), 6 * 9);
        let b = p.epoch(1, 0, true, &mut Rng::new(3)).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.views == y.views && x.label == y.label));
        let m = p.epoch(4, 2, false, &mut Rng::new(3)).unwrap();
        assert_eq!(m.len(), 12);
        assert!(m.iter().all(|s| s.views.len() == 4 && s.views[0].differential.is_none()));
        assert_eq!(m[0].views[0].image.shape(), &[3, 16, 16]);
    }

    #[test]
    fn test_samples_are_deterministic() {
        let (ds, diffs, split) = setup();
        let p = PreparedData::build(&ds, &diffs, &split, &params()).unwrap();
        assert_eq!(p.test_samples(1, 0, true, 0).unwrap().len(), 2 * 9);
        let a = p.test_samples(4, 3, true, 5).unwrap();
        let b = p.test_samples(4, 3, true, 5).unwrap();
        assert_eq!(a.len(), 2 * 3);
        assert!(a.iter().zip(&b).all(|(x, y)| x.views == y.views));
    }

    #[test]
    fn merged_parts_equal_whole() {
        let (ds, whole, _) = setup();
        let cfg = AlignConfig::default();
        let mut a = DifferentialSet::compute_instances(&ds, Some(&cfg), &[0, 2, 4, 6]).unwrap();
        a.merge(DifferentialSet::compute_instances(&ds, Some(&cfg), &[1, 3, 5, 7]).unwrap()).unwrap();
        assert_eq!(a.images, whole.images);
    }
}
