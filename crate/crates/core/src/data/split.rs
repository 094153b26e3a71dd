use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::rng::Rng;

use super::index::DatasetIndex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub n_splits: usize,
    pub train_frac: f64,
    pub min_instances: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { n_splits: 5, train_frac: 0.7, min_instances: 4, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSplit {
    pub class: String,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Instance-level train/test partition. All views and illuminations of an
/// instance land on the same side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub split_id: usize,
    pub seed: u64,
    pub config_hash: String,
    pub classes: Vec<ClassSplit>,
    pub excluded_classes: Vec<String>,
}

impl SplitSpec {
    pub fn train_ids(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().flat_map(|c| c.train.iter().map(String::as_str))
    }

    pub fn test_ids(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().flat_map(|c| c.test.iter().map(String::as_str))
    }

    /// Retained class names; their order defines the label ids.
    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.class.clone()).collect()
    }

    /// Checks disjointness and that every retained instance of the index
    /// appears exactly once.
    pub fn validate(&self, index: &DatasetIndex) -> Result<()> {
        let mut all: Vec<&str> = self.train_ids().chain(self.test_ids()).collect();
        all.sort_unstable();
        if let Some(w) = all.windows(2).find(|w| w[0] == w[1]) {
            bail!(Split, "instance `{}` appears twice in split {}", w[0], self.split_id);
        }
        for c in &self.classes {
            let expected = index.instances_of(&c.class).count();
            if expected != c.train.len() + c.test.len() {
                bail!(Split, "class `{}`: split covers {} of {} instances", c.class, c.train.len() + c.test.len(), expected);
            }
            for id in c.train.iter().chain(&c.test) {
                match index.instance(id) {
                    Some(inst) if inst.class_name == c.class => {}
                    _ => bail!(Split, "instance `{id}` is not in class `{}`", c.class),
                }
            }
        }
        Ok(())
    }
}

/// Draws `n_splits` independent per-class partitions with
/// `round(train_frac · count)` training instances each.
pub fn make_splits(index: &DatasetIndex, cfg: &SplitConfig) -> Result<Vec<SplitSpec>> {
    if !(cfg.train_frac > 0.0 && cfg.train_frac < 1.0) {
        bail!(Argument, "train_frac must lie in (0, 1), got {}", cfg.train_frac);
    }
    if cfg.n_splits == 0 {
        bail!(Argument, "n_splits must be at least 1");
    }
    index.validate().map_err(crate::Error::Split)?;
    let mut kept: Vec<(String, Vec<String>)> = Vec::new();
    let mut excluded = Vec::new();
    for class in &index.classes {
        let mut ids: Vec<String> = index.instances_of(class).map(|i| i.instance_id.clone()).collect();
        if ids.len() < cfg.min_instances || ids.is_empty() {
            excluded.push(class.clone());
        } else {
            ids.sort();
            kept.push((class.clone(), ids));
        }
    }
    if kept.len() < 2 {
        bail!(Split, "{} class(es) left after excluding those with fewer than {} instances", kept.len(), cfg.min_instances);
    }
    let hash = format!(
        "{:016x}",
        super::fingerprint(format!("{:016x}|{}|{}|{}|{}", index.fingerprint(), cfg.n_splits, cfg.train_frac, cfg.min_instances, cfg.seed).as_bytes())
    );
    let master = Rng::new(cfg.seed);
    Ok((0..cfg.n_splits)
        .map(|split_id| {
            let mut rng = master.split(split_id as u64);
            let classes = kept
                .iter()
                .map(|(class, ids)| {
                    let mut ids = ids.clone();
                    rng.shuffle(&mut ids);
                    let n_train = libm::round(cfg.train_frac * ids.len() as f64) as usize;
                    let mut test = ids.split_off(n_train);
                    ids.sort();
                    test.sort();
                    ClassSplit { class: class.clone(), train: ids, test }
                })
                .collect();
            SplitSpec { split_id, seed: cfg.seed, config_hash: hash.clone(), classes, excluded_classes: excluded.clone() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::index::SurfaceInstance;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::{any, prop_assert, proptest};

    fn index(counts: &[usize]) -> DatasetIndex {
        let classes: Vec<String> = (0..counts.len()).map(|c| format!("c{c}")).collect();
        let instances = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| {
                (0..n).map(move |i| SurfaceInstance {
                    class_name: format!("c{c}"),
                    instance_id: format!("c{c}-{i}"),
                    views: vec![],
                    incomplete: false,
                })
            })
            .collect();
        DatasetIndex { classes, instances, illuminations: vec!["illum0".into()], warnings: vec![] }
    }

    #[test]
    fn ten_instances_split_seven_three() {
        let idx = index(&[10, 10]);
        for s in make_splits(&idx, &SplitConfig::default()).unwrap() {
            for c in &s.classes {
                assert_eq!((c.train.len(), c.test.len()), (7, 3));
            }
            s.validate(&idx).unwrap();
        }
    }

    #[test]
    fn small_classes_are_excluded() {
        let idx = index(&[10, 2, 6]);
        let splits = make_splits(&idx, &SplitConfig::default()).unwrap();
        assert_eq!(splits.len(), 5);
        for s in &splits {
            assert_eq!(s.excluded_classes, vec!["c1".to_string()]);
            assert!(s.train_ids().chain(s.test_ids()).all(|id| !id.starts_with("c1-")));
        }
        assert!(matches!(make_splits(&index(&[10, 2]), &SplitConfig::default()), Err(crate::Error::Split(_))));
    }

    #[test]
    fn splits_differ_but_repeat_under_seed() {
        let idx = index(&[12, 12, 12]);
        let a = make_splits(&idx, &SplitConfig::default()).unwrap();
        assert_eq!(a, make_splits(&idx, &SplitConfig::default()).unwrap());
        assert!(a.windows(2).any(|w| w[0].classes != w[1].classes));
    }

    proptest! {
        #[test]
        fn leakage_free_and_balanced(counts in proptest::collection::vec(0usize..16, 2..6), seed in any::<u64>()) {
            let idx = index(&counts);
            let cfg = SplitConfig { seed, ..Default::default() };
            match make_splits(&idx, &cfg) {
                Ok(splits) => {
                    for s in &splits {
                        s.validate(&idx).unwrap();
                        let train: Vec<&str> = s.train_ids().collect();
                        prop_assert!(s.test_ids().all(|id| !train.contains(&id)));
                        for c in &s.classes {
                            let n = c.train.len() + c.test.len();
                            prop_assert!(n >= 4);
                            // Five instances cannot be split inside [0.65, 0.75].
                            if n != 5 {
                                let f = c.train.len() as f64 / n as f64;
                                prop_assert!((0.65..=0.75).contains(&f), "{} of {}", c.train.len(), n);
                            }
                        }
                    }
                }
                Err(_) => prop_assert!(counts.iter().filter(|&&n| n >= 4).count() < 2),
            }
        }
    }
}
