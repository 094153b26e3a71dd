use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::imaging::Image;

use super::index::{DatasetIndex, BASE_THETAS, DELTAS};

/// Address of one image: instance, illumination and base-view positions in
/// the index, and delta slot (0 = base, 1 = offset).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ViewKey {
    pub instance: usize,
    pub illumination: usize,
    pub theta: usize,
    pub delta: usize,
}

/// An index plus its decoded images, held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub index: DatasetIndex,
    images: Vec<Option<Image>>,
}

impl Dataset {
    pub fn new(index: DatasetIndex) -> Self {
        let n = index.instances.len() * index.illuminations.len() * BASE_THETAS.len() * DELTAS.len();
        Dataset { index, images: vec![None; n] }
    }

    fn slot(&self, key: ViewKey) -> Option<usize> {
        let n_il = self.index.illuminations.len();
        if key.instance >= self.index.instances.len() || key.illumination >= n_il || key.theta >= BASE_THETAS.len() || key.delta >= DELTAS.len() {
            return None;
        }
        Some(((key.instance * n_il + key.illumination) * BASE_THETAS.len() + key.theta) * DELTAS.len() + key.delta)
    }

    pub fn get(&self, key: ViewKey) -> Option<&Image> {
        self.slot(key).and_then(|s| self.images[s].as_ref())
    }

    pub fn insert(&mut self, key: ViewKey, image: Image) -> Result<()> {
        match self.slot(key) {
            Some(s) => {
                self.images[s] = Some(image);
                Ok(())
            }
            None => bail!(Argument, "view key {:?} outside the dataset", key),
        }
    }

    /// Both members of a base/offset pair, if present.
    pub fn pair(&self, instance: usize, illumination: usize, theta: usize) -> Option<(&Image, &Image)> {
        let base = self.get(ViewKey { instance, illumination, theta, delta: 0 })?;
        let off = self.get(ViewKey { instance, illumination, theta, delta: 1 })?;
        Some((base, off))
    }

    pub fn image_count(&self) -> usize {
        self.images.iter().filter(|i| i.is_some()).count()
    }

    /// Present images with their keys, in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (ViewKey, &Image)> + '_ {
        let n_il = self.index.illuminations.len();
        self.images.iter().enumerate().filter_map(move |(s, img)| {
            let img = img.as_ref()?;
            let delta = s % DELTAS.len();
            let rest = s / DELTAS.len();
            let theta = rest % BASE_THETAS.len();
            let rest = rest / BASE_THETAS.len();
            Some((ViewKey { instance: rest / n_il, illumination: rest % n_il, theta, delta }, img))
        })
    }
}
