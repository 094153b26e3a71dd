use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::rng::Rng;

use super::dataset::{Dataset, ViewKey};
use super::index::{DatasetIndex, SurfaceInstance, ViewRecord, ViewSource, BASE_THETAS, DELTAS};
use super::render::{render_view, Illumination, MaterialClass, SurfaceSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub classes: usize,
    pub instances_per_class: usize,
    pub image_size: usize,
    pub illuminations: usize,
    /// Sensor noise standard deviation on the [0, 1] scale.
    pub noise: f64,
    /// Base azimuth of the capture arc, degrees.
    pub phi_deg: f64,
    /// Replace the last class by a flat Lambertian control.
    pub lambertian_control: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            classes: 8,
            instances_per_class: 12,
            image_size: 32,
            illuminations: 4,
            noise: 0.002,
            phi_deg: 0.0,
            lambertian_control: false,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            bail!(Argument, "need at least 2 classes, got {}", self.classes);
        }
        if self.instances_per_class < 4 {
            bail!(Argument, "need at least 4 instances per class, got {}", self.instances_per_class);
        }
        if self.image_size < 16 {
            bail!(Argument, "image size must be at least 16, got {}", self.image_size);
        }
        if self.illuminations == 0 {
            bail!(Argument, "need at least one illumination condition");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            bail!(Argument, "noise must be finite and non-negative");
        }
        Ok(())
    }

    pub fn material_classes(&self) -> Vec<MaterialClass> {
        let mut classes = MaterialClass::prior(self.classes, &mut Rng::new(self.seed).split(0));
        if self.lambertian_control {
            let last = classes.len() - 1;
            classes[last] = MaterialClass::lambertian_flat(&format!("mat{last:02}"));
        }
        classes
    }
}

fn illumination_tag(k: usize) -> String {
    format!("illum{k}")
}

/// Index of a synthetic dataset without rendering any pixels.
pub fn synthetic_index(cfg: &SynthConfig) -> Result<DatasetIndex> {
    cfg.validate()?;
    let classes = cfg.material_classes();
    let illuminations: Vec<String> = (0..cfg.illuminations).map(illumination_tag).collect();
    let mut instances = Vec::new();
    for class in &classes {
        for i in 0..cfg.instances_per_class {
            let idx = instances.len();
            let mut views = Vec::new();
            for (il, tag) in illuminations.iter().enumerate() {
                for (t, &theta) in BASE_THETAS.iter().enumerate() {
                    for (d, &delta) in DELTAS.iter().enumerate() {
                        views.push(ViewRecord {
                            theta_deg: theta,
                            phi_deg: cfg.phi_deg,
                            delta_deg: delta,
                            illumination: tag.clone(),
                            exposure: None,
                            source: ViewSource::Seed(view_stream(idx, il, t, d)),
                        });
                    }
                }
            }
            instances.push(SurfaceInstance {
                class_name: class.name.clone(),
                instance_id: format!("{}-i{i:02}", class.name),
                views,
                incomplete: false,
            });
        }
    }
    Ok(DatasetIndex { classes: classes.into_iter().map(|c| c.name).collect(), instances, illuminations, warnings: Vec::new() })
}

fn view_stream(instance: usize, illumination: usize, theta: usize, delta: usize) -> u64 {
    (((instance as u64) << 16) | ((illumination as u64) << 8) | ((theta as u64) << 1) | delta as u64) + 1
}

/// Renders every instance under `instance_filter`. Each instance draws from
/// its own RNG stream, so any subset renders identically to the full set.
pub fn render_instances(cfg: &SynthConfig, index: &DatasetIndex, instances: &[usize]) -> Result<Vec<(ViewKey, crate::imaging::Image)>> {
    let classes = cfg.material_classes();
    let master = Rng::new(cfg.seed);
    let mut out = Vec::new();
    for &idx in instances {
        let inst = &index.instances[idx];
        let class = classes
            .iter()
            .find(|c| c.name == inst.class_name)
            .ok_or_else(|| crate::Error::Argument(format!("unknown class `{}`", inst.class_name)))?;
        let surface = SurfaceSample::draw(class, &mut master.split(1_000_000 + idx as u64));
        for il in 0..index.illuminations.len() {
            let light = Illumination::condition(il);
            for (t, &theta) in BASE_THETAS.iter().enumerate() {
                for (d, &delta) in DELTAS.iter().enumerate() {
                    let mut noise_rng = master.split(view_stream(idx, il, t, d) << 8);
                    let img = render_view(
                        &surface,
                        theta as f64,
                        cfg.phi_deg + delta as f64,
                        &light,
                        cfg.image_size,
                        cfg.noise,
                        &mut noise_rng,
                    );
                    out.push((ViewKey { instance: idx, illumination: il, theta: t, delta: d }, img));
                }
            }
        }
    }
    Ok(out)
}

/// Generates the full synthetic dataset in memory.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    let index = synthetic_index(cfg)?;
    let all: Vec<usize> = (0..index.instances.len()).collect();
    let images = render_instances(cfg, &index, &all)?;
    let mut ds = Dataset::new(index);
    for (key, img) in images {
        ds.insert(key, img)?;
    }
    Ok(ds)
}
