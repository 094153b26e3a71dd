//! Network checkpoints: one DAIT file per parameter plus a JSON manifest.

use std::path::Path;

use dain_core::net::{Network, NetworkSpec};
use dain_core::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_dait, read_json, write_dait, write_json};

pub const MANIFEST: &str = "manifest.json";
const FORMAT: &str = "dain-checkpoint-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub file: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub spec: NetworkSpec,
    pub seed: u64,
    /// Label of the last completed training stage.
    pub stage: String,
    pub parameters: Vec<ManifestEntry>,
}

pub fn save_checkpoint(dir: &Path, net: &Network<f32>, seed: u64, stage: &str) -> Result<()> {
    let mut parameters = Vec::new();
    for (name, value) in net.named_values() {
        let file = format!("{name}.dait");
        write_dait(&dir.join(&file), &value)?;
        parameters.push(ManifestEntry { name, file, shape: value.shape().to_vec() });
    }
    write_json(&dir.join(MANIFEST), &Manifest { format: FORMAT.into(), spec: net.spec().clone(), seed, stage: stage.into(), parameters })
}

pub fn load_checkpoint(dir: &Path) -> Result<(Network<f32>, Manifest)> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    if manifest.format != FORMAT {
        return Err(Error::Data(format!("{}: unknown checkpoint format `{}`", dir.display(), manifest.format)));
    }
    let mut values = Vec::with_capacity(manifest.parameters.len());
    for e in &manifest.parameters {
        let t = read_dait(&dir.join(&e.file))?;
        if t.shape() != e.shape.as_slice() {
            return Err(Error::Data(format!("{}: shape {:?} disagrees with manifest {:?}", e.file, t.shape(), e.shape)));
        }
        values.push((e.name.clone(), t));
    }
    let mut net = Network::build(&manifest.spec, &Rng::new(0))?;
    net.load_values(&values)?;
    Ok((net, manifest))
}
