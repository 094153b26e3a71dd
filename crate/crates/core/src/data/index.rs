use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Polar angles of the nine base views along the capture arc.
pub const BASE_THETAS: [i32; 9] = [-40, -30, -20, -10, 0, 10, 20, 30, 40];
/// Azimuth offsets: the base view and its differential partner.
pub const DELTAS: [u32; 2] = [0, OFFSET_DELTA];
pub const OFFSET_DELTA: u32 = 5;

/// `theta{±NN}_delta{0|5}.png`
pub fn view_file_name(theta: i32, delta: u32) -> String {
    format!("theta{theta:+03}_delta{delta}.png")
}

/// Parses a view file name, rejecting angles off the capture grid.
pub fn parse_view_file_name(name: &str) -> Result<(i32, u32), String> {
    let stem = name.strip_suffix(".png").ok_or_else(|| format!("`{name}`: not a .png file"))?;
    let rest = stem.strip_prefix("theta").ok_or_else(|| format!("`{name}`: expected theta{{±NN}}_delta{{0|5}}.png"))?;
    let (theta, delta) = rest
        .split_once("_delta")
        .ok_or_else(|| format!("`{name}`: expected theta{{±NN}}_delta{{0|5}}.png"))?;
    let theta: i32 = theta.parse().map_err(|_| format!("`{name}`: bad theta `{theta}`"))?;
    let delta: u32 = delta.parse().map_err(|_| format!("`{name}`: bad delta `{delta}`"))?;
    if !BASE_THETAS.contains(&theta) {
        return Err(format!("`{name}`: theta {theta} is not on the -40..40 step 10 grid"));
    }
    if !DELTAS.contains(&delta) {
        return Err(format!("`{name}`: delta {delta} is not 0 or {OFFSET_DELTA}"));
    }
    Ok((theta, delta))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewSource {
    /// Path relative to the dataset root.
    Path(String),
    /// Rendered from this seed.
    Seed(u64),
}

/// One observation of a surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub theta_deg: i32,
    /// Base azimuth of the capture arc.
    pub phi_deg: f64,
    pub delta_deg: u32,
    pub illumination: String,
    /// Exposure bracket tag; only one exposure is used.
    pub exposure: Option<String>,
    pub source: ViewSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceInstance {
    pub class_name: String,
    pub instance_id: String,
    pub views: Vec<ViewRecord>,
    /// Some (theta, illumination) of the grid lacks a delta view.
    pub incomplete: bool,
}

impl SurfaceInstance {
    pub fn view(&self, theta: i32, delta: u32, illumination: &str) -> Option<&ViewRecord> {
        self.views
            .iter()
            .find(|v| v.theta_deg == theta && v.delta_deg == delta && v.illumination == illumination)
    }

    pub fn illuminations(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for v in &self.views {
            if !out.contains(&v.illumination) {
                out.push(v.illumination.clone());
            }
        }
        out.sort();
        out
    }

    /// For each base theta, whether both delta views exist under `illumination`.
    pub fn complete_thetas(&self, illumination: &str) -> [bool; 9] {
        let mut ok = [false; 9];
        for (i, &t) in BASE_THETAS.iter().enumerate() {
            ok[i] = DELTAS.iter().all(|&d| self.view(t, d, illumination).is_some());
        }
        ok
    }

    /// Recomputes the `incomplete` flag from the view list.
    pub fn refresh_completeness(&mut self) {
        let illums = self.illuminations();
        self.incomplete = illums.is_empty()
            || illums.iter().any(|il| {
                BASE_THETAS.iter().any(|&t| {
                    let present = DELTAS.iter().filter(|&&d| self.view(t, d, il).is_some()).count();
                    present < DELTAS.len()
                })
            });
    }
}

/// All classes and instances of a dataset tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub classes: Vec<String>,
    pub instances: Vec<SurfaceInstance>,
    pub illuminations: Vec<String>,
    /// Problems found while scanning (unparseable names, unreadable files).
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl DatasetIndex {
    pub fn base_views(&self) -> usize {
        BASE_THETAS.len()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    pub fn instances_of<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a SurfaceInstance> + 'a {
        self.instances.iter().filter(move |i| i.class_name == class)
    }

    pub fn instance(&self, id: &str) -> Option<&SurfaceInstance> {
        self.instances.iter().find(|i| i.instance_id == id)
    }

    /// Instance ids must be globally unique.
    pub fn validate(&self) -> Result<(), String> {
        let mut ids: Vec<&str> = self.instances.iter().map(|i| i.instance_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(format!("duplicate instance id `{}`", w[0]));
        }
        for inst in &self.instances {
            if self.class_index(&inst.class_name).is_none() {
                return Err(format!("instance `{}` has unknown class `{}`", inst.instance_id, inst.class_name));
            }
        }
        Ok(())
    }

    /// Stable fingerprint of the class/instance layout.
    pub fn fingerprint(&self) -> u64 {
        let mut s = String::new();
        for c in &self.classes {
            s.push_str(c);
            s.push('\n');
        }
        for i in &self.instances {
            s.push_str(&i.class_name);
            s.push('/');
            s.push_str(&i.instance_id);
            s.push(':');
            s.push_str(&i.views.len().to_string());
            s.push('\n');
        }
        super::fingerprint(s.as_bytes())
    }
}
