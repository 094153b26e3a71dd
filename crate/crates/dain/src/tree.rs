//! `root/<class>/<instance>/<condition>/theta{±NN}_delta{0|5}.png` trees.

use std::fs;
use std::path::{Path, PathBuf};

use dain_core::data::{
    parse_view_file_name, view_file_name, Dataset, DatasetIndex, SurfaceInstance, ViewKey, ViewRecord, ViewSource,
    BASE_THETAS, DELTAS,
};

use crate::error::{Error, Result};
use crate::io::{read_png, write_png};
use crate::parallel::par_map;

fn sorted_entries(dir: &Path) -> Result<Vec<(String, PathBuf, bool)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(Error::io(dir))? {
        let entry = entry.map_err(Error::io(dir))?;
        let is_dir = entry.file_type().map_err(Error::io(entry.path()))?.is_dir();
        out.push((entry.file_name().to_string_lossy().into_owned(), entry.path(), is_dir));
    }
    out.sort();
    Ok(out)
}

/// Indexes a dataset tree without decoding images. Files with names off the
/// capture grid or that cannot be opened become warnings; instances missing
/// views are flagged incomplete.
pub fn scan_gtos(root: &Path) -> Result<DatasetIndex> {
    let mut classes = Vec::new();
    let mut instances = Vec::new();
    let mut illuminations: Vec<String> = Vec::new();
    let mut warnings = Vec::new();
    for (class, class_dir, is_dir) in sorted_entries(root)? {
        if !is_dir {
            continue;
        }
        let mut any = false;
        for (inst, inst_dir, is_dir) in sorted_entries(&class_dir)? {
            if !is_dir {
                warnings.push(format!("{class}/{inst}: not an instance directory"));
                continue;
            }
            let mut views = Vec::new();
            for (cond, cond_dir, is_dir) in sorted_entries(&inst_dir)? {
                if !is_dir {
                    warnings.push(format!("{class}/{inst}/{cond}: not a condition directory"));
                    continue;
                }
                for (file, path, is_dir) in sorted_entries(&cond_dir)? {
                    let rel = format!("{class}/{inst}/{cond}/{file}");
                    if is_dir {
                        warnings.push(format!("{rel}: unexpected directory"));
                        continue;
                    }
                    let (theta, delta) = match parse_view_file_name(&file) {
                        Ok(v) => v,
                        Err(msg) => {
                            warnings.push(format!("{class}/{inst}/{cond}: {msg}"));
                            continue;
                        }
                    };
                    if let Err(e) = fs::File::open(&path) {
                        warnings.push(format!("{rel}: unreadable ({e})"));
                        continue;
                    }
                    if !illuminations.contains(&cond) {
                        illuminations.push(cond.clone());
                    }
                    views.push(ViewRecord {
                        theta_deg: theta,
                        phi_deg: 0.0,
                        delta_deg: delta,
                        illumination: cond.clone(),
                        exposure: None,
                        source: ViewSource::Path(rel),
                    });
                }
            }
            let mut si = SurfaceInstance { class_name: class.clone(), instance_id: inst, views, incomplete: false };
            si.refresh_completeness();
            instances.push(si);
            any = true;
        }
        if any {
            classes.push(class);
        }
    }
    if instances.iter().all(|i| i.views.is_empty()) {
        return Err(Error::Data(format!("{}: no view images found", root.display())));
    }
    illuminations.sort();
    let index = DatasetIndex { classes, instances, illuminations, warnings };
    index.validate().map_err(Error::Data)?;
    Ok(index)
}

/// `class/instance/condition/file`, always with forward slashes.
pub fn relative_path(class: &str, instance: &str, condition: &str, theta: i32, delta: u32) -> String {
    format!("{class}/{instance}/{condition}/{}", view_file_name(theta, delta))
}

/// Writes every image of `ds` into the tree layout under `root` and returns
/// its index with each view pointing at the written file.
pub fn write_tree(root: &Path, ds: &Dataset, workers: usize) -> Result<DatasetIndex> {
    let items: Vec<(ViewKey, &dain_core::imaging::Image)> = ds.iter().collect();
    let results = par_map(&items, workers, |(key, img)| {
        let inst = &ds.index.instances[key.instance];
        let rel = relative_path(
            &inst.class_name,
            &inst.instance_id,
            &ds.index.illuminations[key.illumination],
            BASE_THETAS[key.theta],
            DELTAS[key.delta],
        );
        write_png(&root.join(rel), img)
    });
    results.into_iter().collect::<Result<()>>()?;
    let mut index = ds.index.clone();
    for inst in &mut index.instances {
        for v in &mut inst.views {
            v.source = ViewSource::Path(relative_path(&inst.class_name, &inst.instance_id, &v.illumination, v.theta_deg, v.delta_deg));
        }
    }
    Ok(index)
}

/// Loads `root/index.json` when present, otherwise scans the tree.
pub fn open_dataset(root: &Path, workers: usize) -> Result<Dataset> {
    let index_path = root.join(INDEX_FILE);
    let index: DatasetIndex = if index_path.is_file() { crate::io::read_json(&index_path)? } else { scan_gtos(root)? };
    index.validate().map_err(|e| Error::Data(format!("{}: {e}", index_path.display())))?;
    load_dataset(root, index, workers)
}

pub const INDEX_FILE: &str = "index.json";

/// Decodes the images an index points to. Images that fail to decode are
/// dropped with a warning and their instance is flagged incomplete.
pub fn load_dataset(root: &Path, mut index: DatasetIndex, workers: usize) -> Result<Dataset> {
    let mut jobs = Vec::new();
    for (i, inst) in index.instances.iter().enumerate() {
        for (v, view) in inst.views.iter().enumerate() {
            if let ViewSource::Path(rel) = &view.source {
                jobs.push((i, v, root.join(rel)));
            }
        }
    }
    let decoded = par_map(&jobs, workers, |(_, _, p)| read_png(p));
    let mut dims = None;
    let mut images = Vec::new();
    let mut dropped: Vec<(usize, usize)> = Vec::new();
    for ((i, v, path), img) in jobs.iter().zip(decoded) {
        match img {
            Ok(img) => {
                if *dims.get_or_insert(img.dims()) != img.dims() {
                    return Err(Error::Data(format!("{}: size {:?} differs from {:?}", path.display(), img.dims(), dims.unwrap())));
                }
                let view = &index.instances[*i].views[*v];
                let key = ViewKey {
                    instance: *i,
                    illumination: index.illuminations.iter().position(|c| *c == view.illumination).expect("scanned condition"),
                    theta: BASE_THETAS.iter().position(|&t| t == view.theta_deg).expect("grid theta"),
                    delta: DELTAS.iter().position(|&d| d == view.delta_deg).expect("grid delta"),
                };
                images.push((key, img));
            }
            Err(e) => {
                index.warnings.push(e.to_string());
                dropped.push((*i, *v));
            }
        }
    }
    for &(i, v) in dropped.iter().rev() {
        index.instances[i].views.remove(v);
        index.instances[i].refresh_completeness();
    }
    let mut ds = Dataset::new(index);
    for (key, img) in images {
        ds.insert(key, img)?;
    }
    Ok(ds)
}
