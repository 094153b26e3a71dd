//! PNG and DAIT files, and small helpers for deterministic JSON output.

use std::fs;
use std::path::Path;

use dain_core::imaging::Image;
use dain_core::Tensor;
use serde::Serialize;

use crate::error::{Error, Result};

/// Reads an 8-bit PNG as RGB in [0, 1].
pub fn read_png(path: &Path) -> Result<Image> {
    let img = image::open(path).map_err(|source| Error::Image { path: path.into(), source })?.to_rgb8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| v as f32 / 255.0).collect();
    Ok(Image::new(w as usize, h as usize, 3, data)?)
}

/// Writes a 1- or 3-channel image, clamping to [0, 1] and rounding to 8 bits.
pub fn write_png(path: &Path, img: &Image) -> Result<()> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    let color = match img.channels() {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        c => return Err(Error::Data(format!("cannot write a {c}-channel PNG"))),
    };
    ensure_parent(path)?;
    image::save_buffer(path, &bytes, img.width() as u32, img.height() as u32, color)
        .map_err(|source| Error::Image { path: path.into(), source })
}

pub fn write_dait(path: &Path, t: &Tensor<f32>) -> Result<()> {
    write_bytes(path, &dain_core::dait::encode(t)?)
}

pub fn read_dait(path: &Path) -> Result<Tensor<f32>> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    Ok(dain_core::dait::decode(&bytes)?)
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    Ok(())
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, bytes).map_err(Error::io(path))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::json(path))?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&s).map_err(Error::json(path))
}
