use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Interleaved `height × width × channels` float image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width * height * channels != data.len() {
            bail!(Dimension, "{}x{}x{} image needs {} values, got {}", width, height, channels, width * height * channels, data.len());
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    pub fn from_fn(width: usize, height: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self { width, height, channels, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.dims() == other.dims()
    }

    /// Mean over color channels.
    pub fn luminance(&self) -> Image {
        let inv = 1.0 / self.channels as f32;
        let data = self.data.chunks_exact(self.channels).map(|px| px.iter().sum::<f32>() * inv).collect();
        Image { width: self.width, height: self.height, channels: 1, data }
    }

    /// Bilinear sample at continuous pixel coordinates; `None` outside `[0,W−1]×[0,H−1]`.
    #[inline]
    pub fn sample(&self, x: f64, y: f64, c: usize) -> Option<f64> {
        const SLACK: f64 = 1e-9;
        let (wm, hm) = ((self.width - 1) as f64, (self.height - 1) as f64);
        if !(x >= -SLACK && y >= -SLACK && x <= wm + SLACK && y <= hm + SLACK) {
            return None;
        }
        let x = x.clamp(0.0, wm);
        let y = y.clamp(0.0, hm);
        let (x0, y0) = (x as usize, y as usize);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let v00 = self.get(x0, y0, c) as f64;
        let v10 = self.get(x1, y0, c) as f64;
        let v01 = self.get(x0, y1, c) as f64;
        let v11 = self.get(x1, y1, c) as f64;
        Some((1.0 - fx) * (1.0 - fy) * v00 + fx * (1.0 - fy) * v10 + (1.0 - fx) * fy * v01 + fx * fy * v11)
    }

    /// Bilinear resize using pixel-center alignment.
    pub fn resize(&self, width: usize, height: usize) -> Image {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let (wm, hm) = ((self.width - 1) as f64, (self.height - 1) as f64);
        Image::from_fn(width, height, self.channels, |x, y, c| {
            let px = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, wm);
            let py = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, hm);
            self.sample(px, py, c).unwrap_or(0.0) as f32
        })
    }

    /// 2×2 box-filtered half-resolution image (odd trailing rows/columns dropped).
    pub fn downsample2(&self) -> Image {
        let (w, h) = (self.width / 2, self.height / 2);
        Image::from_fn(w, h, self.channels, |x, y, c| {
            0.25 * (self.get(2 * x, 2 * y, c)
                + self.get(2 * x + 1, 2 * y, c)
                + self.get(2 * x, 2 * y + 1, c)
                + self.get(2 * x + 1, 2 * y + 1, c))
        })
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Image> {
        if x0 + width > self.width || y0 + height > self.height {
            bail!(Argument, "crop {}x{}+{}+{} exceeds {}x{} image", width, height, x0, y0, self.width, self.height);
        }
        Ok(Image::from_fn(width, height, self.channels, |x, y, c| self.get(x0 + x, y0 + y, c)))
    }

    pub fn flip_horizontal(&self) -> Image {
        Image::from_fn(self.width, self.height, self.channels, |x, y, c| self.get(self.width - 1 - x, y, c))
    }

    /// Planar `[C, H, W]` tensor.
    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        let (w, h, ch) = self.dims();
        Tensor::from_fn(&[ch, h, w], |i| {
            let c = i / (w * h);
            let r = i % (w * h);
            T::narrow(self.data[r * ch + c] as f64)
        })
    }

    pub fn from_tensor<T: Real>(t: &Tensor<T>) -> Result<Image> {
        if t.rank() != 3 {
            bail!(Dimension, "image tensor must be [C,H,W], got {:?}", t.shape());
        }
        let (ch, h, w) = (t.shape()[0], t.shape()[1], t.shape()[2]);
        Ok(Image::from_fn(w, h, ch, |x, y, c| t.data()[(c * h + y) * w + x].widen() as f32))
    }

    pub fn mean_abs(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|v| v.abs() as f64).sum::<f64>() / self.data.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_roundtrip() {
        let img = Image::from_fn(3, 2, 3, |x, y, c| (x * 100 + y * 10 + c) as f32);
        let t = img.to_tensor::<f32>();
        assert_eq!(t.shape(), &[3, 2, 3]);
        assert_eq!(t.data()[(2 * 2 + 1) * 3 + 1], 112.0);
        assert_eq!(Image::from_tensor(&t).unwrap(), img);
    }

    #[test]
    fn sample_at_integer_is_exact() {
        let img = Image::from_fn(4, 4, 1, |x, y, _| (x * 3 + y) as f32 * 0.1);
        assert_eq!(img.sample(2.0, 3.0, 0), Some(img.get(2, 3, 0) as f64));
        assert_eq!(img.sample(3.0, 3.0, 0), Some(img.get(3, 3, 0) as f64));
        assert!(img.sample(3.01, 0.0, 0).is_none());
        assert!(img.sample(-0.5, 0.0, 0).is_none());
    }

    #[test]
    fn resize_constant_stays_constant() {
        let img = Image::from_fn(8, 8, 2, |_, _, c| c as f32 + 0.5);
        let r = img.resize(11, 5);
        assert_eq!(r.dims(), (11, 5, 2));
        assert!(r.data().chunks(2).all(|p| p == [0.5, 1.5]));
    }

    #[test]
    fn crop_out_of_bounds() {
        assert!(Image::zeros(4, 4, 1).crop(1, 1, 4, 2).is_err());
    }
}
