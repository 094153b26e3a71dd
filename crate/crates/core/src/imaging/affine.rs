use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::image::Image;

/// Pixel-coordinate affine map `x ↦ A·x + t` with `x = (column, row)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Default for AffineParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl AffineParams {
    pub const IDENTITY: AffineParams = AffineParams { a11: 1.0, a12: 0.0, a21: 0.0, a22: 1.0, tx: 0.0, ty: 0.0 };

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self { tx, ty, ..Self::IDENTITY }
    }

    /// Rotation by `angle` radians and isotropic `scale` about `(cx, cy)`, then a shift.
    pub fn similarity(scale: f64, angle: f64, shift: (f64, f64), center: (f64, f64)) -> Self {
        let (s, c) = (libm::sin(angle) * scale, libm::cos(angle) * scale);
        let (cx, cy) = center;
        Self {
            a11: c,
            a12: -s,
            a21: s,
            a22: c,
            tx: cx - (c * cx - s * cy) + shift.0,
            ty: cy - (s * cx + c * cy) + shift.1,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.a11 * x + self.a12 * y + self.tx, self.a21 * x + self.a22 * y + self.ty)
    }

    /// Parameters equivalent to warping with `self` and then warping the result with `next`.
    ///
    /// `warp(warp(I, A), B)(x) = I(A(Bx + t_B) + t_A)`.
    pub fn then(&self, next: &AffineParams) -> AffineParams {
        let a = self;
        let b = next;
        let (tx, ty) = a.apply(b.tx, b.ty);
        AffineParams {
            a11: a.a11 * b.a11 + a.a12 * b.a21,
            a12: a.a11 * b.a12 + a.a12 * b.a22,
            a21: a.a21 * b.a11 + a.a22 * b.a21,
            a22: a.a21 * b.a12 + a.a22 * b.a22,
            tx,
            ty,
        }
    }

    pub fn inverse(&self) -> Option<AffineParams> {
        let det = self.determinant();
        if det.abs() < 1e-12 {
            return None;
        }
        let (i11, i12, i21, i22) = (self.a22 / det, -self.a12 / det, -self.a21 / det, self.a11 / det);
        Some(AffineParams {
            a11: i11,
            a12: i12,
            a21: i21,
            a22: i22,
            tx: -(i11 * self.tx + i12 * self.ty),
            ty: -(i21 * self.tx + i22 * self.ty),
        })
    }

    /// Largest displacement difference between two maps over the pixel grid of a `w×h` image.
    pub fn max_displacement_error(&self, other: &AffineParams, w: usize, h: usize) -> f64 {
        // The difference is affine, so its maximum norm over a rectangle sits at a corner.
        let corners = [(0.0, 0.0), ((w - 1) as f64, 0.0), (0.0, (h - 1) as f64), ((w - 1) as f64, (h - 1) as f64)];
        corners
            .iter()
            .map(|&(x, y)| {
                let (ax, ay) = self.apply(x, y);
                let (bx, by) = other.apply(x, y);
                libm::hypot(ax - bx, ay - by)
            })
            .fold(0.0, f64::max)
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.a11, self.a12, self.a21, self.a22, self.tx, self.ty]
    }

    pub fn from_array(p: [f64; 6]) -> Self {
        Self { a11: p[0], a12: p[1], a21: p[2], a22: p[3], tx: p[4], ty: p[5] }
    }
}

/// Output of [`warp_affine`].
#[derive(Debug, Clone, PartialEq)]
pub struct Warped {
    pub image: Image,
    /// False where the source position fell outside the input.
    pub valid: Vec<bool>,
}

/// Inverse warp with bilinear interpolation: `out(x) = in(A·x + t)`, zero outside.
pub fn warp_affine(image: &Image, params: &AffineParams) -> Warped {
    let (w, h, ch) = image.dims();
    let mut out = Image::zeros(w, h, ch);
    let mut valid = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = params.apply(x as f64, y as f64);
            let inside = image.sample(sx, sy, 0).is_some();
            valid.push(inside);
            if inside {
                for c in 0..ch {
                    out.set(x, y, c, image.sample(sx, sy, c).unwrap_or(0.0) as f32);
                }
            }
        }
    }
    Warped { image: out, valid }
}
