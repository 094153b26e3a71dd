//! Coarse-to-fine Gauss–Newton photometric affine alignment (forward additive).

use alloc::format;
use alloc::vec::Vec;

use super::affine::AffineParams;
use super::image::Image;
use crate::error::{bail, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignConfig {
    pub levels: usize,
    pub max_iters: usize,
    /// Stop a level once the parameter update norm drops below this.
    pub tol: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self { levels: 3, max_iters: 50, tol: 1e-4 }
    }
}

const MIN_SIZE: usize = 16;
const MIN_LEVEL_SIZE: usize = 8;

/// Central-difference gradients (one-sided at the border).
fn gradients(img: &Image) -> (Image, Image) {
    let (w, h, _) = img.dims();
    let gx = Image::from_fn(w, h, 1, |x, y, _| {
        let (l, r) = (x.saturating_sub(1), (x + 1).min(w - 1));
        (img.get(r, y, 0) - img.get(l, y, 0)) / (r - l) as f32
    });
    let gy = Image::from_fn(w, h, 1, |x, y, _| {
        let (u, d) = (y.saturating_sub(1), (y + 1).min(h - 1));
        (img.get(x, d, 0) - img.get(x, u, 0)) / (d - u) as f32
    });
    (gx, gy)
}

/// Solves the symmetric 6×6 system by Gaussian elimination with partial pivoting.
fn solve6(mut a: [[f64; 6]; 6], mut b: [f64; 6]) -> Option<[f64; 6]> {
    let scale = (0..6).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    if scale <= 0.0 {
        return None;
    }
    for col in 0..6 {
        let piv = (col..6).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..6 {
            let f = a[r][col] / a[col][col];
            for c in col..6 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 6];
    for r in (0..6).rev() {
        let s: f64 = (r + 1..6).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Mean squared photometric residual over the overlap, with the overlap size.
fn cost(reference: &Image, moving: &Image, p: &AffineParams) -> (f64, usize) {
    let (w, h, _) = reference.dims();
    let mut sum = 0.0;
    let mut used = 0usize;
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = p.apply(x as f64, y as f64);
            if let Some(m) = moving.sample(sx, sy, 0) {
                let r = m - reference.get(x, y, 0) as f64;
                sum += r * r;
                used += 1;
            }
        }
    }
    (if used > 0 { sum / used as f64 } else { f64::INFINITY }, used)
}

/// Gauss–Newton refinement at one pyramid level. Steps that raise the mean
/// residual are halved, up to a few times, before the level stops.
fn refine(reference: &Image, moving: &Image, mut p: AffineParams, cfg: &AlignConfig) -> Result<AffineParams> {
    let (gx, gy) = gradients(moving);
    let (w, h, _) = reference.dims();
    let min_overlap = (w * h / 4).max(6);
    for _ in 0..cfg.max_iters {
        let mut hess = [[0.0f64; 6]; 6];
        let mut rhs = [0.0f64; 6];
        let mut used = 0usize;
        let mut current = 0.0;
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = p.apply(x as f64, y as f64);
                let Some(m) = moving.sample(sx, sy, 0) else { continue };
                let ix = gx.sample(sx, sy, 0).unwrap_or(0.0);
                let iy = gy.sample(sx, sy, 0).unwrap_or(0.0);
                let r = m - reference.get(x, y, 0) as f64;
                current += r * r;
                let (xf, yf) = (x as f64, y as f64);
                let j = [ix * xf, ix * yf, iy * xf, iy * yf, ix, iy];
                for a in 0..6 {
                    rhs[a] -= j[a] * r;
                    for b in a..6 {
                        hess[a][b] += j[a] * j[b];
                    }
                }
                used += 1;
            }
        }
        if used < min_overlap {
            bail!(Alignment, "warp left only {} overlapping pixels", used);
        }
        let current = current / used as f64;
        for a in 0..6 {
            for b in 0..a {
                hess[a][b] = hess[b][a];
            }
        }
        let trace: f64 = (0..6).map(|i| hess[i][i]).sum();
        if trace < 1e-10 * used as f64 {
            bail!(Alignment, "singular normal equations: image gradient vanishes (trace {:.3e})", trace);
        }
        let mut dp = solve6(hess, rhs)
            .ok_or_else(|| Error::Alignment(format!("singular normal equations (trace {trace:.3e})")))?;
        if dp.iter().any(|d| !d.is_finite()) {
            bail!(Alignment, "Gauss–Newton diverged");
        }
        let mut accepted = None;
        for _ in 0..6 {
            let mut q = p.as_array();
            for (qi, d) in q.iter_mut().zip(dp) {
                *qi += d;
            }
            let cand = AffineParams::from_array(q);
            let (c, n) = cost(reference, moving, &cand);
            let det = cand.determinant();
            if n >= min_overlap && c <= current && det > 0.25 && det < 4.0 {
                accepted = Some(cand);
                break;
            }
            for d in dp.iter_mut() {
                *d *= 0.5;
            }
        }
        let Some(next) = accepted else { break };
        p = next;
        let translation_scale = w.max(h) as f64;
        // Linear-part updates are measured in pixels of displacement at the image extent.
        let norm = libm::sqrt(
            dp[..4].iter().map(|d| (d * translation_scale) * (d * translation_scale)).sum::<f64>()
                + dp[4] * dp[4]
                + dp[5] * dp[5],
        );
        if norm < cfg.tol {
            break;
        }
    }
    Ok(p)
}

/// Map expressed at a level, re-expressed one level finer.
///
/// Coarse pixel `x_c` has its center at fine coordinate `2·x_c + 0.5`.
fn upsample_params(p: &AffineParams) -> AffineParams {
    // t_f = 2·t_c − 0.5·(A − I)·(1,1)
    let half = |a: f64, b: f64| 0.5 * (a + b);
    AffineParams {
        tx: 2.0 * p.tx - (half(p.a11, p.a12) - 0.5),
        ty: 2.0 * p.ty - (half(p.a21, p.a22) - 0.5),
        ..*p
    }
}

/// Affine map `A` such that `warp_affine(moving, A) ≈ reference`, with default settings.
pub fn estimate_affine(reference: &Image, moving: &Image, levels: usize, max_iters: usize, tol: f64) -> Result<AffineParams> {
    estimate_affine_with(reference, moving, &AlignConfig { levels, max_iters, tol })
}

pub fn estimate_affine_with(reference: &Image, moving: &Image, cfg: &AlignConfig) -> Result<AffineParams> {
    if !reference.same_dims(moving) {
        bail!(Dimension, "alignment needs equal dims, got {:?} and {:?}", reference.dims(), moving.dims());
    }
    if reference.width() < MIN_SIZE || reference.height() < MIN_SIZE {
        bail!(Argument, "alignment needs at least {0}x{0} images", MIN_SIZE);
    }
    let mut pyramid: Vec<(Image, Image)> = Vec::new();
    pyramid.push((reference.luminance(), moving.luminance()));
    while pyramid.len() < cfg.levels.max(1) {
        let (r, m) = pyramid.last().unwrap();
        if r.width() / 2 < MIN_LEVEL_SIZE || r.height() / 2 < MIN_LEVEL_SIZE {
            break;
        }
        let next = (r.downsample2(), m.downsample2());
        pyramid.push(next);
    }
    let mut p = AffineParams::IDENTITY;
    for (level, (r, m)) in pyramid.iter().enumerate().rev() {
        // Coarse levels of weakly textured images may be degenerate; the
        // finest level still has to succeed.
        p = match refine(r, m, p, cfg) {
            Ok(q) => q,
            Err(_) if level > 0 => p,
            Err(e) => return Err(e),
        };
        if level > 0 {
            p = upsample_params(&p);
        }
    }
    if p.determinant() <= 0.0 {
        bail!(Alignment, "estimated map is not orientation preserving (det {:.3e})", p.determinant());
    }
    Ok(p)
}
