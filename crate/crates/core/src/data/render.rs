use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, exp, pow, round, sin, sqrt};
use serde::{Deserialize, Serialize};

use crate::imaging::Image;
use crate::rng::Rng;

/// Class-level material parameters. The albedo texture spectrum is deliberately
/// a weak cue; lobe width, specular strength and relief carry the class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialClass {
    pub name: String,
    /// Central albedo texture frequency, cycles per patch width.
    pub texture_freq: f64,
    /// Specular strength k_s.
    pub specular: f64,
    /// Blinn-Phong exponent α.
    pub shininess: f64,
    /// Height-field amplitude in patch widths.
    pub relief_amp: f64,
    /// Central relief frequency, cycles per patch width.
    pub relief_freq: f64,
}

impl MaterialClass {
    /// Latin-hypercube draw of `k` classes so that every class sits in its own
    /// stratum of each angular parameter.
    pub fn prior(k: usize, rng: &mut Rng) -> Vec<MaterialClass> {
        let mut strata: [Vec<usize>; 4] = core::array::from_fn(|_| (0..k).collect());
        for s in strata.iter_mut() {
            rng.shuffle(s);
        }
        let cell = |axis: usize, i: usize, rng: &mut Rng| (strata[axis][i] as f64 + rng.uniform(0.2, 0.8)) / k as f64;
        (0..k)
            .map(|i| {
                let shininess = exp(libm::log(3.0) + cell(0, i, rng) * (libm::log(400.0) - libm::log(3.0)));
                let relief_amp = 0.004 + 0.03 * cell(1, i, rng);
                let specular = 0.15 + 0.55 * cell(2, i, rng);
                let texture_freq = 2.5 + 1.0 * cell(3, i, rng);
                MaterialClass {
                    name: alloc::format!("mat{i:02}"),
                    texture_freq,
                    specular,
                    shininess,
                    relief_amp,
                    relief_freq: rng.uniform(1.5, 2.5),
                }
            })
            .collect()
    }

    /// Flat, matte surface: no view-dependent term at all.
    pub fn lambertian_flat(name: &str) -> MaterialClass {
        MaterialClass { name: name.into(), texture_freq: 3.0, specular: 0.0, shininess: 1.0, relief_amp: 0.0, relief_freq: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Wave {
    kx: f64,
    ky: f64,
    amp: f64,
    phase: f64,
}

impl Wave {
    fn draw(freq: f64, spread: f64, rng: &mut Rng) -> Wave {
        let f = freq * exp(spread * rng.normal());
        let angle = rng.uniform(0.0, PI);
        Wave { kx: f * cos(angle), ky: f * sin(angle), amp: rng.uniform(0.3, 1.0), phase: rng.uniform(0.0, 2.0 * PI) }
    }

    #[inline]
    fn arg(&self, x: f64, y: f64) -> f64 {
        2.0 * PI * (self.kx * x + self.ky * y) + self.phase
    }
}

/// One physical surface patch: a class draw perturbed per instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    color: [f64; 3],
    contrast: f64,
    texture: Vec<Wave>,
    relief: Vec<Wave>,
    relief_amp: f64,
    specular: f64,
    shininess: f64,
    gain: f64,
    origin: (f64, f64),
}

impl SurfaceSample {
    pub fn draw(class: &MaterialClass, rng: &mut Rng) -> SurfaceSample {
        let color = core::array::from_fn(|_| rng.uniform(0.3, 0.9));
        let contrast = rng.uniform(0.35, 0.6);
        let texture: Vec<Wave> = (0..6).map(|_| Wave::draw(class.texture_freq, 0.25, rng)).collect();
        let relief: Vec<Wave> = (0..4).map(|_| Wave::draw(class.relief_freq, 0.2, rng)).collect();
        let jitter = |rng: &mut Rng, s: f64| exp(s * rng.normal());
        SurfaceSample {
            color,
            contrast,
            texture: normalize_waves(texture),
            relief: normalize_waves(relief),
            relief_amp: class.relief_amp * jitter(rng, 0.1),
            specular: class.specular * jitter(rng, 0.1),
            shininess: class.shininess * jitter(rng, 0.1),
            gain: rng.uniform(0.85, 1.15),
            origin: (rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0)),
        }
    }

    pub fn albedo(&self, x: f64, y: f64) -> [f64; 3] {
        let t: f64 = self.texture.iter().map(|w| w.amp * sin(w.arg(x, y))).sum();
        let m = (1.0 + self.contrast * t).clamp(0.05, 2.0);
        self.color.map(|c| (c * m).min(1.0))
    }

    /// Height and its gradient.
    pub fn height(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let (mut h, mut hx, mut hy) = (0.0, 0.0, 0.0);
        for w in &self.relief {
            let a = w.arg(x, y);
            h += w.amp * sin(a);
            let c = w.amp * cos(a) * 2.0 * PI;
            hx += c * w.kx;
            hy += c * w.ky;
        }
        (self.relief_amp * h, self.relief_amp * hx, self.relief_amp * hy)
    }
}

/// Scales amplitudes so the sum stays within [-1, 1].
fn normalize_waves(mut waves: Vec<Wave>) -> Vec<Wave> {
    let total: f64 = waves.iter().map(|w| w.amp).sum();
    for w in &mut waves {
        w.amp /= total;
    }
    waves
}

/// A light condition: directional source plus ambient term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Illumination {
    pub direction: [f64; 3],
    pub intensity: f64,
    pub ambient: f64,
}

impl Illumination {
    pub fn from_angles(elevation_deg: f64, azimuth_deg: f64, intensity: f64, ambient: f64) -> Self {
        let (e, a) = (elevation_deg.to_radians(), azimuth_deg.to_radians());
        Illumination { direction: [cos(e) * cos(a), cos(e) * sin(a), sin(e)], intensity, ambient }
    }

    /// Fixed table of conditions, cycled for indices past the table.
    pub fn condition(k: usize) -> Self {
        // Mirror directions fall inside the capture arc so every condition
        // produces highlights somewhere along it.
        const TABLE: [(f64, f64, f64, f64); 4] =
            [(55.0, 180.0, 1.0, 0.15), (70.0, 0.0, 0.9, 0.2), (62.0, 172.0, 0.8, 0.25), (78.0, 8.0, 0.7, 0.3)];
        let (e, a, i, amb) = TABLE[k % TABLE.len()];
        Self::from_angles(e, a, i, amb)
    }
}

fn normalize3(v: [f64; 3]) -> [f64; 3] {
    let n = sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    [v[0] / n, v[1] / n, v[2] / n]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Renders an orthographic `size × size` RGB view of a one-unit patch seen
/// from direction (θ, φ). Radiance goes through `1 − exp(−1.5·L)`, then
/// sensor noise, then 8-bit quantization.
pub fn render_view(
    surface: &SurfaceSample,
    theta_deg: f64,
    phi_deg: f64,
    light: &Illumination,
    size: usize,
    noise: f64,
    rng: &mut Rng,
) -> Image {
    let (st, ct) = (sin(theta_deg.to_radians()), cos(theta_deg.to_radians()));
    let (sp, cp) = (sin(phi_deg.to_radians()), cos(phi_deg.to_radians()));
    let view = [st * cp, sp, ct * cp];
    let half = normalize3([light.direction[0] + view[0], light.direction[1] + view[1], light.direction[2] + view[2]]);
    let mut img = Image::zeros(size, size, 3);
    for row in 0..size {
        for col in 0..size {
            let u = (col as f64 + 0.5) / size as f64 - 0.5;
            let w = 0.5 - (row as f64 + 0.5) / size as f64;
            // Ray along -view through image-plane point (u, w); intersect z = h(x, y).
            let mut s = 0.0;
            let (mut x, mut y) = (0.0, 0.0);
            for _ in 0..6 {
                x = u * ct - w * sp * st + s * st * cp;
                y = w * cp + s * sp;
                let (h, _, _) = surface.height(x + surface.origin.0, y + surface.origin.1);
                s = (h + u * st + w * sp * ct) / (ct * cp);
            }
            let (px, py) = (x + surface.origin.0, y + surface.origin.1);
            let (_, hx, hy) = surface.height(px, py);
            let n = normalize3([-hx, -hy, 1.0]);
            let albedo = surface.albedo(px, py);
            let diffuse = dot(n, light.direction).max(0.0);
            let spec = if surface.specular > 0.0 { surface.specular * pow(dot(n, half).max(0.0), surface.shininess) } else { 0.0 };
            for (c, a) in albedo.iter().enumerate() {
                let radiance = surface.gain * (light.intensity * (a * diffuse + spec) + light.ambient * a);
                // Smooth tone curve instead of hard clipping at white.
                let mut v = 1.0 - exp(-1.5 * radiance);
                if noise > 0.0 {
                    v += noise * rng.normal();
                }
                img.set(col, row, c, (round(v.clamp(0.0, 1.0) * 255.0) / 255.0) as f32);
            }
        }
    }
    img
}
