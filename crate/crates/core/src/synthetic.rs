//! Procedural grayscale images for tests, demos and desk-scale training.
//!
//! `natural` draws piecewise-smooth scenes: a shaded background, overlapping
//! ellipses and rotated rectangles with their own gradients and soft edges,
//! low-frequency ripples and a little sensor noise. `noise` is i.i.d.
//! uniform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::transform::ImagePlane;

#[derive(Debug, Clone, Copy)]
enum Shape {
    Ellipse {
        cx: f64,
        cy: f64,
        rx: f64,
        ry: f64,
        angle: f64,
    },
    Rect {
        cx: f64,
        cy: f64,
        hw: f64,
        hh: f64,
        angle: f64,
    },
}

impl Shape {
    /// Signed distance-like value, negative inside, roughly in pixels.
    fn distance(&self, x: f64, y: f64) -> f64 {
        match *self {
            Shape::Ellipse {
                cx,
                cy,
                rx,
                ry,
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
                let r = ((u / rx).powi(2) + (v / ry).powi(2)).sqrt();
                (r - 1.0) * rx.min(ry)
            }
            Shape::Rect {
                cx,
                cy,
                hw,
                hh,
                angle,
            } => {
                let (s, c) = angle.sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
                (u.abs() - hw).max(v.abs() - hh)
            }
        }
    }
}

struct Layer {
    shape: Shape,
    base: f64,
    gx: f64,
    gy: f64,
    softness: f64,
}

pub fn natural(width: usize, height: usize, seed: u64) -> Result<ImagePlane> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);
    let scale = w.max(h);

    let bg = rng.gen_range(0.2..0.8);
    let bgx = rng.gen_range(-0.4..0.4) / w;
    let bgy = rng.gen_range(-0.4..0.4) / h;

    let count = rng.gen_range(6..14);
    let layers: Vec<Layer> = (0..count)
        .map(|_| {
            let cx = rng.gen_range(0.0..w);
            let cy = rng.gen_range(0.0..h);
            let size = scale * rng.gen_range(0.05..0.3);
            let aspect = rng.gen_range(0.4..1.0);
            let angle = rng.gen_range(0.0..std::f64::consts::PI);
            let shape = if rng.gen_bool(0.5) {
                Shape::Ellipse {
                    cx,
                    cy,
                    rx: size,
                    ry: size * aspect,
                    angle,
                }
            } else {
                Shape::Rect {
                    cx,
                    cy,
                    hw: size,
                    hh: size * aspect,
                    angle,
                }
            };
            Layer {
                shape,
                base: rng.gen_range(0.0..1.0),
                gx: rng.gen_range(-0.5..0.5) / scale,
                gy: rng.gen_range(-0.5..0.5) / scale,
                softness: rng.gen_range(0.5..3.0),
            }
        })
        .collect();

    let ripples: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(0.0..0.04),
                rng.gen_range(1.0..6.0) * std::f64::consts::TAU / scale,
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.0..std::f64::consts::PI),
            )
        })
        .collect();
    let noise = rng.gen_range(0.0..0.015);

    let mut samples = Vec::with_capacity(width * height);
    for py in 0..height {
        for px in 0..width {
            let (x, y) = (px as f64 + 0.5, py as f64 + 0.5);
            let mut value = bg + bgx * (x - w / 2.0) + bgy * (y - h / 2.0);
            for layer in &layers {
                let d = layer.shape.distance(x, y);
                let coverage = 1.0 / (1.0 + (d / layer.softness).exp());
                let (cx, cy) = match layer.shape {
                    Shape::Ellipse { cx, cy, .. } | Shape::Rect { cx, cy, .. } => (cx, cy),
                };
                let fill = layer.base + layer.gx * (x - cx) + layer.gy * (y - cy);
                value = value * (1.0 - coverage) + fill * coverage;
            }
            for &(amp, freq, phase, dir) in &ripples {
                let t = x * dir.cos() + y * dir.sin();
                value += amp * (freq * t + phase).sin();
            }
            value += noise * rng.gen_range(-1.0..1.0);
            samples.push(value.clamp(0.0, 1.0));
        }
    }
    ImagePlane::new(width, height, samples)
}

pub fn noise(width: usize, height: usize, seed: u64) -> Result<ImagePlane> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..width * height).map(|_| rng.gen::<f64>()).collect();
    ImagePlane::new(width, height, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let a = natural(64, 48, 3).unwrap();
        assert_eq!(a, natural(64, 48, 3).unwrap());
        assert_ne!(a, natural(64, 48, 4).unwrap());
        assert!(a.samples().iter().all(|s| (0.0..=1.0).contains(s)));
        assert_eq!(noise(16, 8, 1).unwrap().samples().len(), 128);
    }
}
