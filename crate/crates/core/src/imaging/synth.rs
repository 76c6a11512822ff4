use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::image::ImageBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SynthKind {
    /// Linear two-colour ramps at a random angle.
    Gradients,
    /// Filled rectangles and discs over a ramp background.
    Shapes,
    /// Two-octave value noise.
    Texture,
    /// Cycles gradients, shapes, texture by index.
    Mixed,
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradients" => Ok(Self::Gradients),
            "shapes" => Ok(Self::Shapes),
            "texture" => Ok(Self::Texture),
            "mixed" => Ok(Self::Mixed),
            other => Err(Error::invalid(
                "kind",
                format!("`{other}` (expected gradients|shapes|texture|mixed)"),
            )),
        }
    }
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gradients => "gradients",
            Self::Shapes => "shapes",
            Self::Texture => "texture",
            Self::Mixed => "mixed",
        })
    }
}

/// `count` RGB images of `size`×`size`. Image `i` depends only on
/// `(seed, i, size, kind)`.
pub fn synth_dataset(seed: u64, count: usize, size: usize, kind: SynthKind) -> Result<Vec<ImageBuffer>> {
    if size == 0 {
        return Err(Error::invalid("size", "must be >= 1"));
    }
    (0..count).map(|i| synth_image(seed, i, size, kind)).collect()
}

pub fn synth_image(seed: u64, index: usize, size: usize, kind: SynthKind) -> Result<ImageBuffer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let kind = match kind {
        SynthKind::Mixed => [SynthKind::Gradients, SynthKind::Shapes, SynthKind::Texture][index % 3],
        k => k,
    };
    let field = match kind {
        SynthKind::Gradients => gradient(&mut rng, size),
        SynthKind::Shapes => shapes(&mut rng, size),
        SynthKind::Texture => texture(&mut rng, size),
        SynthKind::Mixed => unreachable!(),
    };
    ImageBuffer::from_fn(size, size, 3, |y, x, c| field[(y * size + x) * 3 + c].round().clamp(0.0, 255.0) as u8)
}

/// Endpoint colours whose channels differ by at least 64.
fn colour_pair<R: Rng>(rng: &mut R) -> ([f64; 3], [f64; 3]) {
    let mut a = [0.0; 3];
    let mut b = [0.0; 3];
    for c in 0..3 {
        let start: i32 = rng.random_range(0..=255);
        let up = 255 - start;
        let room = up.max(start);
        let span = rng.random_range(64..=room);
        a[c] = start as f64;
        b[c] = if up >= start { start + span } else { start - span } as f64;
    }
    (a, b)
}

fn gradient<R: Rng>(rng: &mut R, size: usize) -> Vec<f64> {
    let (a, b) = colour_pair(rng);
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (angle.cos(), angle.sin());
    let n = size.max(2) as f64 - 1.0;
    let proj = |y: usize, x: usize| x as f64 / n * dx + y as f64 / n * dy;
    let corners = [proj(0, 0), proj(0, size - 1), proj(size - 1, 0), proj(size - 1, size - 1)];
    let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    let mut out = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let t = (proj(y, x) - lo) / span;
            for c in 0..3 {
                out.push(a[c] + (b[c] - a[c]) * t);
            }
        }
    }
    out
}

fn shapes<R: Rng>(rng: &mut R, size: usize) -> Vec<f64> {
    let mut out = gradient(rng, size);
    let s = size as f64;
    for _ in 0..rng.random_range(1..=3) {
        let colour: [f64; 3] = std::array::from_fn(|_| rng.random_range(0..=255) as f64);
        let cy = rng.random_range(0.0..s);
        let cx = rng.random_range(0.0..s);
        let ry = rng.random_range(s / 8.0..s / 3.0);
        let rx = rng.random_range(s / 8.0..s / 3.0);
        let disc = rng.random_bool(0.5);
        for y in 0..size {
            for x in 0..size {
                let (py, px) = (y as f64 + 0.5 - cy, x as f64 + 0.5 - cx);
                let inside = if disc {
                    (py / ry).powi(2) + (px / ry).powi(2) <= 1.0
                } else {
                    py.abs() <= ry && px.abs() <= rx
                };
                if inside {
                    out[(y * size + x) * 3..][..3].copy_from_slice(&colour);
                }
            }
        }
    }
    out
}

fn texture<R: Rng>(rng: &mut R, size: usize) -> Vec<f64> {
    let (a, b) = colour_pair(rng);
    let coarse = lattice(rng, 4);
    let fine = lattice(rng, 8);
    let mut out = Vec::with_capacity(size * size * 3);
    for y in 0..size {
        for x in 0..size {
            let (u, v) = ((y as f64 + 0.5) / size as f64, (x as f64 + 0.5) / size as f64);
            let t = (0.7 * sample(&coarse, 4, u, v) + 0.3 * sample(&fine, 8, u, v)).clamp(0.0, 1.0);
            for c in 0..3 {
                out.push(a[c] + (b[c] - a[c]) * t);
            }
        }
    }
    out
}

fn lattice<R: Rng>(rng: &mut R, cells: usize) -> Vec<f64> {
    (0..(cells + 1) * (cells + 1)).map(|_| rng.random::<f64>()).collect()
}

/// Bilinear lookup into a `(cells+1)²` lattice with smoothstep weights.
fn sample(grid: &[f64], cells: usize, u: f64, v: f64) -> f64 {
    let fy = u * cells as f64;
    let fx = v * cells as f64;
    let (iy, ix) = ((fy as usize).min(cells - 1), (fx as usize).min(cells - 1));
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let (ty, tx) = (smooth(fy - iy as f64), smooth(fx - ix as f64));
    let at = |y: usize, x: usize| grid[y * (cells + 1) + x];
    let top = at(iy, ix) * (1.0 - tx) + at(iy, ix + 1) * tx;
    let bottom = at(iy + 1, ix) * (1.0 - tx) + at(iy + 1, ix + 1) * tx;
    top * (1.0 - ty) + bottom * ty
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::adjacent_correlation;

    #[test]
    fn deterministic_and_empty() {
        let a = synth_dataset(5, 6, 16, SynthKind::Mixed).unwrap();
        let b = synth_dataset(5, 6, 16, SynthKind::Mixed).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synth_dataset(6, 6, 16, SynthKind::Mixed).unwrap());
        assert!(synth_dataset(5, 0, 16, SynthKind::Texture).unwrap().is_empty());
        assert_eq!(synth_image(5, 4, 16, SynthKind::Mixed).unwrap(), a[4]);
    }

    #[test]
    fn gradients_are_highly_correlated() {
        for img in synth_dataset(11, 50, 28, SynthKind::Gradients).unwrap() {
            let best = adjacent_correlation(&img)
                .unwrap()
                .iter()
                .map(|&(h, v)| h.max(v))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(best > 0.9, "{best}");
        }
    }

    #[test]
    fn kind_parsing() {
        for k in ["gradients", "shapes", "texture", "mixed"] {
            assert_eq!(k.parse::<SynthKind>().unwrap().to_string(), k);
        }
        assert!("noise".parse::<SynthKind>().is_err());
    }
}
