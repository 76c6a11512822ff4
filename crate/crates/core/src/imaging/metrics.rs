use std::fmt::Write as _;

use super::image::ImageBuffer;
use crate::error::{Error, Result};

/// Per-channel 256-bin pixel counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    channels: Vec<[u64; 256]>,
}

impl Histogram {
    pub fn channels(&self) -> usize {
        self.channels.len()
    }

    pub fn bins(&self, channel: usize) -> &[u64; 256] {
        &self.channels[channel]
    }

    pub fn total(&self, channel: usize) -> u64 {
        self.channels[channel].iter().sum()
    }

    /// `value,c0,c1,...` rows for every bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value");
        for c in 0..self.channels.len() {
            let _ = write!(out, ",c{c}");
        }
        out.push('\n');
        for v in 0..256 {
            let _ = write!(out, "{v}");
            for ch in &self.channels {
                let _ = write!(out, ",{}", ch[v]);
            }
            out.push('\n');
        }
        out
    }

    /// Bar-chart rendering, one 256-wide grayscale panel per channel stacked
    /// vertically; bar heights are scaled to the tallest bin.
    pub fn heatmap(&self, panel_height: usize) -> Result<ImageBuffer> {
        let panel_height = panel_height.max(1);
        let n = self.channels.len();
        ImageBuffer::from_fn(panel_height * n, 256, 1, |y, x, _| {
            let ch = &self.channels[y / panel_height];
            let max = *ch.iter().max().unwrap_or(&0);
            if max == 0 {
                return 0;
            }
            let row_from_bottom = panel_height - 1 - y % panel_height;
            let bar = (ch[x] as f64 / max as f64 * panel_height as f64).ceil() as usize;
            if row_from_bottom < bar {
                255
            } else {
                0
            }
        })
    }
}

pub fn histogram(image: &ImageBuffer) -> Histogram {
    let c = image.channels();
    let mut channels = vec![[0u64; 256]; c];
    for px in image.pixels().chunks_exact(c) {
        for (ch, &v) in channels.iter_mut().zip(px) {
            ch[v as usize] += 1;
        }
    }
    Histogram { channels }
}

/// Mean squared byte difference over every subpixel, on the 0–255² scale.
pub fn mse_per_pixel(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.same_shape("mse_per_pixel", b)?;
    let sum: u64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64 / a.pixels().len() as f64)
}

/// Pearson r; 0 when either side has zero variance.
pub fn pearson(xs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut n, mut sx, mut sy) = (0.0, 0.0, 0.0);
    let pairs: Vec<(f64, f64)> = xs.collect();
    for &(x, y) in &pairs {
        n += 1.0;
        sx += x;
        sy += y;
    }
    if n == 0.0 {
        return 0.0;
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut cov, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    (cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0)
}

/// Per-channel `(horizontal, vertical)` Pearson correlation between each
/// pixel and its right/bottom neighbour.
pub fn adjacent_correlation(image: &ImageBuffer) -> Result<Vec<(f64, f64)>> {
    let (h, w, c) = image.shape();
    if h < 2 || w < 2 {
        return Err(Error::invalid("image", format!("{h}x{w} is smaller than 2x2")));
    }
    Ok((0..c)
        .map(|ch| {
            let px = |y: usize, x: usize| image.get(y, x, ch) as f64;
            let horiz = pearson(
                (0..h).flat_map(|y| (0..w - 1).map(move |x| (y, x))).map(|(y, x)| (px(y, x), px(y, x + 1))),
            );
            let vert = pearson(
                (0..h - 1).flat_map(|y| (0..w).map(move |x| (y, x))).map(|(y, x)| (px(y, x), px(y + 1, x))),
            );
            (horiz, vert)
        })
        .collect())
}

/// Mean of `|r|` over both directions and every channel.
pub fn mean_abs_correlation(image: &ImageBuffer) -> Result<f64> {
    let per = adjacent_correlation(image)?;
    let sum: f64 = per.iter().map(|(h, v)| h.abs() + v.abs()).sum();
    Ok(sum / (2 * per.len()) as f64)
}

/// `|cover − container|`, averaged over channels, stretched to `[0, 255]`.
/// A constant difference maps to all zeros.
pub fn residual_enhance(cover: &ImageBuffer, container: &ImageBuffer) -> Result<ImageBuffer> {
    cover.same_shape("residual_enhance", container)?;
    let c = cover.channels();
    let diffs: Vec<f64> = cover
        .pixels()
        .chunks_exact(c)
        .zip(container.pixels().chunks_exact(c))
        .map(|(a, b)| {
            let s: u32 = a.iter().zip(b).map(|(&x, &y)| x.abs_diff(y) as u32).sum();
            s as f64 / c as f64
        })
        .collect();
    let min = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pixels = if max > min {
        diffs
            .iter()
            .map(|&d| ((d - min) / (max - min) * 255.0).round() as u8)
            .collect()
    } else {
        vec![0; diffs.len()]
    };
    ImageBuffer::new(cover.height(), cover.width(), 1, pixels)
}

/// Pearson r over all pixel values of two same-shape images.
pub fn image_similarity(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    a.same_shape("image_similarity", b)?;
    Ok(pearson(
        a.pixels().iter().zip(b.pixels()).map(|(&x, &y)| (x as f64, y as f64)),
    ))
}

/// One row of the training metrics series. MSEs are on the 0–255² scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    /// Mean training objective over the epoch, on the unit pixel scale.
    pub encode_loss: f64,
    /// Mean `β·secret` term of the training objective over the epoch.
    pub reveal_loss: f64,
    /// Held-out byte-domain MSEs.
    pub cover_mse: f64,
    pub secret_mse: f64,
    /// Mean `|adjacent correlation|` of the evaluation containers.
    pub container_correlation: f64,
}

pub const METRICS_CSV_HEADER: &str = "epoch,encode_loss,reveal_loss,cover_mse,secret_mse";

pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = format!("{METRICS_CSV_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch, r.encode_loss, r.reveal_loss, r.cover_mse, r.secret_mse
        );
    }
    out
}
