use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// 8-bit image, row-major with interleaved channels.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ImageBuffer({}x{}x{})", self.height, self.width, self.channels)
    }
}

impl ImageBuffer {
    pub fn new(height: usize, width: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("image", format!("{height}x{width} is empty")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid("channels", format!("{channels} (expected 1 or 3)")));
        }
        if pixels.len() != height * width * channels {
            return Err(Error::shape(
                "image",
                format!(
                    "{height}x{width}x{channels} needs {} bytes, got {}",
                    height * width * channels,
                    pixels.len()
                ),
            ));
        }
        Ok(Self {
            height,
            width,
            channels,
            pixels,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> u8,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    pixels.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> u8 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    pub(crate) fn same_shape(&self, op: &'static str, other: &ImageBuffer) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        Ok(())
    }

    /// Bytes to `[H, W, C]` floats in `[0, 1]` (`v / 255`).
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let scale = 1.0 / 255.0;
        Tensor::new(
            [self.height, self.width, self.channels],
            self.pixels
                .iter()
                .map(|&v| T::from_f64_lossy(v as f64 * scale))
                .collect(),
        )
        .expect("shape matches pixel count")
    }

    /// Floats back to bytes: `round(clamp(v, 0, 1) · 255)`.
    pub fn from_tensor<T: Scalar>(t: &Tensor<T>) -> Result<Self> {
        let (h, w, c) = t.hwc()?;
        let pixels = t.data().iter().map(|&v| quantize(v.as_f64())).collect();
        Self::new(h, w, c, pixels)
    }

    /// Channel mean, rounded; identity for single-channel images.
    pub fn to_grayscale(&self) -> ImageBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let pixels = self
            .pixels
            .chunks_exact(self.channels)
            .map(|px| {
                let sum: u32 = px.iter().map(|&v| v as u32).sum();
                (sum as f64 / self.channels as f64).round() as u8
            })
            .collect();
        ImageBuffer {
            height: self.height,
            width: self.width,
            channels: 1,
            pixels,
        }
    }

    /// Nearest-neighbour resampling; destination index `i` reads source
    /// `floor((i + 0.5) · src / dst)`.
    pub fn resize_nearest(&self, new_h: usize, new_w: usize) -> Result<ImageBuffer> {
        if new_h == 0 || new_w == 0 {
            return Err(Error::invalid("size", format!("{new_h}x{new_w} is empty")));
        }
        let ys: Vec<usize> = (0..new_h).map(|i| nearest_index(i, self.height, new_h)).collect();
        let xs: Vec<usize> = (0..new_w).map(|i| nearest_index(i, self.width, new_w)).collect();
        ImageBuffer::from_fn(new_h, new_w, self.channels, |y, x, c| self.get(ys[y], xs[x], c))
    }
}

pub(crate) fn quantize(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// `floor((2i + 1) · src / (2 · dst))`, exact in integers.
pub fn nearest_index(i: usize, src: usize, dst: usize) -> usize {
    ((2 * i + 1) * src / (2 * dst)).min(src - 1)
}

/// Encodes a binary `P6` (3 channels) or `P5` (1 channel) file, maxval 255.
pub fn write_ppm(image: &ImageBuffer) -> Vec<u8> {
    let magic = if image.channels == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

/// Decodes binary `P6`/`P5` with maxval 255. Header comments are allowed.
pub fn read_ppm(bytes: &[u8]) -> Result<ImageBuffer> {
    let mut pos = 0usize;
    if bytes.len() < 2 {
        return Err(Error::format("PPM", 0, "file too short for magic number"));
    }
    let channels = match &bytes[..2] {
        b"P6" => 3,
        b"P5" => 1,
        _ => return Err(Error::format("PPM", 0, "expected magic P6 (or P5)")),
    };
    pos += 2;
    let mut fields = [0usize; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        let before = pos;
        skip_ws_and_comments(bytes, &mut pos);
        if pos == before {
            return Err(Error::format("PPM", pos, "expected whitespace in header"));
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            let what = ["width", "height", "maxval"][i];
            return Err(Error::format("PPM", pos, format!("expected decimal {what}")));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format("PPM", start, "header number out of range"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::format("PPM", pos, format!("maxval {maxval} unsupported, need 255")));
    }
    if width == 0 || height == 0 {
        return Err(Error::format("PPM", pos, "zero image dimension"));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::format("PPM", pos, "expected single whitespace after maxval")),
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| Error::format("PPM", pos, "image dimensions overflow"))?;
    let payload = &bytes[pos..];
    if payload.len() < need {
        return Err(Error::format(
            "PPM",
            bytes.len(),
            format!("truncated pixel data: {} of {need} bytes", payload.len()),
        ));
    }
    if payload.len() > need {
        return Err(Error::format("PPM", pos + need, "trailing bytes after pixel data"));
    }
    ImageBuffer::new(height, width, channels, payload.to_vec())
}

fn skip_ws_and_comments(bytes: &[u8], pos: &mut usize) {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b'#' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            b if b.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
}

pub fn load_ppm(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    read_ppm(&fs::read(path)?)
}

pub fn save_ppm(path: impl AsRef<Path>, image: &ImageBuffer) -> Result<()> {
    fs::write(path, write_ppm(image))?;
    Ok(())
}

/// Every `.ppm`/`.pgm` file in `dir`, sorted by file name, resized to
/// `size`×`size` with nearest-neighbour sampling.
pub fn load_ppm_dir(dir: impl AsRef<Path>, size: usize) -> Result<Vec<ImageBuffer>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("ppm") || e.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| load_ppm(p)?.resize_nearest(size, size))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_white_pixel() {
        let img = ImageBuffer::filled(1, 1, 3, 255).unwrap();
        assert_eq!(write_ppm(&img), b"P6\n1 1\n255\n\xff\xff\xff".to_vec());
    }

    #[test]
    fn two_pixel_payload() {
        let img = ImageBuffer::new(1, 2, 3, vec![255, 0, 0, 0, 0, 255]).unwrap();
        let bytes = write_ppm(&img);
        assert_eq!(&bytes[bytes.len() - 6..], &[0xFF, 0, 0, 0, 0, 0xFF]);
        assert_eq!(read_ppm(&bytes).unwrap(), img);
    }

    #[test]
    fn header_with_comment() {
        let img = read_ppm(b"P6 # made by hand\n2 1\n255\n\x01\x02\x03\x04\x05\x06").unwrap();
        assert_eq!(img.shape(), (1, 2, 3));
        assert_eq!(img.get(0, 1, 2), 6);
    }

    #[test]
    fn malformed_inputs_report_positions() {
        let cases: [&[u8]; 5] = [
            b"P3\n1 1\n255\n\0\0\0",
            b"P6\n1 1\n65535\n\0\0\0",
            b"P6\n1 1\n255\n\0\0",
            b"P6\nx 1\n255\n\0\0\0",
            b"P6\n1 1\n255\n\0\0\0\0",
        ];
        for c in cases {
            match read_ppm(c) {
                Err(Error::Format { format: "PPM", .. }) => {}
                other => panic!("{:?} -> {other:?}", String::from_utf8_lossy(c)),
            }
        }
        let Err(Error::Format { offset, .. }) = read_ppm(b"P6\n1 1\n255\n\0\0") else {
            panic!()
        };
        assert_eq!(offset, 13);
    }

    #[test]
    fn nearest_index_formula() {
        let down: Vec<_> = (0..3).map(|i| nearest_index(i, 4, 3)).collect();
        assert_eq!(down, [0, 2, 3]);
        let up: Vec<_> = (0..4).map(|i| nearest_index(i, 2, 4)).collect();
        assert_eq!(up, [0, 0, 1, 1]);
    }

    #[test]
    fn resize_cases() {
        let img = ImageBuffer::from_fn(2, 2, 1, |y, x, _| (y * 2 + x) as u8).unwrap();
        assert_eq!(img.resize_nearest(2, 2).unwrap(), img);
        let big = img.resize_nearest(4, 4).unwrap();
        assert_eq!(big.pixels(), &[0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3]);
        assert!(img.resize_nearest(0, 3).is_err());
    }

    #[test]
    fn tensor_conversion_roundtrip() {
        let img = ImageBuffer::from_fn(3, 4, 3, |y, x, c| (y * 50 + x * 20 + c) as u8).unwrap();
        let t: Tensor<f32> = img.to_tensor();
        assert_eq!(ImageBuffer::from_tensor(&t).unwrap(), img);
        let clamped = Tensor::<f32>::new([1, 2, 1], vec![-0.3, 1.7]).unwrap();
        assert_eq!(ImageBuffer::from_tensor(&clamped).unwrap().pixels(), &[0, 255]);
    }
}
