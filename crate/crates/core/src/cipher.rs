//! Keyed block-scrambling cipher.
//!
//! An image is cut into `grid_side × grid_side` equal rectangular blocks,
//! numbered row-major. Encryption writes input block `perm[i]` to output
//! block `i`; every channel moves with its pixel, so pixel values and
//! histograms are untouched.
//!
//! The permutation is derived from a 64-bit seed with SplitMix64 driving a
//! Fisher–Yates shuffle, so any implementation of the two primitives
//! reproduces it exactly.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;

pub const KEY_MAGIC: &str = "SGKEY1";
/// Julian year.
pub const SECONDS_PER_YEAR: f64 = 31_557_600.0;

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// `high64(next() × bound)`, a value in `0..bound`.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PermutationKey {
    seed: u64,
    grid_side: usize,
    perm: Vec<usize>,
}

impl PermutationKey {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn grid_side(&self) -> usize {
        self.grid_side
    }

    /// Number of blocks, `grid_side²`.
    pub fn order(&self) -> usize {
        self.perm.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p] = i;
        }
        inv
    }

    /// Builds a key from an explicit permutation. `seed` is informational.
    pub fn from_perm(seed: u64, grid_side: usize, perm: Vec<usize>) -> Result<Self> {
        if grid_side == 0 {
            return Err(Error::invalid("grid_side", "must be >= 1"));
        }
        let n = grid_side * grid_side;
        let mut seen = vec![false; n];
        if perm.len() != n || !perm.iter().all(|&p| p < n && !std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("perm", format!("not a bijection on 0..{n}")));
        }
        Ok(Self { seed, grid_side, perm })
    }

    /// `SGKEY1 <seed> <grid_side>\n`
    pub fn to_key_file(&self) -> String {
        format!("{KEY_MAGIC} {} {}\n", self.seed, self.grid_side)
    }

    pub fn parse_key_file(text: &str) -> Result<Self> {
        let line = text
            .strip_suffix('\n')
            .ok_or_else(|| Error::format("SGKEY1", text.len(), "missing trailing newline"))?;
        let mut fields = line.split(' ');
        if fields.next() != Some(KEY_MAGIC) {
            return Err(Error::format("SGKEY1", 0, "expected magic `SGKEY1`"));
        }
        let mut number = |what: &str, offset: usize| -> Result<(u64, usize)> {
            let f = fields
                .next()
                .ok_or_else(|| Error::format("SGKEY1", offset, format!("missing {what}")))?;
            if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
                return Err(Error::format("SGKEY1", offset, format!("{what} `{f}` is not a decimal integer")));
            }
            let v = f
                .parse()
                .map_err(|_| Error::format("SGKEY1", offset, format!("{what} out of range")))?;
            Ok((v, offset + f.len() + 1))
        };
        let (seed, next) = number("seed", KEY_MAGIC.len() + 1)?;
        let (grid, end) = number("grid_side", next)?;
        if fields.next().is_some() {
            return Err(Error::format("SGKEY1", end - 1, "unexpected trailing field"));
        }
        let grid = usize::try_from(grid)
            .map_err(|_| Error::format("SGKEY1", next, "grid_side out of range"))?;
        derive_key(seed, grid)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_key_file())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path)?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| Error::format("SGKEY1", e.valid_up_to(), "not UTF-8"))?;
        Self::parse_key_file(text)
    }
}

/// Fisher–Yates over `0..grid_side²`: for `i` from `n−1` down to 1, swap
/// `i` with `j = high64(next() × (i+1))`.
pub fn derive_key(seed: u64, grid_side: usize) -> Result<PermutationKey> {
    if grid_side == 0 {
        return Err(Error::invalid("grid_side", "must be >= 1"));
    }
    let n = grid_side
        .checked_mul(grid_side)
        .ok_or_else(|| Error::invalid("grid_side", "too large"))?;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = SplitMix64::new(seed);
    for i in (1..n).rev() {
        let j = rng.next_below(i as u64 + 1) as usize;
        perm.swap(i, j);
    }
    Ok(PermutationKey { seed, grid_side, perm })
}

/// Smallest non-zero multiple of `g` not above `v` (or `g` itself), and the
/// padding to the next multiple.
fn grid_fit(v: usize, g: usize) -> (usize, usize) {
    let down = (v / g * g).max(g);
    let pad = (g - v % g) % g;
    (down, pad)
}

pub fn check_divisible(height: usize, width: usize, grid_side: usize) -> Result<()> {
    if grid_side == 0 {
        return Err(Error::invalid("grid_side", "must be >= 1"));
    }
    if !height.is_multiple_of(grid_side) || !width.is_multiple_of(grid_side) {
        let (suggest_h, pad_h) = grid_fit(height, grid_side);
        let (suggest_w, pad_w) = grid_fit(width, grid_side);
        return Err(Error::GridIndivisible {
            height,
            width,
            grid_side,
            suggest_h,
            suggest_w,
            pad_h,
            pad_w,
        });
    }
    Ok(())
}

/// Moves source block `map[i]` to destination block `i`.
fn permute_blocks(image: &ImageBuffer, grid_side: usize, map: &[usize]) -> Result<ImageBuffer> {
    let (h, w, c) = image.shape();
    check_divisible(h, w, grid_side)?;
    let (bh, bw) = (h / grid_side, w / grid_side);
    let row = bw * c;
    let src = image.pixels();
    let mut out = vec![0u8; src.len()];
    for (dst_block, &src_block) in map.iter().enumerate() {
        let (dy, dx) = (dst_block / grid_side * bh, dst_block % grid_side * bw);
        let (sy, sx) = (src_block / grid_side * bh, src_block % grid_side * bw);
        for r in 0..bh {
            let d = ((dy + r) * w + dx) * c;
            let s = ((sy + r) * w + sx) * c;
            out[d..d + row].copy_from_slice(&src[s..s + row]);
        }
    }
    ImageBuffer::new(h, w, c, out)
}

pub fn encrypt(image: &ImageBuffer, key: &PermutationKey) -> Result<ImageBuffer> {
    permute_blocks(image, key.grid_side, &key.perm)
}

pub fn decrypt(image: &ImageBuffer, key: &PermutationKey) -> Result<ImageBuffer> {
    permute_blocks(image, key.grid_side, &key.inverse())
}

/// `(log10 n!, log2 n!)` by direct summation of `ln k`.
pub fn keyspace(n_blocks: u64) -> Result<(f64, f64)> {
    if n_blocks == 0 {
        return Err(Error::invalid("n_blocks", "must be >= 1"));
    }
    let ln: f64 = (2..=n_blocks).map(|k| (k as f64).ln()).sum();
    Ok((ln / std::f64::consts::LN_10, ln / std::f64::consts::LN_2))
}

/// log10 of the years needed to try all `n!` arrangements.
pub fn brute_force_years(n_blocks: u64, ops_per_second: f64) -> Result<f64> {
    if !ops_per_second.is_finite() || ops_per_second <= 0.0 {
        return Err(Error::invalid("ops_per_second", format!("{ops_per_second} must be finite and > 0")));
    }
    let (log10, _) = keyspace(n_blocks)?;
    Ok(log10 - ops_per_second.log10() - SECONDS_PER_YEAR.log10())
}
