//! `SGN1` checkpoint files.
//!
//! ```text
//! "SGN1"                      magic
//! u32                         tensor count
//! repeated:
//!   u16 name length, UTF-8 name
//!   u8 rank, rank × u32 extents
//!   product(extents) × f32
//! u64                         step counter
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SGN1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<(String, Tensor<f32>)>,
    pub step: u64,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&Tensor<f32>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        let count = u32::try_from(self.tensors.len())
            .map_err(|_| Error::invalid("checkpoint", "too many tensors"))?;
        out.extend_from_slice(&count.to_le_bytes());
        for (name, t) in &self.tensors {
            let len = u16::try_from(name.len())
                .map_err(|_| Error::invalid("checkpoint", format!("name `{name}` too long")))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            let rank = u8::try_from(t.rank())
                .map_err(|_| Error::invalid("checkpoint", format!("`{name}` rank too large")))?;
            out.push(rank);
            for &e in t.shape() {
                let e = u32::try_from(e)
                    .map_err(|_| Error::invalid("checkpoint", format!("`{name}` extent too large")))?;
                out.extend_from_slice(&e.to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.step.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::format("SGN1", 0, "bad magic, expected \"SGN1\""));
        }
        let count = u32::from_le_bytes(r.array()?);
        let mut tensors = Vec::with_capacity(count.min(4096) as usize);
        for _ in 0..count {
            let at = r.pos;
            let len = u16::from_le_bytes(r.array()?) as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::format("SGN1", at + 2, "tensor name is not UTF-8"))?
                .to_string();
            let rank = r.take(1)?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(u32::from_le_bytes(r.array()?) as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &e| acc.checked_mul(e))
                .ok_or_else(|| Error::format("SGN1", r.pos, "tensor too large"))?;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::format("SGN1", r.pos, "tensor too large"))?)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push((name, Tensor::new(shape, data)?));
        }
        let step = u64::from_le_bytes(r.array()?);
        if r.pos != bytes.len() {
            return Err(Error::format("SGN1", r.pos, "trailing bytes after step counter"));
        }
        Ok(Self { tensors, step })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::format("SGN1", self.pos, format!("truncated: need {n} more bytes"))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_layout() {
        let ck = Checkpoint {
            tensors: vec![("ab".into(), Tensor::new([2], vec![1.0, -2.0]).unwrap())],
            step: 7,
        };
        let b = ck.to_bytes().unwrap();
        let mut expected = b"SGN1".to_vec();
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&2u16.to_le_bytes());
        expected.extend_from_slice(b"ab");
        expected.push(1);
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        expected.extend_from_slice(&(-2.0f32).to_le_bytes());
        expected.extend_from_slice(&7u64.to_le_bytes());
        assert_eq!(b, expected);
        assert_eq!(Checkpoint::from_bytes(&b).unwrap(), ck);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(matches!(
            Checkpoint::from_bytes(b"SGN2\0\0\0\0\0\0\0\0\0\0\0\0"),
            Err(Error::Format { offset: 0, .. })
        ));
        let ck = Checkpoint {
            tensors: vec![("w".into(), Tensor::zeros([3, 2]))],
            step: 1,
        };
        let b = ck.to_bytes().unwrap();
        for cut in [5, 9, 20, b.len() - 1] {
            assert!(Checkpoint::from_bytes(&b[..cut]).is_err(), "cut {cut}");
        }
        let mut extra = b.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra).is_err());
    }
}
