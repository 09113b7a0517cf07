//! Flat, self-describing parameter container.
//!
//! ```text
//! "VCODPAR1"  u32 count
//! per tensor: u32 name_len, name (UTF-8), u32 rank, rank × u64 dims, f64 values
//! ```
//! All integers and floats little-endian.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::DenseArray;

use super::short::ShortTermModel;

pub const MAGIC: &[u8; 8] = b"VCODPAR1";

pub fn encode_tensors<'a>(tensors: impl IntoIterator<Item = (&'a str, &'a DenseArray)>) -> Vec<u8> {
    let tensors: Vec<_> = tensors.into_iter().collect();
    let mut out = MAGIC.to_vec();
    out.extend((tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        out.extend((name.len() as u32).to_le_bytes());
        out.extend(name.as_bytes());
        out.extend((t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend((d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend(v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.0.len() < n {
            return Err(Error::Format("parameter file is truncated".into()));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_tensors(bytes: &[u8]) -> Result<Vec<(String, DenseArray)>> {
    let mut r = Reader(bytes);
    if r.take(8)? != MAGIC {
        return Err(Error::Format("not a parameter file".into()));
    }
    let count = r.u32()?;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_owned();
        let rank = r.u32()?;
        let shape = (0..rank)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = r.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Format("tensor too large".into()))?,
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        out.push((name, DenseArray::new(shape, data)?));
    }
    if !r.0.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", r.0.len())));
    }
    Ok(out)
}

impl ShortTermModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let params = self.params();
        encode_tensors(params.iter().map(|(n, t)| (n.as_str(), *t)))
    }

    /// Loads tensors into a model of matching architecture.
    pub fn load_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        let tensors = decode_tensors(bytes)?;
        let mut slots = self.params_mut();
        if tensors.len() != slots.len() {
            return Err(Error::Format(format!(
                "{} tensors in file, model has {}",
                tensors.len(),
                slots.len()
            )));
        }
        for ((name, t), (want, slot)) in tensors.into_iter().zip(slots.iter_mut()) {
            if &name != want || t.shape() != slot.shape() {
                return Err(Error::Format(format!(
                    "tensor {name} {:?} does not match {want} {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            **slot = t;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(&mut self, path: impl AsRef<Path>) -> Result<()> {
        self.load_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toynet::short::ShortConfig;

    #[test]
    fn round_trip() {
        let a = ShortTermModel::new(ShortConfig::toy(), 1);
        let mut b = ShortTermModel::new(ShortConfig::toy(), 2);
        assert_ne!(a, b);
        b.load_bytes(&a.to_bytes()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_damage() {
        let a = ShortTermModel::new(ShortConfig::toy(), 1);
        let bytes = a.to_bytes();
        let mut b = a.clone();
        assert!(b.load_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(b.load_bytes(b"VCODPAR2\0\0\0\0").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(b.load_bytes(&extra).is_err());
    }
}
