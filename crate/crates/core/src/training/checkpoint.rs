//! Binary checkpoint format (all integers little-endian):
//!
//! ```text
//! "BFLY" | version u32 = 1 | tensor count u32
//! per tensor: name length u16 | UTF-8 name | dtype u8 (0 = f64, 1 = f32)
//!             | rank u8 | dims u64 × rank | raw values
//! ```

use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BFLY";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F64 = 0,
    F32 = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

pub fn encode_checkpoint(tensors: &[NamedTensor], dtype: DType) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u32::try_from(tensors.len()).map_err(|_| Error::shape("too many tensors"))?;
    out.extend_from_slice(&count.to_le_bytes());
    for t in tensors {
        let name = t.name.as_bytes();
        let name_len = u16::try_from(name.len())
            .map_err(|_| Error::shape(format!("tensor name '{}' is too long", t.name)))?;
        let rank = u8::try_from(t.shape.len())
            .map_err(|_| Error::shape(format!("tensor '{}' has too many dims", t.name)))?;
        if t.shape.iter().product::<usize>() != t.values.len() {
            return Err(Error::shape(format!(
                "tensor '{}' has shape {:?} but {} values",
                t.name,
                t.shape,
                t.values.len()
            )));
        }
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name);
        out.push(dtype as u8);
        out.push(rank);
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match dtype {
            DType::F64 => t.values.iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            DType::F32 => t
                .values
                .iter()
                .for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Format {
                offset: self.pos,
                reason: format!("truncated while reading {what}"),
            });
        };
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn array<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("exact length"))
    }

    fn fail<T>(&self, offset: usize, reason: String) -> Result<T> {
        Err(Error::Format { offset, reason })
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<NamedTensor>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return r.fail(0, "bad magic, expected \"BFLY\"".into());
    }
    let version = u32::from_le_bytes(r.array("version")?);
    if version != VERSION {
        return r.fail(4, format!("unsupported version {version}"));
    }
    let count = u32::from_le_bytes(r.array("tensor count")?);
    let mut tensors = Vec::new();
    for index in 0..count {
        let start = r.pos;
        let name_len = u16::from_le_bytes(r.array("name length")?) as usize;
        let name_at = r.pos;
        let name = match std::str::from_utf8(r.take(name_len, "name")?) {
            Ok(s) => s.to_owned(),
            Err(_) => return r.fail(name_at, format!("tensor {index} name is not UTF-8")),
        };
        let dtype_at = r.pos;
        let [dtype] = r.array::<1>("dtype")?;
        let width = match dtype {
            0 => 8,
            1 => 4,
            other => return r.fail(dtype_at, format!("unknown dtype code {other} for '{name}'")),
        };
        let [rank] = r.array::<1>("rank")?;
        let mut shape = Vec::with_capacity(rank as usize);
        for _ in 0..rank {
            let at = r.pos;
            let d = u64::from_le_bytes(r.array("dimension")?);
            match usize::try_from(d) {
                Ok(d) => shape.push(d),
                Err(_) => return r.fail(at, format!("dimension {d} too large")),
            }
        }
        let count = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let Some(bytes_needed) = count.and_then(|c| c.checked_mul(width)) else {
            return r.fail(start, format!("tensor '{name}' is too large"));
        };
        let raw = r.take(bytes_needed, &format!("values of '{name}'"))?;
        let values = if width == 8 {
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect()
        } else {
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect()
        };
        tensors.push(NamedTensor {
            name,
            shape,
            values,
        });
    }
    if r.pos != bytes.len() {
        return r.fail(r.pos, format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(tensors)
}

pub fn save_checkpoint(path: impl AsRef<Path>, tensors: &[NamedTensor]) -> Result<()> {
    let bytes = encode_checkpoint(tensors, DType::F64)?;
    std::fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Vec<NamedTensor>> {
    let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::io(&path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Vec<NamedTensor> {
        vec![
            NamedTensor {
                name: "front.window".into(),
                shape: vec![4],
                values: vec![0.0, 0.5, 1.0, -0.5],
            },
            NamedTensor {
                name: "w".into(),
                shape: vec![2, 3],
                values: vec![1e-300, -0.0, f64::MAX, 3.5, 1.0 / 3.0, -7.25],
            },
        ]
    }

    #[test]
    fn header_layout() {
        let bytes = encode_checkpoint(&sample()[..1], DType::F64).unwrap();
        assert_eq!(&bytes[..4], b"BFLY");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..14], &12u16.to_le_bytes());
        assert_eq!(&bytes[14..26], b"front.window");
        assert_eq!(bytes[26], 0);
        assert_eq!(bytes[27], 1);
        assert_eq!(&bytes[28..36], &4u64.to_le_bytes());
        assert_eq!(bytes.len(), 36 + 4 * 8);
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.bfly");
        save_checkpoint(&path, &sample()).unwrap();
        let back = load_checkpoint(&path).unwrap();
        for (a, b) in sample().iter().zip(&back) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.shape, b.shape);
            let bits_a: Vec<u64> = a.values.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.values.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn f32_export_reads_back() {
        let bytes = encode_checkpoint(&sample()[..1], DType::F32).unwrap();
        assert_eq!(bytes[26], 1);
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back[0].values, vec![0.0, 0.5, 1.0, -0.5]);
    }

    #[test]
    fn every_truncation_is_rejected() {
        let bytes = encode_checkpoint(&sample(), DType::F64).unwrap();
        for cut in 0..bytes.len() {
            match decode_checkpoint(&bytes[..cut]) {
                Err(Error::Format { offset, .. }) => assert!(offset <= cut),
                other => panic!("cut at {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn bad_header_fields() {
        let mut bytes = encode_checkpoint(&sample(), DType::F64).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_checkpoint(&bytes), Err(Error::Format { offset: 0, .. })));

        let mut bytes = encode_checkpoint(&sample(), DType::F64).unwrap();
        bytes[4] = 2;
        assert!(matches!(decode_checkpoint(&bytes), Err(Error::Format { offset: 4, .. })));

        let mut bytes = encode_checkpoint(&sample(), DType::F64).unwrap();
        bytes[26] = 9;
        assert!(matches!(decode_checkpoint(&bytes), Err(Error::Format { offset: 26, .. })));

        let mut bytes = encode_checkpoint(&sample(), DType::F64).unwrap();
        bytes.push(0);
        assert!(matches!(decode_checkpoint(&bytes), Err(Error::Format { .. })));
    }

    proptest! {
        #[test]
        fn arbitrary_tensors_roundtrip(
            values in proptest::collection::vec(any::<f64>(), 0..64),
            name in "[a-z.]{0,20}",
        ) {
            let t = vec![NamedTensor { name, shape: vec![values.len()], values }];
            let back = decode_checkpoint(&encode_checkpoint(&t, DType::F64).unwrap()).unwrap();
            prop_assert_eq!(back.len(), 1);
            prop_assert_eq!(&back[0].name, &t[0].name);
            let a: Vec<u64> = t[0].values.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = back[0].values.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
