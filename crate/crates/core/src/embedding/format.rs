//! `EMB1` container.
//!
//! ```text
//! 0   4  magic "EMB1"
//! 4   4  u32 version (1)
//! 8   4  u32 dimension D
//! 12  4  u32 record count
//! per record: u32 id length, id bytes (UTF-8), D x f32
//! ```
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use super::Embedding;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const VERSION: u32 = 1;

pub fn encode_embeddings(embeddings: &[Embedding]) -> Result<Vec<u8>> {
    let first = embeddings.first().ok_or_else(|| Error::domain("refusing to write an empty embedding file"))?;
    let dim = first.dim();
    let mut out = Vec::with_capacity(16 + embeddings.len() * (8 + 4 * dim));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(embeddings.len() as u32).to_le_bytes());
    for e in embeddings {
        if e.dim() != dim {
            return Err(Error::Dimension { expected: dim, got: e.dim() });
        }
        if let Some(x) = e.vector.iter().find(|x| !x.is_finite()) {
            return Err(Error::domain(format!("embedding {:?} has non-finite component {x}", e.id)));
        }
        out.extend_from_slice(&(e.id.len() as u32).to_le_bytes());
        out.extend_from_slice(e.id.as_bytes());
        for x in &e.vector {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                msg: format!(
                    "truncated file while reading {what} ({n} bytes needed, {} left)",
                    self.buf.len() - self.pos
                ),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<Vec<Embedding>> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    let magic = c.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format { offset: 0, msg: format!("bad magic {:?}", String::from_utf8_lossy(magic)) });
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(Error::Format { offset: 4, msg: format!("unsupported version {version}") });
    }
    let dim = c.u32("dimension")? as usize;
    let count = c.u32("record count")? as usize;
    let mut out = Vec::with_capacity(count.min(bytes.len() / 8 + 1));
    for _ in 0..count {
        let id_len = c.u32("id length")? as usize;
        let id_at = c.pos;
        let id = std::str::from_utf8(c.take(id_len, "id")?)
            .map_err(|_| Error::Format { offset: id_at as u64, msg: "id is not valid UTF-8".into() })?
            .to_string();
        let vec_at = c.pos;
        let raw = c.take(4 * dim, "vector")?;
        let vector: Vec<f32> = raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
        if let Some(k) = vector.iter().position(|x| !x.is_finite()) {
            return Err(Error::Format {
                offset: (vec_at + 4 * k) as u64,
                msg: format!("non-finite component in {id:?}"),
            });
        }
        out.push(Embedding { id, vector });
    }
    if c.pos != bytes.len() {
        return Err(Error::Format {
            offset: c.pos as u64,
            msg: format!("{} trailing bytes after {count} records", bytes.len() - c.pos),
        });
    }
    Ok(out)
}

pub fn write_embeddings(embeddings: &[Embedding], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_embeddings(embeddings)?;
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing embeddings {}", path.display()), e))
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<Vec<Embedding>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading embeddings {}", path.display()), e))?;
    decode_embeddings(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Vec<Embedding> {
        vec![
            Embedding::new("a/0", vec![1.0, -2.0, 0.5, 3.25]),
            Embedding::new("bb/0", vec![0.0, -0.0, f32::MIN_POSITIVE, 1e30]),
            Embedding::new("ccc/1/7", vec![7.0; 4]),
        ]
    }

    #[test]
    fn size_matches_layout() {
        let bytes = encode_embeddings(&sample()).unwrap();
        let expected = 16 + (4 + 3 + 16) + (4 + 4 + 16) + (4 + 7 + 16);
        assert_eq!(bytes.len(), expected);
    }

    #[test]
    fn bad_magic_version_and_truncation() {
        let mut bytes = encode_embeddings(&sample()).unwrap();
        let good = bytes.clone();
        bytes[..4].copy_from_slice(b"XEMB");
        assert!(matches!(decode_embeddings(&bytes), Err(Error::Format { offset: 0, .. })));

        let mut v2 = good.clone();
        v2[4] = 2;
        assert!(matches!(decode_embeddings(&v2), Err(Error::Format { offset: 4, .. })));

        let cut = &good[..good.len() - 3];
        match decode_embeddings(cut) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset as usize, good.len() - 16),
            other => panic!("expected format error, got {other:?}"),
        }

        let mut extra = good;
        extra.push(0);
        assert!(decode_embeddings(&extra).is_err());
    }

    #[test]
    fn mixed_dims_rejected_on_write() {
        let embs = vec![Embedding::new("a", vec![1.0; 4]), Embedding::new("b", vec![1.0; 3])];
        assert!(matches!(encode_embeddings(&embs), Err(Error::Dimension { expected: 4, got: 3 })));
        assert!(encode_embeddings(&[]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            records in prop::collection::vec(("[a-z0-9/é]{0,12}", prop::collection::vec(-1e30f32..1e30f32, 6)), 1..8)
        ) {
            let embs: Vec<Embedding> = records.into_iter().map(|(id, v)| Embedding::new(id, v)).collect();
            let back = decode_embeddings(&encode_embeddings(&embs).unwrap()).unwrap();
            prop_assert_eq!(back.len(), embs.len());
            for (a, b) in embs.iter().zip(&back) {
                prop_assert_eq!(&a.id, &b.id);
                let bits_a: Vec<u32> = a.vector.iter().map(|x| x.to_bits()).collect();
                let bits_b: Vec<u32> = b.vector.iter().map(|x| x.to_bits()).collect();
                prop_assert_eq!(bits_a, bits_b);
            }
        }
    }
}
