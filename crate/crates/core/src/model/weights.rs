//! Binary weight file.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"HRW1"
//! u32 tensor count
//! per tensor: u32 name length, UTF-8 name, u32 rank, rank × u64 dims
//! per tensor, same order: f64 payload, row-major
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::tensor::ParamStore;

pub const MAGIC: [u8; 4] = *b"HRW1";

const CHUNK: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("malformed weight file: {0}")]
    Format(String),
    #[error("weight file (schema HRW1) does not match the model at tensor `{tensor}`: {detail}")]
    Schema { tensor: String, detail: String },
    #[error("parameter `{0}` is not finite")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_weights(store: &ParamStore, w: impl Write) -> Result<(), WeightsError> {
    let mut w = BufWriter::new(w);
    w.write_all(&MAGIC)?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for (_, name, t) in store.iter() {
        if !t.is_finite() {
            return Err(WeightsError::NonFinite(name.to_string()));
        }
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
    }
    let mut buf = Vec::with_capacity(CHUNK * 8);
    for (_, _, t) in store.iter() {
        for chunk in t.data().chunks(CHUNK) {
            buf.clear();
            buf.extend(chunk.iter().flat_map(|v| v.to_le_bytes()));
            w.write_all(&buf)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a weight file into an existing store whose names and shapes must
/// match the file exactly.
pub fn read_weights_into(r: impl Read, store: &mut ParamStore) -> Result<(), WeightsError> {
    let mut r = BufReader::new(r);
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if magic != MAGIC {
        return Err(WeightsError::Format(format!("bad magic {magic:02x?}")));
    }
    let count = read_u32(&mut r, "tensor count")? as usize;
    if count != store.len() {
        return Err(WeightsError::Schema {
            tensor: "<manifest>".into(),
            detail: format!("file has {count} tensors, model has {}", store.len()),
        });
    }
    let mut order = Vec::with_capacity(count);
    for i in 0..count {
        let len = read_u32(&mut r, "name length")? as usize;
        if len > 4096 {
            return Err(WeightsError::Format(format!("name length {len} of entry {i}")));
        }
        let mut name = vec![0u8; len];
        read_exact(&mut r, &mut name, "name")?;
        let name = String::from_utf8(name).map_err(|_| WeightsError::Format(format!("entry {i} name is not UTF-8")))?;
        let rank = read_u32(&mut r, "rank")? as usize;
        if rank > 8 {
            return Err(WeightsError::Format(format!("rank {rank} of `{name}`")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u64(&mut r, "dimension")? as usize);
        }
        let id = store.id(&name).ok_or_else(|| WeightsError::Schema {
            tensor: name.clone(),
            detail: "no such parameter in the model".into(),
        })?;
        let expected = store.get(id).shape();
        if expected != shape.as_slice() {
            return Err(WeightsError::Schema {
                detail: format!("file shape {shape:?}, model shape {expected:?}"),
                tensor: name,
            });
        }
        order.push(id);
    }
    let mut buf = vec![0u8; CHUNK * 8];
    for id in order {
        let name = store.name(id).to_string();
        let data = store.get_mut(id).data_mut();
        for chunk in data.chunks_mut(CHUNK) {
            let bytes = &mut buf[..chunk.len() * 8];
            read_exact(&mut r, bytes, &name)?;
            for (v, b) in chunk.iter_mut().zip(bytes.chunks_exact(8)) {
                *v = f64::from_le_bytes(b.try_into().expect("8-byte chunk"));
            }
        }
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(WeightsError::Format("trailing bytes after the last tensor".into()));
    }
    Ok(())
}

pub fn save_weights(store: &ParamStore, path: &Path) -> Result<(), WeightsError> {
    write_weights(store, File::create(path)?)
}

pub fn load_weights(path: &Path, store: &mut ParamStore) -> Result<(), WeightsError> {
    read_weights_into(File::open(path)?, store)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<(), WeightsError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => WeightsError::Format(format!("truncated while reading {what}")),
        _ => WeightsError::Io(e),
    })
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32, WeightsError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64, WeightsError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn store(values: &[f64]) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("a.weight", Tensor::new(vec![2, 2], values[..4].to_vec()).unwrap());
        s.add("a.bias", Tensor::vector(values[4..].to_vec()));
        s
    }

    fn bytes(s: &ParamStore) -> Vec<u8> {
        let mut out = Vec::new();
        write_weights(s, &mut out).unwrap();
        out
    }

    #[test]
    fn round_trip_is_bitwise() {
        let src = store(&[1.5, -0.0, f64::MIN_POSITIVE, 1e300, 0.1, 2.0 / 3.0]);
        let mut dst = store(&[0.0; 6]);
        read_weights_into(&bytes(&src)[..], &mut dst).unwrap();
        for ((_, _, a), (_, _, b)) in src.iter().zip(dst.iter()) {
            let a: Vec<u64> = a.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = b.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn layout_is_stable() {
        let b = bytes(&store(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        assert_eq!(&b[..4], b"HRW1");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 8);
        assert_eq!(&b[12..20], b"a.weight");
        // 8 header + (4+8+4+16) + (4+6+4+8) manifest + 6 payload values
        assert_eq!(b.len(), 8 + 32 + 22 + 48);
        assert_eq!(f64::from_le_bytes(b[62..70].try_into().unwrap()), 1.0);
    }

    #[test]
    fn flipped_magic_is_a_format_error() {
        let mut b = bytes(&store(&[0.0; 6]));
        b[0] ^= 0xff;
        let err = read_weights_into(&b[..], &mut store(&[0.0; 6])).unwrap_err();
        assert!(matches!(err, WeightsError::Format(_)), "{err}");
    }

    #[test]
    fn truncation_and_trailing_bytes_are_format_errors() {
        let b = bytes(&store(&[0.0; 6]));
        for cut in [3, 10, 30, b.len() - 1] {
            let err = read_weights_into(&b[..cut], &mut store(&[0.0; 6])).unwrap_err();
            assert!(matches!(err, WeightsError::Format(_)), "cut {cut}: {err}");
        }
        let mut long = b.clone();
        long.push(0);
        assert!(matches!(
            read_weights_into(&long[..], &mut store(&[0.0; 6])),
            Err(WeightsError::Format(_))
        ));
    }

    #[test]
    fn shape_mismatch_names_the_tensor() {
        let b = bytes(&store(&[0.0; 6]));
        let mut other = ParamStore::new();
        other.add("a.weight", Tensor::zeros(&[2, 3]));
        other.add("a.bias", Tensor::zeros(&[2]));
        match read_weights_into(&b[..], &mut other).unwrap_err() {
            WeightsError::Schema { tensor, .. } => assert_eq!(tensor, "a.weight"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn refuses_to_save_non_finite() {
        let s = store(&[0.0, f64::NAN, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(write_weights(&s, Vec::new()), Err(WeightsError::NonFinite(_))));
    }
}
