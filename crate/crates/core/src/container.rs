//! The DYNB binary container for trajectory tensors.
//!
//! Layout: 8-byte magic `DYNB0001`, three 64-bit little-endian counts
//! `(C, T, N)`, then `C*T*N` 64-bit little-endian floats in `(c, t, n)`
//! row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Real};
use crate::tensor::{TensorMeta, TrajectoryTensor};

pub const MAGIC: &[u8; 8] = b"DYNB0001";

pub fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

/// Writes a tensor to the DYNB container. Values are stored as `f64`
/// regardless of the working precision.
pub fn write_tensor<S: Real, W: Write>(w: &mut W, tensor: &TrajectoryTensor<S>) -> Result<()> {
    w.write_all(MAGIC)?;
    let (c, t, n) = tensor.shape();
    write_u64(w, c as u64)?;
    write_u64(w, t as u64)?;
    write_u64(w, n as u64)?;
    for &v in tensor.as_slice() {
        write_f64(w, to_f64(v))?;
    }
    Ok(())
}

/// Reads a tensor from a DYNB container. The metadata is not part of the
/// binary format; callers attach it from a sidecar when they have one.
pub fn read_tensor<S: Real, R: Read>(r: &mut R, meta: TensorMeta) -> Result<TrajectoryTensor<S>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            magic, MAGIC
        )));
    }
    let c = read_u64(r)? as usize;
    let t = read_u64(r)? as usize;
    let n = read_u64(r)? as usize;
    let len = c
        .checked_mul(t)
        .and_then(|x| x.checked_mul(n))
        .ok_or_else(|| Error::Format("count overflow".into()))?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        let v = read_f64(r)?;
        data.push(S::from_f64(v).ok_or_else(|| Error::Format("unrepresentable value".into()))?);
    }
    TrajectoryTensor::new(data, c, t, n, meta)
}

pub fn write_tensor_file<S: Real>(path: &Path, tensor: &TrajectoryTensor<S>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, tensor)?;
    w.flush()?;
    Ok(())
}

pub fn read_tensor_file<S: Real>(path: &Path) -> Result<TrajectoryTensor<S>> {
    let mut r = BufReader::new(File::open(path)?);
    let meta = TensorMeta {
        source: path.display().to_string(),
        seed: 0,
    };
    read_tensor(&mut r, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let t = TrajectoryTensor::from_fn(3, 5, 2, TensorMeta::default(), |c, t, n| {
            (c as f64) * 0.1 + (t as f64) * std::f64::consts::PI + (n as f64) / 3.0
        })
        .unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert_eq!(&buf[..8], MAGIC);
        assert_eq!(buf.len(), 8 + 3 * 8 + 3 * 5 * 2 * 8);
        let back: TrajectoryTensor<f64> =
            read_tensor(&mut buf.as_slice(), TensorMeta::default()).unwrap();
        assert_eq!(back.as_slice(), t.as_slice());
        assert_eq!(back.shape(), t.shape());
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut buf = Vec::new();
        write_tensor(
            &mut buf,
            &TrajectoryTensor::<f64>::from_fn(1, 2, 1, TensorMeta::default(), |_, _, _| 0.0)
                .unwrap(),
        )
        .unwrap();
        buf[0] = b'X';
        let err = read_tensor::<f64, _>(&mut buf.as_slice(), TensorMeta::default()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let t = TrajectoryTensor::<f64>::from_fn(2, 3, 1, TensorMeta::default(), |_, _, _| 1.0)
            .unwrap();
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(read_tensor::<f64, _>(&mut buf.as_slice(), TensorMeta::default()).is_err());
    }
}
