//! Dense `f32` tensors and the `.xbt` binary container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "XBT1" | ndim: u32 | dims: ndim × u64 | payload: product(dims) × f32 (row-major)
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"XBT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("tensor needs at least one dimension"));
        }
        if dims.contains(&0) {
            return Err(Error::invalid(format!(
                "tensor dims must be positive, got {dims:?}"
            )));
        }
        let n = checked_product(&dims)
            .ok_or_else(|| Error::invalid(format!("tensor dims overflow: {dims:?}")))?;
        if n != data.len() {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: data.len(),
            });
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let n = checked_product(&dims).unwrap_or(0);
        Self::new(dims, vec![0.0; n])
    }

    pub fn from_f64(dims: Vec<usize>, data: &[f64]) -> Result<Self> {
        Self::new(dims, data.iter().map(|&v| v as f32).collect())
    }

    /// Builds a `rows × cols` matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        let data: Vec<f32> = rows.iter().flatten().map(|&v| v as f32).collect();
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn shape2(&self) -> Result<(usize, usize)> {
        match self.dims[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::invalid(format!(
                "expected a matrix, got dims {:?}",
                self.dims
            ))),
        }
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[f32] {
        let cols = self.dims[1..].iter().product::<usize>();
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn get2(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.dims[1] + j]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let format = |offset: usize, message: &str| Error::Format {
            offset: offset as u64,
            message: message.to_string(),
        };
        if bytes.len() < 4 || &bytes[..4] != MAGIC {
            return Err(format(0, "bad magic"));
        }
        if bytes.len() < 8 {
            return Err(format(4, "truncated header"));
        }
        let ndim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        if ndim == 0 {
            return Err(format(4, "zero dimensions"));
        }
        let header_end = ndim
            .checked_mul(8)
            .and_then(|n| n.checked_add(8))
            .ok_or_else(|| format(4, "dimension count overflow"))?;
        if bytes.len() < header_end {
            return Err(format(bytes.len(), "truncated header"));
        }
        let mut dims = Vec::with_capacity(ndim);
        for i in 0..ndim {
            let at = 8 + 8 * i;
            let d = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
            if d == 0 {
                return Err(format(at, "zero-sized dimension"));
            }
            dims.push(usize::try_from(d).map_err(|_| format(at, "dimension too large"))?);
        }
        let payload = &bytes[header_end..];
        if !payload.len().is_multiple_of(4) {
            return Err(format(
                header_end + payload.len() / 4 * 4,
                "truncated payload",
            ));
        }
        let expected =
            checked_product(&dims).ok_or_else(|| format(8, "dimension product overflow"))?;
        if payload.len() / 4 != expected {
            return Err(format(
                header_end,
                &format!(
                    "dim/payload mismatch: header declares {expected} values, payload holds {}",
                    payload.len() / 4
                ),
            ));
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { dims, data })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn checked_product(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn roundtrip_small_matrix() {
        let t = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(Tensor::from_bytes(&t.to_bytes()).unwrap(), t);
    }

    #[test]
    fn one_is_little_endian_ieee() {
        let t = Tensor::new(vec![1], vec![1.0]).unwrap();
        let bytes = t.to_bytes();
        assert_eq!(&bytes[..4], b"XBT1");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..16], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[16..], &[0x00, 0x00, 0x80, 0x3F]);
    }

    #[test]
    fn payload_short_of_header_is_rejected() {
        let mut bytes = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0])
            .unwrap()
            .to_bytes();
        bytes.truncate(bytes.len() - 4);
        let err = Tensor::from_bytes(&bytes).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("dim/payload mismatch"), "{msg}");
        assert!(msg.contains("offset 24"), "{msg}");
    }

    #[test]
    fn bad_magic_and_truncation() {
        assert!(Tensor::from_bytes(b"XBT2\x01\0\0\0")
            .unwrap_err()
            .to_string()
            .contains("bad magic"));
        let mut bytes = Tensor::new(vec![1], vec![1.0]).unwrap().to_bytes();
        bytes.pop();
        assert!(Tensor::from_bytes(&bytes)
            .unwrap_err()
            .to_string()
            .contains("truncated payload"));
        assert!(Tensor::from_bytes(b"XBT1\x02\0\0\0\x01")
            .unwrap_err()
            .to_string()
            .contains("truncated header"));
    }

    #[test]
    fn constructor_checks_shape() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(dims in prop::collection::vec(1usize..5, 1..4), seed in any::<u64>()) {
            use rand::Rng;
            let n: usize = dims.iter().product();
            let mut rng = crate::rng::stream(seed);
            let data: Vec<f32> = (0..n).map(|_| f32::from_bits(rng.random::<u32>() & 0x7f7f_ffff)).collect();
            let t = Tensor::new(dims, data).unwrap();
            let back = Tensor::from_bytes(&t.to_bytes()).unwrap();
            prop_assert_eq!(back.dims(), t.dims());
            let same = back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
        }
    }
}
