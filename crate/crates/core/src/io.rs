//! The `RCPD1` binary tensor format.
//!
//! ```text
//! offset  size      field
//! 0       4         magic "RCPD"
//! 4       1         version (0x01)
//! 5       4         order d, u32 little-endian
//! 9       8·d       dims, u64 little-endian each
//! 9+8d    8·∏n_j    values, f64 little-endian, row-major (last index fastest)
//! ```

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

pub const MAGIC: &[u8; 4] = b"RCPD";
pub const VERSION: u8 = 0x01;

pub fn encode(tensor: &DenseTensor) -> Vec<u8> {
    let d = tensor.order();
    let mut out = Vec::with_capacity(9 + 8 * d + 8 * tensor.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for &n in tensor.dims() {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for &x in tensor.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<DenseTensor> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::parse(0, format!("bad magic {magic:?}")));
    }
    let version = cur.take(1, "version")?[0];
    if version != VERSION {
        return Err(Error::parse(4, format!("unsupported version {version:#04x}")));
    }
    let order_at = cur.pos;
    let d = u32::from_le_bytes(cur.take(4, "order")?.try_into().unwrap()) as usize;
    if d < 2 {
        return Err(Error::parse(order_at, format!("order {d} is below 2")));
    }
    let mut dims = Vec::with_capacity(d);
    let mut len: usize = 1;
    for _ in 0..d {
        let at = cur.pos;
        let n = u64::from_le_bytes(cur.take(8, "dimension")?.try_into().unwrap());
        let n = usize::try_from(n)
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::parse(at, format!("invalid dimension {n}")))?;
        len = len
            .checked_mul(n)
            .ok_or_else(|| Error::parse(at, "tensor size overflows"))?;
        dims.push(n);
    }
    let body_at = cur.pos;
    let expected = len
        .checked_mul(8)
        .ok_or_else(|| Error::parse(body_at, "tensor size overflows"))?;
    let remaining = bytes.len() - body_at;
    if remaining != expected {
        return Err(Error::parse(
            body_at + remaining.min(expected),
            format!("expected {expected} payload bytes, found {remaining}"),
        ));
    }
    let data = bytes[body_at..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseTensor::from_vec(dims, data)
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &DenseTensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(tensor)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// A matrix as an order-2 tensor (rows × cols, row-major).
pub fn matrix_to_tensor(m: &DMatrix<f64>) -> Result<DenseTensor> {
    DenseTensor::from_fn(vec![m.nrows(), m.ncols()], |idx| m[(idx[0], idx[1])])
}

pub fn tensor_to_matrix(t: &DenseTensor) -> Result<DMatrix<f64>> {
    if t.order() != 2 {
        return Err(Error::structural(format!(
            "expected an order-2 tensor, got order {}",
            t.order()
        )));
    }
    let (r, c) = (t.dims()[0], t.dims()[1]);
    Ok(DMatrix::from_row_slice(r, c, t.data()))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::parse(
                self.bytes.len(),
                format!("truncated input while reading {what}"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let t = DenseTensor::from_vec(vec![1, 2], vec![1.5, -2.0]).unwrap();
        let b = encode(&t);
        assert_eq!(&b[..5], b"RCPD\x01");
        assert_eq!(&b[5..9], &2u32.to_le_bytes());
        assert_eq!(&b[9..17], &1u64.to_le_bytes());
        assert_eq!(&b[17..25], &2u64.to_le_bytes());
        assert_eq!(&b[25..33], &1.5f64.to_le_bytes());
        assert_eq!(b.len(), 41);
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let t = DenseTensor::ones(vec![2, 2]).unwrap();
        let mut b = encode(&t);
        b[0] = b'X';
        assert!(matches!(decode(&b), Err(Error::Parse { offset: 0, .. })));
    }

    #[test]
    fn truncated_payload() {
        let t = DenseTensor::ones(vec![2, 2]).unwrap();
        let b = encode(&t);
        let err = decode(&b[..b.len() - 3]).unwrap_err();
        assert!(matches!(err, Error::Parse { offset, .. } if offset == b.len() - 3));
        assert!(decode(&b[..7]).is_err());
    }

    #[test]
    fn bad_version_and_order() {
        let t = DenseTensor::ones(vec![2, 2]).unwrap();
        let mut b = encode(&t);
        b[4] = 2;
        assert!(matches!(decode(&b), Err(Error::Parse { offset: 4, .. })));
        let mut b = encode(&t);
        b[5..9].copy_from_slice(&1u32.to_le_bytes());
        assert!(matches!(decode(&b), Err(Error::Parse { offset: 5, .. })));
    }

    #[test]
    fn matrix_tensor_conversion() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let t = matrix_to_tensor(&m).unwrap();
        assert_eq!(t.data(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(tensor_to_matrix(&t).unwrap(), m);
    }

    proptest! {
        #[test]
        fn roundtrip(dims in proptest::collection::vec(1usize..4, 2..5), seed in any::<u64>()) {
            let mut k = seed;
            let t = DenseTensor::from_fn(dims, |_| {
                k = k.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                f64::from_bits(k >> 2)
            }).unwrap();
            let back = decode(&encode(&t)).unwrap();
            prop_assert_eq!(back.dims(), t.dims());
            // Bitwise, so NaN payloads count too.
            let same = back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
        }
    }
}
