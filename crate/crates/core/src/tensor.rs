//! Dense row-major grids and the STN3 container format.
//!
//! Layout (little-endian):
//!
//! ```text
//! "STN3" | version u8 = 1 | dtype u8 (0 = f32, 1 = u8) | rank u8 (2 or 3) | pad u8 = 0
//!        | rank x u32 extents | payload, row-major, channel-fastest
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio;

pub const MAGIC: &[u8; 4] = b"STN3";
pub const VERSION: u8 = 1;
/// Fixed header bytes before the extents.
pub const FIXED_HEADER_LEN: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    F32,
    U8,
}

impl DType {
    fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::U8 => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::U8),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::U8 => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U8(Vec<u8>),
}

impl TensorData {
    fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::U8(v) => v.len(),
        }
    }
}

/// Rank-2 (rows x cols) or rank-3 (rows x cols x channels) grid.
///
/// Immutable once built; every constructor checks that the extents are
/// positive and multiply out to the payload length.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorGrid {
    dims: Vec<usize>,
    data: TensorData,
}

fn check_dims(dims: &[usize], len: usize) -> Result<()> {
    if !(2..=3).contains(&dims.len()) {
        return Err(Error::Dimension(format!("rank must be 2 or 3, got {}", dims.len())));
    }
    if let Some(i) = dims.iter().position(|&d| d == 0) {
        return Err(Error::Dimension(format!("extent {i} is zero")));
    }
    let expected: usize = dims.iter().product();
    if expected != len {
        return Err(Error::Shape(format!("dims {dims:?} need {expected} values, got {len}")));
    }
    Ok(())
}

impl TensorGrid {
    pub fn from_f32(dims: &[usize], data: Vec<f32>) -> Result<Self> {
        check_dims(dims, data.len())?;
        Ok(TensorGrid {
            dims: dims.to_vec(),
            data: TensorData::F32(data),
        })
    }

    pub fn from_u8(dims: &[usize], data: Vec<u8>) -> Result<Self> {
        check_dims(dims, data.len())?;
        Ok(TensorGrid {
            dims: dims.to_vec(),
            data: TensorData::U8(data),
        })
    }

    pub fn zeros_f32(dims: &[usize]) -> Result<Self> {
        let n = dims.iter().product();
        Self::from_f32(dims, vec![0.0; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn rows(&self) -> usize {
        self.dims[0]
    }

    pub fn cols(&self) -> usize {
        self.dims[1]
    }

    /// Channel count; 1 for rank-2 grids.
    pub fn channels(&self) -> usize {
        self.dims.get(2).copied().unwrap_or(1)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> DType {
        match self.data {
            TensorData::F32(_) => DType::F32,
            TensorData::U8(_) => DType::U8,
        }
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            TensorData::F32(v) => Some(v),
            TensorData::U8(_) => None,
        }
    }

    pub fn as_u8(&self) -> Option<&[u8]> {
        match &self.data {
            TensorData::U8(v) => Some(v),
            TensorData::F32(_) => None,
        }
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.cols() + col) * self.channels() + ch
    }

    /// Element at (row, col, ch) widened to f32. `ch` must be 0 for rank-2 grids.
    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f32 {
        self.value(self.index(row, col, ch))
    }

    #[inline]
    pub fn value(&self, flat: usize) -> f32 {
        match &self.data {
            TensorData::F32(v) => v[flat],
            TensorData::U8(v) => f32::from(v[flat]),
        }
    }

    pub fn to_f32_vec(&self) -> Vec<f32> {
        match &self.data {
            TensorData::F32(v) => v.clone(),
            TensorData::U8(v) => v.iter().map(|&b| f32::from(b)).collect(),
        }
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        (0..self.len()).map(|i| f64::from(self.value(i))).collect()
    }

    /// Same payload under new extents.
    pub fn reshaped(&self, dims: &[usize]) -> Result<Self> {
        check_dims(dims, self.len())?;
        Ok(TensorGrid {
            dims: dims.to_vec(),
            data: self.data.clone(),
        })
    }

    /// (rows, cols) with any third extent dropped.
    pub fn plane_dims(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn encoded_len(&self) -> usize {
        FIXED_HEADER_LEN + 4 * self.rank() + self.len() * self.dtype().size()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.encoded_len());
        buf.extend_from_slice(MAGIC);
        buf.push(VERSION);
        buf.push(self.dtype().code());
        buf.push(self.rank() as u8);
        buf.push(0);
        for &d in &self.dims {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &self.data {
            TensorData::F32(v) => {
                for x in v {
                    buf.extend_from_slice(&x.to_le_bytes());
                }
            }
            TensorData::U8(v) => buf.extend_from_slice(v),
        }
        buf
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < FIXED_HEADER_LEN {
            return Err(Error::format(
                "header",
                format!("need {FIXED_HEADER_LEN} bytes, got {}", bytes.len()),
            ));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::format(
                "magic",
                format!("expected \"STN3\", got {:?}", String::from_utf8_lossy(&bytes[..4])),
            ));
        }
        if bytes[4] != VERSION {
            return Err(Error::format("version", format!("unsupported version {}", bytes[4])));
        }
        let dtype = DType::from_code(bytes[5])
            .ok_or_else(|| Error::format("dtype", format!("unsupported dtype code {}", bytes[5])))?;
        let rank = bytes[6] as usize;
        if !(2..=3).contains(&rank) {
            return Err(Error::format("rank", format!("unsupported rank {rank}")));
        }
        if bytes[7] != 0 {
            return Err(Error::format("pad", format!("pad byte must be 0, got {}", bytes[7])));
        }
        let dims_end = FIXED_HEADER_LEN + 4 * rank;
        if bytes.len() < dims_end {
            return Err(Error::format("dims", "truncated extents"));
        }
        let dims: Vec<usize> = bytes[FIXED_HEADER_LEN..dims_end]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        if dims.contains(&0) {
            return Err(Error::format("dims", format!("zero extent in {dims:?}")));
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::format("dims", "element count overflows"))?;
        let payload = &bytes[dims_end..];
        let expected = count
            .checked_mul(dtype.size())
            .ok_or_else(|| Error::format("dims", "payload size overflows"))?;
        if payload.len() != expected {
            return Err(Error::format(
                "payload",
                format!("expected {expected} bytes, got {}", payload.len()),
            ));
        }
        match dtype {
            DType::F32 => {
                let data = payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                TensorGrid::from_f32(&dims, data)
            }
            DType::U8 => TensorGrid::from_u8(&dims, payload.to_vec()),
        }
    }
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<TensorGrid> {
    let bytes = std::fs::read(path)?;
    TensorGrid::from_bytes(&bytes)
}

/// Writes the STN3 encoding via a temporary file and rename.
pub fn write_tensor(grid: &TensorGrid, path: impl AsRef<Path>) -> Result<()> {
    fsio::write_atomic(path.as_ref(), &grid.to_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_by_two_f32_layout() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"STN3");
        bytes.extend_from_slice(&[1, 0, 2, 0]);
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        for v in [1.0f32, 2.0, 3.0, 4.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let grid = TensorGrid::from_bytes(&bytes).unwrap();
        assert_eq!(grid.dims(), &[2, 2]);
        assert_eq!(grid.as_f32().unwrap(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(grid.get(1, 0, 0), 3.0);
        assert_eq!(grid.to_bytes(), bytes);
    }

    #[test]
    fn single_value_encoding_size() {
        let grid = TensorGrid::from_f32(&[1, 1], vec![0.5]).unwrap();
        let bytes = grid.to_bytes();
        // 8 fixed bytes + 2 extents of 4 bytes, then one f32.
        assert_eq!(bytes.len(), 16 + 4);
        assert_eq!(&bytes[16..], &0.5f32.to_le_bytes());
    }

    #[test]
    fn bad_magic_names_field() {
        let mut bytes = TensorGrid::from_u8(&[1, 1], vec![7]).unwrap().to_bytes();
        bytes[..4].copy_from_slice(b"XXXX");
        match TensorGrid::from_bytes(&bytes) {
            Err(Error::Format { field, .. }) => assert_eq!(field, "magic"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_and_unsupported_fields() {
        let good = TensorGrid::from_f32(&[2, 3], vec![0.0; 6]).unwrap().to_bytes();
        let field_of = |b: &[u8]| match TensorGrid::from_bytes(b) {
            Err(Error::Format { field, .. }) => field,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(field_of(&good[..good.len() - 1]), "payload");
        assert_eq!(field_of(&good[..10]), "dims");
        assert_eq!(field_of(&good[..5]), "header");
        let mut b = good.clone();
        b[5] = 9;
        assert_eq!(field_of(&b), "dtype");
        let mut b = good.clone();
        b[6] = 4;
        assert_eq!(field_of(&b), "rank");
        let mut b = good.clone();
        b[4] = 2;
        assert_eq!(field_of(&b), "version");
        let mut b = good;
        b[7] = 1;
        assert_eq!(field_of(&b), "pad");
    }

    #[test]
    fn rank_four_rejected() {
        assert!(matches!(
            TensorGrid::from_f32(&[1, 1, 1, 1], vec![0.0]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            TensorGrid::from_f32(&[2, 2], vec![0.0; 3]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn file_roundtrip_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let grid = TensorGrid::from_f32(&[2, 2, 3], (0..12).map(|i| i as f32 * 0.25).collect()).unwrap();
        let a = dir.path().join("a.stn3");
        let b = dir.path().join("b.stn3");
        write_tensor(&grid, &a).unwrap();
        write_tensor(&grid, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(read_tensor(&a).unwrap(), grid);
    }

    fn arb_grid() -> impl Strategy<Value = TensorGrid> {
        (prop::collection::vec(1usize..6, 2..=3), any::<bool>()).prop_flat_map(|(dims, is_f32)| {
            let n: usize = dims.iter().product();
            if is_f32 {
                prop::collection::vec(-1e6f32..1e6, n)
                    .prop_map(move |v| TensorGrid::from_f32(&dims, v).unwrap())
                    .boxed()
            } else {
                prop::collection::vec(any::<u8>(), n)
                    .prop_map(move |v| TensorGrid::from_u8(&dims, v).unwrap())
                    .boxed()
            }
        })
    }

    proptest! {
        #[test]
        fn bytes_roundtrip(grid in arb_grid()) {
            let bytes = grid.to_bytes();
            prop_assert_eq!(bytes.len(), grid.encoded_len());
            prop_assert_eq!(TensorGrid::from_bytes(&bytes).unwrap(), grid);
        }
    }
}
