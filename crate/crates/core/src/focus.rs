//! Space-to-depth slicing that feeds the shared stem of the network.
//!
//! Each 2x2 pixel block becomes four channel blocks ordered
//! (even row, even col), (odd row, even col), (even row, odd col),
//! (odd row, odd col); channels inside a block keep their input order.

use crate::error::{Error, Result};
use crate::tensor::{TensorData, TensorGrid};

const OFFSETS: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

/// Source flat index for each output flat index.
fn gather_indices(h: usize, w: usize, c: usize) -> Vec<usize> {
    let (oh, ow) = (h / 2, w / 2);
    let mut idx = Vec::with_capacity(h * w * c);
    for r in 0..oh {
        for col in 0..ow {
            for &(dr, dc) in &OFFSETS {
                let base = ((2 * r + dr) * w + (2 * col + dc)) * c;
                idx.extend(base..base + c);
            }
        }
    }
    idx
}

fn permute(grid: &TensorGrid, dims: &[usize], src_of: &[usize], forward: bool) -> Result<TensorGrid> {
    fn apply<T: Copy + Default>(v: &[T], src_of: &[usize], forward: bool) -> Vec<T> {
        let mut out = vec![T::default(); v.len()];
        if forward {
            for (o, &s) in out.iter_mut().zip(src_of) {
                *o = v[s];
            }
        } else {
            for (&x, &s) in v.iter().zip(src_of) {
                out[s] = x;
            }
        }
        out
    }
    match grid.data() {
        TensorData::F32(v) => TensorGrid::from_f32(dims, apply(v, src_of, forward)),
        TensorData::U8(v) => TensorGrid::from_u8(dims, apply(v, src_of, forward)),
    }
}

/// H x W x C -> (H/2) x (W/2) x 4C.
pub fn focus_slice(image: &TensorGrid) -> Result<TensorGrid> {
    if image.rank() != 3 {
        return Err(Error::Dimension(format!(
            "focus_slice needs a rank-3 grid, got rank {}",
            image.rank()
        )));
    }
    let (h, w, c) = (image.rows(), image.cols(), image.channels());
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Dimension(format!("height and width must be even, got {h}x{w}")));
    }
    permute(image, &[h / 2, w / 2, 4 * c], &gather_indices(h, w, c), true)
}

/// Inverse of [`focus_slice`]: (H/2) x (W/2) x 4C -> H x W x C.
pub fn focus_unslice(sliced: &TensorGrid) -> Result<TensorGrid> {
    if sliced.rank() != 3 || !sliced.channels().is_multiple_of(4) {
        return Err(Error::Dimension(format!(
            "focus_unslice needs rank 3 with channels divisible by 4, got {:?}",
            sliced.dims()
        )));
    }
    let (h, w, c) = (2 * sliced.rows(), 2 * sliced.cols(), sliced.channels() / 4);
    permute(sliced, &[h, w, c], &gather_indices(h, w, c), false)
}
