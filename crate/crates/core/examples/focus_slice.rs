//! Space-to-depth slicing of an RGB image into 12 half-resolution channels.

use stairkit::{focus_slice, focus_unslice, TensorGrid};

fn main() -> stairkit::Result<()> {
    let (h, w) = (4, 6);
    let rgb = TensorGrid::from_f32(&[h, w, 3], (0..h * w * 3).map(|v| v as f32).collect())?;
    let sliced = focus_slice(&rgb)?;
    println!("{:?} -> {:?}", rgb.dims(), sliced.dims());
    let first: Vec<f32> = (0..12).map(|c| sliced.get(0, 0, c)).collect();
    println!("output pixel (0, 0): {first:?}");
    assert_eq!(focus_unslice(&sliced)?, rgb);
    Ok(())
}
