//! Round-trips a grid through the STN3 file format.

use stairkit::{read_tensor, write_tensor, TensorGrid};

fn main() -> stairkit::Result<()> {
    let grid = TensorGrid::from_f32(&[2, 3, 2], (0..12).map(|v| v as f32 * 0.5).collect())?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("grid.stn3");
    write_tensor(&grid, &path)?;

    let bytes = std::fs::read(&path)?;
    println!("{} bytes on disk, header {:02x?}", bytes.len(), &bytes[..8]);
    let back = read_tensor(&path)?;
    assert_eq!(back, grid);
    println!("dims {:?}, value at (1, 2, 1) = {}", back.dims(), back.get(1, 2, 1));
    Ok(())
}
