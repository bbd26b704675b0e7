//! Encodes two stair lines into heatmap/location grids and decodes them back.

use stairkit::{cell_to_pixels, decode_cells, encode_lines, GridGeometry, LineKind, LineSegment};

fn main() -> stairkit::Result<()> {
    let geom = GridGeometry::default();
    let lines = [
        LineSegment::new(LineKind::Convex, (64.0, 180.0), (448.0, 196.0)),
        LineSegment::new(LineKind::Concave, (60.0, 240.0), (452.0, 250.0)),
    ];
    let (convex, concave) = encode_lines(&lines, &geom)?;
    for labels in [&convex, &concave] {
        let cells = decode_cells(labels, 0.0);
        println!("{}: {} cells", labels.kind, cells.len());
        for det in cells.iter().take(3) {
            let seg = cell_to_pixels(det, &geom);
            println!(
                "  cell ({:2}, {:2}) conf {:.4} -> ({:.2}, {:.2})-({:.2}, {:.2})",
                det.row, det.col, det.confidence, seg.x1, seg.y1, seg.x2, seg.y2
            );
        }
    }
    Ok(())
}
