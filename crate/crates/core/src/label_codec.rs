//! Ground-truth line encoding into per-kind heatmap/location grids, and the
//! matching per-cell decoding.
//!
//! Every grid cell a line passes through receives a confidence drawn from a
//! Gaussian of the distance to the nearer line endpoint, with the standard
//! deviation set to half the line length. Endpoint cells therefore peak at
//! 1.0 and the midpoint bottoms out at exp(-1/2). The cell also stores the
//! line's clipped sub-segment inside it, normalized to the cell's upper-left
//! corner and stride.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::{GridGeometry, LineKind, LineSegment};
use crate::tensor::{read_tensor, write_tensor, TensorGrid};

/// One decoded grid cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellDetection {
    pub row: usize,
    pub col: usize,
    pub confidence: f64,
    /// (x1, y1, x2, y2) relative to the cell's upper-left corner, in strides.
    pub endpoints: [f64; 4],
    pub kind: LineKind,
}

/// Heatmap (rows x cols x 1) and locations (rows x cols x 4) for one line kind.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelPair {
    pub heatmap: TensorGrid,
    pub locations: TensorGrid,
    pub kind: LineKind,
}

impl LabelPair {
    pub fn zeros(geom: &GridGeometry, kind: LineKind) -> Self {
        let (r, c) = (geom.grid_rows(), geom.grid_cols());
        LabelPair {
            heatmap: TensorGrid::zeros_f32(&[r, c, 1]).expect("positive extents"),
            locations: TensorGrid::zeros_f32(&[r, c, 4]).expect("positive extents"),
            kind,
        }
    }

    /// Checks extents agree with each other (and with `geom` when given).
    pub fn validate(&self, geom: Option<&GridGeometry>) -> Result<()> {
        let (hr, hc) = self.heatmap.plane_dims();
        if self.heatmap.channels() != 1 {
            return Err(Error::Shape(format!(
                "heatmap must have 1 channel, got {:?}",
                self.heatmap.dims()
            )));
        }
        if self.locations.rank() != 3 || self.locations.channels() != 4 || self.locations.plane_dims() != (hr, hc) {
            return Err(Error::Shape(format!(
                "locations {:?} do not match heatmap {:?}",
                self.locations.dims(),
                self.heatmap.dims()
            )));
        }
        if let Some(g) = geom {
            if (hr, hc) != (g.grid_rows(), g.grid_cols()) {
                return Err(Error::Shape(format!(
                    "label grid {hr}x{hc} does not match geometry {}x{}",
                    g.grid_rows(),
                    g.grid_cols()
                )));
            }
        }
        Ok(())
    }

    pub fn heat_path(stem: &Path, kind: LineKind) -> PathBuf {
        suffixed(stem, &format!("heat.{kind}.stn3"))
    }

    pub fn loc_path(stem: &Path, kind: LineKind) -> PathBuf {
        suffixed(stem, &format!("loc.{kind}.stn3"))
    }

    /// Writes `<stem>.heat.<kind>.stn3` and `<stem>.loc.<kind>.stn3`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        write_tensor(&self.heatmap, Self::heat_path(stem, self.kind))?;
        write_tensor(&self.locations, Self::loc_path(stem, self.kind))
    }

    pub fn load(stem: &Path, kind: LineKind) -> Result<Self> {
        let heatmap = read_tensor(Self::heat_path(stem, kind))?;
        let heatmap = if heatmap.rank() == 2 {
            heatmap.reshaped(&[heatmap.rows(), heatmap.cols(), 1])?
        } else {
            heatmap
        };
        let pair = LabelPair {
            heatmap,
            locations: read_tensor(Self::loc_path(stem, kind))?,
            kind,
        };
        pair.validate(None)?;
        Ok(pair)
    }
}

fn suffixed(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

/// Gaussian confidence of an on-line point: exp(-d^2 / (2 sigma^2)) with d the
/// distance to the nearer endpoint and sigma = |L| / 2.
pub fn gaussian_response(x: f64, y: f64, line: &LineSegment) -> Result<f64> {
    let len = line.length();
    if !(len > 0.0) {
        return Err(Error::DegenerateLine(format!(
            "zero-length {} line at ({}, {})",
            line.kind, line.x1, line.y1
        )));
    }
    let sigma = 0.5 * len;
    let d1 = (x - line.x1).powi(2) + (y - line.y1).powi(2);
    let d2 = (x - line.x2).powi(2) + (y - line.y2).powi(2);
    Ok((-d1.min(d2) / (2.0 * sigma * sigma)).exp())
}

/// (row, col) of the cell holding pixel (x, y).
pub fn pixel_to_cell(x: f64, y: f64, geom: &GridGeometry) -> Result<(usize, usize)> {
    if !geom.contains(x, y) {
        return Err(Error::Bounds(format!(
            "pixel ({x}, {y}) outside {}x{} image",
            geom.input_w(),
            geom.input_h()
        )));
    }
    let row = ((y / geom.stride_h()).floor() as usize).min(geom.grid_rows() - 1);
    let col = ((x / geom.stride_w()).floor() as usize).min(geom.grid_cols() - 1);
    Ok((row, col))
}

/// Sub-segment of `line` inside the cell, normalized to the cell corner and
/// clamped to [0, 1].
pub fn normalized_clip(line: &LineSegment, row: usize, col: usize, geom: &GridGeometry) -> [f64; 4] {
    let rect = geom.cell_rect(row, col);
    let (sw, sh) = (geom.stride_w(), geom.stride_h());
    let norm = |x: f64, y: f64| {
        (
            ((x - rect[0]) / sw).clamp(0.0, 1.0),
            ((y - rect[1]) / sh).clamp(0.0, 1.0),
        )
    };
    match line.clip_to_rect(rect) {
        Some(c) => {
            let (a, b) = (norm(c.x1, c.y1), norm(c.x2, c.y2));
            [a.0, a.1, b.0, b.1]
        }
        // Rounding can leave a sample a hair outside its cell; collapse to it.
        None => {
            let (cx, cy) = (line.x1.clamp(rect[0], rect[2]), line.y1.clamp(rect[1], rect[3]));
            let a = norm(cx, cy);
            [a.0, a.1, a.0, a.1]
        }
    }
}

fn encode_kind(lines: &[&LineSegment], geom: &GridGeometry, kind: LineKind) -> Result<LabelPair> {
    let n_cells = geom.cell_count();
    let mut heat = vec![0.0f64; n_cells];
    let mut owner: Vec<Option<usize>> = vec![None; n_cells];
    let step = geom.raster_step();

    for (li, line) in lines.iter().enumerate() {
        let len = line.length();
        let samples = (len / step).ceil().max(1.0) as usize;
        for i in 0..=samples {
            let (x, y) = line.point_at(i as f64 / samples as f64);
            let (row, col) = pixel_to_cell(x, y, geom)?;
            let cell = row * geom.grid_cols() + col;
            let response = gaussian_response(x, y, line)?;
            if response > heat[cell] {
                heat[cell] = response;
                owner[cell] = Some(li);
            }
        }
    }

    let mut heat_out = vec![0.0f32; n_cells];
    let mut loc_out = vec![0.0f32; n_cells * 4];
    for cell in 0..n_cells {
        if let Some(li) = owner[cell] {
            let (row, col) = (cell / geom.grid_cols(), cell % geom.grid_cols());
            heat_out[cell] = heat[cell] as f32;
            let loc = normalized_clip(lines[li], row, col, geom);
            for (dst, v) in loc_out[cell * 4..cell * 4 + 4].iter_mut().zip(loc) {
                *dst = v as f32;
            }
        }
    }
    let (r, c) = (geom.grid_rows(), geom.grid_cols());
    Ok(LabelPair {
        heatmap: TensorGrid::from_f32(&[r, c, 1], heat_out)?,
        locations: TensorGrid::from_f32(&[r, c, 4], loc_out)?,
        kind,
    })
}

/// Encodes ground-truth lines into (convex, concave) label pairs.
///
/// Lines are sampled every `geom.raster_step()` pixels; a cell keeps the
/// highest response seen in it and the clipped sub-segment of the line that
/// produced it.
pub fn encode_lines(lines: &[LineSegment], geom: &GridGeometry) -> Result<(LabelPair, LabelPair)> {
    for line in lines {
        line.check_bounds(geom)?;
        if line.is_degenerate() {
            return Err(Error::DegenerateLine(format!(
                "zero-length {} line at ({}, {})",
                line.kind, line.x1, line.y1
            )));
        }
    }
    let of_kind = |kind| lines.iter().filter(|l| l.kind == kind).collect::<Vec<_>>();
    Ok((
        encode_kind(&of_kind(LineKind::Convex), geom, LineKind::Convex)?,
        encode_kind(&of_kind(LineKind::Concave), geom, LineKind::Concave)?,
    ))
}

/// Cells whose confidence is nonzero and at least `threshold`, sorted by
/// confidence descending, then (row, col) ascending.
pub fn decode_cells(labels: &LabelPair, threshold: f64) -> Vec<CellDetection> {
    let heat = &labels.heatmap;
    let loc = &labels.locations;
    let (rows, cols) = heat.plane_dims();
    let mut out = Vec::new();
    for row in 0..rows {
        for col in 0..cols {
            let conf = f64::from(heat.get(row, col, 0));
            if conf > 0.0 && conf >= threshold {
                let mut endpoints = [0.0; 4];
                for (i, e) in endpoints.iter_mut().enumerate() {
                    *e = f64::from(loc.get(row, col, i));
                }
                out.push(CellDetection {
                    row,
                    col,
                    confidence: conf,
                    endpoints,
                    kind: labels.kind,
                });
            }
        }
    }
    sort_detections(&mut out);
    out
}

pub(crate) fn sort_detections(dets: &mut [CellDetection]) {
    dets.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then((a.row, a.col).cmp(&(b.row, b.col)))
    });
}

/// Denormalizes a cell's endpoints into input pixels.
pub fn cell_to_pixels(det: &CellDetection, geom: &GridGeometry) -> LineSegment {
    let (sw, sh) = (geom.stride_w(), geom.stride_h());
    let [x1n, y1n, x2n, y2n] = det.endpoints;
    let (c, r) = (det.col as f64, det.row as f64);
    LineSegment {
        kind: det.kind,
        x1: (c + x1n) * sw,
        y1: (r + y1n) * sh,
        x2: (c + x2n) * sw,
        y2: (r + y2n) * sh,
        score: det.confidence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn horiz(x1: f64, x2: f64, y: f64) -> LineSegment {
        LineSegment::new(LineKind::Convex, (x1, y), (x2, y))
    }

    #[test]
    fn gaussian_values() {
        let l = horiz(0.0, 100.0, 0.0);
        assert!((gaussian_response(50.0, 0.0, &l).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(gaussian_response(0.0, 0.0, &l).unwrap(), 1.0);
        assert!((gaussian_response(25.0, 0.0, &l).unwrap() - (-0.125f64).exp()).abs() < 1e-15);
        let z = horiz(5.0, 5.0, 5.0);
        assert!(matches!(gaussian_response(5.0, 5.0, &z), Err(Error::DegenerateLine(_))));
    }

    #[test]
    fn cell_lookup() {
        let g = GridGeometry::default();
        assert_eq!(pixel_to_cell(100.0, 200.0, &g).unwrap(), (25, 6));
        assert_eq!(pixel_to_cell(0.0, 0.0, &g).unwrap(), (0, 0));
        assert_eq!(pixel_to_cell(511.0, 511.0, &g).unwrap(), (63, 31));
        assert!(matches!(pixel_to_cell(512.0, 0.0, &g), Err(Error::Bounds(_))));
        assert!(pixel_to_cell(-0.1, 0.0, &g).is_err());
    }

    #[test]
    fn empty_input_gives_zero_grids() {
        let g = GridGeometry::default();
        let (cv, cc) = encode_lines(&[], &g).unwrap();
        assert!(cv.heatmap.to_f32_vec().iter().all(|&v| v == 0.0));
        assert!(cc.locations.to_f32_vec().iter().all(|&v| v == 0.0));
        assert!(decode_cells(&cv, 0.75).is_empty());
    }

    #[test]
    fn full_width_horizontal_line() {
        let g = GridGeometry::default();
        let (cv, cc) = encode_lines(&[horiz(0.0, 511.0, 100.0)], &g).unwrap();
        let heat = &cv.heatmap;
        let mut nonzero = Vec::new();
        for r in 0..64 {
            for c in 0..32 {
                if heat.get(r, c, 0) > 0.0 {
                    nonzero.push((r, c));
                }
            }
        }
        assert_eq!(nonzero.len(), 32);
        assert!(nonzero.iter().all(|&(r, _)| r == 12));
        assert_eq!(heat.get(12, 0, 0), 1.0);
        assert_eq!(heat.get(12, 31, 0), 1.0);
        assert!(cc.heatmap.to_f32_vec().iter().all(|&v| v == 0.0));
        // Cell 15 is crossed fully at y = 100 -> normalized y = 0.5.
        let loc: Vec<f32> = (0..4).map(|i| cv.locations.get(12, 15, i)).collect();
        assert_eq!(loc, vec![0.0, 0.5, 1.0, 0.5]);
        // Midpoint cell stays above exp(-1/2) minus rasterization slack.
        let mid = heat.get(12, 15, 0).max(heat.get(12, 16, 0)) as f64;
        assert!(mid >= (-0.5f64).exp() - 0.02);
    }

    #[test]
    fn sloped_line_cell_clip_matches_analytic() {
        let g = GridGeometry::default();
        // y = 96 + 0.25 (x - 200) crosses cell (12, 15) = x in [240, 256].
        let line = LineSegment::new(LineKind::Convex, (200.0, 96.0), (300.0, 121.0));
        let (cv, _) = encode_lines(&[line], &g).unwrap();
        let y_in = 96.0 + 0.25 * 40.0;
        let y_out = 96.0 + 0.25 * 56.0;
        let (row, _) = pixel_to_cell(240.0, y_in, &g).unwrap();
        assert_eq!(row, 13);
        let loc: Vec<f64> = (0..4).map(|i| cv.locations.get(13, 15, i) as f64).collect();
        let expect = [0.0, (y_in - 104.0) / 8.0, 1.0, (y_out - 104.0) / 8.0];
        for (a, b) in loc.iter().zip(expect) {
            assert!((a - b).abs() < 1e-6, "{loc:?} vs {expect:?}");
        }
    }

    #[test]
    fn rejects_bad_lines() {
        let g = GridGeometry::default();
        assert!(matches!(
            encode_lines(&[horiz(0.0, 512.0, 10.0)], &g),
            Err(Error::Bounds(_))
        ));
        assert!(matches!(
            encode_lines(&[horiz(5.0, 5.0, 10.0)], &g),
            Err(Error::DegenerateLine(_))
        ));
    }

    #[test]
    fn decode_orders_by_confidence() {
        let g = GridGeometry::default();
        let mut heat = vec![0.0f32; g.cell_count()];
        heat[3] = 0.8;
        heat[70] = 0.9;
        heat[5] = 0.8;
        let pair = LabelPair {
            heatmap: TensorGrid::from_f32(&[64, 32, 1], heat).unwrap(),
            locations: TensorGrid::zeros_f32(&[64, 32, 4]).unwrap(),
            kind: LineKind::Concave,
        };
        let dets = decode_cells(&pair, 0.5);
        let order: Vec<(usize, usize)> = dets.iter().map(|d| (d.row, d.col)).collect();
        assert_eq!(order, vec![(2, 6), (0, 3), (0, 5)]);
        assert_eq!(dets[0].kind, LineKind::Concave);
    }

    #[test]
    fn cell_to_pixels_arithmetic() {
        let g = GridGeometry::default();
        let det = CellDetection {
            row: 12,
            col: 0,
            confidence: 0.9,
            endpoints: [0.0, 0.5, 1.0, 0.5],
            kind: LineKind::Convex,
        };
        let s = cell_to_pixels(&det, &g);
        assert_eq!((s.x1, s.y1, s.x2, s.y2, s.score), (0.0, 100.0, 16.0, 100.0, 0.9));
        let zero = CellDetection {
            row: 0,
            col: 0,
            confidence: 1.0,
            endpoints: [0.0; 4],
            kind: LineKind::Convex,
        };
        assert!(cell_to_pixels(&zero, &g).is_degenerate());
    }

    #[test]
    fn label_files_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridGeometry::default();
        let (cv, _) = encode_lines(&[horiz(3.0, 300.0, 40.5)], &g).unwrap();
        let stem = dir.path().join("scene");
        cv.save(&stem).unwrap();
        assert!(dir.path().join("scene.heat.convex.stn3").exists());
        assert!(dir.path().join("scene.loc.convex.stn3").exists());
        assert_eq!(LabelPair::load(&stem, LineKind::Convex).unwrap(), cv);
    }

    fn arb_line() -> impl Strategy<Value = LineSegment> {
        (
            0.0f64..511.9,
            0.0f64..511.9,
            0.0f64..511.9,
            0.0f64..511.9,
            any::<bool>(),
        )
            .prop_filter("non-degenerate", |(a, b, c, d, _)| (a - c).hypot(b - d) > 1.0)
            .prop_map(|(a, b, c, d, convex)| {
                let kind = if convex { LineKind::Convex } else { LineKind::Concave };
                LineSegment::new(kind, (a, b), (c, d))
            })
    }

    proptest! {
        #[test]
        fn response_symmetric_under_endpoint_swap(line in arb_line(), t in 0.0f64..1.0) {
            let (x, y) = line.point_at(t);
            let swapped = LineSegment { x1: line.x2, y1: line.y2, x2: line.x1, y2: line.y1, ..line };
            prop_assert_eq!(
                gaussian_response(x, y, &line).unwrap(),
                gaussian_response(x, y, &swapped).unwrap()
            );
        }

        #[test]
        fn encoding_invariants(lines in prop::collection::vec(arb_line(), 0..5)) {
            let g = GridGeometry::default();
            let (cv, cc) = encode_lines(&lines, &g).unwrap();
            for pair in [&cv, &cc] {
                let has_lines = lines.iter().any(|l| l.kind == pair.kind);
                let heat = pair.heatmap.to_f32_vec();
                let loc = pair.locations.to_f32_vec();
                prop_assert_eq!(heat.iter().any(|&v| v > 0.0), has_lines);
                for (cell, &h) in heat.iter().enumerate() {
                    prop_assert!((0.0..=1.0).contains(&h));
                    let l = &loc[cell * 4..cell * 4 + 4];
                    prop_assert!(l.iter().all(|v| (0.0..=1.0).contains(v)));
                    if h == 0.0 {
                        prop_assert!(l.iter().all(|&v| v == 0.0));
                    }
                }
                // Decoding at 0.5 keeps exactly the nonzero cells at or above it.
                let expected = heat.iter().filter(|&&v| v > 0.0 && v as f64 >= 0.5).count();
                prop_assert_eq!(decode_cells(pair, 0.5).len(), expected);
            }
        }
    }
}
