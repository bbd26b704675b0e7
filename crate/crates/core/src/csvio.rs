//! CSV files for line segments and fitted line equations.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;
use crate::geometry::{LineEquation, LineKind, LineSegment};

#[derive(Serialize, Deserialize)]
struct SegmentRow {
    kind: String,
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

#[derive(Serialize, Deserialize)]
struct EquationRow {
    kind: String,
    k: String,
    b: String,
    x_min: String,
    x_max: String,
    cells: usize,
}

fn finish(wtr: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    wtr.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// `kind,x1,y1,x2,y2` with one row per segment.
pub fn lines_to_csv(lines: &[LineSegment]) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for l in lines {
        wtr.serialize(SegmentRow {
            kind: l.kind.to_string(),
            x1: l.x1,
            y1: l.y1,
            x2: l.x2,
            y2: l.y2,
        })?;
    }
    finish(wtr)
}

pub fn lines_from_csv(text: &[u8]) -> Result<Vec<LineSegment>> {
    let mut rdr = csv::Reader::from_reader(text);
    rdr.deserialize::<SegmentRow>()
        .map(|row| {
            let row = row?;
            let kind: LineKind = row.kind.parse()?;
            Ok(LineSegment::new(kind, (row.x1, row.y1), (row.x2, row.y2)))
        })
        .collect()
}

pub fn write_lines_csv(lines: &[LineSegment], path: &Path) -> Result<()> {
    fsio::write_atomic(path, &lines_to_csv(lines)?)
}

pub fn read_lines_csv(path: &Path) -> Result<Vec<LineSegment>> {
    lines_from_csv(&std::fs::read(path)?)
}

/// `kind,k,b,x_min,x_max,cells`, values printed with six decimals.
pub fn equations_to_csv(eqs: &[LineEquation]) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    for e in eqs {
        wtr.serialize(EquationRow {
            kind: e.kind.to_string(),
            k: format!("{:.6}", e.k),
            b: format!("{:.6}", e.b),
            x_min: format!("{:.6}", e.x_min),
            x_max: format!("{:.6}", e.x_max),
            cells: e.source_cells,
        })?;
    }
    finish(wtr)
}

pub fn equations_from_csv(text: &[u8]) -> Result<Vec<LineEquation>> {
    let mut rdr = csv::Reader::from_reader(text);
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
    rdr.deserialize::<EquationRow>()
        .map(|row| {
            let row = row?;
            Ok(LineEquation {
                kind: row.kind.parse()?,
                k: num(&row.k)?,
                b: num(&row.b)?,
                x_min: num(&row.x_min)?,
                x_max: num(&row.x_max)?,
                source_cells: row.cells,
            })
        })
        .collect()
}

pub fn write_equations_csv(eqs: &[LineEquation], path: &Path) -> Result<()> {
    fsio::write_atomic(path, &equations_to_csv(eqs)?)
}

pub fn read_equations_csv(path: &Path) -> Result<Vec<LineEquation>> {
    equations_from_csv(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_roundtrip() {
        let lines = vec![
            LineSegment::new(LineKind::Convex, (10.0, 20.5), (300.25, 22.0)),
            LineSegment::new(LineKind::Concave, (5.0, 80.0), (1.0, 90.0)),
        ];
        let text = lines_to_csv(&lines).unwrap();
        assert!(text.starts_with(b"kind,x1,y1,x2,y2\n"));
        assert_eq!(lines_from_csv(&text).unwrap(), lines);
    }

    #[test]
    fn equations_six_decimals() {
        let eq = LineEquation {
            kind: LineKind::Concave,
            k: 1.0 / 3.0,
            b: 12.0,
            x_min: 0.0,
            x_max: 511.5,
            source_cells: 7,
        };
        let text = String::from_utf8(equations_to_csv(&[eq]).unwrap()).unwrap();
        assert_eq!(
            text,
            "kind,k,b,x_min,x_max,cells\nconcave,0.333333,12.000000,0.000000,511.500000,7\n"
        );
        let back = equations_from_csv(text.as_bytes()).unwrap();
        assert!((back[0].k - eq.k).abs() < 1e-6);
        assert_eq!(back[0].source_cells, 7);
    }

    #[test]
    fn bad_kind_is_parse_error() {
        let err = lines_from_csv(b"kind,x1,y1,x2,y2\nramp,0,0,1,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse(_)));
    }
}
