//! Shared image-space types: line kinds, segments, fitted line equations and
//! the cell grid laid over the input image.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Stair line class. Convex lines are tread front edges, concave lines are
/// tread/riser junctions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LineKind {
    Convex,
    Concave,
}

impl LineKind {
    pub const ALL: [LineKind; 2] = [LineKind::Convex, LineKind::Concave];

    pub fn as_str(self) -> &'static str {
        match self {
            LineKind::Convex => "convex",
            LineKind::Concave => "concave",
        }
    }
}

impl fmt::Display for LineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "convex" => Ok(LineKind::Convex),
            "concave" => Ok(LineKind::Concave),
            other => Err(Error::Parse(format!("unknown line kind {other:?}"))),
        }
    }
}

/// Cell grid over the input image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridGeometry {
    input_h: usize,
    input_w: usize,
    grid_rows: usize,
    grid_cols: usize,
}

impl Default for GridGeometry {
    /// 512x512 input, 64 rows x 32 cols: strides 8 (vertical) and 16 (horizontal).
    fn default() -> Self {
        GridGeometry {
            input_h: 512,
            input_w: 512,
            grid_rows: 64,
            grid_cols: 32,
        }
    }
}

impl GridGeometry {
    pub fn new(input_h: usize, input_w: usize, grid_rows: usize, grid_cols: usize) -> Result<Self> {
        if input_h == 0 || input_w == 0 || grid_rows == 0 || grid_cols == 0 {
            return Err(Error::Config("grid geometry extents must be positive".into()));
        }
        if !input_h.is_multiple_of(grid_rows) || !input_w.is_multiple_of(grid_cols) {
            return Err(Error::Config(format!(
                "input {input_h}x{input_w} not divisible by grid {grid_rows}x{grid_cols}"
            )));
        }
        Ok(GridGeometry {
            input_h,
            input_w,
            grid_rows,
            grid_cols,
        })
    }

    pub fn input_h(&self) -> usize {
        self.input_h
    }
    pub fn input_w(&self) -> usize {
        self.input_w
    }
    pub fn grid_rows(&self) -> usize {
        self.grid_rows
    }
    pub fn grid_cols(&self) -> usize {
        self.grid_cols
    }
    pub fn stride_h(&self) -> f64 {
        (self.input_h / self.grid_rows) as f64
    }
    pub fn stride_w(&self) -> f64 {
        (self.input_w / self.grid_cols) as f64
    }
    pub fn cell_count(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    /// Sampling step used when rasterizing lines into cells.
    pub fn raster_step(&self) -> f64 {
        self.stride_w().min(self.stride_h()) / 4.0
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.input_w as f64 && y < self.input_h as f64
    }

    /// Pixel rectangle [x0, x1] x [y0, y1] covered by a cell.
    pub fn cell_rect(&self, row: usize, col: usize) -> [f64; 4] {
        let (sw, sh) = (self.stride_w(), self.stride_h());
        [
            col as f64 * sw,
            row as f64 * sh,
            (col + 1) as f64 * sw,
            (row + 1) as f64 * sh,
        ]
    }
}

/// One stair line in input-pixel coordinates, left endpoint first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSegment {
    pub kind: LineKind,
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub score: f64,
}

impl LineSegment {
    /// Builds a segment with endpoints reordered so that x1 <= x2 (and y1 <= y2
    /// when x1 == x2).
    pub fn new(kind: LineKind, a: (f64, f64), b: (f64, f64)) -> Self {
        let (p, q) = if (a.0, a.1) <= (b.0, b.1) { (a, b) } else { (b, a) };
        LineSegment {
            kind,
            x1: p.0,
            y1: p.1,
            x2: q.0,
            y2: q.1,
            score: 1.0,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = score;
        self
    }

    pub fn length(&self) -> f64 {
        (self.x2 - self.x1).hypot(self.y2 - self.y1)
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.length() > 0.0)
    }

    pub fn midpoint(&self) -> (f64, f64) {
        (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))
    }

    pub fn point_at(&self, t: f64) -> (f64, f64) {
        (self.x1 + t * (self.x2 - self.x1), self.y1 + t * (self.y2 - self.y1))
    }

    pub fn check_bounds(&self, geom: &GridGeometry) -> Result<()> {
        if geom.contains(self.x1, self.y1) && geom.contains(self.x2, self.y2) {
            Ok(())
        } else {
            Err(Error::Bounds(format!(
                "{} segment ({}, {})-({}, {}) outside {}x{} image",
                self.kind,
                self.x1,
                self.y1,
                self.x2,
                self.y2,
                geom.input_w(),
                geom.input_h()
            )))
        }
    }

    /// Sub-segment inside the closed rectangle [x0, x1] x [y0, y1], keeping
    /// endpoint order. `None` when the segment misses the rectangle.
    pub fn clip_to_rect(&self, rect: [f64; 4]) -> Option<LineSegment> {
        let (t0, t1) = clip_parametric((self.x1, self.y1), (self.x2, self.y2), rect)?;
        let a = self.point_at(t0);
        let b = self.point_at(t1);
        Some(LineSegment {
            kind: self.kind,
            x1: a.0,
            y1: a.1,
            x2: b.0,
            y2: b.1,
            score: self.score,
        })
    }
}

/// Liang-Barsky clipping of p + t (q - p), t in [0, 1], against a closed rectangle.
pub(crate) fn clip_parametric(p: (f64, f64), q: (f64, f64), rect: [f64; 4]) -> Option<(f64, f64)> {
    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    let checks = [
        (-dx, p.0 - rect[0]),
        (dx, rect[2] - p.0),
        (-dy, p.1 - rect[1]),
        (dy, rect[3] - p.1),
    ];
    for (den, num) in checks {
        if den == 0.0 {
            if num < 0.0 {
                return None;
            }
        } else {
            let t = num / den;
            if den < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

/// Slope-intercept line y = k x + b valid over [x_min, x_max].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineEquation {
    pub kind: LineKind,
    pub k: f64,
    pub b: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// Number of grid cells supporting the fit.
    pub source_cells: usize,
}

impl LineEquation {
    pub fn y_at(&self, x: f64) -> f64 {
        self.k * x + self.b
    }

    pub fn mean_y(&self) -> f64 {
        self.y_at(0.5 * (self.x_min + self.x_max))
    }

    pub fn left_point(&self) -> (f64, f64) {
        (self.x_min, self.y_at(self.x_min))
    }

    pub fn right_point(&self) -> (f64, f64) {
        (self.x_max, self.y_at(self.x_max))
    }
}
