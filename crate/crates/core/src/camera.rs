//! Pinhole intrinsics.
//!
//! Pixel (x, y) names the pixel's top-left corner; rays are cast through the
//! pixel center (x + 0.5, y + 0.5).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const SKEW_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || !fx.is_finite() || !fy.is_finite() {
            return Err(Error::Intrinsics(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        if !cx.is_finite() || !cy.is_finite() {
            return Err(Error::Intrinsics("principal point must be finite".into()));
        }
        Ok(CameraIntrinsics { fx, fy, cx, cy })
    }

    pub fn identity() -> Self {
        CameraIntrinsics {
            fx: 1.0,
            fy: 1.0,
            cx: 0.0,
            cy: 0.0,
        }
    }

    /// Row-major 3x3 matrix with zero skew.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
    }

    /// Camera-frame point seen through the center of pixel (x, y) at depth `z`.
    #[inline]
    pub fn backproject(&self, x: f64, y: f64, z: f64) -> Result<[f64; 3]> {
        if !(z > 0.0) {
            return Err(Error::InvalidDepth(z));
        }
        Ok(self.backproject_unchecked(x, y, z))
    }

    #[inline]
    pub(crate) fn backproject_unchecked(&self, x: f64, y: f64, z: f64) -> [f64; 3] {
        [(x + 0.5 - self.cx) * z / self.fx, (y + 0.5 - self.cy) * z / self.fy, z]
    }

    /// Pixel (top-left convention) whose center images `p`.
    pub fn project(&self, p: [f64; 3]) -> Result<(f64, f64)> {
        let [x, y, z] = p;
        if !(z > 0.0) {
            return Err(Error::BehindCamera(z));
        }
        Ok((self.fx * x / z + self.cx - 0.5, self.fy * y / z + self.cy - 0.5))
    }
}

/// Reads 9 whitespace-separated decimals forming K row-major.
pub fn parse_intrinsics(text: &str) -> Result<CameraIntrinsics> {
    let values = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::Intrinsics(format!("not a number: {tok:?}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != 9 {
        return Err(Error::Intrinsics(format!("expected 9 values, got {}", values.len())));
    }
    if values[1].abs() > SKEW_TOL {
        return Err(Error::Intrinsics(format!("nonzero skew {}", values[1])));
    }
    if values[3] != 0.0 {
        return Err(Error::Intrinsics(format!("K[1][0] must be 0, got {}", values[3])));
    }
    if values[6..] != [0.0, 0.0, 1.0] {
        return Err(Error::Intrinsics(format!(
            "bottom row must be 0 0 1, got {:?}",
            &values[6..]
        )));
    }
    CameraIntrinsics::new(values[0], values[4], values[2], values[5])
}

/// Inverse of [`parse_intrinsics`]; shortest round-trip decimal formatting.
pub fn format_intrinsics(k: &CameraIntrinsics) -> String {
    format!("{} 0 {}\n0 {} {}\n0 0 1\n", k.fx, k.cx, k.fy, k.cy)
}

impl FromStr for CameraIntrinsics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_intrinsics(s)
    }
}

impl fmt::Display for CameraIntrinsics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_intrinsics(self))
    }
}
