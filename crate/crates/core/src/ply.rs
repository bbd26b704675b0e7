//! ASCII PLY output for reconstructed clouds, plus a reader for the same
//! subset (float x/y/z, optional uchar red/green/blue).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio;
use crate::reconstruct::PointCloud;

pub fn ply_string(cloud: &PointCloud) -> String {
    let mut s = String::with_capacity(64 + cloud.len() * 32);
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "comment class {}", cloud.class);
    let _ = writeln!(s, "element vertex {}", cloud.len());
    s.push_str("property float x\nproperty float y\nproperty float z\n");
    if cloud.colors.is_some() {
        s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    s.push_str("end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(s, "{} {} {}", round6(p[0]), round6(p[1]), round6(p[2]));
        if let Some(colors) = &cloud.colors {
            let c = colors[i];
            let _ = write!(s, " {} {} {}", c[0], c[1], c[2]);
        }
        s.push('\n');
    }
    s
}

/// Six-decimal rounding printed in shortest form ("2", not "2.000000").
fn round6(v: f64) -> f64 {
    let r = (v * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn write_ply(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    fsio::write_atomic(path.as_ref(), ply_string(cloud).as_bytes())
}

/// Vertices read back from an ASCII PLY file.
#[derive(Clone, Debug, PartialEq)]
pub struct PlyVertices {
    pub points: Vec<[f64; 3]>,
    pub colors: Option<Vec<[u8; 3]>>,
}

pub fn parse_ply(text: &str) -> Result<PlyVertices> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::Parse("missing ply magic".into()));
    }
    let mut count = None;
    let mut props = Vec::new();
    loop {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse("missing end_header".into()))?
            .trim();
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", fmt, _] if *fmt != "ascii" => return Err(Error::Parse(format!("unsupported format {fmt}"))),
            ["element", "vertex", n] => count = Some(n.parse::<usize>().map_err(|e| Error::Parse(e.to_string()))?),
            ["property", _, name] => props.push(name.to_string()),
            _ => {}
        }
    }
    let count = count.ok_or_else(|| Error::Parse("missing vertex element".into()))?;
    let colored = props.iter().any(|p| p == "red");
    let mut points = Vec::with_capacity(count);
    let mut colors = colored.then(|| Vec::with_capacity(count));
    for _ in 0..count {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse("fewer vertices than declared".into()))?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != props.len() {
            return Err(Error::Parse(format!("vertex line {line:?} has wrong arity")));
        }
        let f = |i: usize| vals[i].parse::<f64>().map_err(|e| Error::Parse(e.to_string()));
        points.push([f(0)?, f(1)?, f(2)?]);
        if let Some(c) = colors.as_mut() {
            let u = |i: usize| vals[i].parse::<u8>().map_err(|e| Error::Parse(e.to_string()));
            c.push([u(3)?, u(4)?, u(5)?]);
        }
    }
    Ok(PlyVertices { points, colors })
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PlyVertices> {
    parse_ply(&std::fs::read_to_string(path)?)
}
