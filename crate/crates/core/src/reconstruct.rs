//! Stair surface point clouds from a segmentation mask and an aligned depth
//! matrix.
//!
//! The mask is hardened to one-hot (argmax per pixel), each class plane is
//! multiplied into the depth matrix, and every remaining nonzero depth is
//! back-projected through the inverse intrinsics at the pixel center.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use log::warn;
use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::tensor::{TensorData, TensorGrid};

/// Segmentation channel order is (background, riser, tread).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SurfaceClass {
    Background = 0,
    Riser = 1,
    Tread = 2,
}

impl SurfaceClass {
    pub const ALL: [SurfaceClass; 3] = [SurfaceClass::Background, SurfaceClass::Riser, SurfaceClass::Tread];

    pub fn channel(self) -> usize {
        self as usize
    }

    pub fn from_channel(ch: usize) -> Result<Self> {
        Self::ALL
            .get(ch)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown class id {ch}")))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SurfaceClass::Background => "background",
            SurfaceClass::Riser => "riser",
            SurfaceClass::Tread => "tread",
        }
    }
}

impl fmt::Display for SurfaceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SurfaceClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "background" => Ok(SurfaceClass::Background),
            "riser" => Ok(SurfaceClass::Riser),
            "tread" => Ok(SurfaceClass::Tread),
            other => Err(Error::Config(format!("unknown class {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    /// Camera-frame points in meters, row-major pixel order.
    pub points: Vec<[f64; 3]>,
    pub colors: Option<Vec<[u8; 3]>>,
    pub class: SurfaceClass,
    /// Class pixels skipped because their depth was 0.
    pub dropped: usize,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Valid sensor range, used only to warn about suspicious depths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthRange {
    pub dmin: f64,
    pub dmax: f64,
}

impl Default for DepthRange {
    fn default() -> Self {
        DepthRange { dmin: 0.2, dmax: 10.0 }
    }
}

impl DepthRange {
    pub fn new(dmin: f64, dmax: f64) -> Result<Self> {
        if !(dmin >= 0.0 && dmin <= dmax) {
            return Err(Error::Config(format!("invalid depth range [{dmin}, {dmax}]")));
        }
        Ok(DepthRange { dmin, dmax })
    }

    /// Nonzero depths outside [dmin, dmax].
    pub fn count_outside(&self, depth: &TensorGrid) -> usize {
        (0..depth.len())
            .map(|i| f64::from(depth.value(i)))
            .filter(|&z| z != 0.0 && (z < self.dmin || z > self.dmax))
            .count()
    }

    pub fn warn_outside(&self, depth: &TensorGrid) -> usize {
        let n = self.count_outside(depth);
        if n > 0 {
            warn!("{n} depth values outside [{}, {}] m", self.dmin, self.dmax);
        }
        n
    }
}

/// Element types a grid can hold, widened to f32 in hot loops.
trait Elem: Copy + Send + Sync {
    fn f(self) -> f32;
}

impl Elem for f32 {
    #[inline(always)]
    fn f(self) -> f32 {
        self
    }
}

impl Elem for u8 {
    #[inline(always)]
    fn f(self) -> f32 {
        f32::from(self)
    }
}

/// Binds the grid's payload slice to `$v` so the body is monomorphized per
/// dtype instead of branching per element.
macro_rules! with_slice {
    ($grid:expr, $v:ident => $body:expr) => {
        match $grid.data() {
            TensorData::F32($v) => $body,
            TensorData::U8($v) => $body,
        }
    };
}

fn harden_rows<T: Elem>(scores: &[T], pixels: Range<usize>) -> Vec<u8> {
    let mut out = vec![0u8; pixels.len() * 3];
    for (i, pix) in pixels.enumerate() {
        let s = &scores[pix * 3..pix * 3 + 3];
        let mut best = 0;
        let mut best_v = s[0].f();
        for (ch, v) in s.iter().enumerate().skip(1) {
            if v.f() > best_v {
                best = ch;
                best_v = v.f();
            }
        }
        out[i * 3 + best] = 1;
    }
    out
}

fn class_depth_rows<D: Elem, M: Elem>(depth: &[D], mask: &[M], ch: usize, pixels: Range<usize>) -> Vec<f32> {
    pixels
        .map(|pix| {
            let m = if mask[pix * 3 + ch].f() != 0.0 { 1.0f32 } else { 0.0 };
            depth[pix].f() * m
        })
        .collect()
}

fn backproject_rows<D: Elem>(depth: &[D], w: usize, k: &CameraIntrinsics, rows: Range<usize>) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(rows.len() * w);
    for y in rows {
        let line = &depth[y * w..(y + 1) * w];
        for (x, z) in line.iter().enumerate() {
            let z = z.f();
            if z != 0.0 {
                out.push(k.backproject_unchecked(x as f64, y as f64, f64::from(z)));
            }
        }
    }
    out
}

/// Row-band scheduler. One thread runs bands inline; more threads use a
/// dedicated rayon pool. Band outputs are concatenated in row order.
pub struct Reconstructor {
    pool: Option<rayon::ThreadPool>,
    bands: usize,
}

impl Reconstructor {
    pub fn new(threads: usize) -> Result<Self> {
        if threads == 0 {
            return Err(Error::Config("thread count must be >= 1".into()));
        }
        let pool = if threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| Error::Config(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Reconstructor { pool, bands: threads })
    }

    pub fn single() -> Self {
        Reconstructor { pool: None, bands: 1 }
    }

    fn map_rows<T, F>(&self, rows: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<usize>) -> Vec<T> + Sync,
    {
        match &self.pool {
            None => f(0..rows),
            Some(pool) => {
                let band = rows.div_ceil(self.bands).max(1);
                let ranges: Vec<Range<usize>> = (0..rows).step_by(band).map(|s| s..(s + band).min(rows)).collect();
                let parts: Vec<Vec<T>> = pool.install(|| ranges.into_par_iter().map(&f).collect());
                parts.into_iter().flatten().collect()
            }
        }
    }

    /// Per-pixel argmax to one-hot u8; ties go to the lowest channel.
    pub fn harden_mask(&self, scores: &TensorGrid) -> Result<TensorGrid> {
        check_mask(scores)?;
        let (h, w) = scores.plane_dims();
        let data = with_slice!(scores, v => self.map_rows(h, |rows| harden_rows(v, rows.start * w..rows.end * w)));
        TensorGrid::from_u8(&[h, w, 3], data)
    }

    /// Depth multiplied by the class's 0-1 plane.
    pub fn class_depth(&self, depth: &TensorGrid, mask: &TensorGrid, class: SurfaceClass) -> Result<TensorGrid> {
        check_aligned(depth, mask)?;
        let (h, w) = depth.plane_dims();
        let ch = class.channel();
        let data = with_slice!(depth, d => with_slice!(mask, m => {
            self.map_rows(h, |rows| class_depth_rows(d, m, ch, rows.start * w..rows.end * w))
        }));
        TensorGrid::from_f32(&[h, w], data)
    }

    /// Back-projects every nonzero entry of a class depth matrix.
    pub fn cloud_from_class_depth(
        &self,
        class_depth: &TensorGrid,
        k: &CameraIntrinsics,
        rgb: Option<&TensorGrid>,
        class: SurfaceClass,
    ) -> Result<PointCloud> {
        check_depth(class_depth)?;
        let (h, w) = class_depth.plane_dims();
        if let Some(rgb) = rgb {
            if rgb.rank() != 3 || rgb.channels() != 3 || rgb.plane_dims() != (h, w) {
                return Err(Error::Shape(format!(
                    "rgb {:?} not aligned with depth {h}x{w}",
                    rgb.dims()
                )));
            }
        }
        let points = with_slice!(class_depth, d => self.map_rows(h, |rows| backproject_rows(d, w, k, rows)));
        let colors = rgb.map(|g| {
            self.map_rows(h, |rows| {
                (rows.start * w..rows.end * w)
                    .filter(|&pix| class_depth.value(pix) != 0.0)
                    .map(|pix| [0, 1, 2].map(|i| to_u8(g.value(pix * 3 + i))))
                    .collect()
            })
        });
        Ok(PointCloud {
            points,
            colors,
            class,
            dropped: 0,
        })
    }

    pub fn reconstruct_cloud(
        &self,
        depth: &TensorGrid,
        mask: &TensorGrid,
        k: &CameraIntrinsics,
        class: SurfaceClass,
        rgb: Option<&TensorGrid>,
    ) -> Result<PointCloud> {
        check_depth(depth)?;
        let masked = self.class_depth(depth, mask, class)?;
        let mut cloud = self.cloud_from_class_depth(&masked, k, rgb, class)?;
        let ch = class.channel();
        let class_pixels = (0..depth.len()).filter(|&pix| mask.value(pix * 3 + ch) != 0.0).count();
        cloud.dropped = class_pixels - cloud.points.len();
        Ok(cloud)
    }
}

fn to_u8(v: f32) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn check_mask(mask: &TensorGrid) -> Result<()> {
    if mask.rank() != 3 || mask.channels() != 3 {
        return Err(Error::Shape(format!(
            "segmentation mask must be HxWx3, got {:?}",
            mask.dims()
        )));
    }
    Ok(())
}

fn check_depth(depth: &TensorGrid) -> Result<()> {
    if depth.channels() != 1 {
        return Err(Error::Shape(format!("depth must be HxW, got {:?}", depth.dims())));
    }
    for i in 0..depth.len() {
        let z = depth.value(i);
        if !z.is_finite() || z < 0.0 {
            return Err(Error::InvalidDepth(f64::from(z)));
        }
    }
    Ok(())
}

fn check_aligned(depth: &TensorGrid, mask: &TensorGrid) -> Result<()> {
    check_mask(mask)?;
    if depth.channels() != 1 || depth.plane_dims() != mask.plane_dims() {
        return Err(Error::Shape(format!(
            "depth {:?} and mask {:?} are not aligned",
            depth.dims(),
            mask.dims()
        )));
    }
    Ok(())
}

pub fn harden_mask(scores: &TensorGrid) -> Result<TensorGrid> {
    Reconstructor::single().harden_mask(scores)
}

pub fn class_depth(depth: &TensorGrid, mask: &TensorGrid, class: SurfaceClass) -> Result<TensorGrid> {
    Reconstructor::single().class_depth(depth, mask, class)
}

/// Camera-frame point for pixel (x, y) at depth `z`, through the pixel center.
pub fn backproject_pixel(x: f64, y: f64, z: f64, k: &CameraIntrinsics) -> Result<[f64; 3]> {
    k.backproject(x, y, z)
}

/// One point per pixel where `class` is set and depth is nonzero, in
/// row-major order. `mask` must already be one-hot.
pub fn reconstruct_cloud(
    depth: &TensorGrid,
    mask: &TensorGrid,
    k: &CameraIntrinsics,
    class: SurfaceClass,
    rgb: Option<&TensorGrid>,
) -> Result<PointCloud> {
    Reconstructor::single().reconstruct_cloud(depth, mask, k, class, rgb)
}

/// Least-squares plane through a point set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    /// Unit normal.
    pub normal: [f64; 3],
    /// Signed offset: normal . p = offset for points on the plane.
    pub offset: f64,
    pub rms: f64,
}

/// Total least-squares plane (smallest-eigenvalue direction of the scatter).
pub fn fit_plane(points: &[[f64; 3]]) -> Result<Plane> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!("{} points", points.len())));
    }
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vector3::zeros(), |acc, p| acc + Vector3::from(*p)) / n;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = Vector3::from(*p) - centroid;
        scatter += d * d.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("3 eigenvalues");
    let normal = eig.eigenvectors.column(imin).normalize();
    let offset = normal.dot(&centroid);
    let rms = (points
        .iter()
        .map(|p| (normal.dot(&Vector3::from(*p)) - offset).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(Plane {
        normal: [normal.x, normal.y, normal.z],
        offset,
        rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k640() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap()
    }

    fn scores(pixels: &[[f32; 3]]) -> TensorGrid {
        TensorGrid::from_f32(&[1, pixels.len(), 3], pixels.iter().flatten().copied().collect()).unwrap()
    }

    #[test]
    fn harden_argmax_and_ties() {
        let out = harden_mask(&scores(&[[0.2, 0.5, 0.3], [0.5, 0.5, 0.0], [0.0, 0.1, 0.1]])).unwrap();
        assert_eq!(out.as_u8().unwrap(), &[0, 1, 0, 1, 0, 0, 0, 1, 0]);
        assert_eq!(harden_mask(&out).unwrap(), out);
        let bad = TensorGrid::from_f32(&[1, 1, 2], vec![0.0, 1.0]).unwrap();
        assert!(matches!(harden_mask(&bad), Err(Error::Shape(_))));
    }

    #[test]
    fn class_depth_products() {
        let depth = TensorGrid::from_f32(&[2, 2], vec![2.0; 4]).unwrap();
        let checker: Vec<u8> = (0..4)
            .flat_map(|i| if i % 3 == 0 { [0, 0, 1] } else { [1, 0, 0] })
            .collect();
        let mask = TensorGrid::from_u8(&[2, 2, 3], checker).unwrap();
        let tread = class_depth(&depth, &mask, SurfaceClass::Tread).unwrap();
        assert_eq!(tread.as_f32().unwrap(), &[2.0, 0.0, 0.0, 2.0]);
        let riser = class_depth(&depth, &mask, SurfaceClass::Riser).unwrap();
        assert!(riser.as_f32().unwrap().iter().all(|&v| v == 0.0));
        let all_bg = TensorGrid::from_u8(&[2, 2, 3], [1, 0, 0].repeat(4)).unwrap();
        assert_eq!(class_depth(&depth, &all_bg, SurfaceClass::Background).unwrap(), depth);
        let small = TensorGrid::from_f32(&[1, 2], vec![1.0; 2]).unwrap();
        assert!(matches!(
            class_depth(&small, &mask, SurfaceClass::Tread),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn backprojection_examples() {
        assert_eq!(backproject_pixel(319.5, 239.5, 2.0, &k640()).unwrap(), [0.0, 0.0, 2.0]);
        let p = backproject_pixel(419.5, 239.5, 2.0, &k640()).unwrap();
        assert!((p[0] - 0.4).abs() < 1e-12 && p[1].abs() < 1e-12 && p[2] == 2.0);
        assert_eq!(
            backproject_pixel(0.0, 0.0, 1.0, &CameraIntrinsics::identity()).unwrap(),
            [0.5, 0.5, 1.0]
        );
        assert!(matches!(
            backproject_pixel(0.0, 0.0, 0.0, &k640()),
            Err(Error::InvalidDepth(_))
        ));
    }

    #[test]
    fn full_frame_tread() {
        let (h, w) = (480, 640);
        let depth = TensorGrid::from_f32(&[h, w], vec![2.0; h * w]).unwrap();
        let mask = TensorGrid::from_u8(&[h, w, 3], [0, 0, 1].repeat(h * w)).unwrap();
        let cloud = reconstruct_cloud(&depth, &mask, &k640(), SurfaceClass::Tread, None).unwrap();
        assert_eq!(cloud.len(), 307_200);
        assert!(cloud.points.iter().all(|p| p[2] == 2.0));
        let xs = cloud.points.iter().map(|p| p[0]);
        let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        assert!((lo - (0.5 - 320.0) / 500.0 * 2.0).abs() < 1e-12);
        assert!((hi - (639.5 - 320.0) / 500.0 * 2.0).abs() < 1e-12);

        let zero = TensorGrid::from_f32(&[h, w], vec![0.0; h * w]).unwrap();
        let empty = reconstruct_cloud(&zero, &mask, &k640(), SurfaceClass::Tread, None).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.dropped, h * w);
    }

    #[test]
    fn colors_follow_points() {
        let depth = TensorGrid::from_f32(&[1, 3], vec![1.0, 0.0, 3.0]).unwrap();
        let mask = TensorGrid::from_u8(&[1, 3, 3], [0, 1, 0].repeat(3)).unwrap();
        let rgb = TensorGrid::from_u8(&[1, 3, 3], vec![1, 2, 3, 4, 5, 6, 7, 8, 9]).unwrap();
        let cloud = reconstruct_cloud(&depth, &mask, &k640(), SurfaceClass::Riser, Some(&rgb)).unwrap();
        assert_eq!(cloud.colors.unwrap(), vec![[1, 2, 3], [7, 8, 9]]);
        assert_eq!(cloud.dropped, 1);
    }

    #[test]
    fn threaded_matches_single() {
        let (h, w) = (37, 23);
        let depth = TensorGrid::from_f32(&[h, w], (0..h * w).map(|i| (i % 7) as f32 * 0.5).collect()).unwrap();
        let raw = TensorGrid::from_f32(&[h, w, 3], (0..h * w * 3).map(|i| ((i * 7919) % 13) as f32).collect()).unwrap();
        let single = Reconstructor::single();
        let multi = Reconstructor::new(3).unwrap();
        let m1 = single.harden_mask(&raw).unwrap();
        assert_eq!(m1, multi.harden_mask(&raw).unwrap());
        for class in SurfaceClass::ALL {
            let a = single.reconstruct_cloud(&depth, &m1, &k640(), class, None).unwrap();
            let b = multi.reconstruct_cloud(&depth, &m1, &k640(), class, None).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn negative_depth_rejected() {
        let depth = TensorGrid::from_f32(&[1, 1], vec![-1.0]).unwrap();
        let mask = TensorGrid::from_u8(&[1, 1, 3], vec![1, 0, 0]).unwrap();
        assert!(matches!(
            reconstruct_cloud(&depth, &mask, &k640(), SurfaceClass::Background, None),
            Err(Error::InvalidDepth(_))
        ));
    }

    #[test]
    fn depth_range_counts() {
        let depth = TensorGrid::from_f32(&[1, 4], vec![0.0, 0.1, 5.0, 12.0]).unwrap();
        assert_eq!(DepthRange::default().count_outside(&depth), 2);
        assert!(DepthRange::new(2.0, 1.0).is_err());
    }

    #[test]
    fn plane_fit_recovers_tilted_plane() {
        let pts: Vec<[f64; 3]> = (0..100)
            .map(|i| {
                let (u, v) = ((i % 10) as f64, (i / 10) as f64);
                [u, 0.5 * u + 2.0, v]
            })
            .collect();
        let plane = fit_plane(&pts).unwrap();
        let s = (1.25f64).sqrt();
        let expect = [0.5 / s, -1.0 / s, 0.0];
        let dot: f64 = plane.normal.iter().zip(expect).map(|(a, b)| a * b).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-12);
        assert!(plane.rms < 1e-12);
    }
}
