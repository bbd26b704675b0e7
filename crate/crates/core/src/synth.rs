//! Procedural stair scenes with exact ground truth.
//!
//! World frame: X right, Y up, Z forward (into the stairs). Step `k` has a
//! riser on the plane Z = k * tread_d between heights k * riser_h and
//! (k + 1) * riser_h, and a tread on the plane Y = (k + 1) * riser_h between
//! depths k * tread_d and (k + 1) * tread_d, both spanning X in
//! [-width / 2, width / 2]. A wall at Z = wall_distance closes the
//! background.
//!
//! Convex lines are tread front edges (top of each riser); concave lines are
//! riser bottom edges (where the riser meets the tread below it, or the floor
//! for the first step).

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::camera::{format_intrinsics, CameraIntrinsics};
use crate::csvio::write_lines_csv;
use crate::error::{Error, Result};
use crate::fsio;
use crate::geometry::{clip_parametric, GridGeometry, LineKind, LineSegment};
use crate::label_codec::{encode_lines, LabelPair};
use crate::reconstruct::SurfaceClass;
use crate::tensor::{write_tensor, TensorGrid};

/// Camera orientation (radians) and position (meters, world frame).
///
/// Positive pitch looks down, positive yaw turns right, roll rotates about
/// the optical axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
    pub position: [f64; 3],
}

impl CameraPose {
    /// World-to-camera rotation, including the Y-up to y-down flip.
    pub fn rotation(&self) -> Matrix3<f64> {
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        let (sr, cr) = self.roll.sin_cos();
        let yaw = Matrix3::new(cy, 0.0, -sy, 0.0, 1.0, 0.0, sy, 0.0, cy);
        let pitch = Matrix3::new(1.0, 0.0, 0.0, 0.0, cp, -sp, 0.0, sp, cp);
        let roll = Matrix3::new(cr, -sr, 0.0, sr, cr, 0.0, 0.0, 0.0, 1.0);
        let flip = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0);
        roll * pitch * yaw * flip
    }

    pub fn world_to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let q = self.rotation() * (Vector3::from(p) - Vector3::from(self.position));
        [q.x, q.y, q.z]
    }

    pub fn camera_to_world(&self, q: [f64; 3]) -> [f64; 3] {
        let p = self.rotation().transpose() * Vector3::from(q) + Vector3::from(self.position);
        [p.x, p.y, p.z]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StairSpec {
    pub steps: usize,
    pub riser_h: f64,
    pub tread_d: f64,
    pub width: f64,
    pub pose: CameraPose,
    pub k: CameraIntrinsics,
    pub image_h: usize,
    pub image_w: usize,
    /// World Z of the background wall.
    pub wall_distance: f64,
}

impl StairSpec {
    /// A three-step staircase seen head-on from above the top step.
    pub fn head_on(steps: usize, image_h: usize, image_w: usize) -> Self {
        let riser_h = 0.17;
        let tread_d = 0.28;
        let height = steps as f64 * riser_h + 0.6;
        let distance = 1.2;
        let target = [0.0, 0.5 * steps as f64 * riser_h, 0.5 * steps as f64 * tread_d];
        let pitch = ((height - target[1]) / (target[2] + distance)).atan();
        let f = 0.85 * image_w as f64;
        StairSpec {
            steps,
            riser_h,
            tread_d,
            width: 1.2,
            pose: CameraPose {
                pitch,
                yaw: 0.0,
                roll: 0.0,
                position: [0.0, height, -distance],
            },
            k: CameraIntrinsics {
                fx: f,
                fy: f,
                cx: image_w as f64 / 2.0,
                cy: image_h as f64 / 2.0,
            },
            image_h,
            image_w,
            wall_distance: 10.0,
        }
    }

    /// Random staircase and pose with the camera above the top step, aimed
    /// roughly at the middle of the flight.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, steps: usize, image_h: usize, image_w: usize) -> Self {
        let riser_h = rng.random_range(0.14..0.19);
        let tread_d = rng.random_range(0.25..0.32);
        let width = rng.random_range(1.0..1.6);
        let top = steps as f64 * riser_h;
        let height = top.max(0.9) + rng.random_range(0.3..0.7);
        let distance = rng.random_range(0.8..1.6) + 0.1 * steps as f64;
        let lateral = rng.random_range(-0.15..0.15);
        let target_y = 0.5 * top;
        let target_z = 0.5 * steps as f64 * tread_d;
        let pitch = ((height - target_y) / (target_z + distance)).atan() + rng.random_range(-0.05..0.05);
        let f = rng.random_range(0.7..0.9) * image_w as f64;
        StairSpec {
            steps,
            riser_h,
            tread_d,
            width,
            pose: CameraPose {
                pitch,
                yaw: rng.random_range(-0.2..0.2),
                roll: rng.random_range(-0.06..0.06),
                position: [lateral, height, -distance],
            },
            k: CameraIntrinsics {
                fx: f,
                fy: f,
                cx: image_w as f64 / 2.0,
                cy: image_h as f64 / 2.0,
            },
            image_h,
            image_w,
            wall_distance: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.steps > 254 {
            return Err(Error::Config(format!("steps must be in 1..=254, got {}", self.steps)));
        }
        if !(self.riser_h > 0.0 && self.tread_d > 0.0 && self.width > 0.0) {
            return Err(Error::Config(
                "riser height, tread depth and width must be positive".into(),
            ));
        }
        if self.image_h == 0 || self.image_w == 0 {
            return Err(Error::Config("image extents must be positive".into()));
        }
        CameraIntrinsics::new(self.k.fx, self.k.fy, self.k.cx, self.k.cy)?;
        Ok(())
    }

    /// `key = value` lines.
    pub fn to_kv(&self) -> String {
        let p = &self.pose;
        format!(
            "steps = {}\nriser_h = {}\ntread_d = {}\nwidth = {}\npitch = {}\nyaw = {}\nroll = {}\n\
             cam_x = {}\ncam_y = {}\ncam_z = {}\nfx = {}\nfy = {}\ncx = {}\ncy = {}\n\
             image_h = {}\nimage_w = {}\nwall_distance = {}\n",
            self.steps,
            self.riser_h,
            self.tread_d,
            self.width,
            p.pitch,
            p.yaw,
            p.roll,
            p.position[0],
            p.position[1],
            p.position[2],
            self.k.fx,
            self.k.fy,
            self.k.cx,
            self.k.cy,
            self.image_h,
            self.image_w,
            self.wall_distance
        )
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key = value, got {line:?}")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let num = |key: &str| -> Result<f64> {
            map.get(key)
                .ok_or_else(|| Error::Parse(format!("missing key {key}")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{key}: {e}")))
        };
        let int = |key: &str| -> Result<usize> {
            map.get(key)
                .ok_or_else(|| Error::Parse(format!("missing key {key}")))?
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("{key}: {e}")))
        };
        let spec = StairSpec {
            steps: int("steps")?,
            riser_h: num("riser_h")?,
            tread_d: num("tread_d")?,
            width: num("width")?,
            pose: CameraPose {
                pitch: num("pitch")?,
                yaw: num("yaw")?,
                roll: num("roll")?,
                position: [num("cam_x")?, num("cam_y")?, num("cam_z")?],
            },
            k: CameraIntrinsics::new(num("fx")?, num("fy")?, num("cx")?, num("cy")?)?,
            image_h: int("image_h")?,
            image_w: int("image_w")?,
            wall_distance: num("wall_distance")?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Which surface a camera ray hits first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    /// Camera-frame depth (Z) of the hit point.
    pub depth: f64,
    pub class: SurfaceClass,
    /// Step index for risers and treads.
    pub step: Option<usize>,
}

/// Ground truth rendered from a [`StairSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct SceneTruth {
    pub spec: StairSpec,
    pub lines: Vec<LineSegment>,
    /// One-hot H x W x 3 (background, riser, tread), u8.
    pub seg: TensorGrid,
    /// H x W meters, f32; 0 where the ray escapes.
    pub depth: TensorGrid,
    /// Flat-shaded H x W x 3, u8.
    pub rgb: TensorGrid,
    /// H x W step index of riser/tread pixels, 255 elsewhere.
    pub steps: TensorGrid,
}

const NO_STEP: u8 = 255;

struct Scene<'a> {
    spec: &'a StairSpec,
    rot_t: Matrix3<f64>,
    origin: Vector3<f64>,
}

impl<'a> Scene<'a> {
    fn new(spec: &'a StairSpec) -> Self {
        Scene {
            spec,
            rot_t: spec.pose.rotation().transpose(),
            origin: Vector3::from(spec.pose.position),
        }
    }

    /// Nearest hit along the ray q(s) = s * dir_cam (camera frame, dir_cam.z = 1).
    fn cast(&self, dir_cam: Vector3<f64>) -> Option<RayHit> {
        let s = self.spec;
        let d = self.rot_t * dir_cam;
        let o = self.origin;
        let half_w = 0.5 * s.width;
        let mut best: Option<RayHit> = None;
        let consider = |best: &mut Option<RayHit>, t: f64, class, step| {
            if t > 0.0 && best.is_none_or(|b| t < b.depth) {
                *best = Some(RayHit { depth: t, class, step });
            }
        };
        for k in 0..s.steps {
            let kf = k as f64;
            if d.z != 0.0 {
                let t = (kf * s.tread_d - o.z) / d.z;
                let (x, y) = (o.x + t * d.x, o.y + t * d.y);
                if x.abs() <= half_w && y >= kf * s.riser_h && y <= (kf + 1.0) * s.riser_h {
                    consider(&mut best, t, SurfaceClass::Riser, Some(k));
                }
            }
            if d.y != 0.0 {
                let t = ((kf + 1.0) * s.riser_h - o.y) / d.y;
                let (x, z) = (o.x + t * d.x, o.z + t * d.z);
                if x.abs() <= half_w && z >= kf * s.tread_d && z <= (kf + 1.0) * s.tread_d {
                    consider(&mut best, t, SurfaceClass::Tread, Some(k));
                }
            }
        }
        if best.is_none() && d.z != 0.0 {
            let t = (s.wall_distance - o.z) / d.z;
            consider(&mut best, t, SurfaceClass::Background, None);
        }
        best
    }

    fn pixel_ray(&self, x: f64, y: f64) -> Vector3<f64> {
        let k = &self.spec.k;
        Vector3::new((x + 0.5 - k.cx) / k.fx, (y + 0.5 - k.cy) / k.fy, 1.0)
    }

    /// True when nothing lies strictly in front of camera-frame point `q`.
    fn visible(&self, q: Vector3<f64>) -> bool {
        if q.z <= 0.0 {
            return false;
        }
        match self.cast(q / q.z) {
            Some(hit) => hit.depth >= q.z * (1.0 - 1e-7),
            None => true,
        }
    }

    fn edge_line(&self, kind: LineKind, a: [f64; 3], b: [f64; 3]) -> Option<LineSegment> {
        const NEAR: f64 = 1e-3;
        const SAMPLES: usize = 256;
        let pose = &self.spec.pose;
        let qa = Vector3::from(pose.world_to_camera(a));
        let qb = Vector3::from(pose.world_to_camera(b));
        // Longest run of unoccluded samples in front of the near plane.
        let mut best = None;
        let mut run_start = None;
        for i in 0..=SAMPLES {
            let t = i as f64 / SAMPLES as f64;
            let q = qa + (qb - qa) * t;
            let ok = q.z > NEAR && self.visible(q);
            match (ok, run_start) {
                (true, None) => run_start = Some(i),
                (false, Some(s)) => {
                    best = longer(best, (s, i - 1));
                    run_start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = run_start {
            best = longer(best, (s, SAMPLES));
        }
        let (i0, i1) = best?;
        if i0 == i1 {
            return None;
        }
        let at = |i: usize| qa + (qb - qa) * (i as f64 / SAMPLES as f64);
        let k = &self.spec.k;
        let pa = k.project([at(i0).x, at(i0).y, at(i0).z]).ok()?;
        let pb = k.project([at(i1).x, at(i1).y, at(i1).z]).ok()?;
        let margin = 1e-6;
        let rect = [
            0.0,
            0.0,
            self.spec.image_w as f64 - margin,
            self.spec.image_h as f64 - margin,
        ];
        let (t0, t1) = clip_parametric(pa, pb, rect)?;
        let p = |t: f64| {
            (
                (pa.0 + t * (pb.0 - pa.0)).clamp(rect[0], rect[2]),
                (pa.1 + t * (pb.1 - pa.1)).clamp(rect[1], rect[3]),
            )
        };
        let seg = LineSegment::new(kind, p(t0), p(t1));
        (seg.length() >= 2.0).then_some(seg)
    }
}

fn longer(best: Option<(usize, usize)>, run: (usize, usize)) -> Option<(usize, usize)> {
    match best {
        Some(b) if b.1 - b.0 >= run.1 - run.0 => Some(b),
        _ => Some(run),
    }
}

fn shade(hit: Option<RayHit>) -> [u8; 3] {
    match hit {
        Some(RayHit {
            class: SurfaceClass::Riser,
            step: Some(k),
            ..
        }) => [200, 40 + 20 * (k % 8) as u8, 40],
        Some(RayHit {
            class: SurfaceClass::Tread,
            step: Some(k),
            ..
        }) => [40, 60 + 20 * (k % 8) as u8, 200],
        _ => [90, 90, 90],
    }
}

/// Camera-frame hit for pixel (x, y), as used by [`generate_scene`].
pub fn cast_pixel(spec: &StairSpec, x: usize, y: usize) -> Option<RayHit> {
    let scene = Scene::new(spec);
    scene.cast(scene.pixel_ray(x as f64, y as f64))
}

/// Pixel (top-left convention) whose center images camera-frame point `p`.
pub fn project_point(p: [f64; 3], k: &CameraIntrinsics) -> Result<(f64, f64)> {
    k.project(p)
}

/// World-frame 3D endpoints of every stair edge, convex first per step.
pub fn stair_edges(spec: &StairSpec) -> Vec<(LineKind, usize, [f64; 3], [f64; 3])> {
    let hw = 0.5 * spec.width;
    let mut edges = Vec::with_capacity(2 * spec.steps);
    for k in 0..spec.steps {
        let z = k as f64 * spec.tread_d;
        let top = (k + 1) as f64 * spec.riser_h;
        let bottom = k as f64 * spec.riser_h;
        edges.push((LineKind::Convex, k, [-hw, top, z], [hw, top, z]));
        edges.push((LineKind::Concave, k, [-hw, bottom, z], [hw, bottom, z]));
    }
    edges
}

/// Renders masks, exact depth, shading and visible edge lines.
pub fn generate_scene(spec: &StairSpec) -> Result<SceneTruth> {
    spec.validate()?;
    let scene = Scene::new(spec);
    let (h, w) = (spec.image_h, spec.image_w);
    let mut seg = vec![0u8; h * w * 3];
    let mut depth = vec![0.0f32; h * w];
    let mut rgb = vec![0u8; h * w * 3];
    let mut steps = vec![NO_STEP; h * w];
    let mut stair_pixels = 0usize;
    for y in 0..h {
        for x in 0..w {
            let pix = y * w + x;
            let hit = scene.cast(scene.pixel_ray(x as f64, y as f64));
            let class = hit.map_or(SurfaceClass::Background, |h| h.class);
            seg[pix * 3 + class.channel()] = 1;
            if let Some(hit) = hit {
                depth[pix] = hit.depth as f32;
                if let Some(k) = hit.step {
                    steps[pix] = k as u8;
                    stair_pixels += 1;
                }
            }
            rgb[pix * 3..pix * 3 + 3].copy_from_slice(&shade(hit));
        }
    }
    if stair_pixels == 0 {
        return Err(Error::EmptyScene("no riser or tread is visible from this pose".into()));
    }
    let lines = stair_edges(spec)
        .into_iter()
        .filter_map(|(kind, _, a, b)| scene.edge_line(kind, a, b))
        .collect();
    Ok(SceneTruth {
        spec: spec.clone(),
        lines,
        seg: TensorGrid::from_u8(&[h, w, 3], seg)?,
        depth: TensorGrid::from_f32(&[h, w], depth)?,
        rgb: TensorGrid::from_u8(&[h, w, 3], rgb)?,
        steps: TensorGrid::from_u8(&[h, w], steps)?,
    })
}

impl SceneTruth {
    pub fn lines_of(&self, kind: LineKind) -> Vec<LineSegment> {
        self.lines.iter().filter(|l| l.kind == kind).copied().collect()
    }

    /// Whether every line can be told apart on `geom`'s cell grid: lines are
    /// long and near-horizontal, same-kind lines keep a few cell rows apart,
    /// and their extensions do not meet inside the image.
    pub fn is_linkable(&self, geom: &GridGeometry) -> bool {
        let min_len = 4.0 * geom.stride_w();
        let min_gap = 4.0 * geom.stride_h();
        let w = geom.input_w() as f64;
        LineKind::ALL.iter().all(|&kind| {
            let lines = self.lines_of(kind);
            let shape_ok = lines
                .iter()
                .all(|l| l.length() >= min_len && (l.y2 - l.y1).abs() <= 0.5 * (l.x2 - l.x1));
            let extended = |l: &LineSegment, x: f64| {
                let k = (l.y2 - l.y1) / (l.x2 - l.x1);
                l.y1 + k * (x - l.x1)
            };
            let apart = lines.iter().enumerate().all(|(i, a)| {
                lines[i + 1..].iter().all(|b| {
                    let g0 = extended(a, 0.0) - extended(b, 0.0);
                    let g1 = extended(a, w) - extended(b, w);
                    segment_distance(a, b) >= min_gap && g0 * g1 > 0.0 && g0.abs().min(g1.abs()) >= 8.0
                })
            });
            shape_ok && apart
        })
    }

    /// Writes `lines.csv`, `seg.stn3`, `depth.stn3`, `rgb.stn3`,
    /// `intrinsics.txt` and `spec.txt` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_lines_csv(&self.lines, &dir.join("lines.csv"))?;
        write_tensor(&self.seg, dir.join("seg.stn3"))?;
        write_tensor(&self.depth, dir.join("depth.stn3"))?;
        write_tensor(&self.rgb, dir.join("rgb.stn3"))?;
        fsio::write_atomic(&dir.join("intrinsics.txt"), format_intrinsics(&self.spec.k).as_bytes())?;
        fsio::write_atomic(&dir.join("spec.txt"), self.spec.to_kv().as_bytes())
    }
}

fn point_segment_distance(p: (f64, f64), s: &LineSegment) -> f64 {
    let (dx, dy) = (s.x2 - s.x1, s.y2 - s.y1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - s.x1) * dx + (p.1 - s.y1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p.0 - s.x1 - t * dx).hypot(p.1 - s.y1 - t * dy)
}

fn segment_distance(a: &LineSegment, b: &LineSegment) -> f64 {
    let cross = |o: (f64, f64), p: (f64, f64), q: (f64, f64)| (p.0 - o.0) * (q.1 - o.1) - (p.1 - o.1) * (q.0 - o.0);
    let (a1, a2, b1, b2) = ((a.x1, a.y1), (a.x2, a.y2), (b.x1, b.y1), (b.x2, b.y2));
    let d1 = cross(a1, a2, b1);
    let d2 = cross(a1, a2, b2);
    let d3 = cross(b1, b2, a1);
    let d4 = cross(b1, b2, a2);
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    [
        point_segment_distance(a1, b),
        point_segment_distance(a2, b),
        point_segment_distance(b1, a),
        point_segment_distance(b2, a),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

/// Gaussian perturbation applied to encoded labels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseConfig {
    /// Standard deviation added to every heatmap value (result clamped to [0, 1]).
    pub conf_jitter: f64,
    /// Standard deviation, in pixels, added to endpoint coordinates of line cells.
    pub loc_jitter_px: f64,
    pub seed: u64,
}

/// Encodes the scene's lines on `geom` and perturbs the labels.
/// Deterministic in `noise.seed`; zero jitter returns the clean encoding.
pub fn add_noise(truth: &SceneTruth, geom: &GridGeometry, noise: &NoiseConfig) -> Result<(LabelPair, LabelPair)> {
    let (convex, concave) = encode_lines(&truth.lines, geom)?;
    jitter_labels(convex, concave, geom, noise)
}

pub fn jitter_labels(
    convex: LabelPair,
    concave: LabelPair,
    geom: &GridGeometry,
    noise: &NoiseConfig,
) -> Result<(LabelPair, LabelPair)> {
    if !(noise.conf_jitter >= 0.0 && noise.loc_jitter_px >= 0.0) {
        return Err(Error::Config("noise standard deviations must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let conf = Normal::new(0.0, noise.conf_jitter).map_err(|e| Error::Config(e.to_string()))?;
    let loc = Normal::new(0.0, noise.loc_jitter_px).map_err(|e| Error::Config(e.to_string()))?;
    let mut jitter = |pair: LabelPair| -> Result<LabelPair> {
        let clean = pair.heatmap.to_f32_vec();
        let mut heat = clean.clone();
        if noise.conf_jitter > 0.0 {
            for v in heat.iter_mut() {
                *v = (f64::from(*v) + conf.sample(&mut rng)).clamp(0.0, 1.0) as f32;
            }
        }
        let mut locs = pair.locations.to_f32_vec();
        if noise.loc_jitter_px > 0.0 {
            let strides = [geom.stride_w(), geom.stride_h()];
            for (cell, &h) in clean.iter().enumerate() {
                if h > 0.0 {
                    for j in 0..4 {
                        let v = &mut locs[cell * 4 + j];
                        let delta = loc.sample(&mut rng) / strides[j % 2];
                        *v = (f64::from(*v) + delta).clamp(0.0, 1.0) as f32;
                    }
                }
            }
        }
        Ok(LabelPair {
            heatmap: TensorGrid::from_f32(pair.heatmap.dims(), heat)?,
            locations: TensorGrid::from_f32(pair.locations.dims(), locs)?,
            kind: pair.kind,
        })
    };
    Ok((jitter(convex)?, jitter(concave)?))
}
