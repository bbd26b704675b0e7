//! Reference loss functions for the stair network's three heads, with
//! closed-form gradients and a central-difference checker.
//!
//! These are numerical oracles for validating a training implementation;
//! nothing here trains anything.
//!
//! * line loss (per kind): weighted confidence MSE over all cells plus a
//!   location MSE on cells that contain a line, split into x and y parts with
//!   dynamic weights;
//! * segmentation loss: mean binary cross-entropy over H x W x C;
//! * depth loss: weighted MSE over normalized depth.

use crate::error::{Error, Result};
use crate::label_codec::LabelPair;
use crate::tensor::TensorGrid;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    /// Positive-cell confidence weight.
    pub alpha1: f64,
    /// Negative-cell confidence weight.
    pub alpha2: f64,
    /// Dynamic weight on x location error.
    pub lambda1: f64,
    /// Dynamic weight on y location error.
    pub lambda2: f64,
    /// Depth weight.
    pub psi: f64,
    pub num_classes: usize,
    /// Clamp for log stability in the segmentation loss.
    pub seg_eps: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha1: 15.0,
            alpha2: 5.0,
            lambda1: 10.0,
            lambda2: 10.0,
            psi: 10.0,
            num_classes: 3,
            seg_eps: 1e-7,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let w = [self.alpha1, self.alpha2, self.lambda1, self.lambda2, self.psi];
        if w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) || [self.alpha1, self.alpha2, self.psi].contains(&0.0) {
            return Err(Error::Config(format!("loss weights must be positive: {w:?}")));
        }
        if !(self.seg_eps > 0.0 && self.seg_eps < 0.5) {
            return Err(Error::Config(format!("seg_eps out of range: {}", self.seg_eps)));
        }
        Ok(())
    }

    pub fn with_dynamic_weights(mut self, (l1, l2): (f64, f64)) -> Self {
        self.lambda1 = l1;
        self.lambda2 = l2;
        self
    }
}

/// Inputs for one line kind over an M x N cell grid (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct LineLossInput {
    pub rows: usize,
    pub cols: usize,
    pub pred_conf: Vec<f64>,
    pub gt_conf: Vec<f64>,
    /// 1 for cells containing a ground-truth line, else 0.
    pub gt_mask: Vec<f64>,
    /// (x1, y1, x2, y2) per cell.
    pub pred_loc: Vec<[f64; 4]>,
    pub gt_loc: Vec<[f64; 4]>,
}

impl LineLossInput {
    pub fn new(
        rows: usize,
        cols: usize,
        pred_conf: Vec<f64>,
        gt_conf: Vec<f64>,
        gt_mask: Vec<f64>,
        pred_loc: Vec<[f64; 4]>,
        gt_loc: Vec<[f64; 4]>,
    ) -> Result<Self> {
        let n = rows * cols;
        if n == 0 {
            return Err(Error::Shape("empty cell grid".into()));
        }
        let lens = [
            pred_conf.len(),
            gt_conf.len(),
            gt_mask.len(),
            pred_loc.len(),
            gt_loc.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::Shape(format!("expected {n} cells per field, got {lens:?}")));
        }
        if gt_mask.iter().any(|&h| h != 0.0 && h != 1.0) {
            return Err(Error::Shape("line mask must be 0/1".into()));
        }
        Ok(LineLossInput {
            rows,
            cols,
            pred_conf,
            gt_conf,
            gt_mask,
            pred_loc,
            gt_loc,
        })
    }

    /// Prediction against encoded ground truth; cells with nonzero
    /// ground-truth confidence form the line mask.
    pub fn from_labels(pred: &LabelPair, gt: &LabelPair) -> Result<Self> {
        pred.validate(None)?;
        gt.validate(None)?;
        if pred.heatmap.plane_dims() != gt.heatmap.plane_dims() {
            return Err(Error::Shape(format!(
                "prediction {:?} vs ground truth {:?}",
                pred.heatmap.dims(),
                gt.heatmap.dims()
            )));
        }
        let (rows, cols) = gt.heatmap.plane_dims();
        let gt_conf = gt.heatmap.to_f64_vec();
        let gt_mask = gt_conf.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        let locs = |g: &TensorGrid| {
            g.to_f64_vec()
                .chunks_exact(4)
                .map(|c| [c[0], c[1], c[2], c[3]])
                .collect::<Vec<_>>()
        };
        Self::new(
            rows,
            cols,
            pred.heatmap.to_f64_vec(),
            gt_conf,
            gt_mask,
            locs(&pred.locations),
            locs(&gt.locations),
        )
    }

    fn cells(&self) -> f64 {
        (self.rows * self.cols) as f64
    }
}

/// Per-axis squared location error: mean over (x1, x2) and over (y1, y2).
fn loc_terms(t: &[f64; 4], g: &[f64; 4]) -> (f64, f64) {
    let ex = 0.5 * ((t[0] - g[0]).powi(2) + (t[2] - g[2]).powi(2));
    let ey = 0.5 * ((t[1] - g[1]).powi(2) + (t[3] - g[3]).powi(2));
    (ex, ey)
}

pub fn line_loss(inp: &LineLossInput, cfg: &LossConfig) -> f64 {
    let mut sum = 0.0;
    for i in 0..inp.pred_conf.len() {
        let h = inp.gt_mask[i];
        let r2 = (inp.pred_conf[i] - inp.gt_conf[i]).powi(2);
        sum += cfg.alpha1 * h * r2 + cfg.alpha2 * (1.0 - h) * r2;
        if h != 0.0 {
            let (ex, ey) = loc_terms(&inp.pred_loc[i], &inp.gt_loc[i]);
            sum += h * (cfg.lambda1 * ex + cfg.lambda2 * ey);
        }
    }
    sum / inp.cells()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineLossGrad {
    pub conf: Vec<f64>,
    pub loc: Vec<[f64; 4]>,
}

/// Gradient of [`line_loss`] with respect to the predictions.
pub fn line_loss_grad(inp: &LineLossInput, cfg: &LossConfig) -> LineLossGrad {
    let mn = inp.cells();
    let mut conf = Vec::with_capacity(inp.pred_conf.len());
    let mut loc = Vec::with_capacity(inp.pred_loc.len());
    for i in 0..inp.pred_conf.len() {
        let h = inp.gt_mask[i];
        let w = cfg.alpha1 * h + cfg.alpha2 * (1.0 - h);
        conf.push(2.0 * w * (inp.pred_conf[i] - inp.gt_conf[i]) / mn);
        let (t, g) = (&inp.pred_loc[i], &inp.gt_loc[i]);
        let lam = [cfg.lambda1, cfg.lambda2, cfg.lambda1, cfg.lambda2];
        loc.push([0, 1, 2, 3].map(|j| h * lam[j] * (t[j] - g[j]) / mn));
    }
    LineLossGrad { conf, loc }
}

/// Scores and one-hot targets over H x W x C, row-major, channel-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct SegInput {
    pub dims: [usize; 3],
    pub pred: Vec<f64>,
    pub gt: Vec<f64>,
}

impl SegInput {
    pub fn new(dims: [usize; 3], pred: Vec<f64>, gt: Vec<f64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n == 0 || pred.len() != n || gt.len() != n {
            return Err(Error::Shape(format!(
                "segmentation dims {dims:?} vs {} predictions, {} targets",
                pred.len(),
                gt.len()
            )));
        }
        Ok(SegInput { dims, pred, gt })
    }

    pub fn from_grids(pred: &TensorGrid, gt: &TensorGrid) -> Result<Self> {
        if pred.dims() != gt.dims() || pred.rank() != 3 {
            return Err(Error::Shape(format!(
                "segmentation prediction {:?} vs ground truth {:?}",
                pred.dims(),
                gt.dims()
            )));
        }
        Self::new(
            [pred.rows(), pred.cols(), pred.channels()],
            pred.to_f64_vec(),
            gt.to_f64_vec(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegLoss {
    pub value: f64,
    /// Predictions that had to be clamped into [eps, 1 - eps].
    pub clamped: usize,
}

pub fn seg_loss(inp: &SegInput, cfg: &LossConfig) -> SegLoss {
    let eps = cfg.seg_eps;
    let mut clamped = 0;
    let mut sum = 0.0;
    for (&m, &g) in inp.pred.iter().zip(&inp.gt) {
        let mc = m.clamp(eps, 1.0 - eps);
        if mc != m {
            clamped += 1;
        }
        sum -= g * mc.ln() + (1.0 - g) * (1.0 - mc).ln();
    }
    SegLoss {
        value: sum / inp.pred.len() as f64,
        clamped,
    }
}

/// Gradient of [`seg_loss`] (zero where the clamp is active).
pub fn seg_loss_grad(inp: &SegInput, cfg: &LossConfig) -> Vec<f64> {
    let eps = cfg.seg_eps;
    let n = inp.pred.len() as f64;
    inp.pred
        .iter()
        .zip(&inp.gt)
        .map(|(&m, &g)| {
            if m < eps || m > 1.0 - eps {
                0.0
            } else {
                (-g / m + (1.0 - g) / (1.0 - m)) / n
            }
        })
        .collect()
}

/// Normalized depth prediction and target over H x W.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthInput {
    pub dims: [usize; 2],
    pub pred: Vec<f64>,
    pub gt: Vec<f64>,
}

impl DepthInput {
    pub fn new(dims: [usize; 2], pred: Vec<f64>, gt: Vec<f64>) -> Result<Self> {
        let n = dims[0] * dims[1];
        if n == 0 || pred.len() != n || gt.len() != n {
            return Err(Error::Shape(format!(
                "depth dims {dims:?} vs {} predictions, {} targets",
                pred.len(),
                gt.len()
            )));
        }
        Ok(DepthInput { dims, pred, gt })
    }

    pub fn from_grids(pred: &TensorGrid, gt: &TensorGrid) -> Result<Self> {
        if pred.dims() != gt.dims() || pred.channels() != 1 {
            return Err(Error::Shape(format!(
                "depth prediction {:?} vs ground truth {:?}",
                pred.dims(),
                gt.dims()
            )));
        }
        Self::new([pred.rows(), pred.cols()], pred.to_f64_vec(), gt.to_f64_vec())
    }
}

pub fn depth_loss(inp: &DepthInput, cfg: &LossConfig) -> f64 {
    let sum: f64 = inp.pred.iter().zip(&inp.gt).map(|(d, g)| (d - g).powi(2)).sum();
    cfg.psi * sum / inp.pred.len() as f64
}

pub fn depth_loss_grad(inp: &DepthInput, cfg: &LossConfig) -> Vec<f64> {
    let n = inp.pred.len() as f64;
    inp.pred
        .iter()
        .zip(&inp.gt)
        .map(|(d, g)| 2.0 * cfg.psi * (d - g) / n)
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub convex: f64,
    pub concave: f64,
    pub seg: f64,
    pub depth: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn from_terms(convex: f64, concave: f64, seg: f64, depth: f64) -> Self {
        LossBreakdown {
            convex,
            concave,
            seg,
            depth,
            total: convex + concave + seg + depth,
        }
    }

    pub fn rows(&self) -> [(&'static str, f64); 5] {
        [
            ("line_convex", self.convex),
            ("line_concave", self.concave),
            ("segmentation", self.seg),
            ("depth", self.depth),
            ("total", self.total),
        ]
    }
}

pub fn total_loss(
    convex: &LineLossInput,
    concave: &LineLossInput,
    seg: &SegInput,
    depth: &DepthInput,
    cfg: &LossConfig,
) -> Result<LossBreakdown> {
    cfg.validate()?;
    if seg.dims[2] != cfg.num_classes {
        return Err(Error::Shape(format!(
            "segmentation has {} classes, config expects {}",
            seg.dims[2], cfg.num_classes
        )));
    }
    Ok(LossBreakdown::from_terms(
        line_loss(convex, cfg),
        line_loss(concave, cfg),
        seg_loss(seg, cfg).value,
        depth_loss(depth, cfg),
    ))
}

/// Redistributes the fixed budget lambda1 + lambda2 = 20 in proportion to
/// the per-axis validation errors. Both errors zero leaves `prev` unchanged.
///
/// Placeholder schedule: only the interface (errors in, weights out) is
/// prescribed.
pub fn update_dynamic_weights(prev: (f64, f64), eval_x_error: f64, eval_y_error: f64) -> (f64, f64) {
    let total = eval_x_error + eval_y_error;
    if !(total > 0.0) || eval_x_error < 0.0 || eval_y_error < 0.0 {
        return prev;
    }
    const BUDGET: f64 = 20.0;
    (BUDGET * eval_x_error / total, BUDGET * eval_y_error / total)
}

/// (L(x + h e_i) - L(x - h e_i)) / 2h.
pub fn central_difference<F>(loss: F, x: &[f64], index: usize, h: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    probe[index] = x[index] + h;
    let up = loss(&probe);
    probe[index] = x[index] - h;
    let down = loss(&probe);
    (up - down) / (2.0 * h)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub analytic: f64,
    pub numeric: f64,
}

impl GradCheck {
    pub fn relative_error(&self) -> f64 {
        let scale = self.analytic.abs().max(self.numeric.abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.analytic - self.numeric).abs() / scale
        }
    }
}

/// Compares `grad(x)[index]` with a central difference of `loss` at `x`.
pub fn finite_diff_check<F, G>(loss: F, grad: G, x: &[f64], index: usize, h: f64) -> GradCheck
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    GradCheck {
        analytic: grad(x)[index],
        numeric: central_difference(loss, x, index, h),
    }
}
