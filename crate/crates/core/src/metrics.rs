//! Cell-level precision/recall/IOU for line heatmaps and pixel accuracy for
//! segmentation masks.

use crate::error::{Error, Result};
use crate::tensor::TensorGrid;

/// Confidence at which both predicted and ground-truth cells count as positive.
pub const DEFAULT_CONFIDENCE: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        ConfusionCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

/// Thresholds both heatmaps at `conf` and tabulates agreement per cell.
pub fn cell_confusion(pred_heat: &TensorGrid, gt_heat: &TensorGrid, conf: f64) -> Result<ConfusionCounts> {
    if pred_heat.dims() != gt_heat.dims() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs ground truth {:?}",
            pred_heat.dims(),
            gt_heat.dims()
        )));
    }
    let mut c = ConfusionCounts::default();
    for i in 0..pred_heat.len() {
        let p = f64::from(pred_heat.value(i)) >= conf;
        let g = f64::from(gt_heat.value(i)) >= conf;
        match (p, g) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// `None` marks a ratio with a zero denominator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineScores {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub iou: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn precision_recall_iou(c: &ConfusionCounts) -> LineScores {
    LineScores {
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
        iou: ratio(c.tp, c.tp + c.fp + c.fn_),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelScores {
    pub pa: f64,
    /// Mean over classes present in the ground truth.
    pub mpa: f64,
    /// Per-class accuracy; `None` for classes absent from the ground truth.
    pub per_class: [Option<f64>; 3],
}

fn argmax3(g: &TensorGrid, pix: usize) -> usize {
    let base = pix * 3;
    let mut best = 0;
    for ch in 1..3 {
        if g.value(base + ch) > g.value(base + best) {
            best = ch;
        }
    }
    best
}

/// PA and MPA of two hardened H x W x 3 masks. `None` when the ground truth
/// has no pixels labeled at all.
pub fn pixel_accuracy(pred: &TensorGrid, gt: &TensorGrid) -> Result<Option<PixelScores>> {
    if pred.dims() != gt.dims() || pred.rank() != 3 || pred.channels() != 3 {
        return Err(Error::Shape(format!(
            "masks must be matching HxWx3, got {:?} and {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    let pixels = pred.rows() * pred.cols();
    let mut class_total = [0u64; 3];
    let mut class_hit = [0u64; 3];
    for pix in 0..pixels {
        if (0..3).all(|ch| gt.value(pix * 3 + ch) == 0.0) {
            continue;
        }
        let g = argmax3(gt, pix);
        class_total[g] += 1;
        if argmax3(pred, pix) == g {
            class_hit[g] += 1;
        }
    }
    let total: u64 = class_total.iter().sum();
    if total == 0 {
        return Ok(None);
    }
    let per_class = [0, 1, 2].map(|c| ratio(class_hit[c], class_total[c]));
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    Ok(Some(PixelScores {
        pa: class_hit.iter().sum::<u64>() as f64 / total as f64,
        mpa: present.iter().sum::<f64>() / present.len() as f64,
        per_class,
    }))
}
