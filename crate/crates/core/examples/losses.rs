//! Evaluates the line, segmentation and depth losses on a noisy prediction
//! and checks one gradient coordinate numerically.

use stairkit::losses::*;
use stairkit::synth::{add_noise, NoiseConfig};
use stairkit::{encode_lines, generate_scene, GridGeometry, StairSpec};

fn main() -> stairkit::Result<()> {
    let geom = GridGeometry::default();
    let truth = generate_scene(&StairSpec::head_on(3, 512, 512))?;
    let (gt_convex, gt_concave) = encode_lines(&truth.lines, &geom)?;
    let noise = NoiseConfig {
        conf_jitter: 0.1,
        loc_jitter_px: 1.0,
        seed: 1,
    };
    let (pred_convex, pred_concave) = add_noise(&truth, &geom, &noise)?;

    let cfg = LossConfig::default();
    let convex = LineLossInput::from_labels(&pred_convex, &gt_convex)?;
    let concave = LineLossInput::from_labels(&pred_concave, &gt_concave)?;
    let seg_pred: Vec<f64> = truth.seg.to_f64_vec().iter().map(|v| 0.1 + 0.8 * v).collect();
    let seg = SegInput::new([512, 512, 3], seg_pred, truth.seg.to_f64_vec())?;
    let depth_gt: Vec<f64> = truth.depth.to_f64_vec().iter().map(|z| z / 10.0).collect();
    let depth_pred: Vec<f64> = depth_gt.iter().map(|d| (d + 0.01).min(1.0)).collect();
    let depth = DepthInput::new([512, 512], depth_pred, depth_gt)?;

    let breakdown = total_loss(&convex, &concave, &seg, &depth, &cfg)?;
    for (name, v) in breakdown.rows() {
        println!("{name:<13} {v:.6}");
    }

    let x = depth.pred.clone();
    let f = |v: &[f64]| {
        depth_loss(
            &DepthInput {
                pred: v.to_vec(),
                ..depth.clone()
            },
            &cfg,
        )
    };
    let g = |v: &[f64]| {
        depth_loss_grad(
            &DepthInput {
                pred: v.to_vec(),
                ..depth.clone()
            },
            &cfg,
        )
    };
    let check = finite_diff_check(f, g, &x, 1000, 1e-5);
    println!(
        "depth grad at 1000: analytic {:.3e}, numeric {:.3e}",
        check.analytic, check.numeric
    );
    println!(
        "next weights for errors (0.3, 0.1): {:?}",
        update_dynamic_weights((10.0, 10.0), 0.3, 0.1)
    );
    Ok(())
}
