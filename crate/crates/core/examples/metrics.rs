//! Scores a noisy label prediction and a perturbed mask against ground truth.

use stairkit::metrics::{cell_confusion, pixel_accuracy, precision_recall_iou, DEFAULT_CONFIDENCE};
use stairkit::synth::{add_noise, NoiseConfig};
use stairkit::{encode_lines, generate_scene, GridGeometry, StairSpec, TensorGrid};

fn main() -> stairkit::Result<()> {
    let geom = GridGeometry::default();
    let truth = generate_scene(&StairSpec::head_on(4, 512, 512))?;
    let (gt, _) = encode_lines(&truth.lines, &geom)?;
    let (pred, _) = add_noise(
        &truth,
        &geom,
        &NoiseConfig {
            conf_jitter: 0.2,
            loc_jitter_px: 0.0,
            seed: 3,
        },
    )?;

    let counts = cell_confusion(&pred.heatmap, &gt.heatmap, DEFAULT_CONFIDENCE)?;
    let s = precision_recall_iou(&counts);
    println!(
        "{counts:?}\nprecision {:?} recall {:?} iou {:?}",
        s.precision, s.recall, s.iou
    );

    // Relabel every 10th tread pixel as riser.
    let mut mask = truth.seg.as_u8().expect("synthetic masks are u8").to_vec();
    for pix in (0..512 * 512).step_by(10) {
        if mask[pix * 3 + 2] == 1 {
            mask[pix * 3 + 1] = 1;
            mask[pix * 3 + 2] = 0;
        }
    }
    let pred_mask = TensorGrid::from_u8(&[512, 512, 3], mask)?;
    if let Some(px) = pixel_accuracy(&pred_mask, &truth.seg)? {
        println!("pa {:.4} mpa {:.4} per class {:?}", px.pa, px.mpa, px.per_class);
    }
    Ok(())
}
