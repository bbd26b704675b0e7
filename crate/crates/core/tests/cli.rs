use std::path::Path;

use stairkit::cli::run;
use stairkit::csvio::read_equations_csv;
use stairkit::ply::read_ply;
use stairkit::{read_tensor, LineKind};

fn stairkit(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        std::iter::once("stairkit").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_then_link_three_steps() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("scene");
    let (code, _, err) = stairkit(&["synth", "--steps", "3", "--out", p(&scene)]);
    assert_eq!(code, 0, "{err}");
    for f in [
        "lines.csv",
        "seg.stn3",
        "depth.stn3",
        "rgb.stn3",
        "intrinsics.txt",
        "spec.txt",
    ] {
        assert!(scene.join(f).exists(), "missing {f}");
    }
    let eqs = dir.path().join("eqs.csv");
    let labels = scene.join("labels");
    let (code, _, err) = stairkit(&[
        "link",
        "--heat",
        p(&labels),
        "--threshold",
        "0.75",
        "--topk",
        "50",
        "--out",
        p(&eqs),
    ]);
    assert_eq!(code, 0, "{err}");
    let eqs = read_equations_csv(&eqs).unwrap();
    assert_eq!(eqs.iter().filter(|e| e.kind == LineKind::Convex).count(), 3);
    assert_eq!(eqs.iter().filter(|e| e.kind == LineKind::Concave).count(), 3);
}

#[test]
fn reconstruct_writes_ply() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("s");
    assert_eq!(
        stairkit(&[
            "synth",
            "--steps",
            "2",
            "--out",
            p(&scene),
            "--height",
            "120",
            "--width",
            "160",
            "--rows",
            "15",
            "--cols",
            "10"
        ])
        .0,
        0
    );
    let ply = dir.path().join("tread.ply");
    let (code, out, err) = stairkit(&[
        "reconstruct",
        "--depth",
        p(&scene.join("depth.stn3")),
        "--mask",
        p(&scene.join("seg.stn3")),
        "--intrinsics",
        p(&scene.join("intrinsics.txt")),
        "--class",
        "tread",
        "--rgb",
        p(&scene.join("rgb.stn3")),
        "--out",
        p(&ply),
    ]);
    assert_eq!(code, 0, "{err}");
    let cloud = read_ply(&ply).unwrap();
    let seg = read_tensor(scene.join("seg.stn3")).unwrap();
    let treads = (0..120 * 160).filter(|&i| seg.value(i * 3 + 2) == 1.0).count();
    assert_eq!(cloud.points.len(), treads);
    assert!(cloud.colors.is_some());
    assert!(out.starts_with(&format!("{treads} points")));
}

#[test]
fn encode_decode_eval_loss() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("s");
    assert_eq!(
        stairkit(&["synth", "--steps", "4", "--random", "--seed", "11", "--out", p(&scene)]).0,
        0
    );
    let stem = dir.path().join("enc");
    let (code, _, err) = stairkit(&["encode", "--lines", p(&scene.join("lines.csv")), "--out", p(&stem)]);
    assert_eq!(code, 0, "{err}");
    // Re-encoding the CSV reproduces the labels written by synth.
    for kind in ["convex", "concave"] {
        let a = std::fs::read(format!("{}.heat.{kind}.stn3", p(&stem))).unwrap();
        let b = std::fs::read(format!("{}.heat.{kind}.stn3", p(&scene.join("labels")))).unwrap();
        assert_eq!(a, b);
    }
    let cells = dir.path().join("cells.csv");
    assert_eq!(
        stairkit(&["decode", "--labels", p(&stem), "--kind", "concave", "--out", p(&cells)]).0,
        0
    );
    assert!(std::fs::read_to_string(&cells).unwrap().lines().count() > 1);

    let metrics = dir.path().join("metrics.txt");
    let (code, out, err) = stairkit(&[
        "eval",
        "--pred-labels",
        p(&stem),
        "--gt-labels",
        p(&stem),
        "--pred-mask",
        p(&scene.join("seg.stn3")),
        "--gt-mask",
        p(&scene.join("seg.stn3")),
        "--out",
        p(&metrics),
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(
        out,
        "precision recall iou pa mpa\n1.000000 1.000000 1.000000 1.000000 1.000000\n"
    );
    let kv = std::fs::read_to_string(&metrics).unwrap();
    assert!(kv.contains("iou = 1.000000") && kv.contains("mpa = 1.000000"));

    let (code, out, _) = stairkit(&["loss", "--pred-labels", p(&stem), "--gt-labels", p(&stem)]);
    assert_eq!(code, 0);
    assert!(out.contains("total = 0.000000"));
}

#[test]
fn deterministic_synth() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert_eq!(
            stairkit(&["synth", "--random", "--seed", "5", "--steps", "5", "--out", p(d)]).0,
            0
        );
    }
    for f in ["lines.csv", "depth.stn3", "labels.loc.convex.stn3"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn exit_codes() {
    assert_eq!(stairkit(&["frobnicate"]).0, 2);
    assert_eq!(stairkit(&["bench", "--iters", "3"]).0, 1);
    assert_eq!(
        stairkit(&["synth", "--steps", "0", "--out", "/tmp/never-written-stairkit"]).0,
        1
    );
    let (code, out, _) = stairkit(&["bench", "--size", "160x120", "--iters", "10"]);
    assert_eq!(code, 0);
    for stage in ["link", "harden", "class_depth", "reconstruct", "whole"] {
        assert!(out.lines().any(|l| l.starts_with(stage)), "no {stage} row in {out}");
    }
}
