//! Command-line front end. Exit codes: 0 success, 1 domain error, 2 usage.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::{bench_pipeline, parse_size, WHOLE_BUDGET_MS};
use crate::camera::{parse_intrinsics, CameraIntrinsics};
use crate::csvio::{equations_to_csv, read_lines_csv, write_equations_csv, write_lines_csv};
use crate::error::{Error, Result};
use crate::fsio;
use crate::geometry::{GridGeometry, LineKind};
use crate::label_codec::{cell_to_pixels, decode_cells, encode_lines, LabelPair};
use crate::linker::{link_kind, LinkerConfig};
use crate::losses::{depth_loss, line_loss, seg_loss, DepthInput, LineLossInput, LossConfig, SegInput};
use crate::metrics::{cell_confusion, pixel_accuracy, precision_recall_iou, ConfusionCounts, DEFAULT_CONFIDENCE};
use crate::ply::write_ply;
use crate::reconstruct::{DepthRange, Reconstructor, SurfaceClass};
use crate::synth::{generate_scene, StairSpec};
use crate::tensor::read_tensor;

#[derive(Parser, Debug)]
#[command(
    name = "stairkit",
    version,
    about = "Stair line labels, linking and point cloud tools"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a synthetic staircase scene directory
    Synth(SynthArgs),
    /// Encode a lines CSV into heatmap/location grids
    Encode(EncodeArgs),
    /// Decode label grids back into per-cell segments
    Decode(DecodeArgs),
    /// Link label grids into line equations
    Link(LinkArgs),
    /// Back-project one class of a depth map into a PLY cloud
    Reconstruct(ReconstructArgs),
    /// Score predicted labels and/or masks against ground truth
    Eval(EvalArgs),
    /// Evaluate the training losses on stored tensors
    Loss(LossArgs),
    /// Time the post-network pipeline on synthetic input
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone, Copy)]
pub struct GridArgs {
    #[arg(long, default_value_t = 512)]
    pub height: usize,
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub rows: usize,
    #[arg(long, default_value_t = 32)]
    pub cols: usize,
}

impl GridArgs {
    fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(self.height, self.width, self.rows, self.cols)
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Draw a random pose and staircase from `--seed` instead of the head-on view
    #[arg(long)]
    pub random: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    #[arg(long)]
    pub lines: PathBuf,
    /// Output stem; writes <stem>.heat.<kind>.stn3 and <stem>.loc.<kind>.stn3
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    /// Label stem written by `encode` or `synth`
    #[arg(long, alias = "heat")]
    pub labels: PathBuf,
    #[arg(long, default_value = "convex")]
    pub kind: LineKind,
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
    /// Lines CSV of per-cell segments in pixels
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Args, Debug)]
pub struct LinkArgs {
    #[arg(long, alias = "heat")]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 0.75)]
    pub threshold: f64,
    #[arg(long, default_value_t = 50)]
    pub topk: usize,
    /// Equations CSV; printed to stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub depth: PathBuf,
    /// H x W x 3 class scores or one-hot mask
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub intrinsics: PathBuf,
    #[arg(long, default_value = "tread")]
    pub class: SurfaceClass,
    #[arg(long)]
    pub rgb: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 0.2)]
    pub dmin: f64,
    #[arg(long, default_value_t = 10.0)]
    pub dmax: f64,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred_labels: Option<PathBuf>,
    #[arg(long)]
    pub gt_labels: Option<PathBuf>,
    #[arg(long)]
    pub pred_mask: Option<PathBuf>,
    #[arg(long)]
    pub gt_mask: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CONFIDENCE)]
    pub confidence: f64,
    /// key = value metrics file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LossArgs {
    #[arg(long)]
    pub pred_labels: PathBuf,
    #[arg(long)]
    pub gt_labels: PathBuf,
    #[arg(long)]
    pub pred_seg: Option<PathBuf>,
    #[arg(long)]
    pub gt_seg: Option<PathBuf>,
    #[arg(long)]
    pub pred_depth: Option<PathBuf>,
    #[arg(long)]
    pub gt_depth: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    pub lambda1: f64,
    #[arg(long, default_value_t = 10.0)]
    pub lambda2: f64,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value = "640x480")]
    pub size: String,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(text) => {
            let _ = write!(out, "{text}");
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

/// Runs a parsed command and returns what it prints on success.
pub fn execute(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Link(a) => link(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Eval(a) => eval(a),
        Command::Loss(a) => loss(a),
        Command::Bench(a) => bench(a),
    }
}

fn synth(a: &SynthArgs) -> Result<String> {
    let geom = a.grid.geometry()?;
    let spec = if a.random {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        StairSpec::random(&mut rng, a.steps, geom.input_h(), geom.input_w())
    } else {
        StairSpec::head_on(a.steps, geom.input_h(), geom.input_w())
    };
    let truth = generate_scene(&spec)?;
    truth.write_dir(&a.out)?;
    let (convex, concave) = encode_lines(&truth.lines, &geom)?;
    let stem = a.out.join("labels");
    convex.save(&stem)?;
    concave.save(&stem)?;
    Ok(format!(
        "wrote {} ({} convex, {} concave lines)\n",
        a.out.display(),
        truth.lines_of(LineKind::Convex).len(),
        truth.lines_of(LineKind::Concave).len()
    ))
}

fn encode(a: &EncodeArgs) -> Result<String> {
    let geom = a.grid.geometry()?;
    let lines = read_lines_csv(&a.lines)?;
    let (convex, concave) = encode_lines(&lines, &geom)?;
    convex.save(&a.out)?;
    concave.save(&a.out)?;
    Ok(format!("encoded {} lines\n", lines.len()))
}

fn decode(a: &DecodeArgs) -> Result<String> {
    let geom = a.grid.geometry()?;
    let labels = LabelPair::load(&a.labels, a.kind)?;
    labels.validate(Some(&geom))?;
    let segs: Vec<_> = decode_cells(&labels, a.threshold)
        .iter()
        .map(|d| cell_to_pixels(d, &geom))
        .collect();
    write_lines_csv(&segs, &a.out)?;
    Ok(format!("decoded {} cells\n", segs.len()))
}

fn link(a: &LinkArgs) -> Result<String> {
    let geom = a.grid.geometry()?;
    let cfg = LinkerConfig {
        confidence_threshold: a.threshold,
        top_k: a.topk,
        ..LinkerConfig::for_geometry(&geom)
    };
    let mut eqs = Vec::new();
    for kind in LineKind::ALL {
        let labels = LabelPair::load(&a.labels, kind)?;
        eqs.extend(link_kind(&labels, &cfg, &geom)?.0);
    }
    eqs.sort_by(|x, y| x.mean_y().total_cmp(&y.mean_y()).then(x.kind.cmp(&y.kind)));
    match &a.out {
        Some(path) => {
            write_equations_csv(&eqs, path)?;
            Ok(format!("linked {} lines\n", eqs.len()))
        }
        None => Ok(String::from_utf8_lossy(&equations_to_csv(&eqs)?).into_owned()),
    }
}

fn load_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    parse_intrinsics(&std::fs::read_to_string(path)?)
}

fn reconstruct(a: &ReconstructArgs) -> Result<String> {
    let depth = read_tensor(&a.depth)?;
    let depth = if depth.rank() == 3 {
        depth.reshaped(&[depth.rows(), depth.cols()])?
    } else {
        depth
    };
    let scores = read_tensor(&a.mask)?;
    let k = load_intrinsics(&a.intrinsics)?;
    let rgb = a.rgb.as_ref().map(read_tensor).transpose()?;
    DepthRange::new(a.dmin, a.dmax)?.warn_outside(&depth);
    let recon = Reconstructor::new(a.threads)?;
    let mask = recon.harden_mask(&scores)?;
    let cloud = recon.reconstruct_cloud(&depth, &mask, &k, a.class, rgb.as_ref())?;
    write_ply(&cloud, &a.out)?;
    Ok(format!(
        "{} points ({} dropped for zero depth)\n",
        cloud.len(),
        cloud.dropped
    ))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.6}"))
}

fn eval(a: &EvalArgs) -> Result<String> {
    let mut kv = String::new();
    let mut summary = Vec::new();
    match (&a.pred_labels, &a.gt_labels) {
        (Some(p), Some(g)) => {
            let mut counts = ConfusionCounts::default();
            for kind in LineKind::ALL {
                let pred = LabelPair::load(p, kind)?;
                let gt = LabelPair::load(g, kind)?;
                counts = counts + cell_confusion(&pred.heatmap, &gt.heatmap, a.confidence)?;
            }
            let s = precision_recall_iou(&counts);
            let _ = writeln!(
                kv,
                "tp = {}\nfp = {}\nfn = {}\ntn = {}",
                counts.tp, counts.fp, counts.fn_, counts.tn
            );
            for (name, v) in [("precision", s.precision), ("recall", s.recall), ("iou", s.iou)] {
                let _ = writeln!(kv, "{name} = {}", fmt_opt(v));
                summary.push(fmt_opt(v));
            }
        }
        (None, None) => summary.extend(["-".to_string(), "-".to_string(), "-".to_string()]),
        _ => return Err(Error::Config("--pred-labels and --gt-labels go together".into())),
    }
    match (&a.pred_mask, &a.gt_mask) {
        (Some(p), Some(g)) => {
            let pred = crate::reconstruct::harden_mask(&read_tensor(p)?)?;
            let gt = read_tensor(g)?;
            let scores = pixel_accuracy(&pred, &gt)?;
            let (pa, mpa) = (scores.map(|s| s.pa), scores.map(|s| s.mpa));
            let _ = writeln!(kv, "pa = {}\nmpa = {}", fmt_opt(pa), fmt_opt(mpa));
            summary.push(fmt_opt(pa));
            summary.push(fmt_opt(mpa));
        }
        (None, None) => summary.extend(["-".to_string(), "-".to_string()]),
        _ => return Err(Error::Config("--pred-mask and --gt-mask go together".into())),
    }
    if let Some(path) = &a.out {
        fsio::write_atomic(path, kv.as_bytes())?;
    }
    Ok(format!("precision recall iou pa mpa\n{}\n", summary.join(" ")))
}

fn loss(a: &LossArgs) -> Result<String> {
    let cfg = LossConfig {
        lambda1: a.lambda1,
        lambda2: a.lambda2,
        ..LossConfig::default()
    };
    cfg.validate()?;
    let mut rows: Vec<(&str, f64)> = Vec::new();
    for kind in LineKind::ALL {
        let pred = LabelPair::load(&a.pred_labels, kind)?;
        let gt = LabelPair::load(&a.gt_labels, kind)?;
        let name = match kind {
            LineKind::Convex => "line_convex",
            LineKind::Concave => "line_concave",
        };
        rows.push((name, line_loss(&LineLossInput::from_labels(&pred, &gt)?, &cfg)));
    }
    match (&a.pred_seg, &a.gt_seg) {
        (Some(p), Some(g)) => {
            let inp = SegInput::from_grids(&read_tensor(p)?, &read_tensor(g)?)?;
            rows.push(("segmentation", seg_loss(&inp, &cfg).value));
        }
        (None, None) => {}
        _ => return Err(Error::Config("--pred-seg and --gt-seg go together".into())),
    }
    match (&a.pred_depth, &a.gt_depth) {
        (Some(p), Some(g)) => {
            let inp = DepthInput::from_grids(&read_tensor(p)?, &read_tensor(g)?)?;
            rows.push(("depth", depth_loss(&inp, &cfg)));
        }
        (None, None) => {}
        _ => return Err(Error::Config("--pred-depth and --gt-depth go together".into())),
    }
    let total: f64 = rows.iter().map(|r| r.1).sum();
    rows.push(("total", total));
    let mut s = String::new();
    for (name, v) in rows {
        let _ = writeln!(s, "{name} = {v:.6}");
    }
    Ok(s)
}

fn bench(a: &BenchArgs) -> Result<String> {
    let (w, h) = parse_size(&a.size)?;
    let report = bench_pipeline(w, h, a.iters, a.threads, a.seed)?;
    let mut s = report.to_string();
    let _ = writeln!(s, "\nbudget_ms = {WHOLE_BUDGET_MS}\nstable = {}", report.stable());
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(
            std::iter::once("stairkit").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, _, err) = run_args(&["link", "--bogus"]);
        assert_eq!(code, 2);
        assert!(err.contains("--bogus"));
    }

    #[test]
    fn version_flag() {
        let (code, out, _) = run_args(&["--version"]);
        assert_eq!(code, 0);
        assert!(out.contains(env!("CARGO_PKG_VERSION")));
    }

    #[test]
    fn missing_file_is_domain_error() {
        let (code, _, err) = run_args(&["link", "--labels", "/nonexistent/stem"]);
        assert_eq!(code, 1);
        assert!(err.starts_with("error:"));
    }
}
