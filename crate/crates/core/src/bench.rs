//! Timing harness for the post-network pipeline: line linking, mask
//! hardening, class depth extraction and point cloud reconstruction, run on
//! a synthetic scene so numbers are reproducible anywhere.

use std::fmt;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::GridGeometry;
use crate::label_codec::{encode_lines, LabelPair};
use crate::linker::{link_lines, LinkerConfig};
use crate::reconstruct::{Reconstructor, SurfaceClass};
use crate::synth::{generate_scene, SceneTruth, StairSpec};
use crate::tensor::TensorGrid;

/// Whole-pipeline median budget used for the pass flag, in milliseconds.
pub const WHOLE_BUDGET_MS: f64 = 50.0;

#[derive(Clone, Debug, PartialEq)]
pub struct StageTiming {
    pub name: &'static str,
    pub median_ms: f64,
    pub p95_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub iters: usize,
    pub threads: usize,
    /// link, harden, class_depth, reconstruct, whole.
    pub stages: Vec<StageTiming>,
}

impl BenchReport {
    pub fn whole(&self) -> &StageTiming {
        self.stages.last().expect("report always has a whole row")
    }

    pub fn passes(&self, budget_ms: f64) -> bool {
        self.whole().median_ms < budget_ms
    }

    /// p95 of the whole pipeline stays within twice its median.
    pub fn stable(&self) -> bool {
        self.whole().p95_ms <= 2.0 * self.whole().median_ms
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# {}x{} iters={} threads={}",
            self.width, self.height, self.iters, self.threads
        )?;
        writeln!(f, "{:<12} {:>10} {:>10}", "stage", "median_ms", "p95_ms")?;
        for s in &self.stages {
            writeln!(f, "{:<12} {:>10.3} {:>10.3}", s.name, s.median_ms, s.p95_ms)?;
        }
        write!(f, "pass = {}", self.passes(WHOLE_BUDGET_MS))
    }
}

/// Inputs for one pipeline run: label grids, soft class scores, depth.
pub struct BenchInputs {
    pub geom: GridGeometry,
    pub convex: LabelPair,
    pub concave: LabelPair,
    pub scores: TensorGrid,
    pub depth: TensorGrid,
    pub truth: SceneTruth,
}

impl BenchInputs {
    /// Synthetic staircase at `width x height`; the label grid uses strides
    /// 8 (rows) and 16 (columns).
    pub fn synthetic(width: usize, height: usize, seed: u64) -> Result<Self> {
        if !height.is_multiple_of(8) || !width.is_multiple_of(16) {
            return Err(Error::Config(format!(
                "bench size {width}x{height} must be a multiple of 16x8"
            )));
        }
        let geom = GridGeometry::new(height, width, height / 8, width / 16)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = loop {
            let spec = StairSpec::random(&mut rng, 5, height, width);
            match generate_scene(&spec) {
                Ok(t) if !t.lines.is_empty() => break t,
                _ => continue,
            }
        };
        let (convex, concave) = encode_lines(&truth.lines, &geom)?;
        // Soft scores: the one-hot mask blurred by uniform noise, so the argmax
        // still reproduces the mask.
        let scores: Vec<f32> = (0..truth.seg.len())
            .map(|i| 0.6 * truth.seg.value(i) + rng.random_range(0.0..0.3f32))
            .collect();
        let scores = TensorGrid::from_f32(truth.seg.dims(), scores)?;
        Ok(BenchInputs {
            geom,
            convex,
            concave,
            scores,
            depth: truth.depth.clone(),
            truth,
        })
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

fn summarize(name: &'static str, mut samples: Vec<f64>) -> StageTiming {
    samples.sort_by(f64::total_cmp);
    StageTiming {
        name,
        median_ms: percentile(&samples, 0.5),
        p95_ms: percentile(&samples, 0.95),
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Times `iters` runs of the pipeline on `inputs` with `threads` row-band
/// workers (1 = single-threaded).
pub fn bench_inputs(inputs: &BenchInputs, iters: usize, threads: usize) -> Result<BenchReport> {
    if iters < 10 {
        return Err(Error::Config(format!(
            "bench needs at least 10 iterations, got {iters}"
        )));
    }
    let recon = Reconstructor::new(threads)?;
    let cfg = LinkerConfig::for_geometry(&inputs.geom);
    let k = inputs.truth.spec.k;
    let mut samples: [Vec<f64>; 5] = Default::default();
    for _ in 0..iters {
        let start = Instant::now();
        let t = Instant::now();
        let lines = link_lines(&inputs.convex, &inputs.concave, &cfg, &inputs.geom)?;
        samples[0].push(ms_since(t));

        let t = Instant::now();
        let mask = recon.harden_mask(&inputs.scores)?;
        samples[1].push(ms_since(t));

        let t = Instant::now();
        let riser = recon.class_depth(&inputs.depth, &mask, SurfaceClass::Riser)?;
        let tread = recon.class_depth(&inputs.depth, &mask, SurfaceClass::Tread)?;
        samples[2].push(ms_since(t));

        let t = Instant::now();
        let a = recon.cloud_from_class_depth(&riser, &k, None, SurfaceClass::Riser)?;
        let b = recon.cloud_from_class_depth(&tread, &k, None, SurfaceClass::Tread)?;
        samples[3].push(ms_since(t));
        samples[4].push(ms_since(start));
        std::hint::black_box((lines, a, b));
    }
    let [link, harden, class_depth, reconstruct, whole] = samples;
    Ok(BenchReport {
        width: inputs.geom.input_w(),
        height: inputs.geom.input_h(),
        iters,
        threads,
        stages: vec![
            summarize("link", link),
            summarize("harden", harden),
            summarize("class_depth", class_depth),
            summarize("reconstruct", reconstruct),
            summarize("whole", whole),
        ],
    })
}

pub fn bench_pipeline(width: usize, height: usize, iters: usize, threads: usize, seed: u64) -> Result<BenchReport> {
    bench_inputs(&BenchInputs::synthetic(width, height, seed)?, iters, threads)
}

/// Parses `WIDTHxHEIGHT`.
pub fn parse_size(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Parse(format!("size {s:?} is not WIDTHxHEIGHT")))?;
    let p = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("size {s:?}: {e}")))
    };
    Ok((p(w)?, p(h)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_rows() {
        let r = bench_pipeline(160, 120, 10, 1, 3).unwrap();
        let names: Vec<_> = r.stages.iter().map(|s| s.name).collect();
        assert_eq!(names, ["link", "harden", "class_depth", "reconstruct", "whole"]);
        assert!(r.stages.iter().all(|s| s.median_ms <= s.p95_ms));
        assert!(r.to_string().contains("whole"));
    }

    #[test]
    fn rejects_few_iterations() {
        assert!(bench_pipeline(160, 120, 9, 1, 0).is_err());
    }

    #[test]
    fn size_parsing() {
        assert_eq!(parse_size("640x480").unwrap(), (640, 480));
        assert!(parse_size("640").is_err());
    }

    #[test]
    fn summary_percentiles() {
        let s = summarize("x", (1..=100).map(f64::from).collect());
        assert_eq!(s.median_ms, 51.0);
        assert_eq!(s.p95_ms, 95.0);
    }
}
