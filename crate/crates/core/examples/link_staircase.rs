//! Renders a random staircase, encodes its lines, perturbs the heatmaps and
//! links the cells back into line equations.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stairkit::linker::link_kind;
use stairkit::synth::{add_noise, NoiseConfig};
use stairkit::{generate_scene, GridGeometry, LineKind, LinkerConfig, StairSpec};

fn main() -> stairkit::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let geom = GridGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = generate_scene(&StairSpec::random(&mut rng, 5, 512, 512))?;

    let noise = NoiseConfig {
        conf_jitter: 0.05,
        loc_jitter_px: 0.0,
        seed,
    };
    let (convex, concave) = add_noise(&truth, &geom, &noise)?;
    let cfg = LinkerConfig::for_geometry(&geom);
    for (labels, kind) in [(&convex, LineKind::Convex), (&concave, LineKind::Concave)] {
        let (eqs, stages) = link_kind(labels, &cfg, &geom)?;
        println!(
            "{kind}: {} ground-truth lines, stages {stages:?}",
            truth.lines_of(kind).len()
        );
        for e in eqs {
            println!(
                "  y = {:+.4} x + {:8.3}  x in [{:.1}, {:.1}]  ({} cells)",
                e.k, e.b, e.x_min, e.x_max, e.source_cells
            );
        }
    }
    Ok(())
}
