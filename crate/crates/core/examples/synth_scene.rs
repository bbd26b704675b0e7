//! Writes a synthetic stair scene directory (lines, masks, depth, colors,
//! intrinsics and the scene parameters).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stairkit::{generate_scene, LineKind, StairSpec};

fn main() -> stairkit::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("stairkit-scene"));
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let spec = StairSpec::random(&mut rng, 6, 480, 640);
    let truth = generate_scene(&spec)?;
    truth.write_dir(&out)?;
    println!("{}", spec.to_kv());
    for kind in LineKind::ALL {
        println!("{kind}: {} lines", truth.lines_of(kind).len());
    }
    println!("written to {}", out.display());
    Ok(())
}
