//! Turns a synthetic depth map and class scores into riser and tread point
//! clouds, fits a plane to the treads and writes colored PLY files.

use stairkit::ply::write_ply;
use stairkit::{fit_plane, generate_scene, Reconstructor, StairSpec, SurfaceClass};

fn main() -> stairkit::Result<()> {
    let spec = StairSpec::head_on(4, 480, 640);
    let truth = generate_scene(&spec)?;
    let recon = Reconstructor::new(4)?;
    let mask = recon.harden_mask(&truth.seg)?;
    let out = std::env::temp_dir().join("stairkit-clouds");
    std::fs::create_dir_all(&out)?;
    for class in [SurfaceClass::Riser, SurfaceClass::Tread] {
        let cloud = recon.reconstruct_cloud(&truth.depth, &mask, &spec.k, class, Some(&truth.rgb))?;
        let path = out.join(format!("{class}.ply"));
        write_ply(&cloud, &path)?;
        println!("{class}: {} points -> {}", cloud.len(), path.display());
    }

    // A single tread is one plane; all treads together are parallel planes.
    let tread = recon.reconstruct_cloud(&truth.depth, &mask, &spec.k, SurfaceClass::Tread, None)?;
    let plane = fit_plane(&tread.points)?;
    println!("all treads: normal {:.4?}, rms {:.4} m", plane.normal, plane.rms);
    Ok(())
}
