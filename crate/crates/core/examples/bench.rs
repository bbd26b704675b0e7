//! Times linking, mask hardening, class depth and reconstruction on a
//! synthetic 640x480 frame, single-threaded and with a thread pool.

use stairkit::bench::{bench_inputs, BenchInputs};

fn main() -> stairkit::Result<()> {
    let threads = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let inputs = BenchInputs::synthetic(640, 480, 0)?;
    println!("{}\n", bench_inputs(&inputs, 100, 1)?);
    println!("{}", bench_inputs(&inputs, 100, threads)?);
    Ok(())
}
