// Tuning a single static gain by minimizing the strong H-infinity norm.

use ddae_hinf::synthesis::{self, OptimizeOptions, OptimizeResult};
use ddae_hinf::{catalog, interconnect};

pub fn run_example() -> ddae_hinf::Result<OptimizeResult> {
    let (plant, template) = catalog::scalar_loop(-7.4);
    let pcl = interconnect::assemble(&plant, &template)?;
    let r = synthesis::optimize(&pcl, &[-7.4], &OptimizeOptions::default())?;
    for t in r.trace.iter().take(8) {
        println!("{:>3} {:?} K = {:+.6} xi = {:.6}", t.iteration, t.phase, t.params[0], t.xi);
    }
    println!(
        "K* = {:.6}, xi = {:.6} after {} evaluations ({})",
        r.params[0], r.xi, r.evaluations, r.stop_reason
    );
    Ok(r)
}

#[allow(dead_code)]
fn main() -> ddae_hinf::Result<()> {
    run_example().map(|_| ())
}
