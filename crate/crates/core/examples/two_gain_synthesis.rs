// Two-parameter static output feedback for a descriptor plant with delayed
// measurements. The optimum sits where the frequency and asymptotic
// branches meet.

use ddae_hinf::levelset::LevelSetOptions;
use ddae_hinf::synthesis::{self, OptimizeOptions, OptimizeResult};
use ddae_hinf::{catalog, interconnect};

pub fn run_example() -> ddae_hinf::Result<OptimizeResult> {
    let (plant, template) = catalog::second_example_loop(1.0, 2.0);
    let pcl = interconnect::assemble(&plant, &template)?;

    let at = synthesis::objective(&pcl, &[-0.3533, -0.1012], &LevelSetOptions::default())?;
    if let Some(res) = &at.result {
        println!(
            "at K = (-0.3533, -0.1012): xi = {:.6}, asymptotic part {:.6}",
            at.xi, res.ta.value
        );
    }

    let r = synthesis::optimize(&pcl, &template.initial_parameters(), &OptimizeOptions::default())?;
    println!(
        "optimized K = ({:.6}, {:.6}), xi = {:.6}, {:?} branch, {} evaluations",
        r.params[0], r.params[1], r.xi, r.branch, r.evaluations
    );
    Ok(r)
}

#[allow(dead_code)]
fn main() -> ddae_hinf::Result<()> {
    run_example().map(|_| ())
}
