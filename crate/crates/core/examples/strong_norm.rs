// Predictor-corrector computation of a strong H-infinity norm, printing the
// level-set trace.

use ddae_hinf::catalog;
use ddae_hinf::levelset::{self, LevelSetOptions, StrongNormResult};
use ddae_hinf::synthesis;

pub fn run_example() -> ddae_hinf::Result<StrongNormResult> {
    let sys = catalog::eq21_system(1.0, 2.0);
    let stab = synthesis::check_strong_stability(&sys, 20, 20)?;
    println!(
        "stable: {} (abscissa {:.4}, difference radius {:.4})",
        stab.stable, stab.spectral_abscissa, stab.difference_radius
    );

    let opts = LevelSetOptions {
        auto_seeds: false,
        ..LevelSetOptions::default()
    };
    let r = levelset::strong_hinf_norm(&sys, &opts)?;
    println!("asymptotic floor {:.6}", r.ta.value);
    for (i, rec) in r.trace.iter().enumerate() {
        println!("level {i}: {:.6} crossings {:?}", rec.level, rec.crossings);
    }
    println!(
        "strong norm {:.6} on the {:?} branch at omega {:?}",
        r.value, r.branch, r.omega_hat
    );
    Ok(r)
}

#[allow(dead_code)]
fn main() -> ddae_hinf::Result<()> {
    run_example().map(|_| ())
}
