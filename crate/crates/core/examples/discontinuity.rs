// The plain H-infinity norm jumps under tiny delay changes; the strong norm
// does not.

use ddae_hinf::catalog;
use ddae_hinf::levelset::{self, LevelSetOptions};

pub struct Row {
    pub tau1: f64,
    pub plain: f64,
    pub plain_omega: f64,
    pub strong: f64,
}

pub fn run_example() -> ddae_hinf::Result<Vec<Row>> {
    let opts = LevelSetOptions::default();
    let mut rows = Vec::new();
    for tau1 in [1.0, 0.99, 0.999] {
        let sys = catalog::eq10_system(tau1, 2.0);
        let plain = levelset::plain_hinf_norm(&sys, &opts, None)?;
        let strong = levelset::strong_hinf_norm(&sys, &opts)?;
        println!(
            "tau1 = {tau1:<6} plain {:.6} at omega {:<12.4} strong {:.6}",
            plain.value, plain.omega, strong.value
        );
        rows.push(Row {
            tau1,
            plain: plain.value,
            plain_omega: plain.omega,
            strong: strong.value,
        });
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> ddae_hinf::Result<()> {
    run_example().map(|_| ())
}
