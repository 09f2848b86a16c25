// Strong norm of the asymptotic transfer function of a neutral loop, and
// its independence of the delay values.

use ddae_hinf::asymptotic::{self, AsymptoticSystem, DEFAULT_GRID};
use ddae_hinf::catalog;

pub fn run_example() -> ddae_hinf::Result<Vec<f64>> {
    let mut values = Vec::new();
    for (t1, t2) in [(1.0, 2.0), (0.3, 5.7), (std::f64::consts::PI, std::f64::consts::E)] {
        let asys = AsymptoticSystem::from_system(&catalog::eq10_system(t1, t2))?;
        let r = asymptotic::strong_norm_ta(&asys, DEFAULT_GRID, true)?;
        println!("tau = ({t1:.4}, {t2:.4})  |||Ta||| = {:.9}  theta = {:?}", r.value, r.theta_hat);
        values.push(r.value);
    }
    Ok(values)
}

#[allow(dead_code)]
fn main() -> ddae_hinf::Result<()> {
    run_example().map(|_| ())
}
