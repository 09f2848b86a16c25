// Singular-value sweep written as CSV.

use ddae_hinf::{catalog, io, model};

pub fn run_example() -> ddae_hinf::Result<std::path::PathBuf> {
    let sys = catalog::eq10_system(0.99, 2.0);
    let grid = model::log_grid(1e-1, 1e3, 4000);
    let curve = model::sigma_sweep(&sys, &grid, 1);
    let path = std::env::temp_dir().join(format!("ddae_sweep_{}.csv", std::process::id()));
    io::save_sweep(&path, &curve)?;
    if let Some(p) = curve.peak() {
        println!("peak sigma1 {:.6} at omega {:.4}", p.sigmas[0], p.omega);
    }
    println!("{} rows written to {}", curve.points.len(), path.display());
    Ok(path)
}

#[allow(dead_code)]
fn main() -> ddae_hinf::Result<()> {
    run_example().map(|_| ())
}
