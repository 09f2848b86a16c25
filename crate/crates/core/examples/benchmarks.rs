// Published controllers from the literature, re-evaluated.

use ddae_hinf::bench::{self, BenchOutcome};
use ddae_hinf::levelset::LevelSetOptions;

pub fn run_example() -> ddae_hinf::Result<Vec<(String, BenchOutcome)>> {
    let opts = LevelSetOptions::default();
    let mut all = Vec::new();
    for name in bench::names() {
        let entry = bench::entry(name)?;
        for o in bench::evaluate(&entry, &opts) {
            match o.computed {
                Some(v) => println!("{name:<22} {:<24} {v:>10.4} (published {:.4})", o.label, o.published),
                None => println!(
                    "{name:<22} {:<24} {:>10} (published {:.4}): {}",
                    o.label,
                    "-",
                    o.published,
                    o.error.as_deref().unwrap_or("")
                ),
            }
            all.push((name.to_string(), o));
        }
    }
    Ok(all)
}

#[allow(dead_code)]
fn main() -> ddae_hinf::Result<()> {
    run_example().map(|_| ())
}
