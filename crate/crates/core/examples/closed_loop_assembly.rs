// Closing a descriptor plant with a static output-feedback template: slack
// variables, parameter slots, and a JSON round trip of the closed loop.

use ddae_hinf::{catalog, interconnect, io, levelset};

pub fn run_example() -> ddae_hinf::Result<(f64, f64)> {
    let (plant, template) = catalog::second_example_loop(1.0, 2.0);
    let pcl = interconnect::assemble(&plant, &template)?;
    let layout = pcl.layout();
    println!(
        "closed loop: {} states; plant block at {}, u-slack at {}, y-slack at {}; delays {:?}",
        layout.n,
        layout.x_g,
        layout.u,
        layout.y,
        pcl.delays()
    );
    for (k, slot) in pcl.slots().iter().enumerate() {
        println!("parameter {k}: {:?} entry ({}, {})", slot.block, slot.row, slot.col);
    }

    let sys = interconnect::instantiate(&pcl, &[-0.3533, -0.1012])?;
    let back = io::system_from_json(&io::system_to_json(&sys))?;
    let opts = levelset::LevelSetOptions::default();
    let a = levelset::strong_hinf_norm(&sys, &opts)?.value;
    let b = levelset::strong_hinf_norm(&back, &opts)?.value;
    println!("strong norm {a:.6}, after JSON round trip {b:.6}");
    Ok((a, b))
}

#[allow(dead_code)]
fn main() -> ddae_hinf::Result<()> {
    run_example().map(|_| ())
}
