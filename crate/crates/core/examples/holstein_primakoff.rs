//! Linearized spin-wave dynamics: sigma_z trajectories for four ions and
//! the stability of the 16-ion chain versus coupling.
//!
//!     cargo run --release --example holstein_primakoff

use rabi_hubbard::hp::{build_a, instability_threshold, sigma_z_trajectory, stability};
use rabi_hubbard::params::{find_set, Study};
use rabi_hubbard::units::{khz, microseconds, to_khz};

fn main() -> rabi_hubbard::Result<()> {
    let m4 = find_set(Study::Dynamics, 4)?.model()?;
    let grid: Vec<f64> = (0..=8).map(|k| microseconds(50.0 * k as f64)).collect();
    for g in [1.0, 6.0] {
        let z = sigma_z_trajectory(&build_a(&m4.with_coupling(khz(g)))?, &grid)?;
        println!("4 ions, g = {g} kHz");
        for (t, row) in grid.iter().zip(&z) {
            let r: Vec<String> = row.iter().map(|v| format!("{v:>12.4e}")).collect();
            println!("  t = {:>5.0} us {}", t * 1e6, r.join(""));
        }
    }
    let m16 = find_set(Study::Dynamics, 16)?.model()?;
    for g in [0.5, 1.0, 2.0, 6.0] {
        let r = stability(&build_a(&m16.with_coupling(khz(g)))?);
        println!(
            "16 ions, g = {g} kHz: stable {}, max Re(lambda) = {:.3e} 1/s",
            r.stable, r.max_real_part
        );
    }
    let th = instability_threshold(&m16, khz(0.5), khz(6.0), 1e-6)?;
    println!("16 ions turn unstable at g = {:.3} kHz", to_khz(th));
    Ok(())
}
