//! Mean-field order parameter of the Rabi-Hubbard chain across its
//! critical coupling.
//!
//!     cargo run --example mean_field

use rabi_hubbard::meanfield::{critical_coupling, solve_model, Branch};
use rabi_hubbard::params::{find_set, Study};
use rabi_hubbard::units::{khz, to_khz};

fn main() -> rabi_hubbard::Result<()> {
    let gc = critical_coupling(khz(42.3), khz(2.0))?;
    println!("omega0 = 42.3 kHz, delta0 = 2 kHz: g_c = {:.4} kHz", to_khz(gc));

    let model = find_set(Study::PhaseTransition, 6)?.model()?;
    let spec = model.mode_spectrum()?;
    let gc = critical_coupling(model.spin_freq, spec.freqs[0])?;
    println!(
        "6-ion set: omega0 = {:.2} kHz, delta0 = {:.3} kHz, g_c = {:.3} kHz",
        to_khz(model.spin_freq),
        to_khz(spec.freqs[0]),
        to_khz(gc)
    );
    // the lowest mode is staggered, so the order shows up with alternating sign
    println!("{:>8} {:>10} {:>10} {:>10}  branch", "g/g_c", "|<b0>|", "sx_0", "sx_1");
    for k in 0..12 {
        let r = 0.55 + 0.125 * k as f64;
        let sol = solve_model(r * gc, model.spin_freq, &spec)?;
        let b = match sol.branch {
            Branch::Trivial => "trivial",
            Branch::Broken => "broken",
        };
        println!(
            "{r:>8.3} {:>10.4} {:>10.5} {:>10.5}  {b}",
            sol.b0_amplitude, sol.spin_x[0], sol.spin_x[1]
        );
    }
    Ok(())
}
