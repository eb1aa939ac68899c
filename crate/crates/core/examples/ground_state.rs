//! Lanczos ground states of a small uniform chain and the nearest-neighbour
//! spin correlation across the transition.
//!
//!     cargo run --release --example ground_state

use rabi_hubbard::exact::{build_hamiltonian, ground_state, BasisSpec, LanczosOptions, Sector};
use rabi_hubbard::meanfield::critical_coupling;
use rabi_hubbard::params::uniform_transition_model;
use rabi_hubbard::units::{khz, to_khz};

fn main() -> rabi_hubbard::Result<()> {
    let model = uniform_transition_model(2, khz(2.0))?;
    let gc = critical_coupling(model.spin_freq, model.mode_spectrum()?.freqs[0])?;
    let h = build_hamiltonian(&model, BasisSpec::local(2, 12, Sector::Even))?;
    println!(
        "2 ions, cutoff 12, even sector: {} states, g_c(mf) = {:.3} kHz",
        h.dim(),
        to_khz(gc)
    );
    println!(
        "{:>6} {:>14} {:>12} {:>10} {:>8}",
        "g/g_c", "E0 (kHz)", "gap (kHz)", "C_01", "S (bit)"
    );
    for r in [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0] {
        let gs = ground_state(&h, r * gc, &LanczosOptions::default())?;
        println!(
            "{r:>6.2} {:>14.4} {:>12.5} {:>10.4} {:>8.4}",
            to_khz(gs.report.energy),
            gs.report.gap.map(to_khz).unwrap_or(f64::NAN),
            gs.state.correlation(0, 1)?,
            gs.state.entanglement_entropy(1)?
        );
    }
    Ok(())
}
