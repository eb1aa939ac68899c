//! Exponential coupling ramp into the ordered phase and back for two ions,
//! comparing two ramp speeds.
//!
//!     cargo run --release --example quench_ramp

use rabi_hubbard::exact::{BasisSpec, EvolveOptions, Sector};
use rabi_hubbard::meanfield::critical_coupling;
use rabi_hubbard::params::{find_set, Study};
use rabi_hubbard::quench::{run_quench, QuenchSchedule};
use rabi_hubbard::units::{milliseconds, to_khz};

fn main() -> rabi_hubbard::Result<()> {
    let model = find_set(Study::PhaseTransition, 2)?.model()?;
    let gc = critical_coupling(model.spin_freq, model.mode_spectrum()?.freqs[0])?;
    println!("2 ions, g_max = 1.3 g_c(mf) = {:.3} kHz", to_khz(1.3 * gc));
    for tau in [1.0, 0.5, 0.2] {
        let s = QuenchSchedule::reverse_appended(milliseconds(tau), 1.3 * gc);
        let spec = BasisSpec::collective(vec![30, 4], Sector::Even);
        let (res, _) = run_quench(&model, &s, spec, &s.grid(20), false, &EvolveOptions::default())?;
        let mid = res.times.len() / 2;
        println!(
            "tau = {tau:.1} ms: <sz> at the turning point {:.4}, C_01 there {:.4}, final <sz> {:.6}",
            res.mean_sigma_z[mid],
            res.correlations[mid][1],
            res.final_mean_sigma_z()
        );
    }
    Ok(())
}
