//! Recover ion spacings from a measured transverse mode spectrum.
//!
//!     cargo run --release --example calibrate_spacings

use rabi_hubbard::calibrate::{fit_spacings, mode_frequencies, two_ion_spacing, FitOptions};
use rabi_hubbard::chain::ChainGeometry;
use rabi_hubbard::params::{find_set, Study};
use rabi_hubbard::units::{micrometers, to_mhz};

fn main() -> rabi_hubbard::Result<()> {
    let set = find_set(Study::PhaseTransition, 6)?;
    let meas = set.measurement()?;
    let template = ChainGeometry::uniform(6, micrometers(5.4), meas.trap_freq)?;
    let fit = fit_spacings(&meas, &template, &FitOptions::default())?;
    let um: Vec<String> = fit.spacings.iter().map(|d| format!("{:.3}", d * 1e6)).collect();
    println!("6 ions, symmetric fit: {} um", um.join(" "));
    println!(
        "  weighted RMS residual {:.2} Hz after {} iterations, converged {}",
        fit.residual / std::f64::consts::TAU,
        fit.iterations,
        fit.converged
    );
    for w in &fit.warnings {
        println!("  warning: {w}");
    }
    let model = mode_frequencies(&ChainGeometry::new(fit.spacings.clone(), meas.trap_freq)?)?;
    for (m, f) in meas.freqs.iter().zip(&model) {
        println!("  measured {:.5} MHz  fitted {:.5} MHz", to_mhz(*m), to_mhz(*f));
    }

    let free = fit_spacings(
        &meas,
        &template,
        &FitOptions {
            symmetric: Some(false),
            ..FitOptions::default()
        },
    )?;
    let um: Vec<String> = free.spacings.iter().map(|d| format!("{:.3}", d * 1e6)).collect();
    println!(
        "unconstrained fit: {} um (residual {:.2} Hz)",
        um.join(" "),
        free.residual / std::f64::consts::TAU
    );

    let two = find_set(Study::PhaseTransition, 2)?;
    let m = two.measured_modes();
    let d = two_ion_spacing(
        m[0],
        m[1],
        two.trap_freq(),
        &ChainGeometry::uniform(2, micrometers(5.0), two.trap_freq())?,
    )?;
    println!("two ions from the mode splitting: {:.3} um", d * 1e6);
    Ok(())
}
