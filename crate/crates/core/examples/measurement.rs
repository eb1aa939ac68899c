//! Simulated phase-scan readout: rotate both spins, measure with crosstalk
//! and flip errors, sample finite shots and fit C0 cos^2(phi+phi0) + C.
//!
//!     cargo run --release --example measurement

use rabi_hubbard::exact::{
    build_hamiltonian, run_dynamics, spin_density_matrix, BasisSpec, Coupling, EvolveOptions, QuantumState, Sector,
    TrajectoryRequest,
};
use rabi_hubbard::measure::{
    apply_detection_errors, correlation_from_counts, fit_correlation, measured_scan, phase_scan_pair, reduce_pair,
    rotated_pair_distribution, sample_shots, DetectionErrorModel, PhaseScan,
};
use rabi_hubbard::params::{find_set, Study};
use rabi_hubbard::units::{khz, microseconds};

fn main() -> rabi_hubbard::Result<()> {
    let model = find_set(Study::Dynamics, 2)?.model()?;
    let h = build_hamiltonian(&model, BasisSpec::local(2, 6, Sector::Even))?;
    let mut state = QuantumState::all_up(h.basis.clone())?;
    run_dynamics(
        &h,
        Coupling::Constant(khz(3.0)),
        &mut state,
        &[0.0, microseconds(60.0)],
        TrajectoryRequest::default(),
        &EvolveOptions::default(),
    )?;
    let rho = reduce_pair(&spin_density_matrix(&state.basis, &state.amplitudes)?, 2, 0, 1)?;

    let phases: Vec<f64> = (0..16).map(|k| std::f64::consts::PI * k as f64 / 16.0).collect();
    let ideal = fit_correlation(&phase_scan_pair(&rho, (0, 1), &phases))?;
    let errors = DetectionErrorModel::new(0.05, 0.02)?;
    let noisy = fit_correlation(&measured_scan(&rho, (0, 1), &phases, &errors)?)?;
    println!(
        "ideal:            C0 = {:.4}, phi0 = {:.4}, C = {:.4}",
        ideal.amplitude, ideal.phase_offset, ideal.constant
    );
    println!(
        "detection errors: C0 = {:.4}, phi0 = {:.4}, C = {:.4}",
        noisy.amplitude, noisy.phase_offset, noisy.constant
    );
    println!(
        "  amplitude ratio {:.4} vs (1-eps_c)(1-4 eps_0) = {:.4}",
        noisy.amplitude / ideal.amplitude,
        0.95 * 0.92
    );

    for shots in [100, 500, 5000] {
        let corr = phases
            .iter()
            .enumerate()
            .map(|(k, &phi)| {
                let p = apply_detection_errors(&rotated_pair_distribution(&rho, phi), 0.05, 0.02)?;
                let c = sample_shots(&p, shots, k as u64)?;
                Ok(correlation_from_counts(&[c[0], c[1], c[2], c[3]]))
            })
            .collect::<rabi_hubbard::Result<Vec<f64>>>()?;
        let fit = fit_correlation(&PhaseScan {
            pair: (0, 1),
            phases: phases.clone(),
            correlations: corr,
        })?;
        println!(
            "{shots:>5} shots/phase: C0 = {:.4}, C = {:.4}, rms misfit {:.4}",
            fit.amplitude, fit.constant, fit.residual
        );
    }
    Ok(())
}
