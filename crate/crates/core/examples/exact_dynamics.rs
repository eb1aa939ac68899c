//! Krylov time evolution of the 4-ion chain from |up,0>^4 at strong
//! coupling, with conservation checks and half-chain entanglement.
//!
//!     cargo run --release --example exact_dynamics

use rabi_hubbard::exact::{
    build_hamiltonian, run_dynamics, BasisSpec, Coupling, EvolveOptions, QuantumState, Sector, TrajectoryRequest,
};
use rabi_hubbard::params::{find_set, strong_dynamics_coupling, Study};
use rabi_hubbard::units::microseconds;

fn main() -> rabi_hubbard::Result<()> {
    let model = find_set(Study::Dynamics, 4)?.model()?;
    let h = build_hamiltonian(&model, BasisSpec::local(4, 6, Sector::Even))?;
    let mut state = QuantumState::all_up(h.basis.clone())?;
    let grid: Vec<f64> = (0..=40).map(|k| microseconds(10.0 * k as f64)).collect();
    let req = TrajectoryRequest {
        phonons: true,
        entropy: true,
    };
    let (tr, stats) = run_dynamics(
        &h,
        Coupling::Constant(strong_dynamics_coupling()),
        &mut state,
        &grid,
        req,
        &EvolveOptions::default(),
    )?;
    println!("{} states, {} steps, {} matvecs", h.dim(), stats.steps, stats.matvecs);
    println!(
        "{:>6} {:>9} {:>9} {:>8} {:>8}",
        "t(us)", "sz_0", "sz_1", "S(bit)", "n_tot"
    );
    for k in (0..tr.times.len()).step_by(4) {
        let n: f64 = tr.local_phonons[k].iter().sum();
        println!(
            "{:>6.0} {:>9.4} {:>9.4} {:>8.4} {:>8.3}",
            tr.times[k] * 1e6,
            tr.sigma_z[k][0],
            tr.sigma_z[k][1],
            tr.entropy[k],
            n
        );
    }
    let e0 = tr.energy[0];
    let de = tr.energy.iter().map(|e| ((e - e0) / e0).abs()).fold(0.0, f64::max);
    let dp = tr.parity.iter().map(|p| (p - tr.parity[0]).abs()).fold(0.0, f64::max);
    println!(
        "max |norm-1| {:.1e}, parity drift {:.1e}, relative energy drift {:.1e}, top-level population {:.1e}",
        stats.max_norm_drift, dp, de, tr.max_leakage
    );
    Ok(())
}
