//! Hilbert-space size of truncated spin-phonon chains and phonon cutoffs
//! suggested from the expected collective occupancies.
//!
//!     cargo run --example dimension_estimate

use rabi_hubbard::exact::{estimate_dimension, suggest_cutoffs};
use rabi_hubbard::params::{find_set, strong_dynamics_coupling, Study};

fn main() -> rabi_hubbard::Result<()> {
    let (dim, log2) = estimate_dimension(16, &[6; 16])?;
    println!("16 ions, local cutoff 6: {dim} states (2^{log2:.2})");
    let per_mode = [2, 3, 3, 5, 9, 56, 28, 9, 5, 4, 3, 3, 3, 2, 2, 2];
    let (_, log2) = estimate_dimension(16, &per_mode)?;
    println!("16 ions, per-mode cutoffs {per_mode:?}: 2^{log2:.2}");

    for n in [4, 16] {
        let model = find_set(Study::Dynamics, n)?.model()?;
        let sug = suggest_cutoffs(&model.mode_spectrum()?.freqs, strong_dynamics_coupling(), 1e-3)?;
        let nbar: Vec<String> = sug.iter().map(|s| format!("{:.2}", s.mean_occupancy)).collect();
        let cut: Vec<String> = sug
            .iter()
            .map(|s| s.cutoff.map(|c| c.to_string()).unwrap_or("?".into()))
            .collect();
        println!(
            "{n} ions at g = 6 kHz\n  mean occupancy {}\n  cutoffs        {}",
            nbar.join(" "),
            cut.join(" ")
        );
        if let Some(c) = sug.iter().map(|s| s.cutoff).collect::<Option<Vec<_>>>() {
            println!("  dimension 2^{:.2}", estimate_dimension(n, &c)?.1);
        }
    }
    Ok(())
}
