//! Exact ground states and dynamics in a truncated spin ⊗ Fock space.

pub mod basis;
pub mod estimate;
pub mod evolve;
pub mod hamiltonian;
pub mod lanczos;
pub mod observables;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use basis::{Basis, BasisSpec, Representation, Sector};
pub use estimate::{estimate_dimension, suggest_cutoffs, CutoffSuggestion};
pub use evolve::{evolve, Coupling, EvolveOptions, EvolveStats};
pub use hamiltonian::{build_hamiltonian, HamiltonianOperator};
pub use lanczos::LanczosOptions;
pub use observables::*;

use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone)]
pub struct QuantumState {
    pub amplitudes: Vec<C64>,
    pub basis: Arc<Basis>,
    pub time: f64,
}

impl QuantumState {
    pub fn product(basis: Arc<Basis>, downs: &[bool], phonons: &[usize]) -> Result<Self> {
        let amplitudes = product_state(&basis, downs, phonons)?;
        Ok(QuantumState {
            amplitudes,
            basis,
            time: 0.0,
        })
    }

    /// |↑,0⟩^⊗N.
    pub fn all_up(basis: Arc<Basis>) -> Result<Self> {
        let n = basis.n_sites();
        Self::product(basis, &vec![false; n], &vec![0; n])
    }

    /// |↓,0⟩^⊗N.
    pub fn all_down(basis: Arc<Basis>) -> Result<Self> {
        let n = basis.n_sites();
        Self::product(basis, &vec![true; n], &vec![0; n])
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::cnorm(&self.amplitudes)
    }

    pub fn sigma_z(&self, i: usize) -> Result<f64> {
        sigma_z(&self.basis, &self.amplitudes, i)
    }

    pub fn mean_sigma_z(&self) -> Result<f64> {
        mean_sigma_z(&self.basis, &self.amplitudes)
    }

    pub fn correlation(&self, i: usize, j: usize) -> Result<f64> {
        correlation(&self.basis, &self.amplitudes, i, j)
    }

    pub fn entanglement_entropy(&self, cut: usize) -> Result<f64> {
        entanglement_entropy(&self.basis, &self.amplitudes, cut)
    }

    pub fn overlap(&self, other: &QuantumState) -> Result<C64> {
        if !Arc::ptr_eq(&self.basis, &other.basis) && self.basis.spec() != other.basis.spec() {
            return Err(Error::invalid("states live in different bases"));
        }
        Ok(crate::linalg::cdot(&self.amplitudes, &other.amplitudes))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundStateReport {
    pub energy: f64,
    /// Second-lowest level in the same sector.
    pub next_energy: Option<f64>,
    pub gap: Option<f64>,
    pub residual: f64,
    pub matvecs: usize,
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub report: GroundStateReport,
    pub state: QuantumState,
    /// Second Ritz vector of the sector, when the sector has one.
    pub excited: Option<QuantumState>,
}

/// Lowest eigenpair of H(g) on the operator's basis (one parity sector, or
/// the full space), plus the next level for the gap.
pub fn ground_state(h: &HamiltonianOperator, g: f64, opts: &LanczosOptions) -> Result<GroundState> {
    if !h.is_equilibrium() {
        return Err(Error::NotEquilibrium {
            lowest: h.mode_freqs.first().copied().unwrap_or(f64::NAN),
        });
    }
    let dim = h.dim();
    let nev = dim.min(2);
    let pairs = lanczos::lowest_eigenpairs(
        dim,
        nev,
        |x, y| {
            y.iter_mut().for_each(|v| *v = 0.0);
            h.apply_add_real(g, x, y);
        },
        opts,
    )?;
    let to_state = |v: &Vec<f64>| QuantumState {
        amplitudes: v.iter().map(|x| C64::new(*x, 0.0)).collect(),
        basis: h.basis.clone(),
        time: 0.0,
    };
    let next_energy = pairs.values.get(1).copied();
    Ok(GroundState {
        report: GroundStateReport {
            energy: pairs.values[0],
            next_energy,
            gap: next_energy.map(|e| e - pairs.values[0]),
            residual: pairs.residuals.iter().fold(0.0, |a: f64, b| a.max(*b)),
            matvecs: pairs.matvecs,
        },
        state: to_state(&pairs.vectors[0]),
        excited: pairs.vectors.get(1).map(to_state),
    })
}

/// Record of observables along a trajectory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// sigma_z[t][i].
    pub sigma_z: Vec<Vec<f64>>,
    pub norm_drift: Vec<f64>,
    pub parity: Vec<f64>,
    pub energy: Vec<f64>,
    /// Collective ⟨b_k†b_k⟩ per time, when requested.
    #[serde(default)]
    pub collective_phonons: Vec<Vec<f64>>,
    #[serde(default)]
    pub local_phonons: Vec<Vec<f64>>,
    /// Half-chain entanglement entropy per time, when requested.
    #[serde(default)]
    pub entropy: Vec<f64>,
    /// Largest top-level population seen over the run.
    pub max_leakage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajectoryRequest {
    pub phonons: bool,
    pub entropy: bool,
}

/// Evolve `state` under a constant or scheduled coupling, recording spin,
/// conservation diagnostics and optional phonon/entropy data on `t_grid`.
pub fn run_dynamics(
    h: &HamiltonianOperator,
    coupling: Coupling<'_>,
    state: &mut QuantumState,
    t_grid: &[f64],
    request: TrajectoryRequest,
    opts: &EvolveOptions,
) -> Result<(Trajectory, EvolveStats)> {
    if !Arc::ptr_eq(&state.basis, &h.basis) && state.basis.spec() != h.basis.spec() {
        return Err(Error::invalid("state and Hamiltonian use different bases"));
    }
    let n = h.basis.n_sites();
    let g_at = |t: f64| match &coupling {
        Coupling::Constant(g) => *g,
        Coupling::Schedule(f) => f(t),
    };
    let mut traj = Trajectory::default();
    let basis = h.basis.clone();
    let t0 = state.time;
    let stats = evolve(
        h,
        coupling_clone(&coupling),
        &mut state.amplitudes,
        t0,
        t_grid,
        opts,
        |t, psi| {
            traj.times.push(t);
            traj.sigma_z
                .push((0..n).map(|i| sigma_z(&basis, psi, i)).collect::<Result<_>>()?);
            traj.norm_drift.push(crate::linalg::cnorm(psi) - 1.0);
            traj.parity.push(parity_expectation(&basis, psi)?);
            traj.energy.push(h.energy(g_at(t), psi));
            let leak = leakage(&basis, psi)?.into_iter().fold(0.0, f64::max);
            traj.max_leakage = traj.max_leakage.max(leak);
            if request.phonons {
                let ph = phonon_numbers(&basis, psi, &h.mode_vectors)?;
                traj.local_phonons.push(ph.local);
                traj.collective_phonons.push(ph.collective);
            }
            if request.entropy {
                traj.entropy.push(entanglement_entropy(&basis, psi, n / 2)?);
            }
            Ok(())
        },
    )?;
    if let Some(&t) = t_grid.last() {
        state.time = t;
    }
    if traj.max_leakage > observables::LEAKAGE_WARN {
        log::warn!(
            "top Fock level population reached {:.2e}; raise the phonon cutoff",
            traj.max_leakage
        );
    }
    Ok((traj, stats))
}

fn coupling_clone<'a>(c: &Coupling<'a>) -> Coupling<'a> {
    match c {
        Coupling::Constant(g) => Coupling::Constant(*g),
        Coupling::Schedule(f) => Coupling::Schedule(*f),
    }
}
