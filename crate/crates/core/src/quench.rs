//! Slow ramps of the spin-phonon coupling and adiabaticity diagnostics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::RHModel;
use crate::error::{Error, Result};
use crate::exact::{
    build_hamiltonian, correlation, evolve, ground_state, mean_sigma_z, sigma_z, BasisSpec, Coupling, EvolveOptions,
    HamiltonianOperator, LanczosOptions, QuantumState, Sector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampShape {
    ExponentialRamp,
    ReverseAppended,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchSchedule {
    pub shape: RampShape,
    pub tau: f64,
    pub g_max: f64,
    pub t_total: f64,
}

/// Forward ramps stop at this many time constants (g reaches 99.3% of g_max).
pub const RAMP_LENGTH_IN_TAU: f64 = 5.0;

impl QuenchSchedule {
    pub fn exponential(tau: f64, g_max: f64) -> Self {
        QuenchSchedule {
            shape: RampShape::ExponentialRamp,
            tau,
            g_max,
            t_total: RAMP_LENGTH_IN_TAU * tau,
        }
    }

    /// Forward ramp of 5τ followed by its mirror image, 10τ in total.
    pub fn reverse_appended(tau: f64, g_max: f64) -> Self {
        QuenchSchedule {
            shape: RampShape::ReverseAppended,
            tau,
            g_max,
            t_total: 2.0 * RAMP_LENGTH_IN_TAU * tau,
        }
    }

    pub fn constant(g: f64, t_total: f64) -> Self {
        QuenchSchedule {
            shape: RampShape::Constant,
            tau: 0.0,
            g_max: g,
            t_total,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_max >= 0.0) || !(self.t_total >= 0.0) {
            return Err(Error::invalid("schedule needs g_max ≥ 0 and t_total ≥ 0"));
        }
        if self.shape != RampShape::Constant && !(self.tau > 0.0) {
            return Err(Error::invalid("ramp time constant must be positive"));
        }
        Ok(())
    }

    /// Sample times: `per_ramp` intervals per ramp segment, endpoints included.
    pub fn grid(&self, per_ramp: usize) -> Vec<f64> {
        let segments = match self.shape {
            RampShape::ReverseAppended => 2 * per_ramp,
            _ => per_ramp,
        }
        .max(1);
        (0..=segments)
            .map(|k| self.t_total * k as f64 / segments as f64)
            .collect()
    }
}

fn ramp(tau: f64, g_max: f64, t: f64) -> f64 {
    (1.0 - (-t / tau).exp()) * g_max
}

/// g(t) of the schedule; times outside [0, t_total] are clamped.
pub fn g_at(s: &QuenchSchedule, t: f64) -> f64 {
    let t = t.clamp(0.0, s.t_total);
    match s.shape {
        RampShape::Constant => s.g_max,
        RampShape::ExponentialRamp => ramp(s.tau, s.g_max, t),
        RampShape::ReverseAppended => {
            let half = s.t_total / 2.0;
            ramp(s.tau, s.g_max, if t <= half { t } else { s.t_total - t })
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuenchResult {
    pub times: Vec<f64>,
    pub couplings: Vec<f64>,
    pub mean_sigma_z: Vec<f64>,
    pub sigma_z: Vec<Vec<f64>>,
    /// C_ij at each sample time (row-major N×N).
    pub correlations: Vec<Vec<f64>>,
    pub final_correlations: Vec<Vec<f64>>,
    #[serde(skip)]
    pub snapshots: Vec<QuantumState>,
}

impl QuenchResult {
    pub fn final_mean_sigma_z(&self) -> f64 {
        *self.mean_sigma_z.last().unwrap_or(&f64::NAN)
    }
}

/// Evolve |↓,0⟩^⊗N through the schedule and record magnetization and
/// correlations on `grid`. With `keep_states` the states at each grid
/// time are returned for later fidelity analysis.
pub fn run_quench(
    model: &RHModel,
    schedule: &QuenchSchedule,
    spec: BasisSpec,
    grid: &[f64],
    keep_states: bool,
    opts: &EvolveOptions,
) -> Result<(QuenchResult, HamiltonianOperator)> {
    schedule.validate()?;
    model.require_equilibrium()?;
    let h = build_hamiltonian(model, spec)?;
    let mut state = QuantumState::all_down(h.basis.clone())?;
    let n = h.basis.n_sites();
    let mut res = QuenchResult {
        times: Vec::new(),
        couplings: Vec::new(),
        mean_sigma_z: Vec::new(),
        sigma_z: Vec::new(),
        correlations: Vec::new(),
        final_correlations: Vec::new(),
        snapshots: Vec::new(),
    };
    let gf = |t: f64| g_at(schedule, t);
    let basis = h.basis.clone();
    evolve(
        &h,
        Coupling::Schedule(&gf),
        &mut state.amplitudes,
        0.0,
        grid,
        opts,
        |t, psi| {
            res.times.push(t);
            res.couplings.push(gf(t));
            res.mean_sigma_z.push(mean_sigma_z(&basis, psi)?);
            res.sigma_z
                .push((0..n).map(|i| sigma_z(&basis, psi, i)).collect::<Result<_>>()?);
            let mut c = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    c.push(correlation(&basis, psi, i, j)?);
                }
            }
            res.correlations.push(c);
            if keep_states {
                res.snapshots.push(QuantumState {
                    amplitudes: psi.to_vec(),
                    basis: basis.clone(),
                    time: t,
                });
            }
            Ok(())
        },
    )?;
    if let Some(last) = res.correlations.last() {
        res.final_correlations = last.chunks(n).map(|r| r.to_vec()).collect();
    }
    Ok((res, h))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdiabaticityReport {
    pub times: Vec<f64>,
    pub couplings: Vec<f64>,
    /// |⟨ψ(t)|GS(g(t))⟩|².
    pub fidelity: Vec<f64>,
    /// ⟨H(g(t))⟩ − E_GS(g(t)).
    pub excitation_energy: Vec<f64>,
}

/// Largest chain for which instantaneous ground states are recomputed.
pub const FIDELITY_MAX_IONS: usize = 4;

/// Compare stored quench states with the instantaneous ground state of
/// H(g(t)) in the same sector.
pub fn adiabaticity_report(
    h: &HamiltonianOperator,
    schedule: &QuenchSchedule,
    snapshots: &[QuantumState],
) -> Result<AdiabaticityReport> {
    if h.basis.n_sites() > FIDELITY_MAX_IONS {
        return Err(Error::ResourceGuard {
            dimension: h.dim() as u128,
            log2: (h.dim() as f64).log2(),
            budget: 0,
        });
    }
    let mut rep = AdiabaticityReport {
        times: Vec::new(),
        couplings: Vec::new(),
        fidelity: Vec::new(),
        excitation_energy: Vec::new(),
    };
    for s in snapshots {
        let g = g_at(schedule, s.time);
        let gs = ground_state(h, g, &LanczosOptions::default())?;
        let f = s.overlap(&gs.state)?.norm_sqr();
        rep.times.push(s.time);
        rep.couplings.push(g);
        rep.fidelity.push(f);
        rep.excitation_energy
            .push(h.energy(g, &s.amplitudes) - gs.report.energy);
    }
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingExponents {
    pub beta: f64,
    pub nu: f64,
}

impl Default for ScalingExponents {
    fn default() -> Self {
        ScalingExponents { beta: 0.125, nu: 1.0 }
    }
}

/// y = N^{2β/ν} C and x = N^{1/ν} (g − g_c)/g_c^mf.
pub fn rescale_for_crossing(
    correlations: &[f64],
    n_ions: usize,
    couplings: &[f64],
    g_c: f64,
    g_c_mf: f64,
    exps: ScalingExponents,
) -> Result<Vec<(f64, f64)>> {
    if correlations.len() != couplings.len() {
        return Err(Error::invalid("one correlation per coupling"));
    }
    let n = n_ions as f64;
    let ys = n.powf(2.0 * exps.beta / exps.nu);
    let xs = n.powf(1.0 / exps.nu);
    Ok(couplings
        .iter()
        .zip(correlations)
        .map(|(g, c)| (xs * (g - g_c) / g_c_mf, ys * c))
        .collect())
}

/// Inverse of [`rescale_for_crossing`]: (g, C) pairs.
pub fn unscale(points: &[(f64, f64)], n_ions: usize, g_c: f64, g_c_mf: f64, exps: ScalingExponents) -> Vec<(f64, f64)> {
    let n = n_ions as f64;
    let ys = n.powf(2.0 * exps.beta / exps.nu);
    let xs = n.powf(1.0 / exps.nu);
    points.iter().map(|(x, y)| (g_c + x * g_c_mf / xs, y / ys)).collect()
}

/// First crossing of two sampled curves on a shared abscissa, by linear
/// interpolation of their difference.
pub fn find_crossing(x: &[f64], a: &[f64], b: &[f64]) -> Option<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
    (0..d.len().saturating_sub(1)).find_map(|k| {
        if d[k] == 0.0 {
            Some(x[k])
        } else if d[k] * d[k + 1] < 0.0 {
            Some(x[k] + (x[k + 1] - x[k]) * d[k] / (d[k] - d[k + 1]))
        } else {
            None
        }
    })
}

/// Ground-state connected correlation C_ij along a coupling scan, in the
/// parity sector of |↓,0⟩^⊗N.
pub fn ground_correlation_scan(
    model: &RHModel,
    couplings: &[f64],
    n_cut: usize,
    pair: (usize, usize),
    opts: &LanczosOptions,
) -> Result<Vec<f64>> {
    let n = model.n_sites();
    let sector = Sector::of_parity(if n.is_multiple_of(2) { 1 } else { -1 });
    let h = build_hamiltonian(model, BasisSpec::local(n, n_cut, sector))?;
    couplings
        .iter()
        .map(|&g| ground_state(&h, g, opts)?.state.correlation(pair.0, pair.1))
        .collect()
}

/// Dense correlation matrix from the row-major list stored per sample.
pub fn correlation_matrix(flat: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, flat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let s = QuenchSchedule::exponential(1e-3, 2.0);
        assert_eq!(g_at(&s, 0.0), 0.0);
        assert!((g_at(&s, 1e-3) - (1.0 - (-1f64).exp()) * 2.0).abs() < 1e-15);
        assert!((g_at(&s, s.t_total) / 2.0 - 0.993).abs() < 1e-3);
        let r = QuenchSchedule::reverse_appended(1e-3, 2.0);
        assert_eq!(g_at(&r, r.t_total), 0.0);
        for k in 0..=100 {
            let t = r.t_total * k as f64 / 100.0;
            assert!((g_at(&r, t) - g_at(&r, r.t_total - t)).abs() < 1e-14);
        }
        assert_eq!(g_at(&QuenchSchedule::constant(3.0, 1.0), 0.5), 3.0);
    }

    #[test]
    fn grid_counts() {
        assert_eq!(QuenchSchedule::exponential(1.0, 1.0).grid(50).len(), 51);
        assert_eq!(QuenchSchedule::reverse_appended(1.0, 1.0).grid(50).len(), 101);
    }

    #[test]
    fn rescale_round_trip_and_identity() {
        let c = [0.1, 0.2, 0.4];
        let g = [0.9, 1.0, 1.1];
        let id = rescale_for_crossing(&c, 1, &g, 0.0, 1.0, ScalingExponents { beta: 0.0, nu: 1.0 }).unwrap();
        for (k, (x, y)) in id.iter().enumerate() {
            assert_eq!((*x, *y), (g[k], c[k]));
        }
        let e = ScalingExponents::default();
        let pts = rescale_for_crossing(&c, 16, &g, 1.03, 1.0, e).unwrap();
        assert!((pts[0].1 - 2.0 * 0.1).abs() < 1e-15);
        for ((gg, cc), (g0, c0)) in unscale(&pts, 16, 1.03, 1.0, e).iter().zip(g.iter().zip(&c)) {
            assert!((gg - g0).abs() < 1e-14 && (cc - c0).abs() < 1e-15);
        }
    }

    #[test]
    fn crossing_interpolates() {
        let x = [0.0, 1.0, 2.0];
        assert_eq!(
            find_crossing(&x, &[0.0, 1.0, 2.0], &[1.0, 1.5, 1.0]),
            Some(1.0 + 0.5 / 1.5)
        );
        assert_eq!(find_crossing(&x, &[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]), None);
    }

    #[test]
    fn refuses_non_equilibrium() {
        let hop = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let m = RHModel::new(1.0, vec![0.5, 0.5], 0.0, hop).unwrap();
        let s = QuenchSchedule::exponential(1.0, 0.1);
        let r = run_quench(
            &m,
            &s,
            BasisSpec::local(2, 2, Sector::Even),
            &[0.0, 1.0],
            false,
            &EvolveOptions::default(),
        );
        assert!(matches!(r, Err(Error::NotEquilibrium { .. })));
    }

    #[test]
    fn weak_slow_ramp_stays_uncorrelated_and_adiabatic() {
        let hop = DMatrix::from_row_slice(2, 2, &[0.0, 0.2, 0.2, 0.0]);
        let m = RHModel::new(2.0, vec![1.2, 1.2], 0.0, hop).unwrap();
        let gc = crate::meanfield::critical_coupling(2.0, 1.0).unwrap();
        let s = QuenchSchedule::exponential(20.0, 0.3 * gc);
        let grid = s.grid(10);
        let (res, h) = run_quench(
            &m,
            &s,
            BasisSpec::local(2, 6, Sector::Even),
            &grid,
            true,
            &EvolveOptions::default(),
        )
        .unwrap();
        assert!(res.final_correlations[0][1].abs() < 0.05);
        let rep = adiabaticity_report(&h, &s, &res.snapshots).unwrap();
        assert!((rep.fidelity[0] - 1.0).abs() < 1e-12);
        assert!(rep.fidelity.iter().all(|f| *f > 0.99));
    }
}
