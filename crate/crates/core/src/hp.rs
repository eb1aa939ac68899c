//! Linearized (Holstein–Primakoff) dynamics from the all-up vacuum.
//!
//! Each spin becomes a boson s_i with σ_z = 1 − 2 s†s, so the Heisenberg
//! equations close on v = (s₁, s₁†, a₁, a₁†, …) as dv/dt = A v.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::RHModel;
use crate::error::{Error, Result};
use crate::linalg::C64;

/// Offsets of the four operators of a site inside v.
pub const S: usize = 0;
pub const S_DAG: usize = 1;
pub const A: usize = 2;
pub const A_DAG: usize = 3;

#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    /// A = i·M with M real.
    pub generator: DMatrix<f64>,
    pub model: RHModel,
}

pub fn index(site: usize, op: usize) -> usize {
    4 * site + op
}

impl LinearizedSystem {
    pub fn n_sites(&self) -> usize {
        self.model.n_sites()
    }

    /// The complex dynamics matrix A.
    pub fn a_matrix(&self) -> DMatrix<C64> {
        self.generator.map(|m| C64::new(0.0, m))
    }

    /// Max absolute row sum of A.
    pub fn norm(&self) -> f64 {
        (0..self.generator.nrows())
            .map(|r| self.generator.row(r).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        // eigenvalues of A are i times those of the real generator
        self.generator
            .complex_eigenvalues()
            .iter()
            .map(|mu| C64::new(0.0, 1.0) * mu)
            .collect()
    }
}

pub fn build_a(model: &RHModel) -> Result<LinearizedSystem> {
    model.validate()?;
    let n = model.n_sites();
    let (w0, g) = (model.spin_freq, model.coupling);
    let mut m = DMatrix::zeros(4 * n, 4 * n);
    for i in 0..n {
        let (s, sd, a, ad) = (index(i, S), index(i, S_DAG), index(i, A), index(i, A_DAG));
        let wi = model.site_freqs[i];
        m[(s, s)] = w0;
        m[(s, a)] = -g;
        m[(s, ad)] = -g;
        m[(sd, sd)] = -w0;
        m[(sd, a)] = g;
        m[(sd, ad)] = g;
        m[(a, a)] = -wi;
        m[(a, s)] = -g;
        m[(a, sd)] = -g;
        m[(ad, ad)] = wi;
        m[(ad, s)] = g;
        m[(ad, sd)] = g;
        for j in 0..n {
            if j != i {
                let t = model.hoppings[(i, j)];
                m[(a, index(j, A))] = -t;
                m[(ad, index(j, A_DAG))] = t;
            }
        }
    }
    Ok(LinearizedSystem {
        generator: m,
        model: model.clone(),
    })
}

/// B(t) = e^{At}.
pub fn propagate(sys: &LinearizedSystem, t: f64) -> Result<DMatrix<C64>> {
    if !(t >= 0.0) {
        return Err(Error::Domain("propagation time must be nonnegative".into()));
    }
    let growth = stability(sys).max_real_part * t;
    if growth > 700.0 {
        log::warn!("HP propagator overflows: growth exponent {growth:.1} at t = {t:.3e} s");
    }
    let b = (sys.a_matrix() * C64::new(t, 0.0)).exp();
    if b.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        log::warn!("HP propagator has non-finite entries (growth exponent {growth:.1})");
    }
    Ok(b)
}

/// ⟨σ_z^i⟩ from a propagator, assuming the vacuum initial state.
pub fn sigma_z_from(b: &DMatrix<C64>, i: usize) -> f64 {
    let n = b.nrows() / 4;
    let (s, sd) = (index(i, S), index(i, S_DAG));
    let mut occ = C64::new(0.0, 0.0);
    for j in 0..n {
        occ += b[(sd, index(j, S))] * b[(s, index(j, S_DAG))];
        occ += b[(sd, index(j, A))] * b[(s, index(j, A_DAG))];
    }
    1.0 - 2.0 * occ.re
}

pub fn sigma_z_hp(sys: &LinearizedSystem, i: usize, t: f64) -> Result<f64> {
    if i >= sys.n_sites() {
        return Err(Error::invalid(format!("site {i} out of range")));
    }
    Ok(sigma_z_from(&propagate(sys, t)?, i))
}

/// ⟨σ_z^i⟩(t) for every site on a time grid.
pub fn sigma_z_trajectory(sys: &LinearizedSystem, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = sys.n_sites();
    times
        .iter()
        .map(|&t| {
            let b = propagate(sys, t)?;
            Ok((0..n).map(|i| sigma_z_from(&b, i)).collect())
        })
        .collect()
}

/// Σ|B_xy|² over all entries, a proxy for the total excitation.
pub fn total_excitation(b: &DMatrix<C64>) -> f64 {
    b.iter().map(|z| z.norm_sqr()).sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub max_real_part: f64,
    /// (re, im) pairs.
    pub eigenvalues: Vec<(f64, f64)>,
    pub tolerance: f64,
}

pub fn stability(sys: &LinearizedSystem) -> StabilityReport {
    let eig = sys.eigenvalues();
    let max_real_part = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let tolerance = 1e-9 * sys.norm();
    StabilityReport {
        stable: max_real_part <= tolerance,
        max_real_part,
        eigenvalues: eig.iter().map(|z| (z.re, z.im)).collect(),
        tolerance,
    }
}

/// Stability classification on a (g, δ) grid; `family(g, δ)` builds the model.
pub fn stability_map<F>(family: F, gs: &[f64], deltas: &[f64]) -> Result<Vec<Vec<bool>>>
where
    F: Fn(f64, f64) -> Result<RHModel>,
{
    deltas
        .iter()
        .map(|&d| {
            gs.iter()
                .map(|&g| Ok(stability(&build_a(&family(g, d)?)?).stable))
                .collect()
        })
        .collect()
}

/// Coupling at which the linearized dynamics first turns unstable, by
/// bisection between a stable `lo` and an unstable `hi`.
pub fn instability_threshold(model: &RHModel, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    let unstable = |g: f64| -> Result<bool> { Ok(!stability(&build_a(&model.with_coupling(g))?).stable) };
    if unstable(lo)? || !unstable(hi)? {
        return Err(Error::Domain(
            "threshold bracket must go from stable to unstable".into(),
        ));
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if unstable(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(n: usize, g: f64) -> RHModel {
        let hop = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                0.4 / (i as f64 - j as f64).abs().powi(3)
            }
        });
        RHModel::new(0.7, (0..n).map(|i| 1.0 + 0.2 * i as f64).collect(), g, hop).unwrap()
    }

    #[test]
    fn single_site_matrix_by_hand() {
        let m = RHModel::new(2.0, vec![3.0], 0.5, DMatrix::zeros(1, 1)).unwrap();
        let sys = build_a(&m).unwrap();
        #[rustfmt::skip]
        let want = DMatrix::from_row_slice(4, 4, &[
            2.0, 0.0, -0.5, -0.5,
            0.0, -2.0, 0.5, 0.5,
            -0.5, -0.5, -3.0, 0.0,
            0.5, 0.5, 0.0, 3.0,
        ]);
        assert_eq!(sys.generator, want);
    }

    #[test]
    fn uncoupled_spectrum() {
        let m = RHModel::new(0.7, vec![1.0, 1.5], 0.0, DMatrix::zeros(2, 2)).unwrap();
        let mut im: Vec<f64> = build_a(&m).unwrap().eigenvalues().iter().map(|z| z.im).collect();
        im.sort_by(f64::total_cmp);
        let want = [-1.5, -1.0, -0.7, -0.7, 0.7, 0.7, 1.0, 1.5];
        for (a, b) in im.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hopping_block_gives_collective_modes() {
        let m = model(3, 0.0);
        let modes = m.mode_spectrum().unwrap().freqs;
        let eig = build_a(&m).unwrap().eigenvalues();
        for d in modes {
            assert!(eig
                .iter()
                .any(|z| (z.im.abs() - d.abs()).abs() < 1e-10 && z.re.abs() < 1e-10));
        }
    }

    #[test]
    fn spectrum_closed_under_reflection() {
        for g in [0.2, 0.9] {
            let eig = build_a(&model(3, g)).unwrap().eigenvalues();
            for z in &eig {
                let r = C64::new(-z.re, z.im);
                assert!(eig.iter().any(|w| (w - r).norm() < 1e-8), "{z}");
            }
        }
    }

    #[test]
    fn identity_at_zero_and_semigroup() {
        let sys = build_a(&model(2, 0.3)).unwrap();
        let b0 = propagate(&sys, 0.0).unwrap();
        assert!((b0 - DMatrix::identity(8, 8)).norm() < 1e-15);
        let b1 = propagate(&sys, 0.7).unwrap();
        let b2 = propagate(&sys, 1.1).unwrap();
        let b12 = propagate(&sys, 1.8).unwrap();
        assert!((&b2 * &b1 - b12).camax() < 1e-8);
        assert_eq!(sigma_z_hp(&sys, 0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn zero_coupling_keeps_spins_up() {
        let sys = build_a(&model(3, 0.0)).unwrap();
        for t in [0.5, 3.0, 20.0] {
            for i in 0..3 {
                assert!((sigma_z_hp(&sys, i, t).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_generator_exponentiates_elementwise() {
        let m = RHModel::new(0.7, vec![1.3], 0.0, DMatrix::zeros(1, 1)).unwrap();
        let sys = build_a(&m).unwrap();
        let b = propagate(&sys, 2.0).unwrap();
        for k in 0..4 {
            let want = C64::new(0.0, sys.generator[(k, k)] * 2.0).exp();
            assert!((b[(k, k)] - want).norm() < 1e-13);
        }
    }

    #[test]
    fn matches_rk4_integration() {
        let sys = build_a(&model(2, 0.6)).unwrap();
        let a = sys.a_matrix();
        let t = 2.0;
        let steps = 4000;
        let h = C64::new(t / steps as f64, 0.0);
        let mut y = DMatrix::<C64>::identity(8, 8);
        for _ in 0..steps {
            let k1 = &a * &y;
            let k2 = &a * (&y + &k1 * (h * 0.5));
            let k3 = &a * (&y + &k2 * (h * 0.5));
            let k4 = &a * (&y + &k3 * h);
            y += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * (h / 6.0);
        }
        assert!((propagate(&sys, t).unwrap() - y).camax() < 1e-9);
    }

    #[test]
    fn threshold_and_monotone_map() {
        // resonant single site: instability once g exceeds √(ω₀ω)/2
        let base = RHModel::new(1.0, vec![-1.0], 0.0, DMatrix::zeros(1, 1)).unwrap();
        assert!(stability(&build_a(&base.with_coupling(0.1)).unwrap()).stable);
        let th = instability_threshold(&base, 0.0, 5.0, 1e-10).unwrap();
        let stable_at = |g: f64| stability(&build_a(&base.with_coupling(g)).unwrap()).stable;
        assert!(stable_at(0.999 * th) && !stable_at(1.001 * th));
        let gs: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let map = stability_map(|g, _| Ok(base.with_coupling(g)), &gs, &[0.0]).unwrap();
        let first = map[0].iter().position(|s| !s).unwrap();
        assert!(map[0][first..].iter().all(|s| !s));
    }
}
