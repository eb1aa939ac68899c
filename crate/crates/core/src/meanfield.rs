//! Mean-field ground state of the Rabi–Hubbard model, keeping only the
//! lowest collective mode b₀ in the self-consistency loop.

use serde::{Deserialize, Serialize};

use crate::chain::ModeSpectrum;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Trivial,
    Broken,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSolution {
    /// ⟨b₀⟩; the positive member of the Z₂ pair on the broken branch.
    pub b0_amplitude: f64,
    pub spin_x: Vec<f64>,
    /// Spin angle from the x axis, in (0, π). Sites with negative mode
    /// weight land past π/2 so that ⟨σ_x⟩ = −cos θ keeps its sign.
    pub spin_angles: Vec<f64>,
    pub branch: Branch,
    /// One-shot ⟨b_k⟩ for every mode, filled by [`other_mode_amplitudes`].
    #[serde(default)]
    pub other_modes: Vec<f64>,
}

impl MeanFieldSolution {
    pub fn mean_spin_x(&self) -> f64 {
        if self.spin_x.is_empty() {
            0.0
        } else {
            self.spin_x.iter().sum::<f64>() / self.spin_x.len() as f64
        }
    }
}

/// g_c = √(ω₀δ₀)/2.
pub fn critical_coupling(spin_freq: f64, lowest_mode: f64) -> Result<f64> {
    if !(spin_freq > 0.0) || !(lowest_mode > 0.0) {
        return Err(Error::Domain(format!(
            "critical coupling needs ω₀ > 0 and δ₀ > 0 (got {spin_freq}, {lowest_mode})"
        )));
    }
    Ok((spin_freq * lowest_mode).sqrt() / 2.0)
}

fn self_consistency_rhs(g: f64, spin_freq: f64, lowest_mode: f64, v0: &[f64], b: f64) -> f64 {
    v0.iter()
        .map(|v| {
            let x = 4.0 * g * v * b;
            4.0 * g * g * v * v / lowest_mode / (spin_freq * spin_freq + x * x).sqrt()
        })
        .sum()
}

/// Solve the single-mode self-consistency equation for ⟨b₀⟩ by bisection.
pub fn solve_b0(g: f64, spin_freq: f64, lowest_mode: f64, v0: &[f64]) -> Result<MeanFieldSolution> {
    if !(lowest_mode > 0.0) {
        return Err(Error::Domain("mean field needs a positive lowest mode".into()));
    }
    if !(spin_freq > 0.0) || !g.is_finite() || g < 0.0 {
        return Err(Error::Domain("mean field needs ω₀ > 0 and g ≥ 0".into()));
    }
    let norm: f64 = v0.iter().map(|v| v * v).sum();
    if v0.is_empty() || (norm - 1.0).abs() > 1e-8 {
        return Err(Error::invalid("mode vector must be normalized"));
    }
    let n = v0.len();
    let trivial = MeanFieldSolution {
        b0_amplitude: 0.0,
        spin_x: vec![0.0; n],
        spin_angles: vec![std::f64::consts::FRAC_PI_2; n],
        branch: Branch::Trivial,
        other_modes: Vec::new(),
    };
    let rhs = |b: f64| self_consistency_rhs(g, spin_freq, lowest_mode, v0, b);
    if rhs(0.0) <= 1.0 {
        return Ok(trivial);
    }
    // For b ≥ Σ g|v|/δ₀ every term is below g|v|/(δ₀ b), so RHS ≤ 1.
    let mut lo = 0.0;
    let mut hi = v0.iter().map(|v| g * v.abs()).sum::<f64>() / lowest_mode * 1.01;
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if rhs(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b0 = 0.5 * (lo + hi);
    let spin_angles: Vec<f64> = v0.iter().map(|v| spin_freq.atan2(4.0 * v * g * b0)).collect();
    Ok(MeanFieldSolution {
        b0_amplitude: b0,
        spin_x: spin_angles.iter().map(|t| -t.cos()).collect(),
        spin_angles,
        branch: Branch::Broken,
        other_modes: Vec::new(),
    })
}

/// Mean-field solution of a model from its collective spectrum.
pub fn solve_model(g: f64, spin_freq: f64, spectrum: &ModeSpectrum) -> Result<MeanFieldSolution> {
    let v0: Vec<f64> = spectrum.vectors.column(0).iter().copied().collect();
    solve_b0(g, spin_freq, spectrum.freqs[0], &v0)
}

/// Evaluate the multi-mode fixed-point expression once, with only ⟨b₀⟩
/// substituted on the right-hand side.
pub fn other_mode_amplitudes(
    solution: &MeanFieldSolution,
    g: f64,
    spin_freq: f64,
    spectrum: &ModeSpectrum,
) -> Result<Vec<f64>> {
    let n = spectrum.len();
    if solution.spin_x.len() != n {
        return Err(Error::invalid("solution and spectrum disagree on site count"));
    }
    if solution.branch == Branch::Trivial {
        return Ok(vec![0.0; n]);
    }
    let b0 = solution.b0_amplitude;
    (0..n)
        .map(|k| {
            let dk = spectrum.freqs[k];
            if dk == 0.0 {
                return Err(Error::SingularMode { mode: k });
            }
            Ok((0..n)
                .map(|i| {
                    let x = spectrum.component(i, 0) * b0;
                    4.0 * g * g * spectrum.component(i, k) / dk * x
                        / (spin_freq * spin_freq + 16.0 * g * g * x * x).sqrt()
                })
                .sum())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ModeSpectrum;
    use nalgebra::DMatrix;

    #[test]
    fn critical_coupling_arithmetic() {
        assert_eq!(critical_coupling(4.0, 4.0).unwrap(), 2.0);
        assert!(critical_coupling(0.0, 1.0).is_err());
        assert!(critical_coupling(1.0, -1.0).is_err());
    }

    #[test]
    fn uniform_closed_form() {
        let n = 4;
        let v = vec![0.5; n];
        let (w0, d0) = (3.0, 1.0);
        let g = 2.0;
        let sol = solve_b0(g, w0, d0, &v).unwrap();
        let closed = (n as f64 * (16.0 * g.powi(4) / (d0 * d0) - w0 * w0) / (16.0 * g * g)).sqrt();
        assert_eq!(sol.branch, Branch::Broken);
        assert!((sol.b0_amplitude - closed).abs() / closed < 1e-12);
        for s in &sol.spin_x {
            assert!(*s < 0.0 && *s >= -1.0);
        }
    }

    #[test]
    fn below_threshold_is_trivial() {
        let v = vec![1.0 / 2f64.sqrt(); 2];
        let gc = critical_coupling(3.0, 1.0).unwrap();
        let sol = solve_b0(0.99 * gc, 3.0, 1.0, &v).unwrap();
        assert_eq!(sol.branch, Branch::Trivial);
        assert!(sol.spin_x.iter().all(|s| *s == 0.0));
        let sol = solve_b0(1.0001 * gc, 3.0, 1.0, &v).unwrap();
        assert_eq!(sol.branch, Branch::Broken);
        assert!(sol.b0_amplitude < 0.05);
    }

    #[test]
    fn strong_coupling_saturates() {
        let v = vec![1.0 / 3f64.sqrt(); 3];
        let sol = solve_b0(1e4, 1.0, 1.0, &v).unwrap();
        assert!(sol.spin_x.iter().all(|s| (s + 1.0).abs() < 1e-6));
    }

    #[test]
    fn staggered_mode_gives_staggered_spins() {
        let v = vec![0.5, -0.5, 0.5, -0.5];
        let sol = solve_b0(3.0, 2.0, 1.0, &v).unwrap();
        assert!(sol.spin_x[0] < 0.0 && sol.spin_x[1] > 0.0);
        assert!((sol.spin_x[0] + sol.spin_x[1]).abs() < 1e-14);
    }

    #[test]
    fn two_site_other_mode_by_hand() {
        let (c, s) = (0.4f64.cos(), 0.4f64.sin());
        let spectrum = ModeSpectrum {
            freqs: vec![1.0, 5.0],
            vectors: DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
        };
        let (g, w0) = (2.0, 3.0);
        let sol = solve_model(g, w0, &spectrum).unwrap();
        let b = other_mode_amplitudes(&sol, g, w0, &spectrum).unwrap();
        let term = |vik: f64, x: f64| 4.0 * g * g * vik / 5.0 * x / (w0 * w0 + 16.0 * g * g * x * x).sqrt();
        let hand = term(-s, c * sol.b0_amplitude) + term(c, s * sol.b0_amplitude);
        assert!((b[1] - hand).abs() < 1e-14);
        // the k = 0 entry reproduces the self-consistent amplitude
        assert!((b[0] - sol.b0_amplitude).abs() < 1e-10 * sol.b0_amplitude);
    }

    #[test]
    fn resonant_mode_is_singular() {
        let s = 1.0 / 2f64.sqrt();
        let spectrum = ModeSpectrum {
            freqs: vec![1.0, 0.0],
            vectors: DMatrix::from_row_slice(2, 2, &[s, s, s, -s]),
        };
        let sol = solve_model(3.0, 1.0, &spectrum).unwrap();
        assert!(matches!(
            other_mode_amplitudes(&sol, 3.0, 1.0, &spectrum),
            Err(Error::SingularMode { mode: 1 })
        ));
    }
}
