//! Transverse motion of a linear ion chain and its mapping onto the
//! Rabi-Hubbard parameters.
//!
//! The pipeline is geometry → [`motional_model`] (local frequencies and
//! hoppings, with second-order counter-rotating corrections) →
//! [`collective_modes`] or [`interaction_picture`] (the model seen in the
//! frame of the bichromatic drive).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen_sorted;
use crate::units::{ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE, VACUUM_PERMITTIVITY, YB171_ION_MASS_AMU};

/// Equilibrium geometry of an N-ion chain plus the transverse confinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainGeometry {
    /// Inter-ion spacings, meters; `n_ions - 1` entries.
    pub spacings: Vec<f64>,
    /// Bare transverse trap frequency ω_x, rad/s.
    pub trap_freq: f64,
    /// Ion mass, kg.
    pub mass: f64,
    /// Ion charge, C.
    pub charge: f64,
}

impl ChainGeometry {
    /// ¹⁷¹Yb⁺ chain with the given spacings (meters) and trap frequency (rad/s).
    pub fn new(spacings: Vec<f64>, trap_freq: f64) -> Result<Self> {
        let g = ChainGeometry {
            spacings,
            trap_freq,
            mass: YB171_ION_MASS_AMU * ATOMIC_MASS_UNIT,
            charge: ELEMENTARY_CHARGE,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn uniform(n_ions: usize, spacing: f64, trap_freq: f64) -> Result<Self> {
        if n_ions == 0 {
            return Err(Error::invalid("chain needs at least one ion"));
        }
        Self::new(vec![spacing; n_ions - 1], trap_freq)
    }

    pub fn with_mass_amu(mut self, amu: f64) -> Result<Self> {
        self.mass = amu * ATOMIC_MASS_UNIT;
        self.validate()?;
        Ok(self)
    }

    pub fn n_ions(&self) -> usize {
        self.spacings.len() + 1
    }

    /// Structural checks only; Coulomb stability is reported by
    /// [`motional_model`] with the offending ion index.
    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.spacings.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::invalid(format!(
                "spacing {k} must be positive, got {}",
                self.spacings[k]
            )));
        }
        if !(self.trap_freq > 0.0 && self.trap_freq.is_finite()) {
            return Err(Error::invalid("trap frequency must be positive"));
        }
        if !(self.mass > 0.0) || !(self.charge != 0.0) {
            return Err(Error::invalid("mass must be positive and charge nonzero"));
        }
        Ok(())
    }

    /// Equilibrium positions along the axis, first ion at 0.
    pub fn positions(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.n_ions());
        z.push(0.0);
        let mut acc = 0.0;
        for d in &self.spacings {
            acc += d;
            z.push(acc);
        }
        z
    }

    /// e²/(4πε₀ m), units m³/s².
    pub fn coulomb_constant(&self) -> f64 {
        self.charge * self.charge / (4.0 * PI * VACUUM_PERMITTIVITY * self.mass)
    }

    /// Pairwise distances z_ij (zero on the diagonal).
    pub fn distances(&self) -> DMatrix<f64> {
        let z = self.positions();
        let n = z.len();
        DMatrix::from_fn(n, n, |i, j| (z[i] - z[j]).abs())
    }
}

/// Local-mode description of the transverse motion.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionalModel {
    pub trap_freq: f64,
    /// ω_i, Coulomb-softened local frequencies.
    pub local_freqs: Vec<f64>,
    /// ω̃_i = ω_i − (1/2ω_x) Σ_j t_ij².
    pub corrected_freqs: Vec<f64>,
    /// t_ij, symmetric, zero diagonal.
    pub hoppings: DMatrix<f64>,
    /// t̃_ij = t_ij − (1/2ω_x) Σ_{k≠i,j} t_ik t_jk.
    pub corrected_hoppings: DMatrix<f64>,
}

impl MotionalModel {
    pub fn n_ions(&self) -> usize {
        self.local_freqs.len()
    }

    /// Matrix with ω̃_i on the diagonal and t̃_ij off it.
    pub fn mode_matrix(&self) -> DMatrix<f64> {
        let mut m = self.corrected_hoppings.clone();
        for (i, w) in self.corrected_freqs.iter().enumerate() {
            m[(i, i)] = *w;
        }
        m
    }
}

/// Collective normal modes: ascending frequencies and orthonormal mode
/// vectors (column k is mode k, entry (i, k) is v_ik).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    pub freqs: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl ModeSpectrum {
    /// Diagonalise any symmetric frequency matrix.
    pub fn of_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let (freqs, vectors) = symmetric_eigen_sorted(m)?;
        Ok(ModeSpectrum { freqs, vectors })
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// v_ik
    pub fn component(&self, site: usize, mode: usize) -> f64 {
        self.vectors[(site, mode)]
    }
}

pub fn motional_model(geom: &ChainGeometry) -> Result<MotionalModel> {
    geom.validate()?;
    let n = geom.n_ions();
    let wx = geom.trap_freq;
    let c = geom.coulomb_constant();
    let z = geom.distances();

    let mut local = Vec::with_capacity(n);
    for i in 0..n {
        let s: f64 = (0..n).filter(|&j| j != i).map(|j| z[(i, j)].powi(-3)).sum();
        let radicand = wx * wx - c * s;
        if radicand <= 0.0 {
            return Err(Error::ChainUnstable { ion: i, radicand });
        }
        local.push(radicand.sqrt());
    }

    let hoppings = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            c / (2.0 * (local[i] * local[j]).sqrt() * z[(i, j)].powi(3))
        }
    });

    let corrected_freqs = (0..n)
        .map(|i| local[i] - (0..n).map(|j| hoppings[(i, j)].powi(2)).sum::<f64>() / (2.0 * wx))
        .collect();
    let corrected_hoppings = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            return 0.0;
        }
        let second: f64 = (0..n)
            .filter(|&k| k != i && k != j)
            .map(|k| hoppings[(i, k)] * hoppings[(j, k)])
            .sum();
        hoppings[(i, j)] - second / (2.0 * wx)
    });

    Ok(MotionalModel {
        trap_freq: wx,
        local_freqs: local,
        corrected_freqs,
        hoppings,
        corrected_hoppings,
    })
}

pub fn collective_modes(m: &MotionalModel) -> Result<ModeSpectrum> {
    ModeSpectrum::of_matrix(&m.mode_matrix())
}

/// Interaction-picture Rabi-Hubbard parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RHModel {
    /// ω₀, rad/s.
    pub spin_freq: f64,
    /// ω_i, rad/s; may be negative for dynamics studies.
    pub site_freqs: Vec<f64>,
    /// g, rad/s.
    pub coupling: f64,
    /// t_ij, rad/s; row-major N×N.
    #[serde(with = "matrix_serde")]
    pub hoppings: DMatrix<f64>,
}

impl RHModel {
    pub fn new(spin_freq: f64, site_freqs: Vec<f64>, coupling: f64, hoppings: DMatrix<f64>) -> Result<Self> {
        let m = RHModel {
            spin_freq,
            site_freqs,
            coupling,
            hoppings,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.site_freqs.len();
        if n == 0 {
            return Err(Error::invalid("model needs at least one site"));
        }
        if self.hoppings.nrows() != n || self.hoppings.ncols() != n {
            return Err(Error::invalid(format!(
                "hopping matrix is {}x{}, expected {n}x{n}",
                self.hoppings.nrows(),
                self.hoppings.ncols()
            )));
        }
        for i in 0..n {
            if self.hoppings[(i, i)] != 0.0 {
                return Err(Error::invalid("hopping matrix must have zero diagonal"));
            }
            for j in 0..i {
                let (a, b) = (self.hoppings[(i, j)], self.hoppings[(j, i)]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::invalid(format!("hopping matrix not symmetric at ({i},{j})")));
                }
            }
        }
        let finite = self.spin_freq.is_finite()
            && self.coupling.is_finite()
            && self.site_freqs.iter().all(|x| x.is_finite())
            && self.hoppings.iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::invalid("model parameters must be finite"));
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.site_freqs.len()
    }

    pub fn with_coupling(&self, g: f64) -> Self {
        RHModel {
            coupling: g,
            ..self.clone()
        }
    }

    /// diag(ω_i) + t_ij
    pub fn phonon_matrix(&self) -> DMatrix<f64> {
        let mut m = self.hoppings.clone();
        for (i, w) in self.site_freqs.iter().enumerate() {
            m[(i, i)] = *w;
        }
        m
    }

    /// Collective modes δ_k, v_ik of the phonon part.
    pub fn mode_spectrum(&self) -> Result<ModeSpectrum> {
        ModeSpectrum::of_matrix(&self.phonon_matrix())
    }

    /// True when every collective phonon frequency is positive, the
    /// precondition for ground-state and slow-quench studies.
    pub fn is_equilibrium(&self) -> Result<bool> {
        Ok(self.mode_spectrum()?.freqs.iter().all(|&d| d > 0.0))
    }

    pub(crate) fn require_equilibrium(&self) -> Result<ModeSpectrum> {
        let spec = self.mode_spectrum()?;
        let lowest = spec.freqs[0];
        if lowest <= 0.0 {
            return Err(Error::NotEquilibrium { lowest });
        }
        Ok(spec)
    }
}

/// Map the motional model into the frame of the blue/red sideband drive
/// with detunings `delta_b`, `delta_r` (rad/s). The coupling is left at 0.
pub fn interaction_picture(m: &MotionalModel, delta_b: f64, delta_r: f64) -> RHModel {
    let shift = (delta_b - delta_r) / 2.0;
    RHModel {
        spin_freq: (delta_b + delta_r) / 2.0,
        site_freqs: m.corrected_freqs.iter().map(|w| w - m.trap_freq + shift).collect(),
        coupling: 0.0,
        hoppings: m.corrected_hoppings.clone(),
    }
}

/// g = ηΩ/2.
pub fn coupling_from_laser(lamb_dicke: f64, rabi: f64) -> Result<f64> {
    if !(lamb_dicke > 0.0) || !(rabi >= 0.0) {
        return Err(Error::Domain("need η > 0 and Ω ≥ 0".into()));
    }
    Ok(lamb_dicke * rabi / 2.0)
}

/// Ω = 2g/η, inverse of [`coupling_from_laser`].
pub fn rabi_for_coupling(coupling: f64, lamb_dicke: f64) -> Result<f64> {
    if !(lamb_dicke > 0.0) || !(coupling >= 0.0) {
        return Err(Error::Domain("need η > 0 and g ≥ 0".into()));
    }
    Ok(2.0 * coupling / lamb_dicke)
}

pub(crate) mod matrix_serde {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("matrix must be square"));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{khz, mhz, micrometers, to_khz};

    fn uniform_reference() -> ChainGeometry {
        ChainGeometry::uniform(6, micrometers(5.4), mhz(2.5)).unwrap()
    }

    #[test]
    fn single_ion_has_no_neighbours() {
        let g = ChainGeometry::uniform(1, micrometers(5.0), mhz(2.5)).unwrap();
        let m = motional_model(&g).unwrap();
        assert_eq!(m.local_freqs, vec![mhz(2.5)]);
        assert_eq!(m.corrected_freqs, vec![mhz(2.5)]);
        assert_eq!(m.hoppings.len(), 1);
        assert_eq!(m.hoppings[(0, 0)], 0.0);
    }

    #[test]
    fn two_ion_hopping_matches_constant_formula() {
        let d = micrometers(5.262);
        let g = ChainGeometry::uniform(2, d, mhz(2.4577)).unwrap();
        let m = motional_model(&g).unwrap();
        // independent evaluation straight from CODATA constants
        let e = 1.602_176_634e-19;
        let eps0 = 8.854_187_812_8e-12;
        let mass = (170.936_325_8 - 5.485_799_090_65e-4) * 1.660_539_066_60e-27;
        let w1 = (mhz(2.4577).powi(2) - e * e / (4.0 * PI * eps0 * mass) / d.powi(3)).sqrt();
        let t = e * e / (8.0 * PI * eps0 * mass * (w1 * w1).sqrt() * d.powi(3));
        assert!((m.hoppings[(0, 1)] - t).abs() / t < 1e-12);
    }

    #[test]
    fn unstable_chain_names_ion() {
        // spacing so small the middle ion is softened the most
        let g = ChainGeometry::uniform(3, micrometers(1.67), mhz(2.5)).unwrap();
        match motional_model(&g) {
            Err(Error::ChainUnstable { ion, .. }) => assert_eq!(ion, 1),
            other => panic!("expected instability, got {other:?}"),
        }
    }

    #[test]
    fn corrections_are_small_and_subtractive() {
        let m = motional_model(&uniform_reference()).unwrap();
        for i in 0..6 {
            assert!(m.corrected_freqs[i] < m.local_freqs[i]);
            for j in 0..6 {
                if i != j {
                    let (t, tt) = (m.hoppings[(i, j)], m.corrected_hoppings[(i, j)]);
                    assert!(t > 0.0);
                    assert!((tt - t).abs() < t);
                    assert_eq!(m.hoppings[(i, j)], m.hoppings[(j, i)]);
                }
            }
        }
        let nn = to_khz(m.corrected_hoppings[(2, 3)]);
        assert!((nn - 26.0).abs() / 26.0 < 0.05, "nearest-neighbour hopping {nn} kHz");
    }

    #[test]
    fn two_mode_spectrum() {
        let g = ChainGeometry::uniform(2, micrometers(5.262), mhz(2.4577)).unwrap();
        let m = motional_model(&g).unwrap();
        let s = collective_modes(&m).unwrap();
        let (w, t) = (m.corrected_freqs[0], m.corrected_hoppings[(0, 1)]);
        assert!((s.freqs[0] - (w - t)).abs() < 1e-6);
        assert!((s.freqs[1] - (w + t)).abs() < 1e-6);
        let r = 0.5f64.sqrt();
        assert!((s.vectors[(0, 0)] - r).abs() < 1e-12 && (s.vectors[(1, 0)] + r).abs() < 1e-12);
        assert!((s.vectors[(0, 1)] - r).abs() < 1e-12 && (s.vectors[(1, 1)] - r).abs() < 1e-12);
        // COM sits at the trap frequency up to third order in the Coulomb ratio
        assert!((to_khz(s.freqs[1]) - 2457.7).abs() < 0.05);
        assert!((to_khz(s.freqs[0]) - 2399.5).abs() < 0.5);
    }

    #[test]
    fn symmetric_detuning_mapping() {
        let m = motional_model(&uniform_reference()).unwrap();
        let d = khz(40.0);
        let rh = interaction_picture(&m, d, -d);
        assert_eq!(rh.spin_freq, 0.0);
        for i in 0..6 {
            assert!((rh.site_freqs[i] - (m.corrected_freqs[i] - m.trap_freq + d)).abs() < 1e-6);
        }
    }

    #[test]
    fn laser_coupling_round_trip() {
        let g = coupling_from_laser(0.1, khz(100.0)).unwrap();
        assert!((g - khz(5.0)).abs() < 1e-9);
        assert_eq!(coupling_from_laser(0.07, 0.0).unwrap(), 0.0);
        let omega = rabi_for_coupling(g, 0.1).unwrap();
        assert!((omega - khz(100.0)).abs() < 1e-9);
        assert!(coupling_from_laser(0.0, 1.0).is_err());
    }

    #[test]
    fn model_validation() {
        let h = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(RHModel::new(1.0, vec![0.0, 0.0], 0.0, h).is_err());
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        assert!(RHModel::new(1.0, vec![0.0, 0.0], 0.0, h).is_err());
    }
}
