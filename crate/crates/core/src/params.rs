//! Experimental parameter sets and reference model builders.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::calibrate::{fit_spacings, FitOptions, SpacingFit, SpectrumMeasurement};
use crate::chain::{interaction_picture, motional_model, ChainGeometry, RHModel};
use crate::error::{Error, Result};
use crate::units::{khz, mhz, micrometers};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    /// Ground-state transition runs: δ₀ = 2π×2 kHz, ω₀ on the central ion.
    PhaseTransition,
    /// Dynamics runs from |↑,0⟩^⊗N with mixed-sign mode frequencies.
    Dynamics,
}

/// One experimental configuration: measured transverse modes, fitted
/// spacings and sideband detunings, with any quoted derived values.
/// Frequencies are plain kHz/MHz here (the 2π is applied on use).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentalSet {
    pub study: Study,
    pub n_ions: usize,
    pub modes_mhz: Vec<f64>,
    pub spacings_um: Vec<f64>,
    pub delta_b_khz: f64,
    pub delta_r_khz: f64,
    pub quoted_spin_freq_khz: Option<f64>,
    pub quoted_site_freqs_khz: Option<Vec<f64>>,
    pub quoted_mode_freqs_khz: Option<Vec<f64>>,
}

impl ExperimentalSet {
    /// Trap frequency: the measured COM (top) mode.
    pub fn trap_freq(&self) -> f64 {
        mhz(*self.modes_mhz.last().expect("nonempty spectrum"))
    }

    pub fn measured_modes(&self) -> Vec<f64> {
        self.modes_mhz.iter().map(|&f| mhz(f)).collect()
    }

    pub fn measurement(&self) -> Result<SpectrumMeasurement> {
        SpectrumMeasurement::from_modes(self.measured_modes())
    }

    /// Geometry from the quoted spacings.
    pub fn geometry(&self) -> Result<ChainGeometry> {
        ChainGeometry::new(
            self.spacings_um.iter().map(|&d| micrometers(d)).collect(),
            self.trap_freq(),
        )
    }

    pub fn delta_b(&self) -> f64 {
        khz(self.delta_b_khz)
    }

    pub fn delta_r(&self) -> f64 {
        khz(self.delta_r_khz)
    }

    /// Interaction-picture model built from the quoted spacings (g = 0).
    pub fn model(&self) -> Result<RHModel> {
        Ok(interaction_picture(
            &motional_model(&self.geometry()?)?,
            self.delta_b(),
            self.delta_r(),
        ))
    }

    /// Spacings refitted to the measured spectrum.
    pub fn calibrate(&self) -> Result<SpacingFit> {
        let template = ChainGeometry::uniform(self.n_ions, micrometers(5.4), self.trap_freq())?;
        fit_spacings(&self.measurement()?, &template, &FitOptions::default())
    }

    /// Interaction-picture model from spacings refitted to the measured spectrum.
    pub fn calibrated_model(&self) -> Result<RHModel> {
        let fit = self.calibrate()?;
        let geom = ChainGeometry::new(fit.spacings, self.trap_freq())?;
        Ok(interaction_picture(
            &motional_model(&geom)?,
            self.delta_b(),
            self.delta_r(),
        ))
    }
}

fn set(study: Study, modes_mhz: &[f64], spacings_um: &[f64], delta_b_khz: f64, delta_r_khz: f64) -> ExperimentalSet {
    ExperimentalSet {
        study,
        n_ions: modes_mhz.len(),
        modes_mhz: modes_mhz.to_vec(),
        spacings_um: spacings_um.to_vec(),
        delta_b_khz,
        delta_r_khz,
        quoted_spin_freq_khz: None,
        quoted_site_freqs_khz: None,
        quoted_mode_freqs_khz: None,
    }
}

/// Phase-transition configurations for N = 2, 6, 10, 14, 16.
pub fn phase_transition_sets() -> Vec<ExperimentalSet> {
    use Study::PhaseTransition as P;
    vec![
        set(P, &[2.3995, 2.4577], &[5.262], 88.0, -32.5),
        set(
            P,
            &[2.3527, 2.386, 2.415, 2.439, 2.459, 2.4732],
            &[5.847, 5.164, 4.990, 5.164, 5.847],
            171.49,
            -73.54,
        ),
        set(
            P,
            &[2.3590, 2.378, 2.393, 2.409, 2.423, 2.435, 2.446, 2.455, 2.462, 2.4675],
            &[7.188, 6.071, 5.596, 5.427, 5.250, 5.427, 5.596, 6.071, 7.188],
            152.96,
            -67.94,
        ),
        set(
            P,
            &[
                2.3582, 2.373, 2.387, 2.400, 2.412, 2.424, 2.434, 2.444, 2.453, 2.461, 2.468, 2.473, 2.478, 2.4821,
            ],
            &[
                7.585, 6.385, 5.807, 5.477, 5.267, 5.168, 5.119, 5.168, 5.267, 5.477, 5.807, 6.385, 7.585,
            ],
            179.36,
            -72.40,
        ),
        set(
            P,
            &[
                2.3524, 2.365, 2.377, 2.388, 2.399, 2.410, 2.419, 2.428, 2.437, 2.444, 2.451, 2.457, 2.463, 2.468,
                2.471, 2.4744,
            ],
            &[
                7.764, 6.737, 6.018, 5.644, 5.437, 5.283, 5.195, 5.183, 5.195, 5.283, 5.437, 5.644, 6.018, 6.737, 7.764,
            ],
            175.22,
            -72.90,
        ),
    ]
}

/// Dynamics configurations for N = 2, 4, 16, with the quoted frame values.
pub fn dynamics_sets() -> Vec<ExperimentalSet> {
    use Study::Dynamics as D;
    let mut n2 = set(D, &[2.3837, 2.4422], &[5.266], 31.25, -27.25);
    n2.quoted_spin_freq_khz = Some(2.0);
    n2.quoted_site_freqs_khz = Some(vec![0.0, 0.0]);
    n2.quoted_mode_freqs_khz = Some(vec![-29.25, 29.25]);
    let mut n4 = set(
        D,
        &[2.4021, 2.4264, 2.4460, 2.4607],
        &[6.536, 6.113, 6.536],
        31.28,
        -27.28,
    );
    n4.quoted_spin_freq_khz = Some(2.0);
    n4.quoted_site_freqs_khz = Some(vec![11.5, -6.5, -6.5, 11.5]);
    n4.quoted_mode_freqs_khz = Some(vec![-29.4, -5.1, 15.2, 29.3]);
    let mut n16 = set(
        D,
        &[
            2.3442, 2.357, 2.370, 2.381, 2.393, 2.403, 2.413, 2.422, 2.431, 2.439, 2.446, 2.452, 2.458, 2.463, 2.467,
            2.4700,
        ],
        &[
            7.772, 6.608, 5.993, 5.615, 5.378, 5.251, 5.116, 5.176, 5.116, 5.251, 5.378, 5.615, 5.993, 6.608, 7.772,
        ],
        65.0,
        -61.0,
    );
    n16.quoted_spin_freq_khz = Some(2.0);
    n16.quoted_site_freqs_khz = Some(vec![
        51.5, 35.9, 22.9, 11.7, 2.5, -4.1, -9.3, -11.1, -11.1, -9.3, -4.1, 2.5, 11.7, 22.9, 35.9, 51.5,
    ]);
    n16.quoted_mode_freqs_khz = Some(vec![
        -62.8, -50.0, -37.0, -26.0, -14.0, -4.0, 6.2, 15.2, 23.8, 31.6, 38.9, 45.5, 51.4, 56.4, 60.4, 63.0,
    ]);
    vec![n2, n4, n16]
}

pub fn find_set(study: Study, n_ions: usize) -> Result<ExperimentalSet> {
    let sets = match study {
        Study::PhaseTransition => phase_transition_sets(),
        Study::Dynamics => dynamics_sets(),
    };
    sets.into_iter()
        .find(|s| s.n_ions == n_ions)
        .ok_or_else(|| Error::Config(format!("no {study:?} parameter set for {n_ions} ions")))
}

/// Coupling used in the strong-coupling dynamics runs.
pub fn strong_dynamics_coupling() -> f64 {
    khz(6.0)
}

/// Coupling used in the weak-coupling dynamics runs.
pub fn weak_dynamics_coupling() -> f64 {
    khz(1.0)
}

/// Idealized uniform chain for ground-state scans: t_ij = 2π×26/|i−j|³ kHz,
/// site offsets from the Coulomb-softened local frequencies of a 5.4 μm,
/// 2π×2.5 MHz chain, shifted so the lowest collective mode sits at
/// `lowest_mode`, and ω₀ equal to the frequency of site N/2 (1-based).
pub fn uniform_transition_model(n_ions: usize, lowest_mode: f64) -> Result<RHModel> {
    if n_ions == 0 {
        return Err(Error::invalid("need at least one ion"));
    }
    let geom = ChainGeometry::uniform(n_ions, micrometers(5.4), mhz(2.5))?;
    let motion = motional_model(&geom)?;
    let offsets: Vec<f64> = motion.local_freqs.iter().map(|w| w - geom.trap_freq).collect();
    let hop = DMatrix::from_fn(n_ions, n_ions, |i, j| {
        if i == j {
            0.0
        } else {
            khz(26.0) / (i as f64 - j as f64).abs().powi(3)
        }
    });
    let base = RHModel::new(0.0, offsets.clone(), 0.0, hop.clone())?;
    let shift = lowest_mode - base.mode_spectrum()?.freqs[0];
    let site_freqs: Vec<f64> = offsets.iter().map(|w| w + shift).collect();
    let centre = (n_ions / 2).max(1) - 1;
    RHModel::new(site_freqs[centre], site_freqs, 0.0, hop)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sets_are_consistent() {
        for s in phase_transition_sets().iter().chain(dynamics_sets().iter()) {
            assert_eq!(s.spacings_um.len() + 1, s.n_ions);
            assert_eq!(s.modes_mhz.len(), s.n_ions);
            s.measurement().unwrap();
            s.model().unwrap();
        }
        assert!(find_set(Study::Dynamics, 6).is_err());
    }

    #[test]
    fn uniform_model_lowest_mode() {
        for n in 1..=4 {
            let m = uniform_transition_model(n, khz(2.0)).unwrap();
            let d = m.mode_spectrum().unwrap().freqs[0];
            assert!((d - khz(2.0)).abs() < 1e-9);
            assert!(m.spin_freq > 0.0);
        }
    }
}
