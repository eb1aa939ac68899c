//! Simulated correlation readout: rotated-basis measurement, cos² phase
//! fit, detection errors and finite-shot sampling.
//!
//! Spin outcomes use index 0 for ↑ (bright) and 1 for ↓ (dark); joint
//! two-qubit distributions are ordered (↑↑, ↑↓, ↓↑, ↓↓).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{spin_density_matrix, QuantumState};
use crate::linalg::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseScan {
    pub pair: (usize, usize),
    pub phases: Vec<f64>,
    pub correlations: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionErrorModel {
    /// Probability that a bright neighbour flips a dark ion to bright.
    pub eps_c: f64,
    /// Independent per-ion flip probability.
    pub eps_0: f64,
    /// Crosstalk for non-adjacent pairs.
    #[serde(default)]
    pub eps_c_distant: f64,
}

impl DetectionErrorModel {
    pub fn new(eps_c: f64, eps_0: f64) -> Result<Self> {
        let m = DetectionErrorModel {
            eps_c,
            eps_0,
            eps_c_distant: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn ideal() -> Self {
        DetectionErrorModel {
            eps_c: 0.0,
            eps_0: 0.0,
            eps_c_distant: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, e) in [
            ("eps_c", self.eps_c),
            ("eps_0", self.eps_0),
            ("eps_c_distant", self.eps_c_distant),
        ] {
            if !(0.0..=0.5).contains(&e) {
                return Err(Error::Domain(format!("{name} = {e} outside [0, 0.5]")));
            }
        }
        Ok(())
    }

    pub fn crosstalk_for(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) == 1 {
            self.eps_c
        } else {
            self.eps_c_distant
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFit {
    /// C⁰ ≥ 0.
    pub amplitude: f64,
    /// φ₀; meaningless when `phase_defined` is false.
    pub phase_offset: f64,
    pub constant: f64,
    /// RMS misfit.
    pub residual: f64,
    pub phase_defined: bool,
}

impl CorrelationFit {
    pub fn eval(&self, phi: f64) -> f64 {
        self.amplitude * (phi + self.phase_offset).cos().powi(2) + self.constant
    }
}

/// σ_φ = σ_x cos φ + σ_y sin φ.
pub fn sigma_phi(phi: f64) -> DMatrix<C64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(0.0, 0.0),
            C64::from_polar(1.0, -phi),
            C64::from_polar(1.0, phi),
            C64::new(0.0, 0.0),
        ],
    )
}

/// Reduced density matrix of spins (i, j) from an N-spin density matrix;
/// spin i is the high bit of the 4×4 result.
pub fn reduce_pair(rho: &DMatrix<C64>, n: usize, i: usize, j: usize) -> Result<DMatrix<C64>> {
    if i == j || i >= n || j >= n || rho.nrows() != 1 << n {
        return Err(Error::invalid("pair must be two distinct sites of the state"));
    }
    let bit = |s: usize, site: usize| (s >> (n - 1 - site)) & 1;
    let mut out = DMatrix::from_element(4, 4, C64::new(0.0, 0.0));
    let dim = 1 << n;
    for r in 0..dim {
        for c in 0..dim {
            // trace over all other spins: they must agree
            let mask = !((1 << (n - 1 - i)) | (1 << (n - 1 - j))) & (dim - 1);
            if r & mask != c & mask {
                continue;
            }
            let a = 2 * bit(r, i) + bit(r, j);
            let b = 2 * bit(c, i) + bit(c, j);
            out[(a, b)] += rho[(r, c)];
        }
    }
    Ok(out)
}

/// Connected correlation ⟨σ_φ σ_φ⟩ − ⟨σ_φ⟩⟨σ_φ⟩ of a two-spin density matrix.
pub fn rotated_correlation(rho2: &DMatrix<C64>, phi: f64) -> f64 {
    let s = sigma_phi(phi);
    let id = DMatrix::<C64>::identity(2, 2);
    let both = (rho2 * s.kronecker(&s)).trace().re;
    let a = (rho2 * s.kronecker(&id)).trace().re;
    let b = (rho2 * id.kronecker(&s)).trace().re;
    both - a * b
}

pub fn phase_scan_pair(rho2: &DMatrix<C64>, pair: (usize, usize), phases: &[f64]) -> PhaseScan {
    PhaseScan {
        pair,
        phases: phases.to_vec(),
        correlations: phases.iter().map(|&p| rotated_correlation(rho2, p)).collect(),
    }
}

/// Phase scan of sites (i, j) of a simulated state.
pub fn phase_scan(state: &QuantumState, i: usize, j: usize, phases: &[f64]) -> Result<PhaseScan> {
    let n = state.basis.n_sites();
    let rho = spin_density_matrix(&state.basis, &state.amplitudes)?;
    let rho2 = reduce_pair(&rho, n, i, j)?;
    Ok(phase_scan_pair(&rho2, (i, j), phases))
}

/// Least-squares fit of C⁰cos²(φ+φ₀) + C via the linear form a + b cos 2φ + c sin 2φ.
pub fn fit_correlation(scan: &PhaseScan) -> Result<CorrelationFit> {
    let m = scan.phases.len();
    if m < 5 || scan.correlations.len() != m {
        return Err(Error::invalid("phase fit needs at least 5 points"));
    }
    let (lo, hi) = scan
        .phases
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &p| (a.min(p), b.max(p)));
    // grids with or without the endpoint both count as covering a period
    let span = (hi - lo) * m as f64 / (m - 1) as f64;
    if span < std::f64::consts::PI - 1e-9 {
        return Err(Error::invalid("phase scan must span at least π"));
    }
    let x = DMatrix::from_fn(m, 3, |r, c| match c {
        0 => 1.0,
        1 => (2.0 * scan.phases[r]).cos(),
        _ => (2.0 * scan.phases[r]).sin(),
    });
    let y = DVector::from_column_slice(&scan.correlations);
    let coef = x
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| Error::Numerical(format!("phase fit: {e}")))?;
    let (a, b, c) = (coef[0], coef[1], coef[2]);
    let amplitude = 2.0 * b.hypot(c);
    let phase_defined = amplitude > 1e-12 * (1.0 + a.abs());
    let phase_offset = if phase_defined { 0.5 * (-c).atan2(b) } else { 0.0 };
    let resid = &x * &coef - &y;
    Ok(CorrelationFit {
        amplitude,
        phase_offset,
        constant: a - amplitude / 2.0,
        residual: (resid.norm_squared() / m as f64).sqrt(),
        phase_defined,
    })
}

fn check_distribution(p: &[f64; 4]) -> Result<()> {
    let total: f64 = p.iter().sum();
    if p.iter().any(|x| x.is_nan() || *x < -1e-15) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("not a probability distribution: {p:?}")));
    }
    Ok(())
}

/// Crosstalk (mixed → ↑↑ with probability ε_c) followed by independent
/// flips with probability ε₀ on each ion.
pub fn apply_detection_errors(p: &[f64; 4], eps_c: f64, eps_0: f64) -> Result<[f64; 4]> {
    check_distribution(p)?;
    DetectionErrorModel::new(eps_c, eps_0)?;
    let mut q = *p;
    q[0] += eps_c * (p[1] + p[2]);
    q[1] *= 1.0 - eps_c;
    q[2] *= 1.0 - eps_c;
    let flip = [[1.0 - eps_0, eps_0], [eps_0, 1.0 - eps_0]];
    let mut out = [0.0; 4];
    for (a, qa) in q.iter().enumerate() {
        let (ai, aj) = (a >> 1, a & 1);
        for (b, o) in out.iter_mut().enumerate() {
            *o += qa * flip[ai][b >> 1] * flip[aj][b & 1];
        }
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}

/// ⟨z_i z_j⟩ − ⟨z_i⟩⟨z_j⟩ of a joint outcome distribution.
pub fn connected_zz(p: &[f64; 4]) -> f64 {
    let zz = p[0] - p[1] - p[2] + p[3];
    let zi = p[0] + p[1] - p[2] - p[3];
    let zj = p[0] - p[1] + p[2] - p[3];
    zz - zi * zj
}

/// Joint outcome distribution after rotating σ_φ into the measurement basis.
pub fn rotated_pair_distribution(rho2: &DMatrix<C64>, phi: f64) -> [f64; 4] {
    let s = sigma_phi(phi);
    let id = DMatrix::<C64>::identity(2, 2);
    let proj = |sign: f64| (&id + &s * C64::new(sign, 0.0)) * C64::new(0.5, 0.0);
    let (up, down) = (proj(1.0), proj(-1.0));
    let mut p = [0.0; 4];
    for (k, (a, b)) in [(&up, &up), (&up, &down), (&down, &up), (&down, &down)]
        .iter()
        .enumerate()
    {
        p[k] = (rho2 * a.kronecker(b)).trace().re.max(0.0);
    }
    let t: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= t);
    p
}

/// Phase scan as recorded through an imperfect detector.
pub fn measured_scan(
    rho2: &DMatrix<C64>,
    pair: (usize, usize),
    phases: &[f64],
    model: &DetectionErrorModel,
) -> Result<PhaseScan> {
    model.validate()?;
    let eps_c = model.crosstalk_for(pair.0, pair.1);
    let correlations = phases
        .iter()
        .map(|&phi| {
            Ok(connected_zz(&apply_detection_errors(
                &rotated_pair_distribution(rho2, phi),
                eps_c,
                model.eps_0,
            )?))
        })
        .collect::<Result<_>>()?;
    Ok(PhaseScan {
        pair,
        phases: phases.to_vec(),
        correlations,
    })
}

/// Outcome probabilities of all N spins measured along σ_φ; bit N−1−i set
/// when ion i reads dark.
pub fn rotated_distribution(rho: &DMatrix<C64>, n: usize, phi: f64) -> Result<Vec<f64>> {
    if rho.nrows() != 1 << n || rho.ncols() != 1 << n {
        return Err(Error::invalid("density matrix size does not match spin count"));
    }
    // rows are ⟨±φ| = (⟨↑| ± e^{−iφ}⟨↓|)/√2
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let e = C64::from_polar(h, -phi);
    let u1 = DMatrix::from_row_slice(2, 2, &[C64::new(h, 0.0), e, C64::new(h, 0.0), -e]);
    let mut u = DMatrix::<C64>::identity(1, 1);
    for _ in 0..n {
        u = u.kronecker(&u1);
    }
    let r = &u * rho * u.adjoint();
    Ok(r.diagonal().iter().map(|z| z.re.max(0.0)).collect())
}

/// Multinomial shot counts from outcome probabilities, reproducible per seed.
pub fn sample_shots(probs: &[f64], n_shots: u64, seed: u64) -> Result<Vec<u64>> {
    let total: f64 = probs.iter().sum();
    if probs.iter().any(|p| p.is_nan() || *p < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain("outcome probabilities must be a distribution".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; probs.len()];
    let mut left = n_shots;
    let mut mass = total;
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == probs.len() || mass <= 0.0 {
            counts[k] = left;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, q)
            .map_err(|e| Error::Numerical(format!("binomial draw: {e}")))?
            .sample(&mut rng);
        counts[k] = draw;
        left -= draw;
        mass -= p;
    }
    Ok(counts)
}

/// Shot counts over all 2^N bitstrings of a state measured along σ_φ.
pub fn sample_state_shots(state: &QuantumState, phi: f64, n_shots: u64, seed: u64) -> Result<Vec<u64>> {
    let rho = spin_density_matrix(&state.basis, &state.amplitudes)?;
    let probs = rotated_distribution(&rho, state.basis.n_sites(), phi)?;
    let total: f64 = probs.iter().sum();
    let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
    sample_shots(&probs, n_shots, seed)
}

/// Connected correlation of a pair estimated from joint shot counts.
pub fn correlation_from_counts(counts: &[u64; 4]) -> f64 {
    let n: u64 = counts.iter().sum();
    let p = counts.map(|c| c as f64 / n as f64);
    connected_zz(&p)
}
