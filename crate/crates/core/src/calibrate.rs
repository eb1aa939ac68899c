//! Inverse problem: recover inter-ion spacings from measured collective
//! transverse mode frequencies.
//!
//! The N−1 spacings set the N−1 non-COM mode frequencies, so a damped
//! Gauss–Newton fit in log-spacing coordinates recovers them. The
//! Jacobian comes from first-order perturbation theory on the mode matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::{collective_modes, motional_model, ChainGeometry, ModeSpectrum};
use crate::error::{Error, Result};
use crate::units::{hz, khz, micrometers};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeasurement {
    /// Measured mode frequencies, rad/s, strictly ascending.
    pub freqs: Vec<f64>,
    /// ω_x, rad/s. Usually the highest (COM) mode.
    pub trap_freq: f64,
    pub weights: Option<Vec<f64>>,
}

impl SpectrumMeasurement {
    /// Measurement whose trap frequency is taken from the top (COM) mode.
    pub fn from_modes(freqs: Vec<f64>) -> Result<Self> {
        let trap_freq = *freqs.last().ok_or_else(|| Error::invalid("empty spectrum"))?;
        let m = SpectrumMeasurement {
            freqs,
            trap_freq,
            weights: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.freqs.is_empty() {
            return Err(Error::invalid("empty spectrum"));
        }
        if self.freqs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("measured frequencies must be strictly ascending"));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.freqs.len() || w.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::invalid("weights must be nonnegative, one per mode"));
            }
        }
        if !(self.trap_freq > 0.0) {
            return Err(Error::invalid("trap frequency must be positive"));
        }
        Ok(())
    }

    /// Weights that count the lowest and highest modes `factor` times.
    pub fn edge_weighted(mut self, factor: f64) -> Self {
        let n = self.freqs.len();
        let mut w = vec![1.0; n];
        w[0] = factor;
        w[n - 1] = factor;
        self.weights = Some(w);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacingFit {
    /// Fitted spacings, meters.
    pub spacings: Vec<f64>,
    /// Weighted RMS mismatch between model and measured modes, rad/s.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Residual at the starting guess, rad/s.
    pub initial_residual: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Fit only mirror-independent spacings. `None` picks the default:
    /// on for even ion counts.
    pub symmetric: Option<bool>,
    /// Starting spacings, meters. Default: uniform 5.4 μm.
    pub initial: Option<Vec<f64>>,
    pub max_iterations: usize,
    /// Convergence threshold on the projected gradient, rad/s.
    pub gradient_tol: f64,
    /// Warn when the top measured mode differs from ω_x by more than this.
    pub com_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            symmetric: None,
            initial: None,
            max_iterations: 200,
            gradient_tol: hz(1.0),
            com_tol: khz(0.5),
        }
    }
}

/// Mode frequencies of a geometry, or the instability error.
pub fn mode_frequencies(geom: &ChainGeometry) -> Result<Vec<f64>> {
    Ok(collective_modes(&motional_model(geom)?)?.freqs)
}

/// Analytic sensitivity ∂δ_k/∂d_s of each collective mode frequency to each
/// spacing (rows: modes ascending; columns: spacings), in (rad/s)/m.
pub fn fit_jacobian(geom: &ChainGeometry) -> Result<DMatrix<f64>> {
    let model = motional_model(geom)?;
    let spectrum = collective_modes(&model)?;
    Ok(jacobian_with(geom, &model, &spectrum))
}

fn jacobian_with(geom: &ChainGeometry, model: &crate::chain::MotionalModel, spectrum: &ModeSpectrum) -> DMatrix<f64> {
    let n = geom.n_ions();
    let ns = n.saturating_sub(1);
    let wx = geom.trap_freq;
    let c = geom.coulomb_constant();
    let z = geom.distances();
    let w = &model.local_freqs;
    let t = &model.hoppings;
    let mut jac = DMatrix::zeros(n, ns);

    for s in 0..ns {
        // spacing s lies between ions s and s+1
        let crosses = |i: usize, j: usize| i.min(j) <= s && s < i.max(j);
        let mut dw = vec![0.0; n];
        for i in 0..n {
            let ds: f64 = (0..n)
                .filter(|&j| j != i && crosses(i, j))
                .map(|j| -3.0 * z[(i, j)].powi(-4))
                .sum();
            dw[i] = -c * ds / (2.0 * w[i]);
        }
        let dt = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                return 0.0;
            }
            let geom_term = if crosses(i, j) { 3.0 / z[(i, j)] } else { 0.0 };
            t[(i, j)] * (-0.5 * dw[i] / w[i] - 0.5 * dw[j] / w[j] - geom_term)
        });
        let mut dm = DMatrix::zeros(n, n);
        for i in 0..n {
            let corr: f64 = (0..n).map(|j| t[(i, j)] * dt[(i, j)]).sum();
            dm[(i, i)] = dw[i] - corr / wx;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let corr: f64 = (0..n)
                    .filter(|&k| k != i && k != j)
                    .map(|k| dt[(i, k)] * t[(j, k)] + t[(i, k)] * dt[(j, k)])
                    .sum();
                dm[(i, j)] = dt[(i, j)] - corr / (2.0 * wx);
            }
        }
        for k in 0..n {
            let v = spectrum.vectors.column(k);
            jac[(k, s)] = (v.transpose() * &dm * v)[(0, 0)];
        }
    }
    jac
}

struct Problem<'a> {
    meas: &'a SpectrumMeasurement,
    template: &'a ChainGeometry,
    sqrt_w: Vec<f64>,
    n_spacings: usize,
    symmetric: bool,
}

impl Problem<'_> {
    fn n_params(&self) -> usize {
        if self.symmetric {
            self.n_spacings.div_ceil(2)
        } else {
            self.n_spacings
        }
    }

    fn group(&self, s: usize) -> usize {
        if self.symmetric {
            s.min(self.n_spacings - 1 - s)
        } else {
            s
        }
    }

    fn spacings(&self, p: &DVector<f64>) -> Vec<f64> {
        (0..self.n_spacings).map(|s| p[self.group(s)].exp()).collect()
    }

    fn geometry(&self, p: &DVector<f64>) -> ChainGeometry {
        ChainGeometry {
            spacings: self.spacings(p),
            trap_freq: self.meas.trap_freq,
            ..self.template.clone()
        }
    }

    /// Weighted residuals and (optionally) their log-parameter Jacobian.
    fn evaluate(&self, p: &DVector<f64>, with_jac: bool) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        let geom = self.geometry(p);
        let model = motional_model(&geom)?;
        let spectrum = collective_modes(&model)?;
        let n = self.meas.freqs.len();
        let r = DVector::from_fn(n, |k, _| self.sqrt_w[k] * (spectrum.freqs[k] - self.meas.freqs[k]));
        if !with_jac {
            return Ok((r, None));
        }
        let dj = jacobian_with(&geom, &model, &spectrum);
        let mut j = DMatrix::zeros(n, self.n_params());
        for s in 0..self.n_spacings {
            let q = self.group(s);
            for k in 0..n {
                j[(k, q)] += self.sqrt_w[k] * dj[(k, s)] * geom.spacings[s];
            }
        }
        Ok((r, Some(j)))
    }

    fn rms(&self, r: &DVector<f64>) -> f64 {
        let wsum: f64 = self.sqrt_w.iter().map(|x| x * x).sum();
        (r.norm_squared() / wsum).sqrt()
    }
}

fn projected_gradient(j: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
    let g = j.transpose() * r;
    (0..j.ncols())
        .map(|q| {
            let cn = j.column(q).norm();
            if cn > 0.0 {
                (g[q] / cn).abs()
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Least-squares fit of spacings to a measured mode spectrum.
///
/// Trial geometries that make the chain unstable are rejected and the
/// damping increased; they never abort the fit. When the iteration budget
/// runs out the best point so far is returned with `converged = false`.
pub fn fit_spacings(meas: &SpectrumMeasurement, template: &ChainGeometry, opts: &FitOptions) -> Result<SpacingFit> {
    meas.validate()?;
    let n = meas.freqs.len();
    if n != template.n_ions() {
        return Err(Error::invalid(format!(
            "{} measured modes for a {}-ion template",
            n,
            template.n_ions()
        )));
    }
    let mut warnings = Vec::new();
    let com_offset = (meas.freqs[n - 1] - meas.trap_freq).abs();
    if com_offset > opts.com_tol {
        let msg = format!(
            "top measured mode differs from trap frequency by {:.3} kHz; the COM mode should sit at ω_x",
            crate::units::to_khz(com_offset)
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    if n == 1 {
        return Ok(SpacingFit {
            spacings: Vec::new(),
            residual: 0.0,
            converged: true,
            iterations: 0,
            initial_residual: 0.0,
            warnings,
        });
    }

    let sqrt_w = match &meas.weights {
        Some(w) => w.iter().map(|x| x.sqrt()).collect(),
        None => vec![1.0; n],
    };
    let symmetric = opts.symmetric.unwrap_or(n.is_multiple_of(2));
    let problem = Problem {
        meas,
        template,
        sqrt_w,
        n_spacings: n - 1,
        symmetric,
    };

    let init = opts.initial.clone().unwrap_or_else(|| vec![micrometers(5.4); n - 1]);
    if init.len() != n - 1 || init.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::invalid("initial spacings must be n_ions-1 positive lengths"));
    }
    let np = problem.n_params();
    let mut p = DVector::zeros(np);
    let mut counts = vec![0usize; np];
    for (s, d) in init.iter().enumerate() {
        p[problem.group(s)] += d.ln();
        counts[problem.group(s)] += 1;
    }
    for q in 0..np {
        p[q] /= counts[q] as f64;
    }

    let (mut r, jac) = problem
        .evaluate(&p, true)
        .map_err(|e| Error::invalid(format!("initial guess is not a valid chain: {e}")))?;
    let mut j = jac.unwrap();
    let initial_residual = problem.rms(&r);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        if projected_gradient(&j, &r) < opts.gradient_tol || cost == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for q in 0..np {
                a[(q, q)] += lambda * jtj[(q, q)].max(1e-30);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial = &p + &step;
            match problem.evaluate(&trial, false) {
                Ok((rt, _)) if rt.norm_squared() < cost => {
                    p = trial;
                    let (rn, jn) = problem.evaluate(&p, true)?;
                    r = rn;
                    j = jn.unwrap();
                    cost = r.norm_squared();
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    break;
                }
                // worse, or unstable trial geometry: damp harder
                _ => lambda *= 4.0,
            }
        }
        if !accepted {
            converged = projected_gradient(&j, &r) < opts.gradient_tol;
            break;
        }
    }
    if !converged && iterations >= opts.max_iterations {
        converged = projected_gradient(&j, &r) < opts.gradient_tol;
    }

    Ok(SpacingFit {
        spacings: problem.spacings(&p),
        residual: problem.rms(&r),
        converged,
        iterations,
        initial_residual,
        warnings,
    })
}

/// Spacing of a two-ion chain from its measured mode splitting, found by
/// bisection on the splitting, which falls monotonically with distance.
pub fn two_ion_spacing(low: f64, high: f64, trap_freq: f64, template: &ChainGeometry) -> Result<f64> {
    if !(low < high) {
        return Err(Error::Domain("lower mode must lie below the upper mode".into()));
    }
    let target = high - low;
    let split = |d: f64| -> Option<f64> {
        let g = ChainGeometry {
            spacings: vec![d],
            trap_freq,
            ..template.clone()
        };
        mode_frequencies(&g).ok().map(|f| f[1] - f[0])
    };
    // splitting decreases monotonically with distance
    let mut hi = micrometers(1000.0);
    let mut lo = micrometers(50.0);
    while split(lo).is_some_and(|s| s < target) {
        lo *= 0.5;
        if lo < 1e-9 {
            return Err(Error::Domain("splitting too large for a stable chain".into()));
        }
    }
    if split(lo).is_none() {
        // walk up until stable
        let mut d = lo;
        while split(d).is_none() {
            d *= 1.05;
        }
        lo = d;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match split(mid) {
            Some(s) if s > target => lo = mid,
            _ => hi = mid,
        }
        if (hi - lo) < 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
