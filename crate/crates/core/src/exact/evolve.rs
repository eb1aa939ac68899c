//! Schrödinger evolution by short-iterative Lanczos (Krylov) exponentials,
//! with a fourth-order commutator-free Magnus step for time-dependent g.

use nalgebra::DMatrix;

use super::hamiltonian::HamiltonianOperator;
use crate::error::{Error, Result};
use crate::linalg::{caxpy, cdot, cnorm, cscale, symmetric_eigen_sorted, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveOptions {
    /// Allowed Krylov truncation error per step (absolute, state norm 1).
    pub step_tol: f64,
    pub max_krylov: usize,
    /// Upper bound on a single step, seconds. Time-dependent couplings
    /// also cap steps at 1/50 of the shortest output interval unless set.
    pub max_step: Option<f64>,
    pub min_step: f64,
    /// Abort when the norm drifts further than this from 1.
    pub norm_tol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            step_tol: 1e-11,
            max_krylov: 30,
            max_step: None,
            min_step: 1e-15,
            norm_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvolveStats {
    pub steps: usize,
    pub matvecs: usize,
    pub max_norm_drift: f64,
}

/// Coupling schedule seen by the integrator.
pub enum Coupling<'a> {
    Constant(f64),
    Schedule(&'a dyn Fn(f64) -> f64),
}

struct Krylov {
    basis: Vec<Vec<C64>>,
    evals: Vec<f64>,
    evecs: DMatrix<f64>,
    /// β of the vector that would extend the subspace.
    beta_next: f64,
    norm: f64,
    /// True when the subspace is invariant (exact exponential).
    exact: bool,
}

impl Krylov {
    /// Krylov space of `psi`, grown until the step (dt, tol) is met or `m_max` is reached.
    fn build(
        h: &HamiltonianOperator,
        g: f64,
        scale: f64,
        psi: &[C64],
        m_max: usize,
        target: (f64, f64),
    ) -> Result<Self> {
        let dim = psi.len();
        let norm = cnorm(psi);
        let mut v0 = psi.to_vec();
        cscale(1.0 / norm, &mut v0);
        let mut basis = vec![v0];
        let m_max = m_max.min(dim);
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut beta_next = 0.0;
        let mut exact = false;
        let mut w = vec![C64::new(0.0, 0.0); dim];
        for j in 0..m_max {
            w.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            h.apply_add(g, &basis[j], &mut w);
            cscale(scale, &mut w);
            let mut a = 0.0;
            for _ in 0..2 {
                for (i, q) in basis.iter().enumerate() {
                    let c = cdot(q, &w);
                    caxpy(-c, q, &mut w);
                    if i == j {
                        a += c.re;
                    }
                }
            }
            alpha.push(a);
            let b = cnorm(&w);
            if b <= 1e-14 * a.abs().max(1.0) {
                exact = true;
                break;
            }
            if j + 1 == m_max {
                beta_next = b;
                break;
            }
            if j >= 3 && j % 2 == 1 {
                let mut trial = Self::finish(Vec::new(), &alpha, &beta, b, norm, false)?;
                if trial.error(target.0) <= target.1 {
                    trial.basis = basis;
                    return Ok(trial);
                }
            }
            beta.push(b);
            let mut q = w.clone();
            cscale(1.0 / b, &mut q);
            basis.push(q);
        }
        basis.truncate(alpha.len());
        Self::finish(basis, &alpha, &beta, beta_next, norm, exact)
    }

    fn finish(
        basis: Vec<Vec<C64>>,
        alpha: &[f64],
        beta: &[f64],
        beta_next: f64,
        norm: f64,
        exact: bool,
    ) -> Result<Self> {
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let (evals, evecs) = symmetric_eigen_sorted(&t)?;
        Ok(Krylov {
            basis,
            evals,
            evecs,
            beta_next,
            norm,
            exact,
        })
    }

    /// Coefficients of e^{−i T dt} e₁.
    fn coeffs(&self, dt: f64) -> Vec<C64> {
        let m = self.evals.len();
        let mut c = vec![C64::new(0.0, 0.0); m];
        for k in 0..m {
            let phase = C64::from_polar(self.evecs[(0, k)], -self.evals[k] * dt);
            for (i, ci) in c.iter_mut().enumerate() {
                *ci += phase * self.evecs[(i, k)];
            }
        }
        c
    }

    fn error(&self, dt: f64) -> f64 {
        if self.exact {
            return 0.0;
        }
        let c = self.coeffs(dt);
        // residual of the projected exponential, in the dt-scaled operator
        dt * self.beta_next * c.last().map_or(0.0, |x| x.norm()) * self.norm
    }

    fn apply(&self, dt: f64, out: &mut [C64]) {
        out.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for (ci, q) in self.coeffs(dt).iter().zip(&self.basis) {
            caxpy(*ci * self.norm, q, out);
        }
    }
}

/// Largest dt ≤ `want` with Krylov error ≤ tol.
fn admissible_step(k: &Krylov, want: f64, tol: f64, min_step: f64) -> Result<f64> {
    let mut dt = want;
    while k.error(dt) > tol {
        dt *= 0.5;
        if dt < min_step {
            return Err(Error::Numerical(format!(
                "step size underflow: dt = {dt:.3e} s below minimum {min_step:.3e} s (Krylov error {:.3e} at dim {})",
                k.error(dt),
                k.evals.len()
            )));
        }
    }
    Ok(dt)
}

const CF4_A1: f64 = (3.0 - 2.0 * 1.732_050_807_568_877_2) / 12.0;
const CF4_A2: f64 = (3.0 + 2.0 * 1.732_050_807_568_877_2) / 12.0;
const CF4_C1: f64 = 0.5 - 1.732_050_807_568_877_2 / 6.0;
const CF4_C2: f64 = 0.5 + 1.732_050_807_568_877_2 / 6.0;

/// Evolve `psi` from `t0` through every time in `t_grid`, calling
/// `observe(t, ψ)` at `t0` (if it equals the first grid time) and each grid time.
pub fn evolve<F>(
    h: &HamiltonianOperator,
    coupling: Coupling<'_>,
    psi: &mut Vec<C64>,
    t0: f64,
    t_grid: &[f64],
    opts: &EvolveOptions,
    mut observe: F,
) -> Result<EvolveStats>
where
    F: FnMut(f64, &[C64]) -> Result<()>,
{
    if psi.len() != h.dim() {
        return Err(Error::invalid("state and Hamiltonian dimensions differ"));
    }
    let n0 = cnorm(psi);
    if (n0 - 1.0).abs() > 1e-8 {
        return Err(Error::invalid(format!("initial state not normalized (norm {n0})")));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.first().is_some_and(|&t| t < t0) {
        return Err(Error::invalid("time grid must be ascending from the state's time"));
    }
    let mut stats = EvolveStats::default();
    let mut t = t0;
    let mut next = psi.clone();
    let mut mid = psi.clone();
    let time_dependent = matches!(coupling, Coupling::Schedule(_));
    let min_interval = t_grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min);
    let cap = match (opts.max_step, time_dependent) {
        (Some(c), _) => c,
        (None, true) if min_interval.is_finite() => min_interval / 50.0,
        _ => f64::INFINITY,
    };
    let mut dt_try = cap.min(t_grid.last().map_or(0.0, |&e| e - t0)).max(opts.min_step);

    for &target in t_grid {
        while target - t > 1e-15 * target.abs().max(1e-12) {
            let want = dt_try.min(target - t).min(cap);
            let dt = match &coupling {
                Coupling::Constant(g) => {
                    let k = Krylov::build(h, *g, 1.0, psi, opts.max_krylov, (want, opts.step_tol))?;
                    stats.matvecs += k.evals.len();
                    let dt = admissible_step(&k, want, opts.step_tol, opts.min_step)?;
                    k.apply(dt, &mut next);
                    dt
                }
                Coupling::Schedule(gf) => {
                    // two exponentials of ½(H₀ + g_eff V), each a Krylov step
                    let mut dt = want;
                    loop {
                        let g1 = gf(t + CF4_C1 * dt);
                        let g2 = gf(t + CF4_C2 * dt);
                        let first = 2.0 * (CF4_A2 * g1 + CF4_A1 * g2);
                        let second = 2.0 * (CF4_A1 * g1 + CF4_A2 * g2);
                        let k1 = Krylov::build(h, first, 0.5, psi, opts.max_krylov, (dt, opts.step_tol))?;
                        stats.matvecs += k1.evals.len();
                        let ok1 = admissible_step(&k1, dt, opts.step_tol, opts.min_step)?;
                        if ok1 < dt {
                            dt = ok1;
                            continue;
                        }
                        k1.apply(dt, &mut mid);
                        let k2 = Krylov::build(h, second, 0.5, &mid, opts.max_krylov, (dt, opts.step_tol))?;
                        stats.matvecs += k2.evals.len();
                        let ok2 = admissible_step(&k2, dt, opts.step_tol, opts.min_step)?;
                        if ok2 < dt {
                            dt = ok2;
                            continue;
                        }
                        k2.apply(dt, &mut next);
                        break dt;
                    }
                }
            };
            std::mem::swap(psi, &mut next);
            t += dt;
            stats.steps += 1;
            let drift = (cnorm(psi) - 1.0).abs();
            stats.max_norm_drift = stats.max_norm_drift.max(drift);
            if drift > opts.norm_tol {
                return Err(Error::Numerical(format!("norm drift {drift:.3e} at t = {t:.6e} s")));
            }
            // grow the step again after a forced reduction
            dt_try = if dt < want { dt } else { (dt * 2.0).min(cap) };
        }
        t = target;
        observe(t, psi)?;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::RHModel;
    use crate::exact::basis::{BasisSpec, Sector};
    use crate::exact::hamiltonian::build_hamiltonian;
    use nalgebra::DVector;

    fn model(g: f64) -> RHModel {
        let hop = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        RHModel::new(1.0, vec![0.3, -0.2], g, hop).unwrap()
    }

    fn dense_propagate(h: &DMatrix<f64>, psi: &[C64], t: f64) -> Vec<C64> {
        let (vals, vecs) = symmetric_eigen_sorted(h).unwrap();
        let v = vecs.map(|x| C64::new(x, 0.0));
        let p = DVector::from_column_slice(psi);
        let c = v.adjoint() * p;
        let c = DVector::from_fn(c.len(), |k, _| c[k] * C64::from_polar(1.0, -vals[k] * t));
        (v * c).iter().copied().collect()
    }

    #[test]
    fn constant_coupling_matches_dense_exponential() {
        let h = build_hamiltonian(&model(0.8), BasisSpec::local(2, 4, Sector::Even)).unwrap();
        let mut psi = vec![C64::new(0.0, 0.0); h.dim()];
        let f = h.basis.encode(&[false, false], &[0, 0]).unwrap();
        psi[h.basis.index_of(f).unwrap()] = C64::new(1.0, 0.0);
        let start = psi.clone();
        let grid: Vec<f64> = (1..=5).map(|k| k as f64 * 3.7).collect();
        let dense = h.to_dense(0.8);
        let mut worst: f64 = 0.0;
        evolve(
            &h,
            Coupling::Constant(0.8),
            &mut psi,
            0.0,
            &grid,
            &EvolveOptions::default(),
            |t, s| {
                let want = dense_propagate(&dense, &start, t);
                for (a, b) in s.iter().zip(&want) {
                    worst = worst.max((a - b).norm());
                }
                Ok(())
            },
        )
        .unwrap();
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn schedule_fourth_order() {
        // compare two step sizes against a fine reference; error ratio ≈ 16
        let h = build_hamiltonian(&model(0.0), BasisSpec::local(2, 3, Sector::Full)).unwrap();
        let gf = |t: f64| 0.9 * (1.0 - (-t / 2.0).exp());
        let run = |step: f64| {
            let mut psi = vec![C64::new(0.0, 0.0); h.dim()];
            psi[0] = C64::new(1.0, 0.0);
            let opts = EvolveOptions {
                max_step: Some(step),
                ..Default::default()
            };
            evolve(&h, Coupling::Schedule(&gf), &mut psi, 0.0, &[4.0], &opts, |_, _| Ok(())).unwrap();
            psi
        };
        let reference = run(0.005);
        let err = |s: &[C64]| {
            s.iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        };
        let e1 = err(&run(0.4));
        let e2 = err(&run(0.2));
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio} ({e1}, {e2})");
    }

    #[test]
    fn rejects_unnormalized_and_descending() {
        let h = build_hamiltonian(&model(0.1), BasisSpec::local(2, 1, Sector::Full)).unwrap();
        let mut psi = vec![C64::new(0.0, 0.0); h.dim()];
        assert!(evolve(
            &h,
            Coupling::Constant(0.1),
            &mut psi,
            0.0,
            &[1.0],
            &EvolveOptions::default(),
            |_, _| Ok(())
        )
        .is_err());
        psi[0] = C64::new(1.0, 0.0);
        assert!(evolve(
            &h,
            Coupling::Constant(0.1),
            &mut psi,
            0.0,
            &[1.0, 0.5],
            &EvolveOptions::default(),
            |_, _| Ok(())
        )
        .is_err());
    }

    #[test]
    fn step_underflow_reports() {
        let h = build_hamiltonian(&model(0.5), BasisSpec::local(2, 6, Sector::Full)).unwrap();
        let mut psi = vec![C64::new(0.0, 0.0); h.dim()];
        psi[0] = C64::new(1.0, 0.0);
        let opts = EvolveOptions {
            max_krylov: 2,
            step_tol: 1e-30,
            min_step: 1e-3,
            ..Default::default()
        };
        let err = evolve(
            &h,
            Coupling::Constant(0.5),
            &mut psi,
            0.0,
            &[10.0],
            &opts,
            |_, _| Ok(()),
        )
        .unwrap_err();
        assert!(err.to_string().contains("underflow"));
    }
}
