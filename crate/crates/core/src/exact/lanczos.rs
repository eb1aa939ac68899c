//! Thick-restart Lanczos for the lowest eigenpairs of a real symmetric
//! operator, with full reorthogonalization.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen_sorted;

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosOptions {
    pub seed: u64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
    /// Residual tolerance relative to the largest Ritz value magnitude.
    pub tol: f64,
    /// Operators up to this dimension are diagonalized densely.
    pub dense_below: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            seed: 0,
            krylov_dim: 80,
            max_restarts: 400,
            tol: 1e-10,
            dense_below: 400,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub matvecs: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Orthogonalize `w` against `basis` twice; returns the summed coefficients.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> Vec<f64> {
    let mut coeffs = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (c, q) in coeffs.iter_mut().zip(basis) {
            let h = dot(q, w);
            axpy(-h, q, w);
            *c += h;
        }
    }
    coeffs
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    normalize(&mut v);
    v
}

/// Lowest `nev` eigenpairs of the operator `apply` (y = A x, overwriting y).
pub fn lowest_eigenpairs<F>(dim: usize, nev: usize, apply: F, opts: &LanczosOptions) -> Result<Eigenpairs>
where
    F: Fn(&[f64], &mut [f64]),
{
    if dim == 0 {
        return Err(Error::invalid("empty operator"));
    }
    let nev = nev.min(dim);
    if dim <= opts.dense_below.max(nev) {
        return dense(dim, nev, apply);
    }
    let m = opts.krylov_dim.clamp(nev + 10, dim);
    let keep_max = (m / 2).max(nev + 2);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut q: Vec<Vec<f64>> = vec![random_unit(dim, &mut rng)];
    let mut t = DMatrix::<f64>::zeros(m, m);
    let mut start = 0;
    let mut matvecs = 0;
    let mut w = vec![0.0; dim];

    for _restart in 0..=opts.max_restarts {
        let mut beta_last = 0.0;
        let mut residual_vec = Vec::new();
        for j in start..m {
            apply(&q[j], &mut w);
            matvecs += 1;
            let coeffs = orthogonalize(&q, &mut w);
            for (i, c) in coeffs.iter().enumerate() {
                t[(i, j)] = *c;
                t[(j, i)] = *c;
            }
            let beta = normalize(&mut w);
            if j + 1 < m {
                if beta < 1e-13 * t[(j, j)].abs().max(1.0) {
                    // invariant subspace: continue with a fresh direction
                    let mut fresh = random_unit(dim, &mut rng);
                    orthogonalize(&q, &mut fresh);
                    normalize(&mut fresh);
                    q.push(fresh);
                } else {
                    q.push(w.clone());
                }
            } else {
                beta_last = beta;
                residual_vec = w.clone();
            }
        }
        let (theta, s) = symmetric_eigen_sorted(&t)?;
        let scale = theta.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        let residuals: Vec<f64> = (0..m).map(|i| beta_last * s[(m - 1, i)].abs()).collect();
        let converged = residuals[..nev].iter().all(|r| *r <= opts.tol * scale);
        let keep = if converged { nev } else { keep_max };
        let ritz: Vec<Vec<f64>> = (0..keep)
            .map(|i| {
                let mut x = vec![0.0; dim];
                for (j, qj) in q.iter().enumerate() {
                    axpy(s[(j, i)], qj, &mut x);
                }
                normalize(&mut x);
                x
            })
            .collect();
        if converged {
            return Ok(Eigenpairs {
                values: theta[..nev].to_vec(),
                vectors: ritz,
                residuals: residuals[..nev].to_vec(),
                matvecs,
            });
        }
        t.fill(0.0);
        for i in 0..keep {
            t[(i, i)] = theta[i];
            let c = beta_last * s[(m - 1, i)];
            t[(i, keep)] = c;
            t[(keep, i)] = c;
        }
        q = ritz;
        q.push(residual_vec);
        start = keep;
    }
    Err(Error::Numerical(format!(
        "Lanczos did not converge after {} restarts ({} matvecs)",
        opts.max_restarts, matvecs
    )))
}

fn dense<F>(dim: usize, nev: usize, apply: F) -> Result<Eigenpairs>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut a = DMatrix::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    for c in 0..dim {
        e[c] = 1.0;
        apply(&e, &mut y);
        e[c] = 0.0;
        for r in 0..dim {
            a[(r, c)] = y[r];
        }
    }
    let a = (&a + a.transpose()) * 0.5;
    let (vals, vecs) = symmetric_eigen_sorted(&a)?;
    Ok(Eigenpairs {
        values: vals[..nev].to_vec(),
        vectors: (0..nev).map(|k| vecs.column(k).iter().copied().collect()).collect(),
        residuals: vec![0.0; nev],
        matvecs: dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_dense_on_random_symmetric() {
        let n = 600;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let a =
            (&r + r.transpose()) * 0.5 + DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| i as f64 * 0.1));
        let apply = |x: &[f64], y: &mut [f64]| {
            let xv = nalgebra::DVector::from_column_slice(x);
            y.copy_from_slice((&a * xv).as_slice());
        };
        let opts = LanczosOptions {
            dense_below: 0,
            ..Default::default()
        };
        let got = lowest_eigenpairs(n, 2, apply, &opts).unwrap();
        let (want, _) = symmetric_eigen_sorted(&a).unwrap();
        for k in 0..2 {
            assert!((got.values[k] - want[k]).abs() < 1e-9 * want[k].abs().max(1.0), "{k}");
        }
        // eigenvector residual
        let mut y = vec![0.0; n];
        apply(&got.vectors[0], &mut y);
        let res: f64 = y
            .iter()
            .zip(&got.vectors[0])
            .map(|(a, b)| (a - got.values[0] * b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(res < 1e-6);
    }

    #[test]
    fn diagonal_operator_small_invariant_subspace() {
        // start vector lives in the full space; the low end is well separated
        let n = 1000;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = (i as f64 + 1.0) * x[i];
            }
        };
        let opts = LanczosOptions {
            dense_below: 0,
            ..Default::default()
        };
        let got = lowest_eigenpairs(n, 2, apply, &opts).unwrap();
        assert!((got.values[0] - 1.0).abs() < 1e-8);
        assert!((got.values[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn seed_is_deterministic() {
        let n = 500;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = ((i % 37) as f64) * x[i]
                    + if i > 0 { 0.3 * x[i - 1] } else { 0.0 }
                    + if i + 1 < n { 0.3 * x[i + 1] } else { 0.0 };
            }
        };
        let opts = LanczosOptions {
            dense_below: 0,
            ..Default::default()
        };
        let a = lowest_eigenpairs(n, 1, apply, &opts).unwrap();
        let b = lowest_eigenpairs(n, 1, apply, &opts).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.vectors, b.vectors);
    }
}
