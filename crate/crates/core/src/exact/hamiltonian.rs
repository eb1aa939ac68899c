//! Sparse Rabi–Hubbard Hamiltonian H(g) = H₀ + g·V on a truncated basis.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::basis::{Basis, BasisSpec, Representation};
use crate::chain::RHModel;
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, C64};

#[derive(Debug, Clone)]
pub struct HamiltonianOperator {
    pub basis: Arc<Basis>,
    /// Coupling-free part: spin splitting, phonon energies, hopping.
    pub h0: CsrMatrix,
    /// Σ_i σ_x^i (a_i + a_i†), or its collective-mode image.
    pub v: CsrMatrix,
    /// Coupling used when no schedule overrides it.
    pub coupling: f64,
    /// Mode vectors v_ik of the model (columns ascending in δ_k).
    pub mode_vectors: DMatrix<f64>,
    pub mode_freqs: Vec<f64>,
}

impl HamiltonianOperator {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn is_equilibrium(&self) -> bool {
        self.mode_freqs.first().is_some_and(|&d| d > 0.0)
    }

    /// y += (H₀ + g V) x.
    pub fn apply_add(&self, g: f64, x: &[C64], y: &mut [C64]) {
        self.h0.apply_add(1.0, x, y);
        if g != 0.0 {
            self.v.apply_add(g, x, y);
        }
    }

    pub fn apply_add_real(&self, g: f64, x: &[f64], y: &mut [f64]) {
        self.h0.apply_add_real(1.0, x, y);
        if g != 0.0 {
            self.v.apply_add_real(g, x, y);
        }
    }

    /// ⟨ψ|H(g)|ψ⟩ for a normalized ψ.
    pub fn energy(&self, g: f64, psi: &[C64]) -> f64 {
        let mut hy = vec![C64::new(0.0, 0.0); psi.len()];
        self.apply_add(g, psi, &mut hy);
        crate::linalg::cdot(psi, &hy).re
    }

    /// Dense matrix at coupling g (small bases only).
    pub fn to_dense(&self, g: f64) -> DMatrix<f64> {
        self.h0.to_dense() + self.v.to_dense() * g
    }

    /// Gershgorin bound on the spectral radius of H(g).
    pub fn norm_bound(&self, g: f64) -> f64 {
        let row_sum =
            |m: &CsrMatrix, r: usize| -> f64 { m.vals[m.row_ptr[r]..m.row_ptr[r + 1]].iter().map(|v| v.abs()).sum() };
        (0..self.dim())
            .map(|r| row_sum(&self.h0, r) + g.abs() * row_sum(&self.v, r))
            .fold(0.0, f64::max)
    }
}

/// Assemble the Hamiltonian of `model` on the basis described by `spec`.
///
/// In the collective representation the hopping is absorbed into the
/// diagonal δ_k b_k†b_k and the coupling reads g Σ_i σ_x^i Σ_k v_ik (b_k + b_k†).
pub fn build_hamiltonian(model: &RHModel, spec: BasisSpec) -> Result<HamiltonianOperator> {
    model.validate()?;
    if spec.n_ions != model.n_sites() {
        return Err(Error::invalid(format!(
            "basis has {} sites, model has {}",
            spec.n_ions,
            model.n_sites()
        )));
    }
    let spectrum = model.mode_spectrum()?;
    let basis = Arc::new(Basis::new(spec)?);
    let n = basis.n_sites();
    let dim = basis.dim();
    let collective = basis.spec().representation == Representation::CollectiveModes;
    let boson_freqs: Vec<f64> = if collective {
        spectrum.freqs.clone()
    } else {
        model.site_freqs.clone()
    };
    let w0 = model.spin_freq;

    let mut h0_rows = Vec::with_capacity(dim);
    let mut v_rows = Vec::with_capacity(dim);
    for r in 0..dim {
        let f = basis.full_index(r);
        let (downs, ns) = basis.decode(f);
        let mut diag = 0.0;
        for i in 0..n {
            diag += if downs[i] { -0.5 * w0 } else { 0.5 * w0 };
            diag += boson_freqs[i] * ns[i] as f64;
        }
        let mut h0 = vec![(r as u32, diag)];
        if !collective {
            // t_ij a_i† a_j
            for i in 0..n {
                for j in 0..n {
                    let t = model.hoppings[(i, j)];
                    if i == j || t == 0.0 || ns[j] == 0 || ns[i] == basis.cutoff(i) {
                        continue;
                    }
                    let target = f + basis.stride(i) - basis.stride(j);
                    if let Some(c) = basis.index_of(target) {
                        let amp = t * ((ns[j] * (ns[i] + 1)) as f64).sqrt();
                        h0.push((c as u32, amp));
                    }
                }
            }
        }
        let mut v = Vec::new();
        for i in 0..n {
            let flipped = basis.flip_full(f, i);
            for k in 0..n {
                let w = if collective {
                    spectrum.component(i, k)
                } else if k == i {
                    1.0
                } else {
                    continue;
                };
                if w == 0.0 {
                    continue;
                }
                if ns[k] > 0 {
                    if let Some(c) = basis.index_of(flipped - basis.stride(k)) {
                        v.push((c as u32, w * (ns[k] as f64).sqrt()));
                    }
                }
                if ns[k] < basis.cutoff(k) {
                    if let Some(c) = basis.index_of(flipped + basis.stride(k)) {
                        v.push((c as u32, w * ((ns[k] + 1) as f64).sqrt()));
                    }
                }
            }
        }
        h0_rows.push(h0);
        v_rows.push(v);
    }
    Ok(HamiltonianOperator {
        basis,
        h0: CsrMatrix::from_rows(h0_rows),
        v: CsrMatrix::from_rows(v_rows),
        coupling: model.coupling,
        mode_vectors: spectrum.vectors,
        mode_freqs: spectrum.freqs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::basis::Sector;

    fn toy_model(n: usize, g: f64) -> RHModel {
        let hop = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                0.7 / (i as f64 - j as f64).abs().powi(3)
            }
        });
        let freqs = (0..n).map(|i| 2.0 + 0.3 * i as f64).collect();
        RHModel::new(1.3, freqs, g, hop).unwrap()
    }

    #[test]
    fn symmetric_and_parity_conserving() {
        let h = build_hamiltonian(&toy_model(3, 0.4), BasisSpec::local(3, 2, Sector::Full)).unwrap();
        let d = h.to_dense(0.4);
        assert!((&d - d.transpose()).amax() < 1e-14);
        let b = &h.basis;
        for r in 0..b.dim() {
            for c in 0..b.dim() {
                if d[(r, c)] != 0.0 {
                    assert_eq!(b.parity_of_full(b.full_index(r)), b.parity_of_full(b.full_index(c)));
                }
            }
        }
    }

    #[test]
    fn zero_coupling_ground_energy() {
        let m = toy_model(2, 0.0);
        let h = build_hamiltonian(&m, BasisSpec::local(2, 3, Sector::Full)).unwrap();
        let e = nalgebra::SymmetricEigen::new(h.to_dense(0.0)).eigenvalues.min();
        assert!((e + m.spin_freq).abs() < 1e-12);
    }

    #[test]
    fn sector_blocks_match_full_spectrum() {
        let m = toy_model(2, 0.9);
        let eig = |s| {
            let h = build_hamiltonian(&m, BasisSpec::local(2, 2, s)).unwrap();
            let mut e: Vec<f64> = nalgebra::SymmetricEigen::new(h.to_dense(0.9))
                .eigenvalues
                .iter()
                .copied()
                .collect();
            e.sort_by(f64::total_cmp);
            e
        };
        let mut both = eig(Sector::Even);
        both.extend(eig(Sector::Odd));
        both.sort_by(f64::total_cmp);
        let full = eig(Sector::Full);
        for (a, b) in both.iter().zip(&full) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn site_count_mismatch() {
        assert!(build_hamiltonian(&toy_model(2, 0.1), BasisSpec::local(3, 1, Sector::Full)).is_err());
    }
}
