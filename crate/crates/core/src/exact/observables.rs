//! Expectation values on states of a truncated spin ⊗ Fock basis.

use nalgebra::DMatrix;

use super::basis::{Basis, Representation};
use crate::error::{Error, Result};
use crate::linalg::C64;

fn check(basis: &Basis, psi: &[C64]) -> Result<()> {
    if psi.len() != basis.dim() {
        return Err(Error::invalid("state does not match basis dimension"));
    }
    Ok(())
}

fn check_site(basis: &Basis, i: usize) -> Result<()> {
    if i >= basis.n_sites() {
        return Err(Error::invalid(format!("site {i} out of range")));
    }
    Ok(())
}

/// Basis vector |spins, phonons⟩; `downs[i]` selects ↓ on site i.
pub fn product_state(basis: &Basis, downs: &[bool], phonons: &[usize]) -> Result<Vec<C64>> {
    let f = basis.encode(downs, phonons)?;
    let r = basis
        .index_of(f)
        .ok_or_else(|| Error::invalid("product state lies outside the basis parity sector"))?;
    let mut psi = vec![C64::new(0.0, 0.0); basis.dim()];
    psi[r] = C64::new(1.0, 0.0);
    Ok(psi)
}

pub fn sigma_z(basis: &Basis, psi: &[C64], i: usize) -> Result<f64> {
    check(basis, psi)?;
    check_site(basis, i)?;
    Ok(psi
        .iter()
        .enumerate()
        .map(|(r, a)| {
            let p = a.norm_sqr();
            if basis.is_down_full(basis.full_index(r), i) {
                -p
            } else {
                p
            }
        })
        .sum())
}

pub fn mean_sigma_z(basis: &Basis, psi: &[C64]) -> Result<f64> {
    let n = basis.n_sites();
    let mut total = 0.0;
    for i in 0..n {
        total += sigma_z(basis, psi, i)?;
    }
    Ok(total / n as f64)
}

/// ⟨σ_x^i⟩; zero inside a parity sector.
pub fn sigma_x(basis: &Basis, psi: &[C64], i: usize) -> Result<f64> {
    check(basis, psi)?;
    check_site(basis, i)?;
    let mut acc = C64::new(0.0, 0.0);
    for (r, a) in psi.iter().enumerate() {
        if let Some(c) = basis.index_of(basis.flip_full(basis.full_index(r), i)) {
            acc += psi[c].conj() * a;
        }
    }
    Ok(acc.re)
}

/// C_ij = ⟨σ_x^i σ_x^j⟩ − ⟨σ_x^i⟩⟨σ_x^j⟩.
pub fn correlation(basis: &Basis, psi: &[C64], i: usize, j: usize) -> Result<f64> {
    check(basis, psi)?;
    check_site(basis, i)?;
    check_site(basis, j)?;
    if i == j {
        return Ok(1.0 - sigma_x(basis, psi, i)?.powi(2));
    }
    let mut xx = C64::new(0.0, 0.0);
    for (r, a) in psi.iter().enumerate() {
        let f = basis.flip_full(basis.flip_full(basis.full_index(r), i), j);
        if let Some(c) = basis.index_of(f) {
            xx += psi[c].conj() * a;
        }
    }
    Ok(xx.re - sigma_x(basis, psi, i)? * sigma_x(basis, psi, j)?)
}

/// ⟨c_p† c_q⟩ over the basis' own bosonic modes.
pub fn one_body_matrix(basis: &Basis, psi: &[C64]) -> Result<DMatrix<C64>> {
    check(basis, psi)?;
    let n = basis.n_sites();
    let mut d = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for (r, a) in psi.iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        let f = basis.full_index(r);
        for q in 0..n {
            let nq = basis.phonons_full(f, q);
            if nq == 0 {
                continue;
            }
            d[(q, q)] += a.norm_sqr() * nq as f64;
            for p in 0..n {
                if p == q {
                    continue;
                }
                let np = basis.phonons_full(f, p);
                if np == basis.cutoff(p) {
                    continue;
                }
                let target = f + basis.stride(p) - basis.stride(q);
                if let Some(c) = basis.index_of(target) {
                    d[(p, q)] += psi[c].conj() * a * ((nq * (np + 1)) as f64).sqrt();
                }
            }
        }
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhononNumbers {
    pub local: Vec<f64>,
    pub collective: Vec<f64>,
}

/// Local ⟨a_i†a_i⟩ and collective ⟨b_k†b_k⟩, using b_k = Σ_i v_ik a_i.
pub fn phonon_numbers(basis: &Basis, psi: &[C64], mode_vectors: &DMatrix<f64>) -> Result<PhononNumbers> {
    let n = basis.n_sites();
    if mode_vectors.nrows() != n || mode_vectors.ncols() != n {
        return Err(Error::invalid("mode vectors must be n×n"));
    }
    let d = one_body_matrix(basis, psi)?;
    let v = mode_vectors.map(|x| C64::new(x, 0.0));
    let (local, collective) = match basis.spec().representation {
        Representation::LocalModes => {
            let rotated = v.transpose() * &d * &v;
            (d.diagonal(), rotated.diagonal())
        }
        Representation::CollectiveModes => {
            let rotated = &v * &d * v.transpose();
            (rotated.diagonal(), d.diagonal())
        }
    };
    Ok(PhononNumbers {
        local: local.iter().map(|x| x.re).collect(),
        collective: collective.iter().map(|x| x.re).collect(),
    })
}

/// ⟨P⟩ with P = Π σ_z^i (−1)^{Σn}.
pub fn parity_expectation(basis: &Basis, psi: &[C64]) -> Result<f64> {
    check(basis, psi)?;
    Ok(psi
        .iter()
        .enumerate()
        .map(|(r, a)| a.norm_sqr() * basis.parity_of_full(basis.full_index(r)) as f64)
        .sum())
}

/// Population in the top retained Fock level of each mode.
pub fn leakage(basis: &Basis, psi: &[C64]) -> Result<Vec<f64>> {
    check(basis, psi)?;
    let n = basis.n_sites();
    let mut out = vec![0.0; n];
    for (r, a) in psi.iter().enumerate() {
        let f = basis.full_index(r);
        for (k, o) in out.iter_mut().enumerate() {
            if basis.phonons_full(f, k) == basis.cutoff(k) {
                *o += a.norm_sqr();
            }
        }
    }
    Ok(out)
}

/// Threshold on top-level population above which truncation is suspect.
pub const LEAKAGE_WARN: f64 = 1e-3;

/// Amplitudes embedded in the full product space.
pub fn embed_full(basis: &Basis, psi: &[C64]) -> Result<Vec<C64>> {
    check(basis, psi)?;
    let mut full = vec![C64::new(0.0, 0.0); basis.full_dim()];
    for (r, a) in psi.iter().enumerate() {
        full[basis.full_index(r) as usize] = *a;
    }
    Ok(full)
}

/// Von Neumann entropy (bits) between sites 0..cut and cut..N, each side
/// carrying its spins and bosonic modes.
pub fn entanglement_entropy(basis: &Basis, psi: &[C64], cut: usize) -> Result<f64> {
    let n = basis.n_sites();
    if cut == 0 || cut >= n {
        return Ok(0.0);
    }
    let full = embed_full(basis, psi)?;
    let right = basis.stride(cut - 1) as usize;
    let left = full.len() / right;
    // site 0 most significant: full = l·right + r
    let m = DMatrix::from_fn(left, right, |l, r| full[l * right + r]);
    let rho = if left <= right {
        &m * m.adjoint()
    } else {
        m.adjoint() * &m
    };
    let eig = nalgebra::SymmetricEigen::new(rho);
    Ok(eig
        .eigenvalues
        .iter()
        .filter(|p| **p > 1e-16)
        .map(|p| -p * p.log2())
        .sum::<f64>()
        .max(0.0))
}

/// Reduced density matrix of all spins, indexed by bit strings with
/// bit N−1−i set when site i is ↓.
pub fn spin_density_matrix(basis: &Basis, psi: &[C64]) -> Result<DMatrix<C64>> {
    check(basis, psi)?;
    let n = basis.n_sites();
    if n > 12 {
        return Err(Error::invalid("spin density matrix limited to 12 sites"));
    }
    let ns = 1usize << n;
    let np = basis.phonon_space_dim();
    let mut m = DMatrix::from_element(ns, np, C64::new(0.0, 0.0));
    for (r, a) in psi.iter().enumerate() {
        let (s, p) = basis.split_spin_phonon(basis.full_index(r));
        m[(s, p)] = *a;
    }
    Ok(&m * m.adjoint())
}
