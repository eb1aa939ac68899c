use nalgebra::DMatrix;
use proptest::prelude::*;
use rabi_hubbard::chain::RHModel;
use rabi_hubbard::hp::{build_a, sigma_z_trajectory, stability};
use rabi_hubbard::units::{khz, microseconds};

fn mirrored_model(w0: f64, outer: f64, inner: f64, t: f64, g: f64) -> RHModel {
    let hop = DMatrix::from_fn(4, 4, |i, j| {
        if i == j {
            0.0
        } else {
            khz(t) / ((i as f64 - j as f64).abs().powi(3))
        }
    });
    RHModel::new(
        khz(w0),
        vec![khz(outer), khz(inner), khz(inner), khz(outer)],
        khz(g),
        hop,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reflection_symmetric_spins(w0 in 0.5f64..10.0, outer in -20.0f64..20.0, inner in -20.0f64..20.0, t in 0.0f64..30.0, g in 0.0f64..3.0) {
        let sys = build_a(&mirrored_model(w0, outer, inner, t, g)).unwrap();
        let grid: Vec<f64> = (0..=4).map(|k| microseconds(50.0 * k as f64)).collect();
        let z = sigma_z_trajectory(&sys, &grid).unwrap();
        prop_assert_eq!(z[0].clone(), vec![1.0; 4]);
        for row in &z {
            let scale = row.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            prop_assert!((row[0] - row[3]).abs() <= 1e-9 * scale);
            prop_assert!((row[1] - row[2]).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn zero_coupling_is_frozen_and_stable(w0 in 0.5f64..10.0, outer in -20.0f64..20.0, inner in -20.0f64..20.0, t in 0.0f64..30.0) {
        let sys = build_a(&mirrored_model(w0, outer, inner, t, 0.0)).unwrap();
        prop_assert!(stability(&sys).stable);
        let grid: Vec<f64> = (0..=3).map(|k| microseconds(100.0 * k as f64)).collect();
        for row in sigma_z_trajectory(&sys, &grid).unwrap() {
            for v in row {
                prop_assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigenvalues_come_in_mirrored_pairs(w0 in 0.5f64..10.0, outer in -20.0f64..20.0, inner in -20.0f64..20.0, t in 0.0f64..30.0, g in 0.0f64..8.0) {
        // real generator: the spectrum of A = iM is closed under λ → −λ̄
        let sys = build_a(&mirrored_model(w0, outer, inner, t, g)).unwrap();
        let eig = sys.eigenvalues();
        let tol = 1e-7 * sys.norm();
        for z in &eig {
            let partner = eig.iter().any(|w| (w.re + z.re).abs() < tol && (w.im - z.im).abs() < tol);
            prop_assert!(partner, "{z} has no partner");
        }
    }
}
