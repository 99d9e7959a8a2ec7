//! Randomized property suites for the dense linear-algebra layer. Matrix
//! entries come from seeded Gaussian draws (via a proptest-chosen seed) so
//! shrinking works on the seed while the data itself stays well scaled.

mod common;

use common::*;
use faer::complex_native::c64;
use pidmd::linalg::{self, ComplexMat, RealMat};
use proptest::prelude::*;

fn mat_mul(a: &RealMat, b: &RealMat) -> RealMat {
    a * b
}

proptest! {
    /// Orthonormal factors, positive non-increasing spectrum, and the
    /// discarded-energy bookkeeping must agree with the actual
    /// reconstruction error.
    #[test]
    fn svd_factors_orthonormal_and_energy_exact(
        seed in any::<u64>(),
        rows in 2usize..9,
        cols in 2usize..9,
        rank in 1usize..9,
    ) {
        let mut rng = rng_from(seed);
        let a = gauss_mat(&mut rng, rows, cols);
        let svd = linalg::truncated_svd(a.as_ref(), rank).unwrap();

        // Tie adjustment may extend the request by one.
        let r = svd.rank;
        prop_assert!(r >= 1 && r <= (rank + 1).min(rows.min(cols)));

        let utu = svd.u.as_ref().transpose() * svd.u.as_ref();
        let vtv = svd.v.as_ref().transpose() * svd.v.as_ref();
        for j in 0..r {
            for i in 0..r {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((utu[(i, j)] - want).abs() <= 1e-10, "U^T U off at ({i},{j})");
                prop_assert!((vtv[(i, j)] - want).abs() <= 1e-10, "V^T V off at ({i},{j})");
            }
        }
        for k in 0..r {
            prop_assert!(svd.s[k] > 0.0);
            if k + 1 < r {
                prop_assert!(svd.s[k] >= svd.s[k + 1]);
            }
        }

        // ||A - U S V^T||_F^2 must equal the discarded energy fraction
        // times ||A||_F^2 (both are the sum of dropped singular values
        // squared).
        let mut usvt = RealMat::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                let mut acc = 0.0;
                for k in 0..r {
                    acc += svd.u[(i, k)] * svd.s[k] * svd.v[(j, k)];
                }
                usvt[(i, j)] = acc;
            }
        }
        let err2 = frob_diff(a.as_ref(), usvt.as_ref()).powi(2);
        let total2 = linalg::frob(a.as_ref()).powi(2);
        prop_assert!(
            (err2 - svd.discarded_energy * total2).abs() <= 1e-8 * total2,
            "reconstruction error {err2:.3e} vs discarded {:.3e}",
            svd.discarded_energy * total2
        );
    }

    /// Real input: the spectrum is closed under conjugation and every
    /// eigenpair satisfies its defining equation tightly.
    #[test]
    fn eig_spectrum_conjugate_closed_and_residual_small(
        seed in any::<u64>(),
        n in 2usize..8,
    ) {
        let mut rng = rng_from(seed);
        let m = gauss_mat(&mut rng, n, n);
        let pairs = linalg::eig(m.as_ref()).unwrap();

        let conj: Vec<c64> = pairs.values.iter().map(|l| c64::new(l.re, -l.im)).collect();
        assert_complex_multiset_close(&pairs.values, &conj, 1e-8, "conjugate closure");

        let norm_m = linalg::frob(m.as_ref());
        let mc = linalg::to_complex(m.as_ref());
        for k in 0..n {
            let mut resid2 = 0.0;
            let mut col_norm2 = 0.0;
            for i in 0..n {
                let mut acc = c64::new(0.0, 0.0);
                for j in 0..n {
                    acc += mc[(i, j)] * pairs.vectors[(j, k)];
                }
                let d = acc - pairs.values[k] * pairs.vectors[(i, k)];
                resid2 += d.re * d.re + d.im * d.im;
                let w = pairs.vectors[(i, k)];
                col_norm2 += w.re * w.re + w.im * w.im;
            }
            prop_assert!(resid2.sqrt() <= 1e-8 * norm_m, "eigenpair {k} residual");
            prop_assert!((col_norm2.sqrt() - 1.0).abs() <= 1e-10, "eigenvector {k} not unit");
        }
    }

    /// Snapshot predictions at sample times match discrete eigenvalue
    /// powers: evolving with `omega = ln(lambda)/dt` for `k` steps equals
    /// applying `lambda^k` to the modal amplitudes.
    #[test]
    fn evolve_matches_discrete_powers(
        seed in any::<u64>(),
        n in 2usize..7,
        steps in 1usize..12,
    ) {
        let mut rng = rng_from(seed);
        let m = scale_to_radius(&gauss_mat(&mut rng, n, n), 1.02);
        let pairs = linalg::eig(m.as_ref()).unwrap();
        let dt = 0.07;
        let min_mag = pairs
            .values
            .iter()
            .map(|l| (l.re * l.re + l.im * l.im).sqrt())
            .fold(f64::INFINITY, f64::min);
        prop_assume!(min_mag > 1e-8);
        let omega: Vec<c64> = pairs
            .values
            .iter()
            .map(|&l| {
                let mag = (l.re * l.re + l.im * l.im).sqrt();
                c64::new(mag.ln() / dt, l.im.atan2(l.re) / dt)
            })
            .collect();

        let x0 = gauss_vec(&mut rng, n);
        let phi = pairs.vectors.clone();
        let phi_pinv = linalg::pinv(phi.as_ref(), None).unwrap();
        let amps: Vec<c64> = (0..n)
            .map(|i| {
                let mut acc = c64::new(0.0, 0.0);
                for (j, &x) in x0.iter().enumerate() {
                    acc += phi_pinv[(i, j)] * x;
                }
                acc
            })
            .collect();

        // lambda^k maintained by repeated multiplication: the discrete-power
        // path is independent of the exponential in evolve_modes.
        let mut lam_pow: Vec<c64> = vec![c64::new(1.0, 0.0); n];
        for k in 0..=steps {
            let evolved = linalg::evolve_modes(phi.as_ref(), &omega, &amps, k as f64 * dt).unwrap();
            for i in 0..n {
                let mut acc = c64::new(0.0, 0.0);
                for j in 0..n {
                    acc += phi[(i, j)] * lam_pow[j] * amps[j];
                }
                prop_assert!(
                    (acc.re - evolved.state[i]).abs() <= 1e-8 * (1.0 + acc.re.abs()),
                    "step {k} entry {i}: exp path {} vs power path {}",
                    evolved.state[i],
                    acc.re
                );
            }
            for (p, l) in lam_pow.iter_mut().zip(&pairs.values) {
                *p *= *l;
            }
        }
    }
}

/// Four Penrose identities on a fixed 20-case randomized suite covering
/// wide, tall, square, and rank-deficient shapes, in both real and complex
/// arithmetic.
#[test]
fn pinv_penrose_identities_randomized_suite() {
    let mut rng = rng_from(0x9e3779b97f4a7c15);
    for case in 0..20 {
        let rows = 2 + (case % 5);
        let cols = 2 + ((case / 5) % 4);
        let full = gauss_mat(&mut rng, rows, cols);
        // Half the cases are exactly rank-deficient products.
        let a = if case % 2 == 0 {
            full
        } else {
            let r = 1 + (case % rows.min(cols));
            let left = gauss_mat(&mut rng, rows, r);
            let right = gauss_mat(&mut rng, r, cols);
            mat_mul(&left, &right)
        };
        check_penrose_real(&a, case);

        let im = gauss_mat(&mut rng, rows, cols);
        let ac = ComplexMat::from_fn(rows, cols, |i, j| c64::new(a[(i, j)], im[(i, j)]));
        check_penrose_complex(&ac, case);
    }
}

fn check_penrose_real(a: &RealMat, case: usize) {
    let p = pidmd::linalg::pinv_real(a.as_ref(), None).unwrap();
    let norm_a = pidmd::linalg::frob(a.as_ref()).max(1e-30);
    let norm_p = pidmd::linalg::frob(p.as_ref()).max(1e-30);

    let apa = &(a * &p) * a;
    assert!(
        frob_diff(apa.as_ref(), a.as_ref()) <= 1e-8 * norm_a,
        "case {case}: A P A != A"
    );
    let pap = &(&p * a) * &p;
    assert!(
        frob_diff(pap.as_ref(), p.as_ref()) <= 1e-8 * norm_p,
        "case {case}: P A P != P"
    );
    let ap = a * &p;
    assert!(
        frob_diff(ap.as_ref().transpose(), ap.as_ref()) <= 1e-8 * norm_a * norm_p,
        "case {case}: A P not symmetric"
    );
    let pa = &p * a;
    assert!(
        frob_diff(pa.as_ref().transpose(), pa.as_ref()) <= 1e-8 * norm_a * norm_p,
        "case {case}: P A not symmetric"
    );
}

fn check_penrose_complex(a: &ComplexMat, case: usize) {
    let p = pidmd::linalg::pinv(a.as_ref(), None).unwrap();
    let norm_a = pidmd::linalg::frob_c(a.as_ref()).max(1e-30);
    let norm_p = pidmd::linalg::frob_c(p.as_ref()).max(1e-30);

    let apa = &(a * &p) * a;
    assert!(
        frob_diff_c(&apa, a) <= 1e-8 * norm_a,
        "case {case}: complex A P A != A"
    );
    let pap = &(&p * a) * &p;
    assert!(
        frob_diff_c(&pap, &p) <= 1e-8 * norm_p,
        "case {case}: complex P A P != P"
    );
    let ap = a * &p;
    let ap_h = ap.as_ref().adjoint().to_owned();
    assert!(
        frob_diff_c(&ap_h, &ap) <= 1e-8 * norm_a * norm_p,
        "case {case}: complex A P not Hermitian"
    );
    let pa = &p * a;
    let pa_h = pa.as_ref().adjoint().to_owned();
    assert!(
        frob_diff_c(&pa_h, &pa) <= 1e-8 * norm_a * norm_p,
        "case {case}: complex P A not Hermitian"
    );
}

/// A requested rank beyond the numerical rank shrinks and reports it.
#[test]
fn svd_shrinks_rank_deficient_requests() {
    let mut rng = rng_from(42);
    let left = gauss_mat(&mut rng, 6, 2);
    let right = gauss_mat(&mut rng, 2, 7);
    let a = mat_mul(&left, &right);
    let svd = pidmd::linalg::truncated_svd(a.as_ref(), 5).unwrap();
    assert_eq!(svd.rank, 2);
    assert!(svd
        .warnings
        .iter()
        .any(|w| matches!(w, pidmd::Warning::RankDeficient { requested: 5, effective: 2 })));
}
