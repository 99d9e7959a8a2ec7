//! Shared helpers for the randomized integration suites. All randomness is
//! seeded ChaCha8 so every failure reproduces from the printed seed.
//!
//! Compiled once per test binary; not every binary uses every helper.
#![allow(dead_code)]

use faer::complex_native::c64;
use faer::MatRef;
use pidmd::linalg::{self, ComplexMat, RealMat};
use pidmd::pidmd::{ParamFn, ParamMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Standard normal via Box-Muller; two uniform draws per sample keeps the
/// stream alignment independent of call parity.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn gauss_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> RealMat {
    let data: Vec<f64> = (0..rows * cols).map(|_| normal(rng)).collect();
    RealMat::from_fn(rows, cols, |i, j| data[j * rows + i])
}

pub fn gauss_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

/// `||a - b||_F`.
pub fn frob_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let d = a[(i, j)] - b[(i, j)];
            acc += d * d;
        }
    }
    acc.sqrt()
}

pub fn frob_diff_c(a: &ComplexMat, b: &ComplexMat) -> f64 {
    assert_eq!(a.nrows(), b.nrows());
    assert_eq!(a.ncols(), b.ncols());
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let d = a[(i, j)] - b[(i, j)];
            acc += d.re * d.re + d.im * d.im;
        }
    }
    acc.sqrt()
}

/// Greedy nearest matching of two complex multisets; panics when any value
/// is left unmatched beyond `tol`.
pub fn assert_complex_multiset_close(a: &[c64], b: &[c64], tol: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: multiset sizes differ");
    let mut used = vec![false; b.len()];
    for (i, va) in a.iter().enumerate() {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (j, vb) in b.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = ((va.re - vb.re).powi(2) + (va.im - vb.im).powi(2)).sqrt();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        assert!(
            best_d <= tol,
            "{what}: entry {i} ({va:?}) unmatched, nearest distance {best_d:.3e} > {tol:.1e}"
        );
        used[best] = true;
    }
}

/// Rescale a square matrix so its spectral radius equals `target`.
pub fn scale_to_radius(a: &RealMat, target: f64) -> RealMat {
    let pairs = linalg::eig(a.as_ref()).expect("eig for radius scaling");
    let rho = pairs
        .values
        .iter()
        .map(|l| (l.re * l.re + l.im * l.im).sqrt())
        .fold(0.0f64, f64::max);
    assert!(rho > 0.0, "zero spectral radius draw");
    let s = target / rho;
    RealMat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

/// A `p`-dimensional map whose features are the scaled coordinates.
pub fn coord_map(p: usize) -> ParamMap {
    ParamMap::new(p, (0..p).map(|i| ParamFn::Coord { index: i }).collect()).expect("coord map")
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
