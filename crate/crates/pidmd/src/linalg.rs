//! Dense linear-algebra core: truncated SVD, eigendecomposition,
//! pseudoinverse and modal time evolution.
//!
//! Storage convention for the whole workspace: dense column-major matrices
//! ([`RealMat`], [`ComplexMat`]). Snapshots are columns. Every operation
//! validates shapes and finiteness up front and reports problems through
//! [`Error`] instead of panicking.

use faer::solvers::Eigendecomposition;
use faer::{Mat, MatRef};

use crate::error::{Error, Result, Warning};

// Complex scalars appear throughout the public API (eigenvalues, modes,
// frequencies), so the type is re-exported for downstream crates.
pub use faer::complex_native::c64;

pub type RealMat = Mat<f64>;
pub type ComplexMat = Mat<c64>;

/// Adjacent singular values closer than this (relative to the largest one)
/// are treated as a tied pair that truncation must not split.
pub const SVD_TIE_REL_TOL: f64 = 1e-9;

/// Eigenvalues with magnitude at or below this cutoff have no usable
/// logarithm and abort model construction.
pub const EIG_MAGNITUDE_CUTOFF: f64 = 1e-14;

/// Relative eigendecomposition residual beyond which a fitted operator is
/// rejected as numerically unreliable.
pub const EIG_RESIDUAL_GATE: f64 = 1e-6;

/// Rank-`rank` singular value decomposition `M ~ U diag(S) V^T`.
///
/// `rank` is the effective rank actually kept: it shrinks to the numerical
/// rank of the input when the request exceeds it, and moves by one when the
/// truncation boundary falls inside a tied singular-value pair. Both
/// adjustments are recorded in `warnings`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// Left singular vectors, `rows x rank`, orthonormal columns.
    pub u: RealMat,
    /// Singular values, positive and non-increasing.
    pub s: Vec<f64>,
    /// Right singular vectors, `cols x rank`, orthonormal columns.
    pub v: RealMat,
    /// Effective rank kept.
    pub rank: usize,
    /// Rank originally requested.
    pub requested: usize,
    /// Fraction of squared Frobenius norm dropped by the truncation, in [0, 1].
    pub discarded_energy: f64,
    pub warnings: Vec<Warning>,
}

/// Eigendecomposition `M W = W diag(values)` with unit-norm eigenvector
/// columns. Columns are phase-normalized (largest-magnitude entry rotated to
/// the positive real axis) and sorted by decreasing magnitude, then
/// decreasing real and imaginary part, so conjugate pairs sit next to each
/// other in a deterministic order.
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<c64>,
    /// `n x n` complex eigenvector matrix, unit-norm columns.
    pub vectors: ComplexMat,
    /// `||M W - W diag(values)||_F / ||M||_F`.
    pub residual: f64,
}

/// State at one instant produced by [`evolve_modes`]: the real part of the
/// modal superposition together with the norm of the imaginary remainder
/// (which should vanish for conjugate-symmetric mode sets).
#[derive(Debug, Clone)]
pub struct Evolved {
    pub state: Vec<f64>,
    pub imag_norm: f64,
}

/// Trajectory produced by modal prediction: column `k` is the state at
/// `t0 + k dt`. Column 0 is the modal projection of the initial condition,
/// not the initial condition itself.
#[derive(Debug, Clone)]
pub struct Prediction {
    /// `n x (steps + 1)` real states.
    pub states: RealMat,
    /// Largest relative imaginary remainder seen across all columns.
    pub imag_residual: f64,
    /// Set by parametric predictors when the query parameter lies outside
    /// the training range.
    pub extrapolated: bool,
}

pub(crate) fn ensure_finite(m: MatRef<'_, f64>, what: &str) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{what} has a non-finite entry at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

pub(crate) fn ensure_finite_slice(v: &[f64], what: &str) -> Result<()> {
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} has a non-finite entry at {i}"
        )));
    }
    Ok(())
}

/// Frobenius norm.
pub fn frob(m: MatRef<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)] * m[(i, j)];
        }
    }
    acc.sqrt()
}

/// Frobenius norm of a complex matrix.
pub fn frob_c(m: MatRef<'_, c64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            acc += z.re * z.re + z.im * z.im;
        }
    }
    acc.sqrt()
}

/// Widen a real matrix to complex storage.
pub fn to_complex(m: MatRef<'_, f64>) -> ComplexMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| c64::new(m[(i, j)], 0.0))
}

/// Horizontal concatenation; all blocks must share the row count.
pub fn hcat(blocks: &[MatRef<'_, f64>]) -> Result<RealMat> {
    if blocks.is_empty() {
        return Err(Error::InvalidInput("hcat of zero blocks".into()));
    }
    let rows = blocks[0].nrows();
    if blocks.iter().any(|b| b.nrows() != rows) {
        return Err(Error::InvalidInput("hcat blocks differ in row count".into()));
    }
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        for j in 0..b.ncols() {
            for i in 0..rows {
                out[(i, at + j)] = b[(i, j)];
            }
        }
        at += b.ncols();
    }
    Ok(out)
}

/// Euclidean norm of one column.
pub fn col_norm(m: MatRef<'_, f64>, j: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..m.nrows() {
        acc += m[(i, j)] * m[(i, j)];
    }
    acc.sqrt()
}

/// Truncated SVD with rank-deficiency shrinking and tie protection at the
/// truncation boundary (see [`TruncatedSvd`]).
pub fn truncated_svd(a: MatRef<'_, f64>, rank: usize) -> Result<TruncatedSvd> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidInput("svd of an empty matrix".into()));
    }
    if rank == 0 {
        return Err(Error::InvalidInput("requested rank 0".into()));
    }
    ensure_finite(a, "svd input")?;

    let svd = a.thin_svd();
    let k = a.nrows().min(a.ncols());
    let s_all: Vec<f64> = (0..k).map(|i| svd.s_diagonal()[i]).collect();
    let s_max = s_all[0];
    if s_max <= 0.0 {
        return Err(Error::DegenerateInput("svd of the zero matrix".into()));
    }
    let cutoff = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * s_max;
    let num_rank = s_all.iter().take_while(|&&s| s > cutoff).count();

    let mut warnings = Vec::new();
    let mut r = rank.min(num_rank);
    if r < rank {
        warnings.push(Warning::RankDeficient {
            requested: rank,
            effective: r,
        });
    }
    // Keep tied pairs on the same side of the cut: extend by one when
    // possible, otherwise shrink by one.
    if r < k && (s_all[r - 1] - s_all[r]).abs() <= SVD_TIE_REL_TOL * s_max {
        if r < num_rank {
            r += 1;
        } else if r > 1 {
            r -= 1;
        }
        if r != rank.min(num_rank) {
            warnings.push(Warning::RankAdjusted {
                requested: rank,
                adjusted: r,
            });
        }
    }

    let total: f64 = s_all.iter().map(|s| s * s).sum();
    let tail: f64 = s_all[r..].iter().map(|s| s * s).sum();
    let discarded_energy = tail / total;

    Ok(TruncatedSvd {
        u: svd.u().subcols(0, r).to_owned(),
        s: s_all[..r].to_vec(),
        v: svd.v().subcols(0, r).to_owned(),
        rank: r,
        requested: rank,
        discarded_energy,
        warnings,
    })
}

/// Full eigendecomposition of a square real matrix (see [`EigenPairs`]).
pub fn eig(a: MatRef<'_, f64>) -> Result<EigenPairs> {
    let n = a.nrows();
    if n == 0 {
        return Err(Error::InvalidInput("eig of an empty matrix".into()));
    }
    if a.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "eig of a non-square {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    ensure_finite(a, "eig input")?;

    let evd: Eigendecomposition<c64> = a.eigendecomposition();
    let lam = evd.s().column_vector();
    let w = evd.u();

    let values: Vec<c64> = (0..n).map(|i| lam[i]).collect();
    let mut vectors: ComplexMat = w.to_owned();

    for j in 0..n {
        let mut norm = 0.0;
        for i in 0..n {
            let z = vectors[(i, j)];
            norm += z.re * z.re + z.im * z.im;
        }
        let norm = norm.sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "eigenvector {j} has norm {norm}"
            )));
        }
        // Unit norm, then rotate the largest entry onto the positive real
        // axis so repeated fits and conjugate partners line up.
        let mut pivot = 0usize;
        let mut pivot_mag = -1.0;
        for i in 0..n {
            let z = vectors[(i, j)];
            let mag = (z.re * z.re + z.im * z.im).sqrt();
            if mag > pivot_mag + 1e-15 {
                pivot_mag = mag;
                pivot = i;
            }
        }
        let p = vectors[(pivot, j)];
        let p_mag = (p.re * p.re + p.im * p.im).sqrt();
        let phase = if p_mag > 0.0 {
            c64::new(p.re / p_mag, -p.im / p_mag)
        } else {
            c64::new(1.0, 0.0)
        };
        let scale = phase * c64::new(1.0 / norm, 0.0);
        for i in 0..n {
            vectors[(i, j)] *= scale;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (values[i], values[j]);
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    let values: Vec<c64> = order.iter().map(|&i| values[i]).collect();
    let vectors: ComplexMat = Mat::from_fn(n, n, |i, j| vectors[(i, order[j])]);

    let ac = to_complex(a);
    let mut resid = ComplexMat::zeros(n, n);
    let aw = &ac * &vectors;
    for j in 0..n {
        for i in 0..n {
            resid[(i, j)] = aw[(i, j)] - vectors[(i, j)] * values[j];
        }
    }
    let a_norm = frob(a);
    let residual = if a_norm > 0.0 {
        frob_c(resid.as_ref()) / a_norm
    } else {
        frob_c(resid.as_ref())
    };
    if !residual.is_finite() {
        return Err(Error::NumericalFailure(
            "eigendecomposition residual is not finite".into(),
        ));
    }

    Ok(EigenPairs {
        values,
        vectors,
        residual,
    })
}

/// Moore-Penrose pseudoinverse via SVD with a relative singular-value
/// cutoff. `rel_tol` defaults to `max(rows, cols) * machine_epsilon`;
/// singular values at or below `rel_tol * s_max` are dropped.
pub fn pinv(a: MatRef<'_, c64>, rel_tol: Option<f64>) -> Result<ComplexMat> {
    let (rows, cols) = (a.nrows(), a.ncols());
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidInput("pinv of an empty matrix".into()));
    }
    for j in 0..cols {
        for i in 0..rows {
            let z = a[(i, j)];
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "pinv input has a non-finite entry at ({i}, {j})"
                )));
            }
        }
    }
    let rel = match rel_tol {
        Some(t) if t.is_finite() && t > 0.0 => t,
        Some(t) => {
            return Err(Error::InvalidInput(format!("pinv cutoff {t} is not positive")));
        }
        None => rows.max(cols) as f64 * f64::EPSILON,
    };

    let svd = a.thin_svd();
    let k = rows.min(cols);
    let s: Vec<f64> = (0..k).map(|i| svd.s_diagonal()[i].re).collect();
    let s_max = s[0];
    if s_max <= 0.0 {
        return Err(Error::DegenerateInput("pinv of the zero matrix".into()));
    }
    let cutoff = rel * s_max;
    let kept = s.iter().take_while(|&&x| x > cutoff).count();
    if kept == 0 {
        return Err(Error::DegenerateInput(
            "all singular values fall below the pinv cutoff".into(),
        ));
    }

    let u = svd.u();
    let v = svd.v();
    // V_k diag(1/s) U_k^H
    let mut vs = ComplexMat::zeros(cols, kept);
    for j in 0..kept {
        let inv = c64::new(1.0 / s[j], 0.0);
        for i in 0..cols {
            vs[(i, j)] = v[(i, j)] * inv;
        }
    }
    Ok(&vs * u.subcols(0, kept).adjoint())
}

/// Real-matrix pseudoinverse; same cutoff semantics as [`pinv`].
pub fn pinv_real(a: MatRef<'_, f64>, rel_tol: Option<f64>) -> Result<RealMat> {
    let (rows, cols) = (a.nrows(), a.ncols());
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidInput("pinv of an empty matrix".into()));
    }
    ensure_finite(a, "pinv input")?;
    let rel = match rel_tol {
        Some(t) if t.is_finite() && t > 0.0 => t,
        Some(t) => {
            return Err(Error::InvalidInput(format!("pinv cutoff {t} is not positive")));
        }
        None => rows.max(cols) as f64 * f64::EPSILON,
    };

    let svd = a.thin_svd();
    let k = rows.min(cols);
    let s: Vec<f64> = (0..k).map(|i| svd.s_diagonal()[i]).collect();
    let s_max = s[0];
    if s_max <= 0.0 {
        return Err(Error::DegenerateInput("pinv of the zero matrix".into()));
    }
    let cutoff = rel * s_max;
    let kept = s.iter().take_while(|&&x| x > cutoff).count();
    if kept == 0 {
        return Err(Error::DegenerateInput(
            "all singular values fall below the pinv cutoff".into(),
        ));
    }

    let u = svd.u();
    let v = svd.v();
    let mut vs = RealMat::zeros(cols, kept);
    for j in 0..kept {
        let inv = 1.0 / s[j];
        for i in 0..cols {
            vs[(i, j)] = v[(i, j)] * inv;
        }
    }
    Ok(&vs * u.subcols(0, kept).transpose())
}

/// Modal superposition `Re(Phi diag(exp(omega t)) amplitudes)` at time `t`,
/// along with the norm of the imaginary remainder that was dropped.
pub fn evolve_modes(
    phi: MatRef<'_, c64>,
    omega: &[c64],
    amplitudes: &[c64],
    t: f64,
) -> Result<Evolved> {
    let (n, r) = (phi.nrows(), phi.ncols());
    if omega.len() != r || amplitudes.len() != r {
        return Err(Error::InvalidInput(format!(
            "evolve_modes: {r} modes but {} frequencies and {} amplitudes",
            omega.len(),
            amplitudes.len()
        )));
    }
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("evolve_modes: time {t}")));
    }

    let factors: Vec<c64> = omega
        .iter()
        .zip(amplitudes)
        .map(|(w, b)| {
            let e = (w.re * t).exp();
            let (sin, cos) = (w.im * t).sin_cos();
            c64::new(e * cos, e * sin) * *b
        })
        .collect();

    let mut state = vec![0.0; n];
    let mut imag_sq = 0.0;
    for i in 0..n {
        let mut acc = c64::new(0.0, 0.0);
        for j in 0..r {
            acc += phi[(i, j)] * factors[j];
        }
        state[i] = acc.re;
        imag_sq += acc.im * acc.im;
    }
    Ok(Evolved {
        state,
        imag_norm: imag_sq.sqrt(),
    })
}

/// Predict `steps + 1` states via modal superposition: amplitudes are the
/// least-squares projection `pinv(Phi) x0`, column `k` is
/// [`evolve_modes`] at `t = k dt`.
pub fn modal_predict(
    phi: MatRef<'_, c64>,
    omega: &[c64],
    dt: f64,
    x0: &[f64],
    steps: usize,
) -> Result<Prediction> {
    let n = phi.nrows();
    if x0.len() != n {
        return Err(Error::InvalidInput(format!(
            "initial condition has {} entries, modes have {n} rows",
            x0.len()
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step {dt}")));
    }
    ensure_finite_slice(x0, "initial condition")?;

    let phi_pinv = pinv(phi, None)?;
    let r = phi.ncols();
    let mut amplitudes = vec![c64::new(0.0, 0.0); r];
    for j in 0..r {
        let mut acc = c64::new(0.0, 0.0);
        for i in 0..n {
            acc += phi_pinv[(j, i)] * c64::new(x0[i], 0.0);
        }
        amplitudes[j] = acc;
    }

    let mut states = RealMat::zeros(n, steps + 1);
    let mut worst = 0.0f64;
    for k in 0..=steps {
        let evolved = evolve_modes(phi, omega, &amplitudes, k as f64 * dt)?;
        let norm: f64 = evolved.state.iter().map(|x| x * x).sum::<f64>().sqrt();
        let rel = evolved.imag_norm / norm.max(1e-300);
        if rel > worst {
            worst = rel;
        }
        for i in 0..n {
            states[(i, k)] = evolved.state[i];
        }
    }
    Ok(Prediction {
        states,
        imag_residual: worst,
        extrapolated: false,
    })
}
