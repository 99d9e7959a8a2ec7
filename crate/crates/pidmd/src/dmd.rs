//! Exact dynamic mode decomposition on a single trajectory: snapshot
//! pairing, reduced-operator regression, modal extraction and prediction.

use faer::complex_native::c64;
use faer::{Mat, MatRef};

use crate::error::{Error, Result, Warning};
use crate::linalg::{
    self, ensure_finite, ensure_finite_slice, frob, to_complex, ComplexMat, Prediction, RealMat,
    EIG_MAGNITUDE_CUTOFF, EIG_RESIDUAL_GATE,
};

/// One sampled trajectory: states are columns at a fixed time step, together
/// with the parameter vector the trajectory was generated at.
#[derive(Debug, Clone)]
pub struct SnapshotSet {
    /// `n x (T + 1)` state columns.
    pub states: RealMat,
    /// Sampling interval, strictly positive.
    pub dt: f64,
    /// Parameter vector of this trajectory (may be empty).
    pub theta: Vec<f64>,
    /// Free-form trajectory tag carried through files and reports.
    pub label: String,
}

impl SnapshotSet {
    /// A single-column set is a valid artifact (a projected initial state);
    /// fitting requires at least one transition and rejects it downstream.
    pub fn new(states: RealMat, dt: f64, theta: Vec<f64>, label: String) -> Result<Self> {
        if states.nrows() == 0 || states.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "snapshot set needs at least 1 column, got {}x{}",
                states.nrows(),
                states.ncols()
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidInput(format!("time step {dt}")));
        }
        ensure_finite(states.as_ref(), "snapshot states")?;
        ensure_finite_slice(&theta, "snapshot theta")?;
        Ok(Self {
            states,
            dt,
            theta,
            label,
        })
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.states.nrows()
    }

    /// Number of transitions (columns minus one).
    pub fn steps(&self) -> usize {
        self.states.ncols() - 1
    }

    /// A contiguous column window `[start, start + cols)` as a new set.
    pub fn window(&self, start: usize, cols: usize) -> Result<Self> {
        if cols < 2 || start + cols > self.states.ncols() {
            return Err(Error::InvalidInput(format!(
                "window [{start}, {}) out of range for {} columns",
                start + cols,
                self.states.ncols()
            )));
        }
        Ok(Self {
            states: self.states.as_ref().subcols(start, cols).to_owned(),
            dt: self.dt,
            theta: self.theta.clone(),
            label: self.label.clone(),
        })
    }
}

/// Shifted snapshot matrices `(X, X+)`: column `k` of `X+` is the successor
/// of column `k` of `X`.
pub fn build_snapshot_pairs(set: &SnapshotSet) -> (RealMat, RealMat) {
    let t = set.steps();
    let x = set.states.as_ref().subcols(0, t).to_owned();
    let xplus = set.states.as_ref().subcols(1, t).to_owned();
    (x, xplus)
}

/// Rank-`r` DMD model of one trajectory.
#[derive(Debug, Clone)]
pub struct DmdModel {
    /// Reduced one-step operator, `rank x rank`.
    pub atilde: RealMat,
    /// POD basis of the unshifted snapshots, `n x rank`.
    pub u_r: RealMat,
    /// Full-state modes, `n x rank`.
    pub phi: ComplexMat,
    /// Discrete-time eigenvalues of `atilde`.
    pub lambda: Vec<c64>,
    /// Continuous-time frequencies `ln(lambda) / dt` (principal branch).
    pub omega: Vec<c64>,
    pub dt: f64,
    /// Effective rank (after deficiency shrinking / tie adjustment).
    pub rank: usize,
    /// Kept singular values of the snapshot matrix.
    pub singular_values: Vec<f64>,
    /// Energy fraction dropped by the truncation.
    pub discarded_energy: f64,
    /// `||X+ - U Atilde U^T X||_F / ||X+||_F`.
    pub train_residual: f64,
    pub warnings: Vec<Warning>,
}

/// Principal-branch logarithm of a discrete eigenvalue divided by `dt`.
/// Magnitudes at or below the cutoff cannot be mapped to a frequency.
pub fn discrete_to_continuous(lambda: c64, dt: f64) -> Result<c64> {
    let mag = (lambda.re * lambda.re + lambda.im * lambda.im).sqrt();
    if mag <= EIG_MAGNITUDE_CUTOFF {
        return Err(Error::SingularEigenvalue(format!(
            "eigenvalue magnitude {mag:.3e} at or below {EIG_MAGNITUDE_CUTOFF:.0e}"
        )));
    }
    Ok(c64::new(mag.ln() / dt, lambda.im.atan2(lambda.re) / dt))
}

/// Fit a rank-`rank` DMD model from shifted snapshot matrices.
pub fn fit_dmd(
    x: MatRef<'_, f64>,
    xplus: MatRef<'_, f64>,
    rank: usize,
    dt: f64,
) -> Result<DmdModel> {
    if x.nrows() != xplus.nrows() || x.ncols() != xplus.ncols() {
        return Err(Error::InvalidInput(format!(
            "snapshot matrices disagree: {}x{} vs {}x{}",
            x.nrows(),
            x.ncols(),
            xplus.nrows(),
            xplus.ncols()
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step {dt}")));
    }
    ensure_finite(xplus, "shifted snapshots")?;

    let svd = linalg::truncated_svd(x, rank)?;
    let r = svd.rank;

    // G = X+ V Sigma^{-1}, so Atilde = U^T G and Phi = G W.
    let mut g = xplus * &svd.v;
    for j in 0..r {
        let inv = 1.0 / svd.s[j];
        for i in 0..g.nrows() {
            g[(i, j)] *= inv;
        }
    }
    let atilde = svd.u.transpose() * &g;

    let pairs = linalg::eig(atilde.as_ref())?;
    if pairs.residual > EIG_RESIDUAL_GATE {
        return Err(Error::NumericalFailure(format!(
            "reduced-operator eigendecomposition residual {:.3e}",
            pairs.residual
        )));
    }
    let phi = &to_complex(g.as_ref()) * &pairs.vectors;
    let omega = pairs
        .values
        .iter()
        .map(|&l| discrete_to_continuous(l, dt))
        .collect::<Result<Vec<_>>>()?;

    let recon = &svd.u * &atilde * svd.u.transpose() * x;
    let mut diff = xplus.to_owned();
    for j in 0..diff.ncols() {
        for i in 0..diff.nrows() {
            diff[(i, j)] -= recon[(i, j)];
        }
    }
    let denom = frob(xplus);
    let train_residual = if denom > 0.0 {
        frob(diff.as_ref()) / denom
    } else {
        0.0
    };

    Ok(DmdModel {
        atilde,
        u_r: svd.u,
        phi,
        lambda: pairs.values,
        omega,
        dt,
        rank: r,
        singular_values: svd.s,
        discarded_energy: svd.discarded_energy,
        train_residual,
        warnings: svd.warnings,
    })
}

/// Convenience: pair and fit a snapshot set in one call.
pub fn fit_dmd_set(set: &SnapshotSet, rank: usize) -> Result<DmdModel> {
    let (x, xplus) = build_snapshot_pairs(set);
    fit_dmd(x.as_ref(), xplus.as_ref(), rank, set.dt)
}

/// Predict `steps` transitions from `x0` with the fitted modes; column `k`
/// of the result is the state at `k * dt` (column 0 is the modal projection
/// of `x0`).
pub fn predict_dmd(model: &DmdModel, x0: &[f64], steps: usize) -> Result<Prediction> {
    linalg::modal_predict(model.phi.as_ref(), &model.omega, model.dt, x0, steps)
}

/// Iterate a dense one-step operator directly: the reference prediction path
/// used to cross-check the modal one.
pub fn iterate_operator(k: MatRef<'_, f64>, x0: &[f64], steps: usize) -> Result<RealMat> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "operator is {}x{}, not square",
            k.nrows(),
            k.ncols()
        )));
    }
    if x0.len() != n {
        return Err(Error::InvalidInput(format!(
            "initial condition has {} entries for an {n}-dim operator",
            x0.len()
        )));
    }
    ensure_finite(k, "operator")?;
    ensure_finite_slice(x0, "initial condition")?;

    let mut states = Mat::zeros(n, steps + 1);
    let mut cur = x0.to_vec();
    for i in 0..n {
        states[(i, 0)] = cur[i];
    }
    for s in 1..=steps {
        let mut next = vec![0.0; n];
        for j in 0..n {
            let xj = cur[j];
            if xj != 0.0 {
                for i in 0..n {
                    next[i] += k[(i, j)] * xj;
                }
            }
        }
        for i in 0..n {
            states[(i, s)] = next[i];
        }
        cur = next;
    }
    Ok(states)
}
